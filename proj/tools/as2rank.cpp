// as2rank: answer sentence selection over jsonl corpora.
//
//   as2rank convert --squad in.json --out corpus.jsonl
//   as2rank convert --wikiqa-clean in.jsonl --out clean.jsonl
//   as2rank convert --asnq in.tsv --out corpus.jsonl
//   as2rank train --corpus train.jsonl --dev dev.jsonl --variant loc_t --out dir
//   as2rank eval --checkpoint ckpt.json --corpus test.jsonl --out dir
//   as2rank rank --checkpoint ckpt.json --corpus test.jsonl --question-id q1
//
// Exit codes: 0 ok, 2 parse error, 3 divergence, 4 incompatibility.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "as2/corpus.hpp"
#include "as2/eval.hpp"
#include "as2/manifest.hpp"
#include "as2/model.hpp"
#include "as2/train.hpp"

namespace fs = std::filesystem;
using namespace as2;

namespace {

std::string iso_now() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void print_stats(const char* label, const CorpusStats& s) {
  double ppq = s.n_questions == 0 ? 0.0
                                  : static_cast<double>(s.n_positive_pairs) /
                                        static_cast<double>(s.n_questions);
  std::printf("%s: %zu questions, %zu pairs, %.2f positives/question, "
              "%.2f candidates/question, %zu documents\n",
              label, s.n_questions, s.n_pairs, ppq,
              s.avg_candidates_per_question, s.n_documents);
}

// WikiQA clean-setting reference counts (training split); informational only
void wikiqa_sanity(const CorpusStats& s) {
  if (s.n_questions != 2118)
    std::fprintf(stderr,
                 "warning: expected 2118 WikiQA training questions after the "
                 "clean filter, found %zu\n",
                 s.n_questions);
  if (s.avg_candidates_per_question < 8.0 ||
      s.avg_candidates_per_question > 12.0)
    std::fprintf(stderr,
                 "warning: expected about 10 candidates/question on WikiQA, "
                 "found %.2f\n",
                 s.avg_candidates_per_question);
}

struct ConvertArgs {
  std::string squad, wikiqa_clean, asnq, out;
  bool check_wikiqa = false;
};

int run_convert(const ConvertArgs& a) {
  auto started = std::chrono::steady_clock::now();
  RunManifest manifest;
  manifest.command = "convert";
  manifest.started_at = iso_now();

  AS2Corpus corpus;
  ConvertStats cstats;
  if (!a.squad.empty()) {
    corpus = convert_squad_file(a.squad, &cstats);
    manifest.inputs.emplace_back(a.squad, fnv1a64_hex(a.squad));
    for (const std::string& w : cstats.warnings)
      std::fprintf(stderr, "warning: %s\n", w.c_str());
  } else if (!a.wikiqa_clean.empty()) {
    corpus = filter_clean(load_corpus(a.wikiqa_clean));
    manifest.inputs.emplace_back(a.wikiqa_clean, fnv1a64_hex(a.wikiqa_clean));
  } else {
    corpus = convert_asnq_tsv(a.asnq, &cstats);
    manifest.inputs.emplace_back(a.asnq, fnv1a64_hex(a.asnq));
  }

  save_corpus(corpus, a.out);
  CorpusStats s = corpus_stats(corpus);
  print_stats("converted", s);
  if (!a.wikiqa_clean.empty() || a.check_wikiqa) wikiqa_sanity(s);

  manifest.artifacts = {a.out, default_docs_path(a.out)};
  manifest.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  write_manifest(manifest, a.out + ".manifest.json");
  return 0;
}

struct TrainArgs {
  std::string corpus, dev, out, config_path, variant;
  std::vector<std::string> pretrain;
  int epochs = -1, batch = -1, runs = -1, d_model = -1, n_layers = -1,
      n_heads = -1, max_len = -1;
  double lr = -1.0;
  long long seed = -1;
};

int run_train(const TrainArgs& a) {
  auto started = std::chrono::steady_clock::now();
  TrainConfig cfg;
  if (!a.config_path.empty()) cfg = TrainConfig::from_json_file(a.config_path);
  if (!a.variant.empty()) cfg.model.variant = variant_from_name(a.variant);
  if (a.epochs > 0) cfg.epochs = a.epochs;
  if (a.batch > 0) cfg.batch_size = a.batch;
  if (a.runs > 0) cfg.runs = a.runs;
  if (a.d_model > 0) cfg.model.d_model = a.d_model;
  if (a.n_layers > 0) cfg.model.n_layers = a.n_layers;
  if (a.n_heads > 0) cfg.model.n_heads = a.n_heads;
  if (a.max_len > 0) cfg.model.max_len = a.max_len;
  if (a.lr > 0) cfg.lr_peak = a.lr;
  if (a.seed >= 0) cfg.model.seed = static_cast<std::uint64_t>(a.seed);
  cfg.validate();

  fs::create_directories(a.out);
  AS2Corpus train = load_corpus(a.corpus);
  AS2Corpus dev = load_corpus(a.dev);

  RunManifest manifest;
  manifest.command = "train";
  manifest.started_at = iso_now();
  manifest.config_json = cfg.to_json_text();
  manifest.seed = cfg.model.seed;
  manifest.inputs.emplace_back(a.corpus, fnv1a64_hex(a.corpus));
  manifest.inputs.emplace_back(a.dev, fnv1a64_hex(a.dev));
  for (const std::string& p : a.pretrain)
    manifest.inputs.emplace_back(p, fnv1a64_hex(p));

  std::vector<std::vector<EpochMetrics>> traces;
  if (!a.pretrain.empty()) {
    // sequential fine-tuning: pretrain corpora first, target last
    std::vector<AS2Corpus> stages_data;
    for (const std::string& p : a.pretrain) stages_data.push_back(load_corpus(p));
    stages_data.push_back(std::move(train));
    std::vector<const AS2Corpus*> stages;
    for (const AS2Corpus& c : stages_data) stages.push_back(&c);
    RunResult res = transfer_train(stages, dev, cfg);
    std::string ckpt = a.out + "/checkpoint_final.json";
    std::string best = a.out + "/checkpoint_best.json";
    save_checkpoint(res.final_model, ckpt);
    save_checkpoint(res.best_model, best);
    write_metrics_csv(a.out + "/metrics_run1.csv", res.metrics);
    traces.push_back(res.metrics);
    manifest.artifacts = {ckpt, best, a.out + "/metrics_run1.csv"};
  } else {
    Vocabulary vocab =
        build_corpus_vocab({&train}, cfg.vocab_max_size, cfg.vocab_min_count);
    for (int r = 0; r < cfg.runs; ++r) {
      TrainConfig run_cfg = cfg;
      run_cfg.model.seed = cfg.model.seed + static_cast<std::uint64_t>(r);
      std::string tag = "_run" + std::to_string(r + 1);
      RunResult res =
          train_run(train, dev, run_cfg, vocab, nullptr,
                    a.out + "/checkpoint" + tag + "_diverged.json");
      std::string ckpt = a.out + "/checkpoint" + tag + "_final.json";
      std::string best = a.out + "/checkpoint" + tag + "_best.json";
      save_checkpoint(res.final_model, ckpt);
      save_checkpoint(res.best_model, best);
      std::string csv = a.out + "/metrics" + tag + ".csv";
      write_metrics_csv(csv, res.metrics);
      traces.push_back(res.metrics);
      manifest.artifacts.push_back(ckpt);
      manifest.artifacts.push_back(best);
      manifest.artifacts.push_back(csv);
      std::printf("run %d: best dev map %.5f (epoch %d)\n", r + 1,
                  res.metrics[static_cast<std::size_t>(res.best_epoch - 1)].map,
                  res.best_epoch);
    }
  }
  std::string agg = a.out + "/metrics_aggregate.csv";
  write_metrics_csv(agg, aggregate_runs(traces));
  manifest.artifacts.push_back(agg);

  manifest.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  write_manifest(manifest, a.out + "/manifest.json");
  return 0;
}

struct EvalArgs {
  std::string checkpoint, corpus, out;
};

int run_eval(const EvalArgs& a) {
  auto started = std::chrono::steady_clock::now();
  Model model = load_checkpoint(a.checkpoint);
  AS2Corpus corpus = load_corpus(a.corpus);
  if (variant_needs_documents(model.config.variant) && corpus.documents.empty())
    throw compat_error("variant " + variant_name(model.config.variant) +
                       " needs document content, corpus has none");
  ScoringContext ctx(model, corpus);
  EvalResult res = evaluate(model, corpus, ctx);
  std::printf("MAP %.5f  P@1 %.5f  (%zu questions, %zu excluded)\n",
              res.metrics.map, res.metrics.p1, res.metrics.n_questions,
              res.n_excluded);
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_diagnostics_tsv(a.out + "/per_question.tsv", res.diags);
    RunManifest manifest;
    manifest.command = "eval";
    manifest.started_at = iso_now();
    manifest.inputs.emplace_back(a.checkpoint, fnv1a64_hex(a.checkpoint));
    manifest.inputs.emplace_back(a.corpus, fnv1a64_hex(a.corpus));
    manifest.artifacts = {a.out + "/per_question.tsv"};
    manifest.wall_seconds = std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - started)
                                .count();
    write_manifest(manifest, a.out + "/manifest.json");
  }
  return 0;
}

struct RankArgs {
  std::string checkpoint, corpus, question_id;
};

int run_rank(const RankArgs& a) {
  Model model = load_checkpoint(a.checkpoint);
  AS2Corpus corpus = load_corpus(a.corpus);
  if (variant_needs_documents(model.config.variant) && corpus.documents.empty())
    throw compat_error("variant " + variant_name(model.config.variant) +
                       " needs document content, corpus has none");
  const QuestionGroup* group = nullptr;
  for (const QuestionGroup& g : corpus.groups)
    if (g.question_id == a.question_id) group = &g;
  if (!group)
    throw compat_error("question id '" + a.question_id +
                       "' not present in " + a.corpus);
  ScoringContext ctx(model, corpus);
  RankedGroup r = rank_candidates(model, *group, ctx);
  std::printf("question %s: %s\n", group->question_id.c_str(),
              group->question.c_str());
  for (std::size_t pos = 0; pos < r.order.size(); ++pos) {
    const Candidate& c = group->candidates[r.order[pos]];
    std::printf("%2zu. logit %+.5f label %d  %s\n", pos + 1,
                r.logits[r.order[pos]], c.label, c.sentence.c_str());
  }
  std::printf("selected: %s\n",
              group->candidates[r.selected].sentence.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contextual answer sentence selection"};
  app.require_subcommand(1);

  ConvertArgs ca;
  CLI::App* convert = app.add_subcommand("convert", "build AS2 jsonl corpora");
  auto* squad_opt = convert->add_option("--squad", ca.squad,
                                        "SQuAD 1.1 json input");
  auto* wikiqa_opt = convert->add_option(
      "--wikiqa-clean", ca.wikiqa_clean,
      "AS2 jsonl input; keep groups with a positive and a negative");
  auto* asnq_opt = convert->add_option("--asnq", ca.asnq,
                                       "question\\tsentence\\tlabel tsv input");
  convert->add_option("--out", ca.out, "output pairs jsonl")->required();
  convert->add_flag("--check-wikiqa", ca.check_wikiqa,
                    "warn when corpus stats differ from WikiQA training");
  squad_opt->excludes(wikiqa_opt)->excludes(asnq_opt);
  wikiqa_opt->excludes(asnq_opt);

  TrainArgs ta;
  CLI::App* train = app.add_subcommand("train", "train a scoring model");
  train->add_option("--corpus", ta.corpus, "training pairs jsonl")->required();
  train->add_option("--dev", ta.dev, "dev pairs jsonl")->required();
  train->add_option("--variant", ta.variant, "model variant")
      ->check(CLI::IsMember({"base", "loc_t", "loc_e", "glob_b", "glob_e",
                             "dual"}));
  train->add_option("--config", ta.config_path, "json config file");
  train->add_option("--out", ta.out, "output directory")->required();
  train->add_option("--pretrain", ta.pretrain,
                    "corpora for sequential fine-tuning before --corpus");
  train->add_option("--epochs", ta.epochs);
  train->add_option("--batch-size", ta.batch);
  train->add_option("--runs", ta.runs);
  train->add_option("--d-model", ta.d_model);
  train->add_option("--n-layers", ta.n_layers);
  train->add_option("--n-heads", ta.n_heads);
  train->add_option("--max-len", ta.max_len);
  train->add_option("--lr", ta.lr);
  train->add_option("--seed", ta.seed);

  EvalArgs ea;
  CLI::App* eval_cmd = app.add_subcommand("eval", "MAP/P@1 over a corpus");
  eval_cmd->add_option("--checkpoint", ea.checkpoint)->required();
  eval_cmd->add_option("--corpus", ea.corpus)->required();
  eval_cmd->add_option("--out", ea.out, "directory for diagnostics");

  RankArgs ra;
  CLI::App* rank_cmd =
      app.add_subcommand("rank", "rank one question's candidates");
  rank_cmd->add_option("--checkpoint", ra.checkpoint)->required();
  rank_cmd->add_option("--corpus", ra.corpus)->required();
  rank_cmd->add_option("--question-id", ra.question_id)->required();

  try {
    app.parse(argc, argv);
    if (convert->parsed()) {
      if (ca.squad.empty() && ca.wikiqa_clean.empty() && ca.asnq.empty())
        throw CLI::RequiredError("one of --squad/--wikiqa-clean/--asnq");
      return run_convert(ca);
    }
    if (train->parsed()) return run_train(ta);
    if (eval_cmd->parsed()) return run_eval(ea);
    if (rank_cmd->parsed()) return run_rank(ra);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const parse_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const divergence_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const compat_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
