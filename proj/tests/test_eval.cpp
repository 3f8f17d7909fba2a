#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "as2/eval.hpp"
#include "as2/rng.hpp"
#include "as2/train.hpp"
#include "testsupport.hpp"

using namespace as2;

TEST_CASE("average_precision hand expansions") {
  CHECK(average_precision({1, 0, 0}) == 1.0);
  CHECK(std::abs(average_precision({0, 1, 1}) - 7.0 / 12) <= 1e-12);
  CHECK(std::abs(average_precision({0, 0, 1}) - 1.0 / 3) <= 1e-12);
  CHECK_THROWS_AS(average_precision({0, 0, 0}), input_error);
}

TEST_CASE("ap is 1 exactly when positives precede negatives") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng.uniform_int(8);
    std::vector<int> labels;
    bool has_pos = false;
    for (std::size_t i = 0; i < n; ++i) {
      labels.push_back(static_cast<int>(rng.uniform_int(2)));
      has_pos = has_pos || labels.back() == 1;
    }
    if (!has_pos) labels[rng.uniform_int(n)] = 1;
    double ap = average_precision(labels);
    CHECK(ap > 0.0);
    CHECK(ap <= 1.0);
    bool sorted = true;
    for (std::size_t i = 1; i < n; ++i)
      sorted = sorted && labels[i - 1] >= labels[i];
    CHECK((ap == 1.0) == sorted);
  }
}

TEST_CASE("p_at_1 basics") {
  CHECK(p_at_1({1, 0}) == 1);
  CHECK(p_at_1({0, 1}) == 0);
  CHECK(p_at_1({1}) == 1);
  CHECK_THROWS_AS(p_at_1({}), input_error);
}

TEST_CASE("aggregate_runs computes mean and population std") {
  std::vector<std::vector<EpochMetrics>> runs(2);
  runs[0].push_back({1, 0.5, 0.5, 0, 0, 10});
  runs[1].push_back({1, 0.7, 0.7, 0, 0, 10});
  auto agg = aggregate_runs(runs);
  REQUIRE(agg.size() == 1);
  CHECK(agg[0].map == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(agg[0].map_std == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(agg[0].p1_std == doctest::Approx(0.1).epsilon(1e-12));

  // permuting runs changes nothing
  std::swap(runs[0], runs[1]);
  auto agg2 = aggregate_runs(runs);
  CHECK(agg2[0].map == agg[0].map);
  CHECK(agg2[0].map_std == agg[0].map_std);

  auto single = aggregate_runs({runs[0]});
  CHECK(single[0].map_std == 0.0);
  CHECK(single[0].p1_std == 0.0);

  std::vector<std::vector<EpochMetrics>> bad(2);
  bad[0].resize(2);
  bad[1].resize(3);
  CHECK_THROWS_AS(aggregate_runs(bad), input_error);
}

TEST_CASE("metrics csv round-trips losslessly") {
  std::vector<EpochMetrics> metrics;
  Rng rng(11);
  for (int e = 1; e <= 7; ++e) {
    EpochMetrics m;
    m.epoch = e;
    m.map = rng.uniform();
    m.p1 = rng.uniform();
    m.map_std = rng.uniform() * 0.01;
    m.p1_std = rng.uniform() * 0.01;
    m.n_questions = 100;
    metrics.push_back(m);
  }
  write_metrics_csv("metrics_rt.csv", metrics);
  auto loaded = read_metrics_csv("metrics_rt.csv");
  REQUIRE(loaded.size() == metrics.size());
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    CHECK(loaded[i].epoch == metrics[i].epoch);
    CHECK(std::abs(loaded[i].map - metrics[i].map) <= 1e-12);
    CHECK(std::abs(loaded[i].map_std - metrics[i].map_std) <= 1e-12);
    CHECK(std::abs(loaded[i].p1 - metrics[i].p1) <= 1e-12);
    CHECK(std::abs(loaded[i].p1_std - metrics[i].p1_std) <= 1e-12);
  }
  std::remove("metrics_rt.csv");
}

namespace {

// corpus with two groups whose APs are forced to 1.0 and 7/12 under a scorer
// that ranks by sent_index (descending logits by construction)
AS2Corpus two_group_corpus() {
  AS2Corpus corpus;
  Document d;
  d.doc_id = "doc";
  d.sentences = {"alpha one .", "alpha two .", "alpha three ."};
  corpus.documents.emplace(d.doc_id, d);
  for (int g = 0; g < 2; ++g) {
    QuestionGroup grp;
    grp.question_id = "q" + std::to_string(g);
    grp.question = "which alpha ?";
    for (int i = 0; i < 3; ++i) {
      Candidate c;
      c.sentence = d.sentences[static_cast<std::size_t>(i)];
      c.doc_id = d.doc_id;
      c.sent_index = i;
      grp.candidates.push_back(c);
    }
    corpus.groups.push_back(grp);
  }
  // group 0 ranked labels [1,0,0] -> ap 1; group 1 [0,1,1] -> 7/12
  corpus.groups[0].candidates[0].label = 1;
  corpus.groups[1].candidates[1].label = 1;
  corpus.groups[1].candidates[2].label = 1;
  return attach_context(std::move(corpus));
}

}  // namespace

TEST_CASE("evaluate averages oracle APs over groups") {
  AS2Corpus corpus = two_group_corpus();
  // a constant scorer ties everything, so ranking falls back to sent_index
  ModelConfig cfg;
  cfg.variant = Variant::kBase;
  cfg.d_model = 8;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.d_ff = 16;
  cfg.max_len = 16;
  Vocabulary vocab = build_corpus_vocab({&corpus}, 32, 1);
  Model m = init_model(cfg, vocab);
  for (ParamRef& p : trainable_params(m))
    std::fill(p.tensor->data.begin(), p.tensor->data.end(), 0.0);

  ScoringContext ctx(m, corpus);
  EvalResult res = evaluate(m, corpus, ctx);
  CHECK(res.metrics.n_questions == 2);
  CHECK(std::abs(res.metrics.map - 19.0 / 24) <= 1e-12);
  // constant scorer: group 0 hits at rank 1, group 1 misses
  CHECK(res.metrics.p1 == doctest::Approx(0.5).epsilon(1e-15));
  REQUIRE(res.diags.size() == 2);
  CHECK(res.diags[0].rank_of_first_positive == 1);
  CHECK(res.diags[1].rank_of_first_positive == 2);

  // groups without positives are excluded but counted
  AS2Corpus with_empty = corpus;
  QuestionGroup none = corpus.groups[0];
  none.question_id = "q-none";
  for (Candidate& c : none.candidates) c.label = 0;
  with_empty.groups.push_back(none);
  ScoringContext ctx2(m, with_empty);
  EvalResult res2 = evaluate(m, with_empty, ctx2);
  CHECK(res2.metrics.n_questions == 2);
  CHECK(res2.n_excluded == 1);
  CHECK(std::abs(res2.metrics.map - res.metrics.map) <= 1e-15);

  write_diagnostics_tsv("diag.tsv", res.diags);
  std::ifstream in("diag.tsv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "question_id\trank_of_first_positive\tap");
  in.close();
  std::remove("diag.tsv");
}

TEST_CASE("pipeline ap/p1 equals a brute-force reference on random groups") {
  // exercised at full scale by the acceptance suite; smoke here
  Rng r2(19);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t n = 1 + r2.uniform_int(6);
    QuestionGroup g;
    g.question_id = "t";
    g.question = "q ?";
    std::vector<double> logits;
    bool pos = false;
    for (std::size_t i = 0; i < n; ++i) {
      Candidate c;
      c.sentence = "s";
      c.doc_id = "d";
      c.sent_index = static_cast<int>(r2.uniform_int(4));
      c.label = static_cast<int>(r2.uniform_int(2));
      pos = pos || c.label == 1;
      g.candidates.push_back(c);
      logits.push_back(static_cast<double>(r2.uniform_int(3)) * 0.5);
    }
    if (!pos) g.candidates[r2.uniform_int(n)].label = 1;

    RankedGroup ranked = rank_logits(g, logits);
    std::vector<int> labels;
    for (std::size_t idx : ranked.order)
      labels.push_back(g.candidates[idx].label);

    // reference: selection sort with the same tie rule, then direct formulas
    std::vector<std::size_t> rem(n);
    for (std::size_t i = 0; i < n; ++i) rem[i] = i;
    std::vector<int> ref_labels;
    while (!rem.empty()) {
      std::size_t best = rem[0];
      for (std::size_t idx : rem) {
        if (logits[idx] > logits[best]) best = idx;
        else if (logits[idx] == logits[best] &&
                 (g.candidates[idx].sent_index < g.candidates[best].sent_index ||
                  (g.candidates[idx].sent_index ==
                       g.candidates[best].sent_index &&
                   idx < best)))
          best = idx;
      }
      ref_labels.push_back(g.candidates[best].label);
      rem.erase(std::find(rem.begin(), rem.end(), best));
    }
    double ref_ap = 0.0;
    std::size_t seen = 0, total_pos = 0;
    for (int l : ref_labels) total_pos += static_cast<std::size_t>(l);
    for (std::size_t k = 0; k < ref_labels.size(); ++k)
      if (ref_labels[k] == 1) {
        ++seen;
        ref_ap += static_cast<double>(seen) / static_cast<double>(k + 1);
      }
    ref_ap /= static_cast<double>(total_pos);

    CHECK(std::abs(average_precision(labels) - ref_ap) <= 1e-12);
    CHECK(p_at_1(labels) == ref_labels.front());
  }
}
