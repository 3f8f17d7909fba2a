#include "as2/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include "as2/rng.hpp"
#include "json.hpp"

namespace as2 {

using nlohmann::json;

void TrainConfig::validate() const {
  model.validate();
  if (lr_peak <= 0.0) throw config_error("lr_peak must be positive");
  if (batch_size < 1) throw config_error("batch_size must be >= 1");
  if (epochs < 1) throw config_error("epochs must be >= 1");
  if (runs < 1) throw config_error("runs must be >= 1");
  if (grad_chunks < 1) throw config_error("grad_chunks must be >= 1");
  if (total_steps >= 0 && warmup_steps > total_steps)
    throw config_error("warmup_steps must not exceed total_steps");
  if (vocab_max_size < kNumReserved)
    throw config_error("vocab_max_size too small");
}

std::string TrainConfig::to_json_text() const {
  json j;
  j["variant"] = variant_name(model.variant);
  j["d_model"] = model.d_model;
  j["n_layers"] = model.n_layers;
  j["n_heads"] = model.n_heads;
  j["d_ff"] = model.resolved_d_ff();
  j["max_len"] = model.max_len;
  j["ln_eps"] = model.ln_eps;
  j["init_std"] = model.init_std;
  j["seed"] = model.seed;
  j["lr_peak"] = lr_peak;
  j["warmup_steps"] = warmup_steps;
  j["total_steps"] = total_steps;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["runs"] = runs;
  j["vocab_max_size"] = vocab_max_size;
  j["vocab_min_count"] = vocab_min_count;
  j["grad_chunks"] = grad_chunks;
  j["frozen_encoder_checkpoint"] = frozen_encoder_checkpoint;
  return j.dump(2);
}

TrainConfig TrainConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw parse_error(std::string("config json: ") + e.what());
  }
  TrainConfig cfg;
  try {
    if (j.contains("variant"))
      cfg.model.variant = variant_from_name(j["variant"].get<std::string>());
    if (j.contains("d_model")) cfg.model.d_model = j["d_model"].get<int>();
    if (j.contains("n_layers")) cfg.model.n_layers = j["n_layers"].get<int>();
    if (j.contains("n_heads")) cfg.model.n_heads = j["n_heads"].get<int>();
    if (j.contains("d_ff")) cfg.model.d_ff = j["d_ff"].get<int>();
    if (j.contains("max_len")) cfg.model.max_len = j["max_len"].get<int>();
    if (j.contains("ln_eps")) cfg.model.ln_eps = j["ln_eps"].get<double>();
    if (j.contains("init_std")) cfg.model.init_std = j["init_std"].get<double>();
    if (j.contains("seed")) cfg.model.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("lr_peak")) cfg.lr_peak = j["lr_peak"].get<double>();
    if (j.contains("warmup_steps"))
      cfg.warmup_steps = j["warmup_steps"].get<long long>();
    if (j.contains("total_steps"))
      cfg.total_steps = j["total_steps"].get<long long>();
    if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<int>();
    if (j.contains("epochs")) cfg.epochs = j["epochs"].get<int>();
    if (j.contains("runs")) cfg.runs = j["runs"].get<int>();
    if (j.contains("vocab_max_size"))
      cfg.vocab_max_size = j["vocab_max_size"].get<std::size_t>();
    if (j.contains("vocab_min_count"))
      cfg.vocab_min_count = j["vocab_min_count"].get<std::size_t>();
    if (j.contains("grad_chunks"))
      cfg.grad_chunks = j["grad_chunks"].get<int>();
    if (j.contains("frozen_encoder_checkpoint"))
      cfg.frozen_encoder_checkpoint =
          j["frozen_encoder_checkpoint"].get<std::string>();
  } catch (const json::exception& e) {
    throw parse_error(std::string("config json: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

TrainConfig TrainConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

double bce_loss(double logit, int label) {
  double y = static_cast<double>(label);
  return std::max(logit, 0.0) - logit * y +
         std::log1p(std::exp(-std::abs(logit)));
}

double bce_grad(double logit, int label) {
  double s = logit >= 0.0 ? 1.0 / (1.0 + std::exp(-logit))
                          : std::exp(logit) / (1.0 + std::exp(logit));
  return s - static_cast<double>(label);
}

double lr_at(long long step, double peak, long long warmup, long long total) {
  if (step < 0) throw contract_error("lr_at: negative step");
  if (step >= total) return 0.0;
  if (step < warmup)
    return peak * static_cast<double>(step) / static_cast<double>(warmup);
  return peak * static_cast<double>(total - step) /
         static_cast<double>(total - warmup);
}

AdamState::AdamState(const std::vector<ParamRef>& params) {
  m.reserve(params.size());
  v.reserve(params.size());
  for (const ParamRef& p : params) {
    m.push_back(Tensor::zeros(p.tensor->shape));
    v.push_back(Tensor::zeros(p.tensor->shape));
  }
}

void AdamState::step(const std::vector<ParamRef>& params,
                     const std::vector<Tensor>& grads, double lr) {
  if (grads.size() != params.size())
    throw contract_error("adam: gradient list does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i)
    for (double g : grads[i].data)
      if (!std::isfinite(g))
        throw divergence_error("non-finite gradient in parameter '" +
                               params[i].name + "'");
  ++t;
  double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t));
  double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& theta = *params[i].tensor;
    const Tensor& g = grads[i];
    Tensor& mi = m[i];
    Tensor& vi = v[i];
    std::size_t n = theta.numel();
#pragma omp parallel for schedule(static) if (n >= 16384)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(n); ++k) {
      double gk = g.data[k];
      mi.data[k] = kBeta1 * mi.data[k] + (1.0 - kBeta1) * gk;
      vi.data[k] = kBeta2 * vi.data[k] + (1.0 - kBeta2) * gk * gk;
      double mhat = mi.data[k] / bc1;
      double vhat = vi.data[k] / bc2;
      theta.data[k] -= lr * mhat / (std::sqrt(vhat) + kEps);
    }
  }
}

Vocabulary build_corpus_vocab(const std::vector<const AS2Corpus*>& corpora,
                              std::size_t max_size, std::size_t min_count) {
  std::vector<std::string> texts;
  for (const AS2Corpus* c : corpora) {
    for (const QuestionGroup& g : c->groups) texts.push_back(g.question);
    for (const auto& [id, d] : c->documents)
      for (const std::string& s : d.sentences) texts.push_back(s);
  }
  return Vocabulary::build(texts, max_size, min_count);
}

namespace {

struct TrainExample {
  ScoreInputs inputs;
  int label = 0;
};

std::vector<TrainExample> assemble_examples(const Model& model,
                                            const AS2Corpus& corpus,
                                            const ScoringContext& ctx) {
  std::vector<std::pair<std::size_t, std::size_t>> index;
  for (std::size_t gi = 0; gi < corpus.groups.size(); ++gi)
    for (std::size_t ci = 0; ci < corpus.groups[gi].candidates.size(); ++ci)
      index.emplace_back(gi, ci);
  std::vector<TrainExample> out(index.size());
  std::string error;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(index.size());
       ++i) {
    try {
      const auto& [gi, ci] = index[static_cast<std::size_t>(i)];
      const QuestionGroup& g = corpus.groups[gi];
      const Candidate& c = g.candidates[ci];
      out[static_cast<std::size_t>(i)].inputs =
          make_score_inputs(model, g.question, c, ctx);
      out[static_cast<std::size_t>(i)].label = c.label;
    } catch (const std::exception& e) {
#pragma omp critical
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw input_error(error);
  return out;
}

// Mean-loss gradients over one minibatch. Examples map to cfg.grad_chunks
// fixed slices that are reduced in slice order, so the sum is bit-identical
// for any thread count.
double batch_gradients(const Model& model,
                       const std::vector<TrainExample>& examples,
                       const std::vector<std::size_t>& batch,
                       const std::vector<ParamRef>& params, int grad_chunks,
                       std::vector<Tensor>& grads) {
  std::size_t B = batch.size();
  std::size_t chunks = std::min<std::size_t>(
      static_cast<std::size_t>(grad_chunks), B);
  std::vector<std::vector<Tensor>> partial(chunks);
  std::vector<double> losses(B, 0.0);
  std::string error;

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    try {
      auto& acc = partial[static_cast<std::size_t>(c)];
      acc.reserve(params.size());
      for (const ParamRef& p : params)
        acc.push_back(Tensor::zeros(p.tensor->shape));
      std::size_t lo = B * static_cast<std::size_t>(c) / chunks;
      std::size_t hi = B * (static_cast<std::size_t>(c) + 1) / chunks;
      for (std::size_t e = lo; e < hi; ++e) {
        const TrainExample& ex = examples[batch[e]];
        Tape tape;
        ModelBinding b = bind_model(tape, model);
        NodeRef logit = score_on_tape(tape, model, b, ex.inputs);
        NodeRef loss = tape.bce_with_logit(logit, ex.label);
        losses[e] = tape.value(loss).data[0];
        NodeRef scaled = tape.scale(loss, 1.0 / static_cast<double>(B));
        tape.backward(scaled);
        for (std::size_t p = 0; p < params.size(); ++p) {
          const Tensor& g = tape.grad(b.param_nodes[p]);
          for (std::size_t k = 0; k < g.data.size(); ++k)
            acc[p].data[k] += g.data[k];
        }
      }
    } catch (const std::exception& e) {
#pragma omp critical
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw divergence_error(error);

  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& g = grads[p];
    std::fill(g.data.begin(), g.data.end(), 0.0);
    for (std::size_t c = 0; c < chunks; ++c)
      for (std::size_t k = 0; k < g.data.size(); ++k)
        g.data[k] += partial[c][p].data[k];
  }
  double total = 0.0;
  for (double l : losses) total += l;
  return total;
}

}  // namespace

RunResult train_run(const AS2Corpus& train, const AS2Corpus& dev,
                    const TrainConfig& cfg, const Vocabulary& vocab,
                    const Model* init, const std::string& diverged_path) {
  cfg.validate();
  if (train.groups.empty()) throw input_error("training corpus is empty");

  Model model = init ? *init : init_model(cfg.model, vocab);
  if (init) {
    if (init->config.variant != cfg.model.variant)
      throw config_error("initial model variant " +
                         variant_name(init->config.variant) +
                         " does not match configured " +
                         variant_name(cfg.model.variant));
    model.config.seed = cfg.model.seed;
  }
  if (variant_uses_doc_embedding(cfg.model.variant) &&
      !cfg.frozen_encoder_checkpoint.empty()) {
    Model base = load_checkpoint(cfg.frozen_encoder_checkpoint);
    set_frozen_doc_encoder(model, base);
  }

  ScoringContext train_ctx(model, train);
  ScoringContext dev_ctx(model, dev);
  std::vector<TrainExample> examples = assemble_examples(model, train, train_ctx);

  std::vector<ParamRef> params = trainable_params(model);
  std::vector<Tensor> grads;
  grads.reserve(params.size());
  for (const ParamRef& p : params) grads.push_back(Tensor::zeros(p.tensor->shape));

  std::size_t n_examples = examples.size();
  long long steps_per_epoch =
      static_cast<long long>((n_examples + cfg.batch_size - 1) /
                             static_cast<std::size_t>(cfg.batch_size));
  long long total = cfg.total_steps >= 0
                        ? cfg.total_steps
                        : steps_per_epoch * static_cast<long long>(cfg.epochs);
  long long warmup = cfg.warmup_steps >= 0 ? cfg.warmup_steps : total / 10;
  if (warmup > total) throw config_error("warmup_steps exceeds total_steps");

  AdamState adam(params);
  RunResult res;
  res.best_epoch = 0;
  double best_map = -1.0;
  long long step = 0;

  std::vector<std::size_t> order(n_examples);
  for (std::size_t i = 0; i < n_examples; ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.model.seed, 0x5407 + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n_examples; i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);

    double epoch_loss = 0.0;
    try {
      for (std::size_t off = 0; off < n_examples;
           off += static_cast<std::size_t>(cfg.batch_size)) {
        std::size_t hi = std::min(n_examples,
                                  off + static_cast<std::size_t>(cfg.batch_size));
        std::vector<std::size_t> batch(order.begin() + off, order.begin() + hi);
        epoch_loss += batch_gradients(model, examples, batch, params,
                                      cfg.grad_chunks, grads);
        adam.step(params, grads, lr_at(step, cfg.lr_peak, warmup, total));
        ++step;
      }
    } catch (const divergence_error& e) {
      if (!diverged_path.empty()) save_checkpoint(model, diverged_path);
      throw divergence_error(std::string(e.what()) +
                             (diverged_path.empty()
                                  ? ""
                                  : "; checkpoint preserved at " + diverged_path));
    }
    res.train_loss.push_back(epoch_loss / static_cast<double>(n_examples));

    EvalResult ev = evaluate(model, dev, dev_ctx);
    ev.metrics.epoch = epoch;
    res.metrics.push_back(ev.metrics);
    if (ev.metrics.map > best_map) {
      best_map = ev.metrics.map;
      res.best_epoch = epoch;
      res.best_model = model;
    }
  }
  res.final_model = std::move(model);
  if (res.best_epoch == 0) res.best_model = res.final_model;
  return res;
}

RunResult train_run(const AS2Corpus& train, const AS2Corpus& dev,
                    const TrainConfig& cfg) {
  Vocabulary vocab =
      build_corpus_vocab({&train}, cfg.vocab_max_size, cfg.vocab_min_count);
  return train_run(train, dev, cfg, vocab);
}

MultiRunResult train_multi(const AS2Corpus& train, const AS2Corpus& dev,
                           const TrainConfig& cfg) {
  cfg.validate();
  Vocabulary vocab =
      build_corpus_vocab({&train}, cfg.vocab_max_size, cfg.vocab_min_count);
  MultiRunResult res;
  std::vector<std::vector<EpochMetrics>> traces;
  for (int r = 0; r < cfg.runs; ++r) {
    TrainConfig run_cfg = cfg;
    run_cfg.model.seed = cfg.model.seed + static_cast<std::uint64_t>(r);
    res.runs.push_back(train_run(train, dev, run_cfg, vocab));
    traces.push_back(res.runs.back().metrics);
  }
  res.aggregate = aggregate_runs(traces);
  return res;
}

RunResult transfer_train(const std::vector<const AS2Corpus*>& stages,
                         const AS2Corpus& dev, const TrainConfig& cfg) {
  if (stages.empty()) throw input_error("transfer_train needs >= 1 corpus");
  Vocabulary vocab =
      build_corpus_vocab(stages, cfg.vocab_max_size, cfg.vocab_min_count);
  RunResult res;
  std::optional<Model> carry;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    // optimizer state and schedule restart with every stage
    res = train_run(*stages[s], dev, cfg, vocab, carry ? &*carry : nullptr);
    carry = res.final_model;
  }
  return res;
}

}  // namespace as2
