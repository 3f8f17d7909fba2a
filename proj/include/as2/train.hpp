#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "as2/corpus.hpp"
#include "as2/eval.hpp"
#include "as2/model.hpp"

namespace as2 {

struct TrainConfig {
  ModelConfig model;
  double lr_peak = 3e-4;       // desk-scale default; 1e-6 suits pretrained stacks
  long long warmup_steps = -1;  // -1: 10% of total_steps
  long long total_steps = -1;   // -1: epochs * steps per epoch
  int batch_size = 64;
  int epochs = 20;
  int runs = 4;
  std::size_t vocab_max_size = 4000;
  std::size_t vocab_min_count = 1;
  int grad_chunks = 8;  // fixed reduction layout; results do not depend on threads
  std::string frozen_encoder_checkpoint;  // glob_e snapshot (base model)

  void validate() const;
  std::string to_json_text() const;
  static TrainConfig from_json_text(const std::string& text);
  static TrainConfig from_json_file(const std::string& path);
};

// -[y log s(z) + (1-y) log(1-s(z))] in the stable softplus form
double bce_loss(double logit, int label);
double bce_grad(double logit, int label);  // s(z) - y

// linear warmup to lr_peak, then linear decay to 0 at total_steps
double lr_at(long long step, double peak, long long warmup, long long total);

struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  explicit AdamState(const std::vector<ParamRef>& params);
  // one bias-corrected update; throws divergence_error on non-finite grads
  void step(const std::vector<ParamRef>& params,
            const std::vector<Tensor>& grads, double lr);

  std::vector<Tensor> m, v;
  long long t = 0;
};

// shared vocabulary over one or more corpora (questions + document text)
Vocabulary build_corpus_vocab(const std::vector<const AS2Corpus*>& corpora,
                              std::size_t max_size, std::size_t min_count);

struct RunResult {
  Model final_model;
  Model best_model;  // by dev MAP
  int best_epoch = 0;
  std::vector<EpochMetrics> metrics;  // dev metrics per epoch
  std::vector<double> train_loss;     // mean pair loss per epoch
};

// Single training run. When init is given it provides the starting
// parameters (and must match the config); otherwise the model is freshly
// initialized from cfg.model.seed. On divergence the last consistent model
// is saved to diverged_path (when non-empty) before throwing.
RunResult train_run(const AS2Corpus& train, const AS2Corpus& dev,
                    const TrainConfig& cfg, const Vocabulary& vocab,
                    const Model* init = nullptr,
                    const std::string& diverged_path = "");
RunResult train_run(const AS2Corpus& train, const AS2Corpus& dev,
                    const TrainConfig& cfg);

struct MultiRunResult {
  std::vector<RunResult> runs;
  std::vector<EpochMetrics> aggregate;
};

// The paper-style protocol: cfg.runs independent runs (seed, seed+1, ...),
// aggregated to per-epoch mean and std.
MultiRunResult train_multi(const AS2Corpus& train, const AS2Corpus& dev,
                           const TrainConfig& cfg);

// Sequential fine-tuning over a corpus sequence. Each stage starts from the
// previous stage's final parameters with a fresh optimizer and schedule; the
// vocabulary is shared (built over all stages).
RunResult transfer_train(const std::vector<const AS2Corpus*>& stages,
                         const AS2Corpus& dev, const TrainConfig& cfg);

}  // namespace as2
