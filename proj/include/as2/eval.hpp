#pragma once

#include <string>
#include <vector>

#include "as2/corpus.hpp"
#include "as2/model.hpp"

namespace as2 {

struct EpochMetrics {
  int epoch = 0;
  double map = 0.0;
  double p1 = 0.0;
  double map_std = 0.0;  // 0 within a single run
  double p1_std = 0.0;
  std::size_t n_questions = 0;
};

// (1/P) * sum over positive positions k of precision@k. The list must
// contain at least one positive; callers exclude such questions beforehand.
double average_precision(const std::vector<int>& ranked_labels);

int p_at_1(const std::vector<int>& ranked_labels);

struct QuestionDiag {
  std::string question_id;
  int rank_of_first_positive = -1;  // 1-based; -1 when the group is excluded
  double ap = 0.0;
};

struct EvalResult {
  EpochMetrics metrics;
  std::vector<QuestionDiag> diags;   // one row per evaluated group
  std::size_t n_excluded = 0;        // groups without a positive candidate
};

EvalResult evaluate(const Model& model, const AS2Corpus& corpus,
                    const ScoringContext& ctx);

// Per-epoch mean and population standard deviation across runs. All runs
// must report the same epochs.
std::vector<EpochMetrics> aggregate_runs(
    const std::vector<std::vector<EpochMetrics>>& runs);

// csv columns: epo,map,map_std,p1,p1_std (doubles round-trip losslessly)
void write_metrics_csv(const std::string& path,
                       const std::vector<EpochMetrics>& metrics);
std::vector<EpochMetrics> read_metrics_csv(const std::string& path);

void write_diagnostics_tsv(const std::string& path,
                           const std::vector<QuestionDiag>& diags);

}  // namespace as2
