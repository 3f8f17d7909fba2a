#include "as2/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace as2 {

double average_precision(const std::vector<int>& ranked_labels) {
  std::size_t positives = 0;
  for (int l : ranked_labels) positives += static_cast<std::size_t>(l);
  if (positives == 0)
    throw input_error("average_precision needs at least one positive label");
  double sum = 0.0;
  std::size_t seen = 0;
  for (std::size_t k = 0; k < ranked_labels.size(); ++k) {
    if (ranked_labels[k] == 1) {
      ++seen;
      sum += static_cast<double>(seen) / static_cast<double>(k + 1);
    }
  }
  return sum / static_cast<double>(positives);
}

int p_at_1(const std::vector<int>& ranked_labels) {
  if (ranked_labels.empty()) throw input_error("p_at_1 on an empty ranking");
  return ranked_labels.front() == 1 ? 1 : 0;
}

EvalResult evaluate(const Model& model, const AS2Corpus& corpus,
                    const ScoringContext& ctx) {
  EvalResult res;
  struct Row {
    bool included = false;
    double ap = 0.0;
    int p1 = 0;
    int first_pos = -1;
    std::string error;
  };
  std::vector<Row> rows(corpus.groups.size());

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t gi = 0;
       gi < static_cast<std::ptrdiff_t>(corpus.groups.size()); ++gi) {
    const QuestionGroup& g = corpus.groups[static_cast<std::size_t>(gi)];
    Row& row = rows[static_cast<std::size_t>(gi)];
    try {
      bool has_positive = false;
      for (const Candidate& c : g.candidates)
        has_positive = has_positive || c.label == 1;
      if (!has_positive) continue;  // excluded from MAP and P@1
      RankedGroup r = rank_candidates(model, g, ctx);
      std::vector<int> ranked_labels;
      ranked_labels.reserve(r.order.size());
      for (std::size_t idx : r.order)
        ranked_labels.push_back(g.candidates[idx].label);
      row.included = true;
      row.ap = average_precision(ranked_labels);
      row.p1 = p_at_1(ranked_labels);
      for (std::size_t k = 0; k < ranked_labels.size(); ++k)
        if (ranked_labels[k] == 1) {
          row.first_pos = static_cast<int>(k + 1);
          break;
        }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  }

  double map = 0.0, p1 = 0.0;
  std::size_t n = 0;
  for (std::size_t gi = 0; gi < rows.size(); ++gi) {
    const Row& row = rows[gi];
    if (!row.error.empty()) throw integrity_error(row.error);
    if (!row.included) {
      ++res.n_excluded;
      continue;
    }
    map += row.ap;
    p1 += static_cast<double>(row.p1);
    ++n;
    res.diags.push_back(
        {corpus.groups[gi].question_id, row.first_pos, row.ap});
  }
  res.metrics.n_questions = n;
  if (n > 0) {
    map /= static_cast<double>(n);
    p1 /= static_cast<double>(n);
  }
  res.metrics.map = map;
  res.metrics.p1 = p1;
  return res;
}

std::vector<EpochMetrics> aggregate_runs(
    const std::vector<std::vector<EpochMetrics>>& runs) {
  if (runs.empty()) throw input_error("aggregate_runs needs at least one run");
  std::size_t epochs = runs.front().size();
  for (const auto& r : runs)
    if (r.size() != epochs)
      throw input_error("aggregate_runs: runs report different epoch counts");

  std::vector<EpochMetrics> out(epochs);
  double n = static_cast<double>(runs.size());
  for (std::size_t e = 0; e < epochs; ++e) {
    double map = 0.0, p1 = 0.0;
    for (const auto& r : runs) {
      map += r[e].map;
      p1 += r[e].p1;
    }
    map /= n;
    p1 /= n;
    double map_var = 0.0, p1_var = 0.0;  // population variance
    for (const auto& r : runs) {
      map_var += (r[e].map - map) * (r[e].map - map);
      p1_var += (r[e].p1 - p1) * (r[e].p1 - p1);
    }
    out[e].epoch = runs.front()[e].epoch;
    out[e].map = map;
    out[e].p1 = p1;
    out[e].map_std = std::sqrt(map_var / n);
    out[e].p1_std = std::sqrt(p1_var / n);
    out[e].n_questions = runs.front()[e].n_questions;
  }
  return out;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_metrics_csv(const std::string& path,
                       const std::vector<EpochMetrics>& metrics) {
  std::ofstream out(path);
  if (!out) throw input_error("cannot write " + path);
  out << "epo,map,map_std,p1,p1_std\n";
  for (const EpochMetrics& m : metrics)
    out << m.epoch << "," << fmt_double(m.map) << "," << fmt_double(m.map_std)
        << "," << fmt_double(m.p1) << "," << fmt_double(m.p1_std) << "\n";
}

std::vector<EpochMetrics> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "epo,map,map_std,p1,p1_std")
    throw parse_error(path + ": unexpected csv header");
  std::vector<EpochMetrics> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    EpochMetrics m;
    try {
      std::getline(ss, field, ',');
      m.epoch = std::stoi(field);
      std::getline(ss, field, ',');
      m.map = std::stod(field);
      std::getline(ss, field, ',');
      m.map_std = std::stod(field);
      std::getline(ss, field, ',');
      m.p1 = std::stod(field);
      std::getline(ss, field, ',');
      m.p1_std = std::stod(field);
    } catch (...) {
      throw parse_error(path + ":" + std::to_string(lineno) + ": bad csv row");
    }
    out.push_back(m);
  }
  return out;
}

void write_diagnostics_tsv(const std::string& path,
                           const std::vector<QuestionDiag>& diags) {
  std::ofstream out(path);
  if (!out) throw input_error("cannot write " + path);
  out << "question_id\trank_of_first_positive\tap\n";
  for (const QuestionDiag& d : diags)
    out << d.question_id << "\t" << d.rank_of_first_positive << "\t"
        << fmt_double(d.ap) << "\n";
}

}  // namespace as2
