#include "as2/encode.hpp"

#include <cmath>

#include "as2/rng.hpp"

namespace as2 {

namespace {

TokenSequence finalize(std::vector<int> tokens, std::vector<int> segments,
                       std::size_t max_len) {
  TokenSequence seq;
  std::size_t content = tokens.size();
  int pad_segment = segments.empty() ? 0 : segments.back();
  tokens.resize(max_len, kPad);
  segments.resize(max_len, pad_segment);
  seq.token_ids = std::move(tokens);
  seq.segment_ids = std::move(segments);
  seq.position_ids.resize(max_len);
  for (std::size_t i = 0; i < max_len; ++i)
    seq.position_ids[i] = static_cast<int>(i);
  seq.mask.assign(max_len, 0);
  for (std::size_t i = 0; i < content; ++i) seq.mask[i] = 1;
  return seq;
}

void append_block(std::vector<int>& tokens, std::vector<int>& segments,
                  const std::vector<int>& ids, int segment) {
  for (int id : ids) {
    tokens.push_back(id);
    segments.push_back(segment);
  }
}

}  // namespace

std::size_t TokenSequence::content_length() const {
  std::size_t n = 0;
  for (int m : mask) n += static_cast<std::size_t>(m);
  return n;
}

TokenSequence assemble_pair(const std::vector<int>& q_ids,
                            const std::vector<int>& s_ids,
                            std::size_t max_len) {
  if (max_len < 8) throw config_error("pair assembly needs max_len >= 8");
  if (q_ids.empty()) throw input_error("empty question");
  std::vector<int> q = q_ids, s = s_ids;
  std::size_t budget = max_len - 3;  // [CLS] [SEP] [EOS]
  while (q.size() + s.size() > budget) {
    if (!s.empty()) s.pop_back();
    else q.pop_back();  // q stays >= 1: budget >= 5
  }
  std::vector<int> tokens{kCls}, segments{0};
  append_block(tokens, segments, q, 0);
  tokens.push_back(kSep);
  segments.push_back(0);
  append_block(tokens, segments, s, 1);
  tokens.push_back(kEos);
  segments.push_back(1);
  return finalize(std::move(tokens), std::move(segments), max_len);
}

TokenSequence assemble_triplet(const std::vector<int>& q_ids,
                               const std::vector<int>& prev_ids,
                               const std::vector<int>& s_ids,
                               const std::vector<int>& next_ids,
                               std::size_t max_len) {
  if (max_len < 10) throw config_error("triplet assembly needs max_len >= 10");
  if (q_ids.empty()) throw input_error("empty question");
  std::vector<int> q = q_ids, prev = prev_ids, s = s_ids, next = next_ids;
  std::size_t budget = max_len - 5;  // [CLS] + 3x[SEP] + [EOS]
  while (q.size() + prev.size() + s.size() + next.size() > budget) {
    if (!next.empty()) next.pop_back();
    else if (!prev.empty()) prev.pop_back();
    else if (s.size() > 1) s.pop_back();
    else if (q.size() > 1) q.pop_back();
    else break;
  }
  std::vector<int> tokens{kCls}, segments{0};
  append_block(tokens, segments, q, 0);
  tokens.push_back(kSep);
  segments.push_back(0);
  append_block(tokens, segments, prev, 1);
  tokens.push_back(kSep);
  segments.push_back(1);
  append_block(tokens, segments, s, 2);
  tokens.push_back(kSep);
  segments.push_back(2);
  append_block(tokens, segments, next, 3);
  tokens.push_back(kEos);
  segments.push_back(3);
  return finalize(std::move(tokens), std::move(segments), max_len);
}

TokenSequence assemble_single(const std::vector<int>& s_ids,
                              std::size_t max_len) {
  if (max_len < 3) throw config_error("single assembly needs max_len >= 3");
  std::vector<int> s = s_ids;
  if (s.size() > max_len - 2) s.resize(max_len - 2);
  std::vector<int> tokens{kCls}, segments{0};
  append_block(tokens, segments, s, 0);
  tokens.push_back(kEos);
  segments.push_back(0);
  return finalize(std::move(tokens), std::move(segments), max_len);
}

ProjectionMatrix make_projection(std::size_t vocab_size, std::size_t d_model,
                                 std::uint64_t seed) {
  if (d_model < 1) throw config_error("projection needs d_model >= 1");
  ProjectionMatrix p;
  p.seed = seed;
  p.r = Tensor::zeros({vocab_size, d_model});
  Rng rng(seed);
  double scale = 1.0 / std::sqrt(static_cast<double>(d_model));
  for (double& v : p.r.data) v = rng.gaussian() * scale;
  return p;
}

Tensor project_bow(const std::map<int, std::size_t>& bow,
                   const ProjectionMatrix& proj) {
  std::size_t d = proj.r.shape[1];
  Tensor v = Tensor::zeros({d});
  for (const auto& [id, count] : bow) {
    if (id < 0 || static_cast<std::size_t>(id) >= proj.r.shape[0])
      throw index_error("BOW token id " + std::to_string(id) +
                        " outside projection " + proj.r.shape_str());
    const double* row = proj.r.data.data() + static_cast<std::size_t>(id) * d;
    double c = static_cast<double>(count);
    for (std::size_t j = 0; j < d; ++j) v.data[j] += c * row[j];
  }
  double norm2 = 0.0;
  for (double x : v.data) norm2 += x * x;
  if (norm2 == 0.0) return v;  // empty BOW stays the zero vector
  double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v.data) x *= inv;
  return v;
}

Tensor embed(const TokenSequence& seq, const Tensor& tok_table,
             const Tensor& pos_table, const Tensor& seg_table) {
  std::size_t L = seq.length();
  std::size_t d = tok_table.shape[1];
  if (pos_table.shape[1] != d || seg_table.shape[1] != d)
    throw dimension_error("embedding table width mismatch");
  if (L > pos_table.shape[0])
    throw index_error("sequence longer than position table");
  Tensor out = Tensor::zeros({L, d});
  for (std::size_t i = 0; i < L; ++i) {
    int tid = seq.token_ids[i];
    int sid = seq.segment_ids[i];
    if (tid < 0 || static_cast<std::size_t>(tid) >= tok_table.shape[0])
      throw index_error("token id " + std::to_string(tid) + " outside table");
    if (sid < 0 || static_cast<std::size_t>(sid) >= seg_table.shape[0])
      throw index_error("segment id " + std::to_string(sid) +
                        " outside table");
    for (std::size_t j = 0; j < d; ++j)
      out.data[i * d + j] = tok_table.at(tid, j) + pos_table.at(i, j) +
                            seg_table.at(sid, j);
  }
  return out;
}

}  // namespace as2
