#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "as2/tensor.hpp"
#include "as2/text.hpp"

namespace as2 {

// One model input. All four lists have length max_len; position_ids run
// 0..max_len-1; padding has mask 0, token [PAD], and the last block's
// segment id. segment_ids are non-decreasing.
struct TokenSequence {
  std::vector<int> token_ids;
  std::vector<int> position_ids;
  std::vector<int> segment_ids;
  std::vector<int> mask;

  std::size_t length() const { return token_ids.size(); }
  std::size_t content_length() const;  // positions with mask 1
};

// [CLS] q [SEP] s [EOS]; question block (incl. [CLS] and [SEP]) is segment 0,
// answer block (incl. [EOS]) segment 1. Overlong s is truncated from the
// right, then q down to one token.
TokenSequence assemble_pair(const std::vector<int>& q_ids,
                            const std::vector<int>& s_ids,
                            std::size_t max_len);

// [CLS] q [SEP] prev [SEP] s [SEP] next [EOS] with segments 0/1/2/3. Absent
// neighbors contribute no content tokens but keep their delimiter, so the
// target block stays identifiable. Truncation drops next first, then prev,
// then the tail of s; q is never cut below one token.
TokenSequence assemble_triplet(const std::vector<int>& q_ids,
                               const std::vector<int>& prev_ids,
                               const std::vector<int>& s_ids,
                               const std::vector<int>& next_ids,
                               std::size_t max_len);

// [CLS] s [EOS], all segment 0 (used for frozen document-sentence encoding)
TokenSequence assemble_single(const std::vector<int>& s_ids,
                              std::size_t max_len);

// Frozen Gaussian projection of the vocabulary BOW space into d_model.
// Never trained; regenerable bit-identically from (seed, vocab_size, d_model).
struct ProjectionMatrix {
  Tensor r;  // vocab_size x d_model
  std::uint64_t seed = 0;
};

ProjectionMatrix make_projection(std::size_t vocab_size, std::size_t d_model,
                                 std::uint64_t seed);

// v = sum_t count(t) * R[t], L2-normalized; an empty BOW maps to the zero
// vector. Scaling all counts by a positive constant leaves the output
// unchanged (up to rounding).
Tensor project_bow(const std::map<int, std::size_t>& bow,
                   const ProjectionMatrix& proj);

// row j = tok_table[token_ids[j]] + pos_table[j] + seg_table[segment_ids[j]]
Tensor embed(const TokenSequence& seq, const Tensor& tok_table,
             const Tensor& pos_table, const Tensor& seg_table);

}  // namespace as2
