#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "as2/tensor.hpp"

namespace as2 {

struct NodeRef {
  std::uint32_t idx = UINT32_MAX;
  bool valid() const { return idx != UINT32_MAX; }
};

// Reverse-mode tape. Nodes are appended in topological order by
// construction: every op only consumes refs that already exist. A tape is
// confined to one thread; parallel training maps over independent tapes.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves. param() marks an externally owned tensor as differentiable;
  // input() records a constant. The pointee must outlive the tape.
  NodeRef leaf(Tensor v, bool requires_grad = false);
  NodeRef param(const Tensor* v);
  NodeRef input(const Tensor* v);

  const Tensor& value(NodeRef r) const;
  // Gradient of the last backward() loss w.r.t. node r; zero tensor if the
  // node was not reached.
  const Tensor& grad(NodeRef r) const;

  // y = x W  (x: n x k, W: k x m)
  NodeRef matmul(NodeRef x, NodeRef w);
  // y = x W^T (x: n x k, W: m x k)
  NodeRef matmul_nt(NodeRef x, NodeRef w);
  NodeRef add(NodeRef a, NodeRef b);
  // broadcast add of a length-m vector over the rows of an n x m matrix
  NodeRef add_rowvec(NodeRef x, NodeRef v);
  NodeRef scale(NodeRef x, double c);
  NodeRef gelu(NodeRef x);
  NodeRef layer_norm(NodeRef x, NodeRef gamma, NodeRef beta, double eps);
  // row-wise softmax; rank-1 input is treated as a single row
  NodeRef softmax(NodeRef x);
  NodeRef slice_cols(NodeRef x, std::size_t start, std::size_t len);
  NodeRef concat_cols(const std::vector<NodeRef>& parts);
  NodeRef take_row(NodeRef x, std::size_t row);
  // token + position + segment embedding rows; cls_override, when given,
  // replaces the token-table row at position 0 (shared [CLS] for ensembles)
  NodeRef embed(const std::vector<int>& token_ids,
                const std::vector<int>& segment_ids, NodeRef tok_table,
                NodeRef pos_table, NodeRef seg_table,
                std::optional<NodeRef> cls_override = {});
  // scalar sum(x * w), w same shape as x
  NodeRef weighted_sum(NodeRef x, NodeRef w);
  // numerically stable binary cross-entropy on a single logit
  NodeRef bce_with_logit(NodeRef logit, int label);

  NodeRef affine(NodeRef x, NodeRef w, NodeRef b) {
    return add_rowvec(matmul(x, w), b);
  }

  // Reverse sweep from a scalar loss. May be called once per tape.
  void backward(NodeRef loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    const Tensor* value = nullptr;
    bool needs_grad = false;
    std::function<void(Tape&, std::size_t)> back;  // pulls grads_[i] into parents
  };

  Tensor& grad_buf(std::size_t i);
  const Tensor& node_value(std::size_t i) const { return *nodes_[i].value; }
  NodeRef push(Tensor v, bool needs_grad,
               std::function<void(Tape&, std::size_t)> back);
  void check(NodeRef r) const;

  std::deque<Tensor> owned_;
  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  bool swept_ = false;
};

}  // namespace as2
