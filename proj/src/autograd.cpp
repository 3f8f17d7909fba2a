#include "as2/autograd.hpp"

#include <cmath>

#include "as2/kernels.hpp"

namespace as2 {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

void add_into(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace

NodeRef Tape::push(Tensor v, bool needs_grad,
                   std::function<void(Tape&, std::size_t)> back) {
  check_finite(v, "op output");
  owned_.push_back(std::move(v));
  Node n;
  n.value = &owned_.back();
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return NodeRef{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Tape::check(NodeRef r) const {
  if (!r.valid() || r.idx >= nodes_.size())
    throw contract_error("invalid tape ref");
}

NodeRef Tape::leaf(Tensor v, bool requires_grad) {
  return push(std::move(v), requires_grad, nullptr);
}

NodeRef Tape::param(const Tensor* v) {
  Node n;
  n.value = v;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return NodeRef{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

NodeRef Tape::input(const Tensor* v) {
  Node n;
  n.value = v;
  n.needs_grad = false;
  nodes_.push_back(std::move(n));
  return NodeRef{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tensor& Tape::value(NodeRef r) const {
  check(r);
  return node_value(r.idx);
}

const Tensor& Tape::grad(NodeRef r) const {
  check(r);
  // untouched nodes have a zero gradient by definition
  Tape* self = const_cast<Tape*>(this);
  return self->grad_buf(r.idx);
}

Tensor& Tape::grad_buf(std::size_t i) {
  if (grads_.size() < nodes_.size()) grads_.resize(nodes_.size());
  if (grads_[i].data.empty()) grads_[i] = Tensor::zeros(node_value(i).shape);
  return grads_[i];
}

NodeRef Tape::matmul(NodeRef x, NodeRef w) {
  check(x);
  check(w);
  const Tensor& a = node_value(x.idx);
  const Tensor& b = node_value(w.idx);
  if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0])
    throw dimension_error("matmul " + a.shape_str() + " * " + b.shape_str());
  std::size_t n = a.shape[0], k = a.shape[1], m = b.shape[1];
  Tensor out = Tensor::zeros({n, m});
  par::mm_nn(a.data.data(), b.data.data(), out.data.data(), n, k, m);
  bool ng = nodes_[x.idx].needs_grad || nodes_[w.idx].needs_grad;
  return push(std::move(out), ng, [x, w, n, k, m](Tape& t, std::size_t self) {
    const Tensor& dy = t.grads_[self];
    const Tensor& a = t.node_value(x.idx);
    const Tensor& b = t.node_value(w.idx);
    if (t.nodes_[x.idx].needs_grad) {
      Tensor da = Tensor::zeros({n, k});
      par::mm_nt(dy.data.data(), b.data.data(), da.data.data(), n, m, k);
      add_into(t.grad_buf(x.idx), da);
    }
    if (t.nodes_[w.idx].needs_grad) {
      Tensor db = Tensor::zeros({k, m});
      par::mm_tn(a.data.data(), dy.data.data(), db.data.data(), k, n, m);
      add_into(t.grad_buf(w.idx), db);
    }
  });
}

NodeRef Tape::matmul_nt(NodeRef x, NodeRef w) {
  check(x);
  check(w);
  const Tensor& a = node_value(x.idx);
  const Tensor& b = node_value(w.idx);
  if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[1])
    throw dimension_error("matmul_nt " + a.shape_str() + " * " +
                          b.shape_str() + "^T");
  std::size_t n = a.shape[0], k = a.shape[1], m = b.shape[0];
  Tensor out = Tensor::zeros({n, m});
  par::mm_nt(a.data.data(), b.data.data(), out.data.data(), n, k, m);
  bool ng = nodes_[x.idx].needs_grad || nodes_[w.idx].needs_grad;
  return push(std::move(out), ng, [x, w, n, k, m](Tape& t, std::size_t self) {
    const Tensor& dy = t.grads_[self];  // n x m
    const Tensor& a = t.node_value(x.idx);
    const Tensor& b = t.node_value(w.idx);
    if (t.nodes_[x.idx].needs_grad) {
      Tensor da = Tensor::zeros({n, k});
      par::mm_nn(dy.data.data(), b.data.data(), da.data.data(), n, m, k);
      add_into(t.grad_buf(x.idx), da);
    }
    if (t.nodes_[w.idx].needs_grad) {
      Tensor db = Tensor::zeros({m, k});
      par::mm_tn(dy.data.data(), a.data.data(), db.data.data(), m, n, k);
      add_into(t.grad_buf(w.idx), db);
    }
  });
}

NodeRef Tape::add(NodeRef a, NodeRef b) {
  check(a);
  check(b);
  const Tensor& x = node_value(a.idx);
  const Tensor& y = node_value(b.idx);
  if (!x.same_shape(y))
    throw dimension_error("add " + x.shape_str() + " + " + y.shape_str());
  Tensor out = x;
  add_into(out, y);
  bool ng = nodes_[a.idx].needs_grad || nodes_[b.idx].needs_grad;
  return push(std::move(out), ng, [a, b](Tape& t, std::size_t self) {
    const Tensor& dy = t.grads_[self];
    if (t.nodes_[a.idx].needs_grad) add_into(t.grad_buf(a.idx), dy);
    if (t.nodes_[b.idx].needs_grad) add_into(t.grad_buf(b.idx), dy);
  });
}

NodeRef Tape::add_rowvec(NodeRef x, NodeRef v) {
  check(x);
  check(v);
  const Tensor& a = node_value(x.idx);
  const Tensor& b = node_value(v.idx);
  if (a.rank() != 2 || b.rank() != 1 || a.shape[1] != b.shape[0])
    throw dimension_error("add_rowvec " + a.shape_str() + " + " +
                          b.shape_str());
  std::size_t n = a.shape[0], m = a.shape[1];
  Tensor out = a;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out.data[i * m + j] += b.data[j];
  bool ng = nodes_[x.idx].needs_grad || nodes_[v.idx].needs_grad;
  return push(std::move(out), ng, [x, v, n, m](Tape& t, std::size_t self) {
    const Tensor& dy = t.grads_[self];
    if (t.nodes_[x.idx].needs_grad) add_into(t.grad_buf(x.idx), dy);
    if (t.nodes_[v.idx].needs_grad) {
      Tensor& dv = t.grad_buf(v.idx);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) dv.data[j] += dy.data[i * m + j];
    }
  });
}

NodeRef Tape::scale(NodeRef x, double c) {
  check(x);
  Tensor out = node_value(x.idx);
  for (double& d : out.data) d *= c;
  return push(std::move(out), nodes_[x.idx].needs_grad,
              [x, c](Tape& t, std::size_t self) {
                if (!t.nodes_[x.idx].needs_grad) return;
                const Tensor& dy = t.grads_[self];
                Tensor& dx = t.grad_buf(x.idx);
                for (std::size_t i = 0; i < dy.data.size(); ++i)
                  dx.data[i] += c * dy.data[i];
              });
}

NodeRef Tape::gelu(NodeRef x) {
  check(x);
  const Tensor& a = node_value(x.idx);
  Tensor out = Tensor::zeros(a.shape);
  par::gelu(a.data.data(), out.data.data(), a.numel());
  return push(std::move(out), nodes_[x.idx].needs_grad,
              [x](Tape& t, std::size_t self) {
                if (!t.nodes_[x.idx].needs_grad) return;
                const Tensor& a = t.node_value(x.idx);
                const Tensor& dy = t.grads_[self];
                Tensor dx = Tensor::zeros(a.shape);
                par::gelu_grad(a.data.data(), dy.data.data(), dx.data.data(),
                               a.numel());
                add_into(t.grad_buf(x.idx), dx);
              });
}

NodeRef Tape::layer_norm(NodeRef x, NodeRef gamma, NodeRef beta, double eps) {
  check(x);
  check(gamma);
  check(beta);
  const Tensor& a = node_value(x.idx);
  const Tensor& g = node_value(gamma.idx);
  const Tensor& b = node_value(beta.idx);
  if (a.rank() != 2 || a.shape[1] < 2)
    throw dimension_error("layer_norm needs n x d with d >= 2, got " +
                          a.shape_str());
  if (g.rank() != 1 || g.shape[0] != a.shape[1] || !g.same_shape(b))
    throw dimension_error("layer_norm scale/shift mismatch");
  std::size_t rows = a.shape[0], cols = a.shape[1];
  Tensor out = Tensor::zeros(a.shape);
  Tensor mean = Tensor::zeros({rows});
  Tensor rstd = Tensor::zeros({rows});
  par::layer_norm(a.data.data(), g.data.data(), b.data.data(), eps,
                  out.data.data(), mean.data.data(), rstd.data.data(), rows,
                  cols);
  bool ng = nodes_[x.idx].needs_grad || nodes_[gamma.idx].needs_grad ||
            nodes_[beta.idx].needs_grad;
  return push(
      std::move(out), ng,
      [x, gamma, beta, mean, rstd, rows, cols](Tape& t, std::size_t self) {
        const Tensor& dy = t.grads_[self];
        const Tensor& a = t.node_value(x.idx);
        const Tensor& g = t.node_value(gamma.idx);
        bool need_x = t.nodes_[x.idx].needs_grad;
        bool need_g = t.nodes_[gamma.idx].needs_grad;
        bool need_b = t.nodes_[beta.idx].needs_grad;
        Tensor dg = need_g ? Tensor::zeros({cols}) : Tensor();
        Tensor db = need_b ? Tensor::zeros({cols}) : Tensor();
        Tensor dx = need_x ? Tensor::zeros({rows, cols}) : Tensor();
        double inv_cols = 1.0 / static_cast<double>(cols);
        for (std::size_t i = 0; i < rows; ++i) {
          const double m = mean.data[i], r = rstd.data[i];
          const double* xr = a.data.data() + i * cols;
          const double* dyr = dy.data.data() + i * cols;
          double s1 = 0.0, s2 = 0.0;  // sums of dy*g and dy*g*xhat
          for (std::size_t j = 0; j < cols; ++j) {
            double xhat = (xr[j] - m) * r;
            double dg_j = dyr[j] * g.data[j];
            s1 += dg_j;
            s2 += dg_j * xhat;
            if (need_g) dg.data[j] += dyr[j] * xhat;
            if (need_b) db.data[j] += dyr[j];
          }
          if (need_x) {
            double* dxr = dx.data.data() + i * cols;
            for (std::size_t j = 0; j < cols; ++j) {
              double xhat = (xr[j] - m) * r;
              double dg_j = dyr[j] * g.data[j];
              dxr[j] = r * (dg_j - inv_cols * s1 - xhat * inv_cols * s2);
            }
          }
        }
        if (need_x) add_into(t.grad_buf(x.idx), dx);
        if (need_g) add_into(t.grad_buf(gamma.idx), dg);
        if (need_b) add_into(t.grad_buf(beta.idx), db);
      });
}

NodeRef Tape::softmax(NodeRef x) {
  check(x);
  const Tensor& a = node_value(x.idx);
  if (a.numel() == 0) throw dimension_error("softmax on empty tensor");
  std::size_t rows = a.rank() == 2 ? a.shape[0] : 1;
  std::size_t cols = a.rank() == 2 ? a.shape[1] : a.shape[0];
  Tensor out = Tensor::zeros(a.shape);
  par::softmax_rows(a.data.data(), out.data.data(), rows, cols);
  Tensor saved = out;
  return push(std::move(out), nodes_[x.idx].needs_grad,
              [x, saved, rows, cols](Tape& t, std::size_t self) {
                if (!t.nodes_[x.idx].needs_grad) return;
                const Tensor& dy = t.grads_[self];
                Tensor& dx = t.grad_buf(x.idx);
                for (std::size_t i = 0; i < rows; ++i) {
                  const double* yr = saved.data.data() + i * cols;
                  const double* dyr = dy.data.data() + i * cols;
                  double dot = 0.0;
                  for (std::size_t j = 0; j < cols; ++j) dot += dyr[j] * yr[j];
                  double* dxr = dx.data.data() + i * cols;
                  for (std::size_t j = 0; j < cols; ++j)
                    dxr[j] += yr[j] * (dyr[j] - dot);
                }
              });
}

NodeRef Tape::slice_cols(NodeRef x, std::size_t start, std::size_t len) {
  check(x);
  const Tensor& a = node_value(x.idx);
  if (a.rank() != 2 || start + len > a.shape[1])
    throw dimension_error("slice_cols out of range on " + a.shape_str());
  std::size_t n = a.shape[0], m = a.shape[1];
  Tensor out = Tensor::zeros({n, len});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < len; ++j)
      out.data[i * len + j] = a.data[i * m + start + j];
  return push(std::move(out), nodes_[x.idx].needs_grad,
              [x, start, len, n, m](Tape& t, std::size_t self) {
                if (!t.nodes_[x.idx].needs_grad) return;
                const Tensor& dy = t.grads_[self];
                Tensor& dx = t.grad_buf(x.idx);
                for (std::size_t i = 0; i < n; ++i)
                  for (std::size_t j = 0; j < len; ++j)
                    dx.data[i * m + start + j] += dy.data[i * len + j];
              });
}

NodeRef Tape::concat_cols(const std::vector<NodeRef>& parts) {
  if (parts.empty()) throw dimension_error("concat_cols of nothing");
  std::size_t total = 0;
  bool ng = false;
  for (NodeRef p : parts) {
    check(p);
    const Tensor& t = node_value(p.idx);
    if (t.rank() != 2) throw dimension_error("concat_cols needs matrices");
    if (t.shape[0] != node_value(parts[0].idx).shape[0])
      throw dimension_error("concat_cols row mismatch");
    total += t.shape[1];
    ng = ng || nodes_[p.idx].needs_grad;
  }
  std::size_t n = node_value(parts[0].idx).shape[0];
  Tensor out = Tensor::zeros({n, total});
  std::size_t off = 0;
  for (NodeRef p : parts) {
    const Tensor& t = node_value(p.idx);
    std::size_t m = t.shape[1];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j)
        out.data[i * total + off + j] = t.data[i * m + j];
    off += m;
  }
  std::vector<NodeRef> ps = parts;
  return push(std::move(out), ng,
              [ps, n, total](Tape& t, std::size_t self) {
                const Tensor& dy = t.grads_[self];
                std::size_t off = 0;
                for (NodeRef p : ps) {
                  std::size_t m = t.node_value(p.idx).shape[1];
                  if (t.nodes_[p.idx].needs_grad) {
                    Tensor& dp = t.grad_buf(p.idx);
                    for (std::size_t i = 0; i < n; ++i)
                      for (std::size_t j = 0; j < m; ++j)
                        dp.data[i * m + j] += dy.data[i * total + off + j];
                  }
                  off += m;
                }
              });
}

NodeRef Tape::take_row(NodeRef x, std::size_t row) {
  check(x);
  const Tensor& a = node_value(x.idx);
  if (a.rank() != 2 || row >= a.shape[0])
    throw index_error("take_row " + std::to_string(row) + " of " +
                      a.shape_str());
  std::size_t m = a.shape[1];
  Tensor out = Tensor::zeros({1, m});
  for (std::size_t j = 0; j < m; ++j) out.data[j] = a.data[row * m + j];
  return push(std::move(out), nodes_[x.idx].needs_grad,
              [x, row, m](Tape& t, std::size_t self) {
                if (!t.nodes_[x.idx].needs_grad) return;
                const Tensor& dy = t.grads_[self];
                Tensor& dx = t.grad_buf(x.idx);
                for (std::size_t j = 0; j < m; ++j)
                  dx.data[row * m + j] += dy.data[j];
              });
}

NodeRef Tape::embed(const std::vector<int>& token_ids,
                    const std::vector<int>& segment_ids, NodeRef tok_table,
                    NodeRef pos_table, NodeRef seg_table,
                    std::optional<NodeRef> cls_override) {
  check(tok_table);
  check(pos_table);
  check(seg_table);
  const Tensor& tok = node_value(tok_table.idx);
  const Tensor& pos = node_value(pos_table.idx);
  const Tensor& seg = node_value(seg_table.idx);
  std::size_t L = token_ids.size();
  if (segment_ids.size() != L)
    throw dimension_error("embed: id list length mismatch");
  std::size_t d = tok.shape[1];
  if (pos.shape[1] != d || seg.shape[1] != d)
    throw dimension_error("embed: table width mismatch");
  if (L > pos.shape[0])
    throw index_error("embed: sequence longer than position table");
  const Tensor* cls = nullptr;
  if (cls_override) {
    check(*cls_override);
    cls = &node_value(cls_override->idx);
    if (cls->numel() != d) throw dimension_error("embed: [CLS] row width");
  }
  Tensor out = Tensor::zeros({L, d});
  for (std::size_t i = 0; i < L; ++i) {
    int tid = token_ids[i];
    int sid = segment_ids[i];
    if (tid < 0 || static_cast<std::size_t>(tid) >= tok.shape[0])
      throw index_error("embed: token id " + std::to_string(tid) +
                        " outside table " + tok.shape_str());
    if (sid < 0 || static_cast<std::size_t>(sid) >= seg.shape[0])
      throw index_error("embed: segment id " + std::to_string(sid) +
                        " outside table " + seg.shape_str());
    const double* trow = (i == 0 && cls) ? cls->data.data()
                                         : tok.data.data() + tid * d;
    const double* prow = pos.data.data() + i * d;
    const double* srow = seg.data.data() + sid * d;
    double* o = out.data.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) o[j] = trow[j] + prow[j] + srow[j];
  }
  bool ng = nodes_[tok_table.idx].needs_grad ||
            nodes_[pos_table.idx].needs_grad ||
            nodes_[seg_table.idx].needs_grad ||
            (cls_override && nodes_[cls_override->idx].needs_grad);
  std::vector<int> tids = token_ids, sids = segment_ids;
  NodeRef cls_ref = cls_override ? *cls_override : NodeRef{};
  return push(std::move(out), ng,
              [tids, sids, tok_table, pos_table, seg_table, cls_ref,
               d](Tape& t, std::size_t self) {
                const Tensor& dy = t.grads_[self];
                std::size_t L = tids.size();
                bool has_cls = cls_ref.valid();
                for (std::size_t i = 0; i < L; ++i) {
                  const double* dyr = dy.data.data() + i * d;
                  if (i == 0 && has_cls) {
                    if (t.nodes_[cls_ref.idx].needs_grad) {
                      Tensor& dc = t.grad_buf(cls_ref.idx);
                      for (std::size_t j = 0; j < d; ++j)
                        dc.data[j] += dyr[j];
                    }
                  } else if (t.nodes_[tok_table.idx].needs_grad) {
                    Tensor& dt = t.grad_buf(tok_table.idx);
                    double* row = dt.data.data() + tids[i] * d;
                    for (std::size_t j = 0; j < d; ++j) row[j] += dyr[j];
                  }
                  if (t.nodes_[pos_table.idx].needs_grad) {
                    Tensor& dp = t.grad_buf(pos_table.idx);
                    double* row = dp.data.data() + i * d;
                    for (std::size_t j = 0; j < d; ++j) row[j] += dyr[j];
                  }
                  if (t.nodes_[seg_table.idx].needs_grad) {
                    Tensor& ds = t.grad_buf(seg_table.idx);
                    double* row = ds.data.data() + sids[i] * d;
                    for (std::size_t j = 0; j < d; ++j) row[j] += dyr[j];
                  }
                }
              });
}

NodeRef Tape::weighted_sum(NodeRef x, NodeRef w) {
  check(x);
  check(w);
  const Tensor& a = node_value(x.idx);
  const Tensor& b = node_value(w.idx);
  if (!a.same_shape(b))
    throw dimension_error("weighted_sum shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    acc += a.data[i] * b.data[i];
  bool ng = nodes_[x.idx].needs_grad || nodes_[w.idx].needs_grad;
  return push(Tensor::vec({acc}), ng, [x, w](Tape& t, std::size_t self) {
    double g = t.grads_[self].data[0];
    const Tensor& a = t.node_value(x.idx);
    const Tensor& b = t.node_value(w.idx);
    if (t.nodes_[x.idx].needs_grad) {
      Tensor& dx = t.grad_buf(x.idx);
      for (std::size_t i = 0; i < b.data.size(); ++i)
        dx.data[i] += g * b.data[i];
    }
    if (t.nodes_[w.idx].needs_grad) {
      Tensor& dw = t.grad_buf(w.idx);
      for (std::size_t i = 0; i < a.data.size(); ++i)
        dw.data[i] += g * a.data[i];
    }
  });
}

NodeRef Tape::bce_with_logit(NodeRef logit, int label) {
  check(logit);
  const Tensor& z = node_value(logit.idx);
  if (z.numel() != 1) throw contract_error("bce_with_logit needs a scalar");
  if (label != 0 && label != 1) throw contract_error("label must be 0 or 1");
  double zz = z.data[0];
  double y = static_cast<double>(label);
  // stable form: max(z,0) - z*y + log1p(exp(-|z|))
  double loss = std::max(zz, 0.0) - zz * y + std::log1p(std::exp(-std::abs(zz)));
  return push(Tensor::vec({loss}), nodes_[logit.idx].needs_grad,
              [logit, y](Tape& t, std::size_t self) {
                if (!t.nodes_[logit.idx].needs_grad) return;
                double g = t.grads_[self].data[0];
                double zz = t.node_value(logit.idx).data[0];
                t.grad_buf(logit.idx).data[0] += g * (sigmoid(zz) - y);
              });
}

void Tape::backward(NodeRef loss) {
  check(loss);
  if (swept_) throw contract_error("backward called twice on one tape");
  if (node_value(loss.idx).numel() != 1)
    throw contract_error("backward: loss is not a scalar");
  swept_ = true;
  grads_.resize(nodes_.size());
  grad_buf(loss.idx).data[0] = 1.0;
  for (std::size_t i = loss.idx + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || !n.back) continue;
    if (i >= grads_.size() || grads_[i].data.empty()) continue;  // unreached
    n.back(*this, i);
  }
}

}  // namespace as2
