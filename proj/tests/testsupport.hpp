#pragma once

#include <functional>
#include <string>
#include <vector>

#include "as2/model.hpp"
#include "as2/rng.hpp"
#include "as2/tensor.hpp"

namespace as2::testing {

Tensor rand_tensor(std::vector<std::size_t> shape, Rng& rng,
                   double scale = 1.0);

// relative error with an absolute floor so that near-zero gradients compare
// against finite-difference noise sensibly
double rel_err(double a, double b);

struct FdReport {
  double max_rel = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double fd = 0.0;
  double analytic = 0.0;
};

// Central finite differences (x +- h) against analytic gradients for every
// element of every parameter. loss_fn must re-read the parameter tensors on
// each call.
FdReport fd_check(const std::vector<ParamRef>& params,
                  const std::function<double()>& loss_fn,
                  const std::function<std::vector<Tensor>()>& grad_fn,
                  double h = 1e-5);

// Analytic gradients of a scored candidate under the bce loss, aligned with
// trainable_params(model).
std::vector<Tensor> model_loss_grads(const Model& model,
                                     const ScoreInputs& inputs, int label);
double model_loss_value(const Model& model, const ScoreInputs& inputs,
                        int label);

// End-to-end gradient check for one variant at a small scale; returns the
// report over all trainable parameters.
FdReport variant_fd_check(Variant variant, double h = 1e-5);

}  // namespace as2::testing
