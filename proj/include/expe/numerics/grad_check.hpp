#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "expe/numerics/tape.hpp"
#include "expe/numerics/tensor.hpp"

namespace expe::num {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

// Compares the tape gradient of the scalar `loss_fn()` with central
// differences (f(x+h) - f(x-h)) / 2h for every coordinate of every tensor in
// `inputs`. The error per coordinate is |analytic - numeric| / max(floor, |analytic|);
// lower the floor when the gradients themselves are small.
//
// loss_fn must be smooth at the evaluation point; at kinks such as |x| at 0
// the two estimates legitimately disagree and the result is meaningless.
template <typename T>
GradCheckResult grad_check(const std::function<Tensor<T>()>& loss_fn,
                           const std::vector<std::pair<std::string, Tensor<T>>>& inputs, double h,
                           double floor = 1.0) {
  if (!(h > 0.0)) throw ContractError("grad_check: step must be positive");
  if (!(floor > 0.0)) throw ContractError("grad_check: floor must be positive");
  for (const auto& [name, t] : inputs) {
    if (!t.requires_grad()) throw ContractError("grad_check: input '" + name + "' does not track gradients");
    Tensor<T> handle = t;
    handle.zero_grad();
  }
  {
    Tape<T> tape;
    TapeScope<T> scope(tape);
    auto loss = loss_fn();
    backward(loss, tape);
  }
  GradCheckResult result;
  NoGradScope<T> no_grad;
  for (const auto& [name, tensor] : inputs) {
    Tensor<T> t = tensor;
    auto values = t.data();
    auto grads = t.grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const T original = values[i];
      values[i] = static_cast<T>(original + h);
      const double up = loss_fn().item();
      values[i] = static_cast<T>(original - h);
      const double down = loss_fn().item();
      values[i] = original;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = grads[i];
      const double err = std::abs(analytic - numeric) / std::max(floor, std::abs(analytic));
      ++result.coordinates;
      if (err > result.max_rel_error || result.coordinates == 1) {
        result.max_rel_error = err;
        result.worst_tensor = name;
        result.worst_index = i;
        result.worst_analytic = analytic;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

// Single-tensor convenience form; returns the max relative error.
template <typename T>
double grad_check(const std::function<Tensor<T>()>& loss_fn, const Tensor<T>& x, double h) {
  return grad_check<T>(loss_fn, {{"x", x}}, h).max_rel_error;
}

}  // namespace expe::num
