#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "expe/numerics/tensor.hpp"

namespace expe::num {

struct AdamWHyper {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.1;
};

template <typename T>
struct AdamWState {
  std::vector<T> m;
  std::vector<T> v;
  std::uint64_t t = 0;

  static AdamWState zeros(std::size_t n) { return {std::vector<T>(n, T{0}), std::vector<T>(n, T{0}), 0}; }
};

// One AdamW update with decoupled weight decay:
//   param -= lr * wd * param            (only when `decay`)
//   m, v <- moment updates; param -= lr * m_hat / (sqrt(v_hat) + eps)
// The step counter is incremented before bias correction.
template <typename T>
void adamw_step(std::span<T> param, std::span<const T> grad, AdamWState<T>& state, double lr,
                const AdamWHyper& hyper, bool decay = true);

// A parameter as the optimizer sees it.
template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T> tensor;
  bool decay = true;
};

template <typename T>
class AdamW {
 public:
  AdamW(std::vector<ParamRef<T>> params, AdamWHyper hyper);

  void step(double lr);
  void zero_grad();

  // Global L2 norm over every parameter gradient.
  double grad_norm() const;
  // Scales every gradient so the global norm is at most max_norm.
  void clip_grad_norm(double max_norm);

  const std::vector<ParamRef<T>>& params() const { return params_; }
  std::vector<AdamWState<T>>& states() { return states_; }
  const std::vector<AdamWState<T>>& states() const { return states_; }
  const AdamWHyper& hyper() const { return hyper_; }

 private:
  std::vector<ParamRef<T>> params_;
  std::vector<AdamWState<T>> states_;
  AdamWHyper hyper_;
};

}  // namespace expe::num
