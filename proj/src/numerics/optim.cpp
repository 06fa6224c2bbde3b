#include "expe/numerics/optim.hpp"

#include <cmath>

namespace expe::num {

template <typename T>
void adamw_step(std::span<T> param, std::span<const T> grad, AdamWState<T>& state, double lr,
                const AdamWHyper& hyper, bool decay) {
  if (grad.size() != param.size() || state.m.size() != param.size() ||
      state.v.size() != param.size()) {
    throw DimensionError("adamw_step: parameter, gradient and moment sizes differ");
  }
  state.t += 1;
  const double b1 = hyper.beta1;
  const double b2 = hyper.beta2;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  const double decay_factor = decay ? 1.0 - lr * hyper.weight_decay : 1.0;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double m = b1 * state.m[i] + (1.0 - b1) * g;
    const double v = b2 * state.v[i] + (1.0 - b2) * g * g;
    state.m[i] = static_cast<T>(m);
    state.v[i] = static_cast<T>(v);
    const double m_hat = m / bias1;
    const double v_hat = v / bias2;
    double p = static_cast<double>(param[i]) * decay_factor;
    p -= lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
    param[i] = static_cast<T>(p);
  }
}

template <typename T>
AdamW<T>::AdamW(std::vector<ParamRef<T>> params, AdamWHyper hyper)
    : params_(std::move(params)), hyper_(hyper) {
  if (hyper_.beta1 < 0 || hyper_.beta1 >= 1 || hyper_.beta2 < 0 || hyper_.beta2 >= 1) {
    throw ConfigError("AdamW: betas must lie in [0, 1)");
  }
  states_.reserve(params_.size());
  for (const auto& p : params_) states_.push_back(AdamWState<T>::zeros(p.tensor.numel()));
}

template <typename T>
void AdamW<T>::step(double lr) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    std::span<const T> g = p.tensor.grad();
    adamw_step<T>(p.tensor.data(), g, states_[i], lr, hyper_, p.decay);
  }
}

template <typename T>
void AdamW<T>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

template <typename T>
double AdamW<T>::grad_norm() const {
  double total = 0.0;
  for (const auto& p : params_) {
    for (auto g : p.tensor.grad()) total += static_cast<double>(g) * g;
  }
  return std::sqrt(total);
}

template <typename T>
void AdamW<T>::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (norm <= max_norm || norm == 0.0) return;
  const T factor = static_cast<T>(max_norm / norm);
  for (auto& p : params_) {
    for (auto& g : p.tensor.grad()) g *= factor;
  }
}

template void adamw_step(std::span<float>, std::span<const float>, AdamWState<float>&, double,
                         const AdamWHyper&, bool);
template void adamw_step(std::span<double>, std::span<const double>, AdamWState<double>&, double,
                         const AdamWHyper&, bool);
template class AdamW<float>;
template class AdamW<double>;

}  // namespace expe::num
