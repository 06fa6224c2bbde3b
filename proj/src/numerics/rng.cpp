#include "expe/numerics/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace expe::num {

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ContractError("Rng::below(0)");
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::gaussian() {
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::set_state(const std::string& state) {
  std::istringstream is(state);
  is >> engine_;
  if (is.fail()) throw ContractError("Rng::set_state: malformed engine state");
}

template <typename T>
Tensor<T> gaussian_init(const Shape& shape, double stddev, Rng& rng, bool requires_grad) {
  std::vector<T> values(shape_numel(shape));
  for (auto& v : values) v = stddev == 0.0 ? T{0} : static_cast<T>(stddev * rng.gaussian());
  return Tensor<T>(shape, std::move(values), requires_grad);
}

template Tensor<float> gaussian_init(const Shape&, double, Rng&, bool);
template Tensor<double> gaussian_init(const Shape&, double, Rng&, bool);

}  // namespace expe::num
