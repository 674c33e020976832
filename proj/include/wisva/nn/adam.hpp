#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "wisva/nn/tensor.hpp"

namespace wisva::nn {

template <typename T>
struct AdamState {
  std::int64_t step = 0;
  std::vector<T> m;
  std::vector<T> v;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void reset(std::size_t n) {
    step = 0;
    m.assign(n, T{});
    v.assign(n, T{});
  }

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// Bias-corrected Adam update in place.
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& s) {
  check(params.size() == grads.size(), "adam: params/grads size mismatch");
  if (s.m.empty() && s.v.empty()) s.reset(params.size());
  check(s.m.size() == params.size() && s.v.size() == params.size(), "adam: moment size mismatch");
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  const T b1 = static_cast<T>(s.beta1);
  const T b2 = static_cast<T>(s.beta2);
  const T step_size = static_cast<T>(s.lr / c1);
  const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(c2));
  const T eps = static_cast<T>(s.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const T g = grads[i];
    s.m[i] = b1 * s.m[i] + (T{1} - b1) * g;
    s.v[i] = b2 * s.v[i] + (T{1} - b2) * g * g;
    params[i] -= step_size * s.m[i] / (std::sqrt(s.v[i]) * inv_sqrt_c2 + eps);
  }
}

}  // namespace wisva::nn
