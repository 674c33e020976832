#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace wisva::nn {

/// A scalar-valued model fragment: loss(params) and its analytic gradient.
template <typename T>
struct Fragment {
  std::function<T(std::span<const T>)> loss;
  std::function<void(std::span<const T>, std::span<T>)> gradient;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Central differences over the listed parameter indices (all of them when
/// `indices` is empty). Relative error uses max(|a|, |b|, 1e-8).
template <typename T>
GradCheckResult grad_check(const Fragment<T>& f, std::vector<T> params, double h,
                           const std::vector<std::size_t>& indices = {}) {
  std::vector<T> analytic(params.size(), T{});
  f.gradient(std::span<const T>(params), std::span<T>(analytic));
  GradCheckResult r;
  auto probe = [&](std::size_t i) {
    const T saved = params[i];
    params[i] = saved + static_cast<T>(h);
    const long double up = f.loss(std::span<const T>(params));
    params[i] = saved - static_cast<T>(h);
    const long double down = f.loss(std::span<const T>(params));
    params[i] = saved;
    const double numeric = static_cast<double>((up - down) / (2.0L * static_cast<long double>(h)));
    const double a = static_cast<double>(analytic[i]);
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    const double rel = std::abs(a - numeric) / denom;
    if (rel > r.max_rel_error) r = GradCheckResult{rel, i, a, numeric};
  };
  if (indices.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) probe(i);
  } else {
    for (std::size_t i : indices) probe(i);
  }
  return r;
}

}  // namespace wisva::nn
