#pragma once

// Central-difference gradient verification. The callable must be a
// deterministic, side-effect-free function of the supplied parameter
// tensors: invoked with a tape it returns the recorded scalar loss, and
// with a null tape it just evaluates the value.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "mulab/errors.hpp"
#include "mulab/rng.hpp"
#include "mulab/tensor.hpp"

namespace mulab {

template <typename T>
struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
};

// f(tape) -> scalar loss tensor. Checks up to coords_per_tensor sampled
// coordinates per parameter tensor (all of them for small tensors) with
// central differences (f(t+eps) - f(t-eps)) / (2 eps), and returns the
// max over checked coordinates of |analytic - numeric| / max(1e-8, |numeric|).
template <typename T>
GradCheckResult<T> finite_difference_check(
    const std::function<Tensor<T>(Tape<T>*)>& f, std::vector<Tensor<T>> params,
    double eps = 1e-3, std::size_t coords_per_tensor = 64, std::uint64_t seed = 7) {
  for (auto& p : params) p.zero_grad();
  Tape<T> tape;
  Tensor<T> loss = f(&tape);
  if (loss.size() != 1) throw ContractError("finite_difference_check: loss not scalar");
  if (!std::isfinite(static_cast<double>(loss[0])))
    throw NumericError("finite_difference_check: non-finite loss");
  backward_all(loss, tape);

  std::vector<std::vector<T>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) analytic.push_back(p.grad());

  GradCheckResult<T> result;
  Rng rng(Rng::derive(seed, "fd-coords"));
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor<T>& p = params[pi];
    const std::int64_t n = p.size();
    std::vector<std::int64_t> coords;
    if (static_cast<std::size_t>(n) <= coords_per_tensor) {
      for (std::int64_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      // Stride sampling with a seeded offset covers the tensor evenly.
      std::int64_t stride = n / static_cast<std::int64_t>(coords_per_tensor);
      std::int64_t offset = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(stride)));
      for (std::size_t j = 0; j < coords_per_tensor; ++j)
        coords.push_back(offset + static_cast<std::int64_t>(j) * stride);
    }
    for (std::int64_t ci : coords) {
      const T saved = p[ci];
      p[ci] = saved + static_cast<T>(eps);
      Tensor<T> fp = f(nullptr);
      p[ci] = saved - static_cast<T>(eps);
      Tensor<T> fm = f(nullptr);
      p[ci] = saved;
      double vplus = static_cast<double>(fp[0]), vminus = static_cast<double>(fm[0]);
      if (!std::isfinite(vplus) || !std::isfinite(vminus))
        throw NumericError("finite_difference_check: non-finite perturbed loss");
      double numeric = (vplus - vminus) / (2.0 * eps);
      double a = static_cast<double>(analytic[pi][static_cast<std::size_t>(ci)]);
      double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(numeric));
      if (rel > result.max_rel_error) result.max_rel_error = rel;
      ++result.coords_checked;
    }
  }
  return result;
}

}  // namespace mulab
