#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "embellish/neural/tensor.hpp"

namespace embellish::testing {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst;  // "name[row,col]"
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps entries whose true
/// gradient is zero from dividing noise by noise.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares gradients left in `params` by `backward` (which must zero,
/// forward and backpropagate) against five-point central differences of
/// `loss`. Both callbacks must be deterministic (re-seed any dropout).
/// `stride` > 1 checks every stride-th entry of each parameter.
inline GradCheckResult check_gradients(const std::vector<neural::Parameter<double>*>& params,
                                       const std::function<void()>& backward, const std::function<double()>& loss,
                                       double step = 1e-4, std::size_t stride = 1) {
  backward();
  std::vector<neural::Tensor<double>> analytic;
  for (const auto* p : params) analytic.push_back(p->grad);

  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& value = params[k]->value;
    for (neural::Index i = 0; i < value.size(); i += static_cast<neural::Index>(stride)) {
      double& x = value.data()[i];
      const double saved = x;
      auto at = [&](double offset) {
        x = saved + offset;
        return loss();
      };
      const double numeric = (-at(2 * step) + 8 * at(step) - 8 * at(-step) + at(-2 * step)) / (12 * step);
      x = saved;
      const double a = analytic[k].data()[i];
      const double err = relative_error(a, numeric);
      ++result.checked;
      if (result.worst.empty() || err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst = params[k]->name + "[" + std::to_string(i / value.cols()) + "," +
                       std::to_string(i % value.cols()) + "]";
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace embellish::testing
