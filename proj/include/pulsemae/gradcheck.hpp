#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pulsemae/autodiff.hpp"

namespace pmae {

using GradBuildFn =
    std::function<Var<double>(const std::vector<Var<double>>&)>;

// Central-difference oracle. Rebuilds the graph for every probe (define-by-run)
// and returns the max over all input coordinates of
//   |analytic - central| / max(|analytic|, |central|, 1e-8).
inline double finite_diff_check(const GradBuildFn& build,
                                std::vector<Tensor<double>> inputs,
                                double eps = 1e-5) {
  std::vector<Var<double>> params;
  params.reserve(inputs.size());
  for (auto& t : inputs) params.push_back(parameter(t));
  Var<double> loss = build(params);
  backward(loss);
  std::vector<Tensor<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) analytic.push_back(p->grad_or_zero());

  auto eval = [&](const std::vector<Tensor<double>>& xs) {
    std::vector<Var<double>> vs;
    vs.reserve(xs.size());
    for (auto& t : xs) vs.push_back(constant(t));
    return build(vs)->value[0];
  };

  double worst = 0;
  for (size_t i = 0; i < inputs.size(); ++i) {
    for (size_t j = 0; j < inputs[i].numel(); ++j) {
      double orig = inputs[i][j];
      inputs[i][j] = orig + eps;
      double fp = eval(inputs);
      inputs[i][j] = orig - eps;
      double fm = eval(inputs);
      inputs[i][j] = orig;
      double central = (fp - fm) / (2 * eps);
      double a = analytic[i][j];
      double rel = std::abs(a - central) /
                   std::max({std::abs(a), std::abs(central), 1e-8});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

struct GradCheckCase {
  std::string name;
  double tolerance;
  // builds (inputs, fn) for a given seed
  std::function<double(uint64_t seed)> run;  // returns max rel err
};

struct GradCheckResult {
  std::string name;
  double max_err = 0;
  double tolerance = 0;
  bool passed = true;
};

inline std::vector<GradCheckResult> run_gradcheck(
    const std::vector<GradCheckCase>& cases, int seeds) {
  std::vector<GradCheckResult> out;
  for (const auto& c : cases) {
    GradCheckResult r{c.name, 0, c.tolerance, true};
    for (int s = 0; s < seeds; ++s)
      r.max_err = std::max(r.max_err, c.run(static_cast<uint64_t>(s) + 1));
    r.passed = r.max_err < c.tolerance;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace pmae
