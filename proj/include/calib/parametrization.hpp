#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "calib/forms.hpp"

namespace calib {

using State = std::vector<double>;
/// Dense state evaluator t -> state of a base trajectory.
using CurveEvaluator = std::function<State(double)>;

/// A k-parameter family of points in R^n, e.g. r * g(s) * y(t).
struct Parametrization {
  std::string family;
  int k = 0;
  int n = 0;
  std::function<State(std::span<const double>)> point;
  /// Exact tangent frame at a parameter value, when known.
  std::function<OrientedFrame(std::span<const double>)> analytic_frame;
  /// Sampling box, one [lo, hi] per parameter.
  std::vector<std::pair<double, double>> domain;
};

}  // namespace calib
