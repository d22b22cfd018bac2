// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

namespace fmbrdf {

/// Cubic spline through samples on a uniform grid over [x0, x1]. End slopes
/// come from fourth-order one-sided differences, so the interpolant keeps
/// O(h^4) accuracy up to the boundary. Requires at least 5 samples.
class UniformSpline {
 public:
  UniformSpline() = default;
  UniformSpline(double x0, double x1, std::vector<double> values);

  double operator()(double x) const;
  double derivative(double x) const;

  double x0() const { return x0_; }
  double x1() const { return x1_; }
  const std::vector<double>& values() const { return y_; }

 private:
  double x0_ = 0.0, x1_ = 1.0, h_ = 1.0;
  std::vector<double> y_;
  std::vector<double> m_;  // second derivatives at the knots
};

}  // namespace fmbrdf
