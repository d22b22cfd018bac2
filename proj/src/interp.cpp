// SPDX-License-Identifier: Apache-2.0

#include "fmbrdf/interp.hpp"

#include <algorithm>
#include <cmath>

#include "fmbrdf/error.hpp"

namespace fmbrdf {

UniformSpline::UniformSpline(double x0, double x1, std::vector<double> values)
    : x0_(x0), x1_(x1), y_(std::move(values)) {
  const int n = static_cast<int>(y_.size());
  if (n < 5 || !(x1 > x0)) throw_domain("spline needs >= 5 samples on a non-empty interval");
  h_ = (x1_ - x0_) / (n - 1);
  // Fourth-order one-sided end slopes.
  const double d0 = (-25.0 * y_[0] + 48.0 * y_[1] - 36.0 * y_[2] +
                     16.0 * y_[3] - 3.0 * y_[4]) / (12.0 * h_);
  const double dn = (25.0 * y_[n - 1] - 48.0 * y_[n - 2] + 36.0 * y_[n - 3] -
                     16.0 * y_[n - 4] + 3.0 * y_[n - 5]) / (12.0 * h_);
  // Clamped spline: tridiagonal system for the knot second derivatives.
  std::vector<double> diag(n), rhs(n), upper(n), lower(n);
  const double h = h_;
  diag[0] = 2.0 * h;
  upper[0] = h;
  rhs[0] = 6.0 * ((y_[1] - y_[0]) / h - d0);
  for (int i = 1; i < n - 1; ++i) {
    lower[i] = h;
    diag[i] = 4.0 * h;
    upper[i] = h;
    rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h - (y_[i] - y_[i - 1]) / h);
  }
  lower[n - 1] = h;
  diag[n - 1] = 2.0 * h;
  rhs[n - 1] = 6.0 * (dn - (y_[n - 1] - y_[n - 2]) / h);
  // Thomas algorithm.
  for (int i = 1; i < n; ++i) {
    const double w = lower[i] / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  m_.assign(n, 0.0);
  m_[n - 1] = rhs[n - 1] / diag[n - 1];
  for (int i = n - 2; i >= 0; --i) m_[i] = (rhs[i] - upper[i] * m_[i + 1]) / diag[i];
}

double UniformSpline::operator()(double x) const {
  const int n = static_cast<int>(y_.size());
  const double t = std::clamp((x - x0_) / h_, 0.0, static_cast<double>(n - 1));
  const int i = std::min(static_cast<int>(t), n - 2);
  const double b = t - i;
  const double a = 1.0 - b;
  const double h2 = h_ * h_ / 6.0;
  return a * y_[i] + b * y_[i + 1] +
         ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h2;
}

double UniformSpline::derivative(double x) const {
  const int n = static_cast<int>(y_.size());
  const double t = std::clamp((x - x0_) / h_, 0.0, static_cast<double>(n - 1));
  const int i = std::min(static_cast<int>(t), n - 2);
  const double b = t - i;
  const double a = 1.0 - b;
  return (y_[i + 1] - y_[i]) / h_ +
         (-(3.0 * a * a - 1.0) * m_[i] + (3.0 * b * b - 1.0) * m_[i + 1]) * h_ / 6.0;
}

}  // namespace fmbrdf
