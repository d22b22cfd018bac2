// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "fmbrdf/geometry.hpp"
#include "fmbrdf/interp.hpp"
#include "fmbrdf/quadrature.hpp"

namespace fmbrdf {

/// Generalized normal microfacet distribution
///   D(theta) = normC * exp(-(theta / alpha)^beta),  theta < pi/2,
/// normalized so that the projected (slope-area) density integrates to one
/// over the hemisphere. alpha <= kDeltaAlpha is treated as an ideal mirror.
class Ndf {
 public:
  static constexpr double kDeltaAlpha = 1e-4;

  Ndf(double alpha, double beta);

  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  bool is_delta() const { return delta_; }
  double norm_const() const { return normC_; }
  /// Partial derivatives of normC with respect to alpha and beta.
  double dnorm_dalpha() const { return dNormDAlpha_; }
  double dnorm_dbeta() const { return dNormDBeta_; }

  /// exp(-(theta/alpha)^beta) without normalization.
  double shape(double theta) const;
  double operator()(double thetaH) const;

  /// Integral of D over the hemisphere without the cosine factor.
  double hemisphere_integral() const { return hemisphereIntegral_; }

 private:
  double alpha_, beta_;
  bool delta_;
  double normC_ = 0.0;
  double dNormDAlpha_ = 0.0, dNormDBeta_ = 0.0;
  double hemisphereIntegral_ = 0.0;
};

double ndf_eval(const Ndf& ndf, double thetaH);

/// Adaptive integral over theta in [a, b] of a profile concentrated near 0
/// on the scale alpha; splits the range geometrically around alpha.
template <typename F>
double integrate_profile(F&& f, double a, double b, double alpha);

/// Smith Lambda of an isotropic NDF computed from its slope distribution by
/// direct integration (no table). D is any callable theta -> density that is
/// normalized in the slope-area sense.
template <typename D>
double smith_lambda_direct(const D& ndf, double thetaV, double alpha);

/// Smith Lambda tabulated on a uniform grid of the view angle. The grid stores
/// Lambda * cos(thetaV), which stays finite up to grazing, and interpolates it
/// with a cubic spline.
class SmithTable {
 public:
  static constexpr int kDefaultResolution = 256;

  explicit SmithTable(const Ndf& ndf, int resolution = kDefaultResolution);

  /// Lambda(thetaV); throws "grazing masking undefined" for thetaV >= pi/2.
  double lambda(double thetaV) const;
  int resolution() const { return resolution_; }
  const std::vector<double>& grid() const { return spline_.values(); }

 private:
  bool delta_;
  int resolution_;
  UniformSpline spline_;
};

double smith_lambda(const SmithTable& table, double thetaV);

/// Smith masking G1 = chi+(v . m) / (1 + Lambda(theta_v)).
double smith_g1(const SmithTable& table, const Direction& v, const Direction& N,
                const Direction& facetN);
/// Separable masking-shadowing G1(L) * G1(V) for the facet normal H.
double masking_shadowing(const SmithTable& table, const Direction& L,
                         const Direction& V, const Direction& N,
                         const Direction& H);

/// Exponentially scaled modified Bessel function exp(-x) I0(x), x >= 0.
double bessel_i0e(double x);

/// Microfacet correlation function
///   f(n, ni) = c(theta_n) c(theta_ni) exp(kappa (n . ni - 1)),
/// a von Mises-Fisher kernel whose normalization c is chosen so that
///   integral over the hemisphere of f(n, ni) D(theta_n) d omega_n = 1
/// for every ni, with f symmetric in its arguments. c is found by symmetric
/// Sinkhorn balancing of the azimuth-integrated kernel on a composite
/// Gauss-Legendre grid in theta. Off-grid values use Nystrom interpolation;
/// a uniform table of log c serves the fast path.
class CorrelationFn {
 public:
  static constexpr int kDefaultTableSize = 128;

  CorrelationFn(const Ndf& ndf, double kappa, int tableSize = kDefaultTableSize);

  double kappa() const { return kappa_; }
  /// c(theta) interpolated from the table.
  double norm_factor(double theta) const;
  /// c(theta) from the Nystrom solution.
  double norm_factor_exact(double theta) const;
  /// Table nodes hold log c on a uniform grid over [0, pi/2].
  const std::vector<double>& log_table() const { return spline_.values(); }
  int table_size() const { return tableSize_; }
  const std::vector<double>& nystrom_nodes() const { return nodes_; }

  double eval(const Direction& n, const Direction& ni, const Direction& N) const;
  double eval_angles(double thetaN, double thetaNi, double cosNNi) const {
    return norm_factor(thetaN) * norm_factor(thetaNi) *
           std::exp(kappa_ * (cosNNi - 1.0));
  }
  /// Azimuth-integrated kernel 2 pi exp(kappa (cos(t0 - t1) - 1)) I0e(kappa sin t0 sin t1).
  double ring_kernel(double t0, double t1) const;

 private:
  double log_norm_exact(double theta) const;

  double kappa_;
  int tableSize_;
  double logConstant_ = 0.0;  // used when kappa == 0
  std::vector<double> nodes_, gc_;  // Nystrom nodes and weight * D * c
  UniformSpline spline_;
};

double corr_eval(const CorrelationFn& f, const Direction& n, const Direction& ni,
                 const Direction& N);

/// Optional on-disk cache for tables, enabled by FMBRDF_CACHE_DIR. Files hold a
/// versioned header followed by little-endian float64 values.
namespace table_cache {
enum class Kind : unsigned { kSmith = 1, kCorrelation = 2 };
std::optional<std::vector<double>> load(Kind kind, double alpha, double beta,
                                        double kappa, int resolution);
void store(Kind kind, double alpha, double beta, double kappa, int resolution,
           const std::vector<double>& values);
std::string directory();
}  // namespace table_cache

// ---------------------------------------------------------------------------

template <typename F>
double integrate_profile(F&& f, double a, double b, double alpha) {
  if (b <= a) return 0.0;
  std::vector<double> cuts{a};
  for (double s = 0.25 * alpha; s < b; s *= 2.0)
    if (s > a) cuts.push_back(s);
  cuts.push_back(b);
  // First pass fixes a scale for the absolute tolerance.
  double coarse = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    coarse += std::abs(integrate_adaptive(f, cuts[i], cuts[i + 1], 1e-8, 4));
  const double tol = std::max(1e-300, 1e-13 * coarse);
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    sum += integrate_adaptive(f, cuts[i], cuts[i + 1], tol);
  return sum;
}

template <typename D>
double smith_lambda_direct(const D& ndf, double thetaV, double alpha) {
  if (thetaV <= 0.0) return 0.0;
  if (thetaV >= kHalfPi) return INFINITY;
  // Polar form of Smith's integral over the slope plane:
  //   Lambda = tan(thetaV) * int_{pi/2-thetaV}^{pi/2} g(theta) d theta
  //   g = 2 sin D [sqrt(sin^2 - a^2 cos^2) - a cos acos(a cot)],  a = cot(thetaV)
  const double a = std::cos(thetaV) / std::sin(thetaV);
  auto g = [&](double t) {
    const double s = std::sin(t), c = std::cos(t);
    const double r2 = s * s - a * a * c * c;
    if (r2 <= 0.0) return 0.0;
    const double ratio = std::min(1.0, a * c / s);
    return 2.0 * s * ndf(t) * (std::sqrt(r2) - a * c * std::acos(ratio));
  };
  return std::tan(thetaV) * integrate_profile(g, kHalfPi - thetaV, kHalfPi, alpha);
}

}  // namespace fmbrdf
