// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <queue>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include "fmbrdf/error.hpp"
#include "fmbrdf/geometry.hpp"

namespace fmbrdf {

/// Gauss-Legendre nodes and weights on [-1, 1], ascending.
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussLegendre gauss_legendre(int n);

/// Gauss-Legendre rule mapped onto [a, b].
GaussLegendre gauss_legendre(int n, double a, double b);

namespace detail {

struct Kronrod15 {
  static constexpr double xgk[8] = {
      0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
      0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
      0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
      0.207784955007898467600689403773245, 0.0};
  static constexpr double wgk[8] = {
      0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
      0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
      0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
      0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
  static constexpr double wg[4] = {
      0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
      0.381830050505118944950369775488975, 0.417959183673469387755102040816327};
};

template <typename F>
void kronrod_panel(F& f, double a, double b, double& result, double& error) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double resK = fc * Kronrod15::wgk[7];
  double resG = fc * Kronrod15::wg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * Kronrod15::xgk[j];
    const double f1 = f(c - dx);
    const double f2 = f(c + dx);
    resK += Kronrod15::wgk[j] * (f1 + f2);
    if (j % 2 == 1) resG += Kronrod15::wg[j / 2] * (f1 + f2);
  }
  result = resK * h;
  error = std::abs((resK - resG) * h);
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (7/15) integration of f over [a, b]: the
/// panel with the largest error estimate is bisected until the summed
/// estimate drops below absTol or maxPanels is reached.
template <typename F>
double integrate_adaptive(F&& f, double a, double b, double absTol = 1e-13,
                          int maxPanels = 2000) {
  if (a == b) return 0.0;
  struct Panel {
    double a, b, value, error;
    bool operator<(const Panel& o) const { return error < o.error; }
  };
  std::priority_queue<Panel> heap;
  Panel first{a, b, 0.0, 0.0};
  detail::kronrod_panel(f, a, b, first.value, first.error);
  heap.push(first);
  double total = first.value, error = first.error;
  while (std::isfinite(total) && error > std::max(absTol, 1e-15 * std::abs(total)) &&
         static_cast<int>(heap.size()) < maxPanels) {
    const Panel worst = heap.top();
    const double m = 0.5 * (worst.a + worst.b);
    if (!(m > worst.a && m < worst.b)) break;
    heap.pop();
    Panel left{worst.a, m, 0.0, 0.0}, right{m, worst.b, 0.0, 0.0};
    detail::kronrod_panel(f, left.a, left.b, left.value, left.error);
    detail::kronrod_panel(f, right.a, right.b, right.value, right.error);
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  // Re-sum to shed the drift of the running update.
  double sum = 0.0;
  while (!heap.empty()) {
    sum += heap.top().value;
    heap.pop();
  }
  if (!std::isfinite(sum)) throw_evaluation("non-finite integrand");
  return sum;
}

/// How polar nodes are placed on the hemisphere.
enum class ThetaSpacing {
  kCosine,  // Gauss-Legendre in cos(theta)
  kAngle,   // Gauss-Legendre in theta, weighted by sin(theta)
};

std::string to_string(ThetaSpacing s);
ThetaSpacing theta_spacing_from_string(const std::string& s);

struct HemisphereNode {
  Direction dir;
  double weight;  // steradians
};

/// Product rule over the upper hemisphere of +Z: Gauss-Legendre rings in
/// the polar direction times uniform midpoint nodes in azimuth. Node (a, p)
/// has index a * nPhi + p.
class HemisphereRule {
 public:
  HemisphereRule() = default;
  HemisphereRule(int nTheta, int nPhi, ThetaSpacing spacing);

  int n_theta() const { return nTheta_; }
  int n_phi() const { return nPhi_; }
  std::size_t size() const { return static_cast<std::size_t>(nTheta_) * nPhi_; }
  ThetaSpacing spacing() const { return spacing_; }

  double theta(int a) const { return theta_[a]; }
  double cos_theta(int a) const { return cosTheta_[a]; }
  double sin_theta(int a) const { return sinTheta_[a]; }
  /// Solid-angle weight of every node on ring a.
  double ring_weight(int a) const { return ringWeight_[a]; }
  double phi(int p) const { return (p + 0.5) * kTwoPi / nPhi_; }
  double cos_phi(int p) const { return cosPhi_[p]; }
  double sin_phi(int p) const { return sinPhi_[p]; }

  Direction node(int a, int p) const;
  std::vector<HemisphereNode> nodes() const;

 private:
  int nTheta_ = 0;
  int nPhi_ = 0;
  ThetaSpacing spacing_ = ThetaSpacing::kCosine;
  std::vector<double> theta_, cosTheta_, sinTheta_, ringWeight_;
  std::vector<double> cosPhi_, sinPhi_;
};

/// Requires nTheta >= 2 and nPhi >= 4.
HemisphereRule build_rule(int nTheta, int nPhi,
                          ThetaSpacing spacing = ThetaSpacing::kCosine);

/// Weighted node sum of a scalar- or vector-valued integrand. Throws
/// "non-finite integrand" on NaN or Inf.
template <typename F>
auto integrate(const HemisphereRule& rule, F&& integrand) {
  using R = std::decay_t<decltype(integrand(std::declval<const Direction&>()))>;
  R sum;
  if constexpr (std::is_arithmetic_v<R>) {
    sum = R(0);
  } else {
    sum = R::Zero();
  }
  for (int a = 0; a < rule.n_theta(); ++a) {
    const double w = rule.ring_weight(a);
    for (int p = 0; p < rule.n_phi(); ++p) {
      const R v = integrand(rule.node(a, p));
      bool finite;
      if constexpr (std::is_arithmetic_v<R>) {
        finite = std::isfinite(v);
      } else {
        finite = v.allFinite();
      }
      if (!finite) throw_evaluation("non-finite integrand");
      sum += w * v;
    }
  }
  return sum;
}

struct McEstimate {
  double mean;
  double stderr_;
};

/// Uniform-hemisphere Monte-Carlo estimate of a scalar integral (about +Z).
template <typename F>
McEstimate mc_estimate(F&& integrand, std::int64_t nSamples, std::uint64_t seed) {
  if (nSamples < 1) throw_domain("mc_estimate requires at least one sample");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double mean = 0.0, m2 = 0.0;
  for (std::int64_t i = 0; i < nSamples; ++i) {
    const double z = u01(rng);
    const double phi = kTwoPi * u01(rng);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Direction d = Direction::normalized(
        Eigen::Vector3d(r * std::cos(phi), r * std::sin(phi), z));
    const double x = kTwoPi * integrand(d);
    const double delta = x - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (x - mean);
  }
  const double var = nSamples > 1 ? m2 / static_cast<double>(nSamples - 1) : 0.0;
  return {mean, std::sqrt(var / static_cast<double>(nSamples))};
}

}  // namespace fmbrdf
