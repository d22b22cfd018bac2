// SPDX-License-Identifier: Apache-2.0

#include "fmbrdf/quadrature.hpp"

#include <cmath>

namespace fmbrdf {

namespace {

// Legendre P_n(x) and its derivative via the three-term recurrence.
void legendre(int n, double x, double& p, double& dp) {
  double p0 = 1.0, p1 = x;
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  p = p1;
  dp = n * (x * p1 - p0) / (x * x - 1.0);
}

}  // namespace

GaussLegendre gauss_legendre(int n) {
  if (n < 1) throw_domain("Gauss-Legendre order must be positive");
  GaussLegendre gl;
  gl.nodes.assign(n, 0.0);
  gl.weights.assign(n, 0.0);
  if (n == 1) {
    gl.weights[0] = 2.0;
    return gl;
  }
  for (int i = 0; i < n / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double p, dp;
    for (int iter = 0; iter < 100; ++iter) {
      legendre(n, x, p, dp);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    legendre(n, x, p, dp);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    gl.nodes[i] = -x;
    gl.nodes[n - 1 - i] = x;
    gl.weights[i] = w;
    gl.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) {
    double p, dp;
    legendre(n, 0.0, p, dp);
    gl.weights[n / 2] = 2.0 / (dp * dp);
  }
  return gl;
}

GaussLegendre gauss_legendre(int n, double a, double b) {
  GaussLegendre gl = gauss_legendre(n);
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  for (int i = 0; i < n; ++i) {
    gl.nodes[i] = c + h * gl.nodes[i];
    gl.weights[i] *= h;
  }
  return gl;
}

std::string to_string(ThetaSpacing s) {
  return s == ThetaSpacing::kCosine ? "cosine" : "angle";
}

ThetaSpacing theta_spacing_from_string(const std::string& s) {
  if (s == "cosine") return ThetaSpacing::kCosine;
  if (s == "angle") return ThetaSpacing::kAngle;
  throw_config("unknown theta spacing '" + s + "'");
}

HemisphereRule::HemisphereRule(int nTheta, int nPhi, ThetaSpacing spacing)
    : nTheta_(nTheta), nPhi_(nPhi), spacing_(spacing) {
  if (nTheta < 2 || nPhi < 4) throw_domain("hemisphere rule needs nTheta >= 2, nPhi >= 4");
  const double dphi = kTwoPi / nPhi;
  theta_.resize(nTheta);
  cosTheta_.resize(nTheta);
  sinTheta_.resize(nTheta);
  ringWeight_.resize(nTheta);
  if (spacing == ThetaSpacing::kCosine) {
    const GaussLegendre gl = gauss_legendre(nTheta, 0.0, 1.0);
    for (int a = 0; a < nTheta; ++a) {
      // Descending cos so ring 0 sits nearest the pole in both layouts.
      const double u = gl.nodes[nTheta - 1 - a];
      cosTheta_[a] = u;
      sinTheta_[a] = std::sqrt(std::max(0.0, 1.0 - u * u));
      theta_[a] = std::atan2(sinTheta_[a], u);
      ringWeight_[a] = gl.weights[nTheta - 1 - a] * dphi;
    }
  } else {
    const GaussLegendre gl = gauss_legendre(nTheta, 0.0, kHalfPi);
    for (int a = 0; a < nTheta; ++a) {
      theta_[a] = gl.nodes[a];
      cosTheta_[a] = std::cos(theta_[a]);
      sinTheta_[a] = std::sin(theta_[a]);
      ringWeight_[a] = gl.weights[a] * sinTheta_[a] * dphi;
    }
  }
  cosPhi_.resize(nPhi);
  sinPhi_.resize(nPhi);
  for (int p = 0; p < nPhi; ++p) {
    cosPhi_[p] = std::cos(phi(p));
    sinPhi_[p] = std::sin(phi(p));
  }
}

Direction HemisphereRule::node(int a, int p) const {
  return Direction::normalized(Eigen::Vector3d(sinTheta_[a] * cosPhi_[p],
                                               sinTheta_[a] * sinPhi_[p],
                                               cosTheta_[a]));
}

std::vector<HemisphereNode> HemisphereRule::nodes() const {
  std::vector<HemisphereNode> out;
  out.reserve(size());
  for (int a = 0; a < nTheta_; ++a)
    for (int p = 0; p < nPhi_; ++p) out.push_back({node(a, p), ringWeight_[a]});
  return out;
}

HemisphereRule build_rule(int nTheta, int nPhi, ThetaSpacing spacing) {
  return HemisphereRule(nTheta, nPhi, spacing);
}

}  // namespace fmbrdf
