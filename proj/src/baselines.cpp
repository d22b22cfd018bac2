// SPDX-License-Identifier: Apache-2.0

#include "fmbrdf/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "fmbrdf/error.hpp"
#include "fmbrdf/quadrature.hpp"

namespace fmbrdf {

double lambertian(double albedo, const Direction& N, const Direction& L, double E0) {
  if (!(albedo >= 0.0)) throw_domain("albedo must be >= 0");
  return albedo / kPi * std::max(0.0, N.dot(L)) * E0;
}

double oren_nayar(double albedo, double sigma, const Direction& N, const Direction& L,
                  const Direction& V, double E0) {
  if (!(albedo >= 0.0)) throw_domain("albedo must be >= 0");
  if (!(sigma >= 0.0)) throw_domain("sigma must be >= 0");
  const double cosI = N.dot(L), cosR = N.dot(V);
  if (cosI <= 0.0 || cosR <= 0.0) return 0.0;
  const double s2 = sigma * sigma;
  const double a = 1.0 - 0.5 * s2 / (s2 + 0.33);
  const double b = 0.45 * s2 / (s2 + 0.09);
  const Eigen::Vector3d& n = N.vec();
  const Eigen::Vector3d lp = L.vec() - cosI * n, vp = V.vec() - cosR * n;
  const double ln = lp.norm(), vn = vp.norm();
  double cosDphi = 0.0;
  if (ln > 1e-12 && vn > 1e-12) cosDphi = lp.dot(vp) / (ln * vn);
  const double thetaI = angle_between(L, N), thetaR = angle_between(V, N);
  const double alpha = std::max(thetaI, thetaR), beta = std::min(thetaI, thetaR);
  const double term = a + b * std::max(0.0, cosDphi) * std::sin(alpha) * std::tan(beta);
  return albedo / kPi * cosI * term * E0;
}

TorranceSparrow::TorranceSparrow(double ks, double sigma, double mu)
    : ks_(ks), mu_(mu), ndf_(sigma, 2.0) {
  if (!(ks >= 0.0)) throw_domain("ks must be >= 0");
  if (!(mu >= 1.0)) throw_domain("mu must be >= 1");
  smith_ = std::make_shared<const SmithTable>(ndf_);
}

double TorranceSparrow::radiance(const ShadingGeometry& g, double E0) const {
  return surface_radiance(ndf_, *smith_, mu_, ks_, g, E0);
}

Stokes4 TorranceSparrow::stokes(const ShadingGeometry& g, const FramePair& frames,
                                const Stokes4& sIn) const {
  return surface_stokes(ndf_, *smith_, mu_, ks_, g, frames, sIn);
}

double torrance_sparrow(double ks, double sigma, double mu, const ShadingGeometry& g, double E0) {
  return TorranceSparrow(ks, sigma, mu).radiance(g, E0);
}

PbrdfFlat::PbrdfFlat(const PbrdfFlatParams& p) : p_(p), specular_(p.ks, p.sigma, p.mu) {
  if (!(p.kd >= 0.0)) throw_domain("kd must be >= 0");
}

Stokes4 PbrdfFlat::diffuse(const ShadingGeometry& g, const FramePair& frames,
                           const Stokes4& sIn) const {
  return flat_diffuse_stokes(p_.mu, p_.kd, g.N, g.L, g.V, &frames, sIn);
}

Stokes4 PbrdfFlat::stokes(const ShadingGeometry& g, const FramePair& frames,
                          const Stokes4& sIn) const {
  return diffuse(g, frames, sIn) + specular_.stokes(g, frames, sIn);
}

Stokes4 pbrdf_flat(const PbrdfFlatParams& p, const ShadingGeometry& g, const FramePair& frames,
                   const Stokes4& sIn) {
  return PbrdfFlat(p).stokes(g, frames, sIn);
}

double single_facet_body(double mu, double kb, double alpha, double beta, const Direction& N,
                         const Direction& L, const Direction& V, double E0, int nTheta,
                         int nPhi) {
  const double cosNL = N.dot(L), cosNV = N.dot(V);
  if (!(cosNL > 0.0) || !(cosNV > 0.0)) throw_domain("below-horizon direction");
  if (nTheta < 2 || nPhi < 4) throw_domain("single-facet rule too small");
  const Ndf ndf(alpha, beta);
  const Eigen::Matrix3d basis = basis_about(N);
  const Eigen::Vector3d l = basis.transpose() * L.vec();
  const Eigen::Vector3d v = basis.transpose() * V.vec();
  const GaussLegendre gl = gauss_legendre(nTheta, 0.0, kHalfPi);
  double sum = 0.0;
  for (int a = 0; a < nTheta; ++a) {
    const double t = gl.nodes[a];
    const double st = std::sin(t), ct = std::cos(t);
    const double ringW = gl.weights[a] * st * (kTwoPi / nPhi) * ndf(t);
    double ring = 0.0;
    for (int p = 0; p < nPhi; ++p) {
      const double phi = (p + 0.5) * kTwoPi / nPhi;
      const Eigen::Vector3d n(st * std::cos(phi), st * std::sin(phi), ct);
      const double cv = v.dot(n), cl = l.dot(n);
      if (cv <= 0.0 || cl <= 0.0) continue;
      ring += transmittances_from_cos(mu, cv).unpolarized * cv *
              transmittances_from_cos(mu, cl).unpolarized * cl;
    }
    sum += ringW * ring;
  }
  const double g1L = 1.0 / (1.0 + smith_lambda_direct(ndf, angle_between(L, N), alpha));
  const double g1V = 1.0 / (1.0 + smith_lambda_direct(ndf, angle_between(V, N), alpha));
  return kb / kPi * g1L * g1V / cosNV * sum * E0;
}

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kFmbrdf:
      return "fmbrdf";
    case ModelKind::kLambertian:
      return "lambertian";
    case ModelKind::kOrenNayar:
      return "oren-nayar";
    case ModelKind::kTorranceSparrow:
      return "torrance-sparrow";
    case ModelKind::kPbrdfFlat:
      return "pbrdf-flat";
  }
  return "unknown";
}

ModelKind model_kind_from_string(const std::string& s) {
  for (ModelKind k : {ModelKind::kFmbrdf, ModelKind::kLambertian, ModelKind::kOrenNayar,
                      ModelKind::kTorranceSparrow, ModelKind::kPbrdfFlat})
    if (to_string(k) == s) return k;
  throw_config("unknown model tag: " + s);
}

void BaselineParams::validate() const {
  if (!(albedo >= 0.0)) throw_domain("albedo must be >= 0");
  if (!(sigma >= 0.0)) throw_domain("sigma must be >= 0");
  if (!(ks >= 0.0)) throw_domain("ks must be >= 0");
  if (!(kd >= 0.0)) throw_domain("kd must be >= 0");
  if (!(mu >= 1.0)) throw_domain("mu must be >= 1");
}

}  // namespace fmbrdf
