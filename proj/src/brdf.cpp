// SPDX-License-Identifier: Apache-2.0

#include "fmbrdf/brdf.hpp"

#include <cmath>
#include <string>

#include "fmbrdf/error.hpp"
#include "fmbrdf/surrogate.hpp"

namespace fmbrdf {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw_domain(what);
}

// Basis (x, y, N) with x along the azimuthal bisector of L and V.
Eigen::Matrix3d bisector_basis(const Direction& N, const Direction& L, const Direction& V) {
  const Eigen::Vector3d& n = N.vec();
  Eigen::Vector3d lp = L.vec() - L.dot(N) * n;
  Eigen::Vector3d vp = V.vec() - V.dot(N) * n;
  const double ln = lp.norm(), vn = vp.norm();
  constexpr double kTiny = 1e-12;
  Eigen::Vector3d x;
  if (ln > kTiny && vn > kTiny) {
    x = lp / ln + vp / vn;
    // Opposite azimuths: either perpendicular works, the grid is symmetric
    // under a half turn.
    if (x.norm() < 1e-9) x = n.cross(lp / ln);
  } else if (ln > kTiny) {
    x = lp;
  } else if (vn > kTiny) {
    x = vp;
  } else {
    x = basis_about(N).col(0);
  }
  x.normalize();
  Eigen::Matrix3d b;
  b.col(0) = x;
  b.col(1) = n.cross(x);
  b.col(2) = n;
  return b;
}

Eigen::Vector2d double_angle_of(const Eigen::Vector2d& p) {
  const double r2 = p.squaredNorm();
  if (r2 < 1e-24) return {1.0, 0.0};
  return {(p.x() * p.x() - p.y() * p.y()) / r2, 2.0 * p.x() * p.y() / r2};
}

}  // namespace

void FmbrdfParams::validate() const {
  require(std::isfinite(mu) && mu >= 1.0, "mu must be finite and >= 1");
  require(std::isfinite(ks) && ks >= 0.0, "ks must be finite and >= 0");
  require(std::isfinite(rk) && rk >= 0.0, "rk must be finite and >= 0");
  require(std::isfinite(alpha) && alpha > 0.0, "alpha must be positive and finite");
  require(std::isfinite(beta) && beta > 0.0, "beta must be positive and finite");
  require(std::isfinite(kappa) && kappa >= 0.0, "kappa must be finite and >= 0");
}

void LightSource::validate() const {
  require(std::isfinite(E0) && E0 >= 0.0, "E0 must be finite and >= 0");
  require(stokesIn.allFinite() && is_realizable(stokesIn), "incident Stokes not realizable");
}

Eigen::Vector2d double_angle(const PolarizationFrame& frame, const Eigen::Vector3d& m) {
  return double_angle_of(frame_projection(frame, m));
}

// ---------------------------------------------------------------------------
// BodyIntegrator

BodyIntegrator::BodyIntegrator(const Ndf& ndf, const CorrelationFn& corr,
                               const HemisphereRule& rule)
    : rule_(rule) {
  if (ndf.is_delta()) throw_domain("body integrator needs a non-delta NDF");
  const int nT = rule.n_theta(), nP = rule.n_phi();
  if (nP % 2 != 0) throw_domain("body rule needs an even nPhi");
  nHarm_ = nP / 2 + 1;

  ringWeight_.resize(nT);
  Eigen::VectorXd c(nT);
  for (int a = 0; a < nT; ++a) {
    ringWeight_[a] = rule.ring_weight(a) * ndf(rule.theta(a));
    c[a] = corr.norm_factor_exact(rule.theta(a));
  }

  Eigen::VectorXd cosTab(nP), sinTab(nP);
  for (int m = 0; m < nP; ++m) {
    cosTab[m] = std::cos(kTwoPi * m / nP);
    sinTab[m] = std::sin(kTwoPi * m / nP);
  }
  dftCos_.resize(nP, nHarm_);
  dftSin_.resize(nP, nHarm_);
  for (int p = 0; p < nP; ++p)
    for (int k = 0; k < nHarm_; ++k) {
      const int idx = static_cast<int>((static_cast<long>(p) * k) % nP);
      dftCos_(p, k) = cosTab[idx];
      dftSin_(p, k) = sinTab[idx];
    }

  // Kernel spectrum. The kernel is even in the azimuth difference, so its
  // transform is real.
  const double kappa = corr.kappa();
  kernelHat_.assign(nHarm_, Eigen::MatrixXd(nT, nT));
  Eigen::VectorXd row(nP);
  for (int a = 0; a < nT; ++a)
    for (int b = 0; b <= a; ++b) {
      const double cc = rule.cos_theta(a) * rule.cos_theta(b);
      const double ss = rule.sin_theta(a) * rule.sin_theta(b);
      const double scale = c[a] * c[b];
      for (int m = 0; m < nP; ++m) row[m] = scale * std::exp(kappa * (cc + ss * cosTab[m] - 1.0));
      for (int k = 0; k < nHarm_; ++k) {
        const double v = row.dot(dftCos_.col(k));
        kernelHat_[k](a, b) = v;
        kernelHat_[k](b, a) = v;
      }
    }
}

Eigen::Vector3d BodyIntegrator::integrate(double mu, const Direction& N, const Direction& L,
                                          const Direction& V, const FramePair* frames,
                                          const Stokes4& sIn) const {
  const int nT = rule_.n_theta(), nP = rule_.n_phi();
  const Eigen::Matrix3d basis = bisector_basis(N, L, V);
  const Eigen::Vector3d lLoc = basis.transpose() * L.vec();
  const Eigen::Vector3d vLoc = basis.transpose() * V.vec();
  const bool polarizedIn = sIn[1] != 0.0 || sIn[2] != 0.0;
  if (polarizedIn && frames == nullptr) throw_domain("polarized input needs frames");

  // Frame axes in the local basis.
  Eigen::Vector3d inX, inY, outX, outY;
  if (frames) {
    inX = basis.transpose() * frames->incident.xAxis.vec();
    inY = basis.transpose() * frames->incident.yAxis.vec();
    outX = basis.transpose() * frames->outgoing.xAxis.vec();
    outY = basis.transpose() * frames->outgoing.yAxis.vec();
  }

  Eigen::MatrixXd a0 = Eigen::MatrixXd::Zero(nT, nP);
  Eigen::MatrixXd a1, a2;
  if (frames) {
    a1 = Eigen::MatrixXd::Zero(nT, nP);
    a2 = Eigen::MatrixXd::Zero(nT, nP);
  }
  Eigen::MatrixXd bIn = Eigen::MatrixXd::Zero(nT, nP);

  for (int a = 0; a < nT; ++a) {
    const double st = rule_.sin_theta(a), ct = rule_.cos_theta(a);
    for (int p = 0; p < nP; ++p) {
      const Eigen::Vector3d n(st * rule_.cos_phi(p), st * rule_.sin_phi(p), ct);
      const double cosV = vLoc.dot(n);
      if (cosV > 0.0) {
        const auto t = transmittances_from_cos(mu, cosV);
        a0(a, p) = t.unpolarized * cosV;
        if (frames) {
          const double tm = 0.5 * (t.ts - t.tp) * cosV;
          const Eigen::Vector2d rot = double_angle_of({n.dot(outY), -n.dot(outX)});
          a1(a, p) = tm * rot.x();
          a2(a, p) = tm * rot.y();
        }
      }
      const double cosL = lLoc.dot(n);
      if (cosL > 0.0) {
        const auto t = transmittances_from_cos(mu, cosL);
        double in = t.unpolarized * sIn[0];
        if (polarizedIn) {
          // Row 0 of T C(phi_i): (T+, T- cos 2phi, -T- sin 2phi, 0).
          const Eigen::Vector2d rot = double_angle_of({n.dot(inY), -n.dot(inX)});
          in += 0.5 * (t.ts - t.tp) * (rot.x() * sIn[1] - rot.y() * sIn[2]);
        }
        bIn(a, p) = in * cosL;
      }
    }
  }

  a0 = ringWeight_.asDiagonal() * a0;
  bIn = ringWeight_.asDiagonal() * bIn;
  const Eigen::MatrixXd bRe = bIn * dftCos_, bIm = bIn * dftSin_;
  const Eigen::MatrixXd a0Re = a0 * dftCos_, a0Im = a0 * dftSin_;
  Eigen::MatrixXd a1Re, a1Im, a2Re, a2Im;
  if (frames) {
    a1 = ringWeight_.asDiagonal() * a1;
    a2 = ringWeight_.asDiagonal() * a2;
    a1Re = a1 * dftCos_;
    a1Im = a1 * dftSin_;
    a2Re = a2 * dftCos_;
    a2Im = a2 * dftSin_;
  }

  // Parseval: sum_p A W = (1/nP) sum_k eps_k Re(conj(A_k) K_k B_k).
  Eigen::Vector3d out = Eigen::Vector3d::Zero();
  Eigen::VectorXd kRe(nT), kIm(nT);
  for (int k = 0; k < nHarm_; ++k) {
    const double eps = (k == 0 || 2 * k == nP) ? 1.0 : 2.0;
    kRe.noalias() = kernelHat_[k] * bRe.col(k);
    kIm.noalias() = kernelHat_[k] * bIm.col(k);
    out[0] += eps * (a0Re.col(k).dot(kRe) + a0Im.col(k).dot(kIm));
    if (frames) {
      out[1] += eps * (a1Re.col(k).dot(kRe) + a1Im.col(k).dot(kIm));
      out[2] += eps * (a2Re.col(k).dot(kRe) + a2Im.col(k).dot(kIm));
    }
  }
  out /= nP;
  if (!out.allFinite()) throw_evaluation("non-finite integrand");
  return out;
}

// ---------------------------------------------------------------------------
// FmbrdfModel

FmbrdfModel::FmbrdfModel(const FmbrdfParams& params, const BodyQuadrature& quad)
    : params_(params), quad_(quad) {
  params.validate();
  ndf_ = std::make_shared<const Ndf>(params.alpha, params.beta);
  smith_ = std::make_shared<const SmithTable>(*ndf_);
  corr_ = std::make_shared<const CorrelationFn>(*ndf_, params.kappa);
  if (!ndf_->is_delta())
    body_ = std::make_shared<const BodyIntegrator>(
        *ndf_, *corr_, HemisphereRule(quad.nTheta, quad.nPhi, quad.spacing));
}

// ---------------------------------------------------------------------------
// Surface

namespace {

void check_upper(const ShadingGeometry& g) {
  if (!(g.cosNL > 0.0) || !(g.cosNV > 0.0)) throw_domain("below-horizon direction");
}

// Mirror-facet NDF: zero everywhere except exactly at H = N.
void check_delta_surface(const ShadingGeometry& g) {
  if (g.thetaH < 1e-9) throw_evaluation("ideal mirror lobe is singular");
}

}  // namespace

double surface_radiance(const Ndf& ndf, const SmithTable& smith, double mu, double ks,
                        const ShadingGeometry& g, double E0) {
  check_upper(g);
  if (ndf.is_delta()) {
    check_delta_surface(g);
    return 0.0;
  }
  const double D = ndf(g.thetaH);
  const double G = masking_shadowing(smith, g.L, g.V, g.N, g.H);
  const double pref = ks * D * G / (4.0 * std::max(g.cosNV, kGrazingFloor));
  const auto r = fresnel_from_cos(mu, std::cos(g.thetaD));
  return pref * (((r.rs + r.rp) / 2.0) * E0);
}

Stokes4 surface_stokes(const Ndf& ndf, const SmithTable& smith, double mu, double ks,
                       const ShadingGeometry& g, const FramePair& frames, const Stokes4& sIn) {
  check_upper(g);
  if (ndf.is_delta()) {
    check_delta_surface(g);
    return Stokes4::Zero();
  }
  const double D = ndf(g.thetaH);
  const double g1L = smith_g1(smith, g.L, g.N, g.H);
  const double g1V = smith_g1(smith, g.V, g.N, g.H);
  return surface_stokes_t<double>(mu, ks, D, g1L, g1V, g, double_angle(frames.incident, g.H.vec()),
                                  double_angle(frames.outgoing, g.H.vec()), sIn);
}

double surface_radiance(const FmbrdfModel& m, const ShadingGeometry& g, double E0) {
  return surface_radiance(m.ndf(), m.smith(), m.params().mu, m.params().ks, g, E0);
}

Stokes4 surface_stokes(const FmbrdfModel& m, const ShadingGeometry& g, const FramePair& frames,
                       const Stokes4& sIn) {
  return surface_stokes(m.ndf(), m.smith(), m.params().mu, m.params().ks, g, frames, sIn);
}

// ---------------------------------------------------------------------------
// Body

namespace {

Eigen::Vector3d body_core(const FmbrdfModel& m, const BodyIntegrator* integrator,
                          const Direction& N, const Direction& L, const Direction& V,
                          const FramePair* frames, const Stokes4& sIn) {
  const double cosNL = N.dot(L), cosNV = N.dot(V);
  if (!(cosNL > 0.0) || !(cosNV > 0.0)) throw_domain("below-horizon direction");
  const FmbrdfParams& p = m.params();
  const double kb = p.kb();
  if (kb == 0.0) return Eigen::Vector3d::Zero();
  if (m.ndf().is_delta()) {
    // Every facet is N.
    return flat_diffuse_stokes(p.mu, kb, N, L, V, frames, sIn).head<3>();
  }
  const double g1L = 1.0 / (1.0 + m.smith().lambda(angle_between(L, N)));
  const double g1V = 1.0 / (1.0 + m.smith().lambda(angle_between(V, N)));
  const double pref = (kb / kPi) * g1L * g1V / std::max(cosNV, kGrazingFloor);
  return pref * integrator->integrate(p.mu, N, L, V, frames, sIn);
}

}  // namespace

Stokes4 flat_diffuse_stokes(double mu, double k, const Direction& N, const Direction& L,
                            const Direction& V, const FramePair* frames, const Stokes4& sIn) {
  const double cosNL = N.dot(L), cosNV = N.dot(V);
  if (!(cosNL > 0.0) || !(cosNV > 0.0)) throw_domain("below-horizon direction");
  const auto tV = transmittances_from_cos(mu, cosNV);
  const auto tL = transmittances_from_cos(mu, cosNL);
  double in = tL.unpolarized * sIn[0];
  if (sIn[1] != 0.0 || sIn[2] != 0.0) {
    if (!frames) throw_domain("polarized input needs frames");
    const Eigen::Vector2d rot = double_angle(frames->incident, N.vec());
    in += 0.5 * (tL.ts - tL.tp) * (rot.x() * sIn[1] - rot.y() * sIn[2]);
  }
  Stokes4 col(tV.unpolarized, 0.0, 0.0, 0.0);
  if (frames) {
    const Eigen::Vector2d rot = double_angle(frames->outgoing, N.vec());
    col[1] = 0.5 * (tV.ts - tV.tp) * rot.x();
    col[2] = 0.5 * (tV.ts - tV.tp) * rot.y();
  }
  return (k / kPi) * (in * cosNL) * col;
}

double body_radiance(const FmbrdfModel& m, const Direction& N, const Direction& L,
                     const Direction& V, double E0) {
  return body_core(m, m.ndf().is_delta() ? nullptr : &m.body(), N, L, V, nullptr,
                   Stokes4(E0, 0.0, 0.0, 0.0))[0];
}

double body_radiance(const FmbrdfModel& m, const Direction& N, const Direction& L,
                     const Direction& V, double E0, const HemisphereRule& rule) {
  if (m.ndf().is_delta()) return body_radiance(m, N, L, V, E0);
  const BodyIntegrator integrator(m.ndf(), m.correlation(), rule);
  return body_core(m, &integrator, N, L, V, nullptr, Stokes4(E0, 0.0, 0.0, 0.0))[0];
}

Stokes4 body_stokes(const FmbrdfModel& m, const Direction& N, const Direction& L,
                    const Direction& V, const FramePair& frames, const Stokes4& sIn) {
  const Eigen::Vector3d s =
      body_core(m, m.ndf().is_delta() ? nullptr : &m.body(), N, L, V, &frames, sIn);
  return Stokes4(s[0], s[1], s[2], 0.0);
}

// ---------------------------------------------------------------------------
// Total

EvalResult eval_total(const FmbrdfModel& m, const Direction& N, const Direction& V,
                      const LightSource& light, EvalMode mode, const SurrogateModel* surrogate) {
  light.validate();
  const ShadingGeometry g = make_shading(N, light.L, V);
  const FramePair frames = make_frames(N, light.L, V);
  EvalResult r;
  if (mode == EvalMode::kSurrogate) {
    if (!surrogate) throw_config("surrogate mode requires a surrogate model");
    const SurrogateEval se = surrogate_eval(*surrogate, m.params(), m.ndf(), N, light.L, V,
                                            frames, light.stokesIn);
    r.surface = se.surface;
    r.body = se.body;
  } else {
    r.surface = surface_stokes(m, g, frames, light.stokesIn);
    r.body = body_stokes(m, N, light.L, V, frames, light.stokesIn);
  }
  r.stokes = r.surface + r.body;
  r.radiance = r.stokes[0];
  return r;
}

}  // namespace fmbrdf
