// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <memory>

#include "fmbrdf/fresnel.hpp"
#include "fmbrdf/geometry.hpp"
#include "fmbrdf/microfacet.hpp"
#include "fmbrdf/polarization.hpp"
#include "fmbrdf/quadrature.hpp"

namespace fmbrdf {

/// Floor applied to N.V and N.L wherever they appear in a denominator.
inline constexpr double kGrazingFloor = 1e-6;

/// The six model parameters. kb = ks * rk is the body albedo.
struct FmbrdfParams {
  double mu = 1.5;
  double ks = 0.1;
  double rk = 1.0;
  double alpha = 0.3;
  double beta = 2.0;
  double kappa = 1.0;

  double kb() const { return ks * rk; }
  /// Throws a domain error naming the offending field.
  void validate() const;
};

struct LightSource {
  Direction L;
  double E0 = 1.0;
  Stokes4 stokesIn = Stokes4(1.0, 0.0, 0.0, 0.0);

  static LightSource unpolarized(const Direction& L, double E0) {
    return LightSource{L, E0, Stokes4(E0, 0.0, 0.0, 0.0)};
  }
  void validate() const;
};

/// Resolution of the nested body integral. Both hemispheres use the same rule.
/// Equal-angle panels resolve the grazing facets better than cosine panels at
/// the same node count.
struct BodyQuadrature {
  int nTheta = 32;
  int nPhi = 64;
  ThetaSpacing spacing = ThetaSpacing::kAngle;
};

/// Nested double-hemisphere integral of the body term for one parameter set
/// and rule. The correlation kernel only depends on the azimuth difference of
/// the two facet normals, so it is stored per azimuthal frequency and the
/// inner sum becomes a diagonal product in Fourier space. Nodes are laid out
/// in a basis whose x-axis bisects the azimuths of L and V, which makes the
/// discrete sum exactly symmetric under L <-> V (nPhi even).
class BodyIntegrator {
 public:
  BodyIntegrator(const Ndf& ndf, const CorrelationFn& corr, const HemisphereRule& rule);

  const HemisphereRule& rule() const { return rule_; }

  /// Returns (S0, S1, S2) of the double sum for incident Stokes sIn, without
  /// the (kb / pi) G1(L) G1(V) / (N.V) prefactor. Outgoing components refer to
  /// frames.outgoing. For sIn with s1 = s2 = 0 the incident frame is not used.
  Eigen::Vector3d integrate(double mu, const Direction& N, const Direction& L,
                            const Direction& V, const FramePair* frames,
                            const Stokes4& sIn) const;

 private:
  HemisphereRule rule_;
  int nHarm_;
  Eigen::VectorXd ringWeight_;          // w_a D(theta_a)
  Eigen::MatrixXd dftCos_, dftSin_;     // nPhi x nHarm
  std::vector<Eigen::MatrixXd> kernelHat_;  // per harmonic, nTheta x nTheta
};

/// Parameter set plus derived tables: NDF normalization, Smith table,
/// correlation normalization and the body integrator.
class FmbrdfModel {
 public:
  explicit FmbrdfModel(const FmbrdfParams& params, const BodyQuadrature& quad = {});

  const FmbrdfParams& params() const { return params_; }
  const Ndf& ndf() const { return *ndf_; }
  const SmithTable& smith() const { return *smith_; }
  const CorrelationFn& correlation() const { return *corr_; }
  const BodyIntegrator& body() const { return *body_; }
  const BodyQuadrature& quadrature() const { return quad_; }

 private:
  FmbrdfParams params_;
  BodyQuadrature quad_;
  std::shared_ptr<const Ndf> ndf_;
  std::shared_ptr<const SmithTable> smith_;
  std::shared_ptr<const CorrelationFn> corr_;
  std::shared_ptr<const BodyIntegrator> body_;
};

// --- Surface term -----------------------------------------------------------

/// cos(2 phi), sin(2 phi) of frame_angle(frame, m); (1, 0) when m is along the
/// propagation axis.
Eigen::Vector2d double_angle(const PolarizationFrame& frame, const Eigen::Vector3d& m);

/// NDF value with its normalization linearized around the tabulated (alpha,
/// beta), so derivative-carrying scalars pick up d normC / d(alpha, beta).
template <typename S>
S ndf_value_t(const Ndf& base, const S& alpha, const S& beta, double thetaH) {
  using std::exp;
  using std::log;
  if (thetaH >= kHalfPi) return S(0);
  const S normC = base.norm_const() + base.dnorm_dalpha() * (alpha - base.alpha()) +
                  base.dnorm_dbeta() * (beta - base.beta());
  if (thetaH <= 0.0) return normC;
  return normC * exp(-exp(beta * log(S(thetaH) / alpha)));
}

/// Surface Stokes output for the given scalar parameters; D is the NDF value at
/// theta_H and g1L, g1V the Smith factors. cos/sin of twice the frame angles of
/// H select the reflection plane in each frame.
template <typename S>
Stokes<S> surface_stokes_t(const S& mu, const S& ks, const S& D, const S& g1L, const S& g1V,
                           const ShadingGeometry& g, const Eigen::Vector2d& rotIn,
                           const Eigen::Vector2d& rotOut, const Stokes4& sIn) {
  const S pref = ks * D * g1L * g1V / (S(4) * std::max(g.cosNV, kGrazingFloor));
  const Mueller<S> r = reflection_mueller_from_cos(mu, S(std::cos(g.thetaD)));
  // C(phi_o) R C(-phi_i) s_in
  const Mueller<S> cIn = rotator_cs(S(rotIn.x()), S(-rotIn.y()));
  const Mueller<S> cOut = rotator_cs(S(rotOut.x()), S(rotOut.y()));
  const Stokes<S> s = sIn.cast<S>();
  return pref * (cOut * (r * (cIn * s)));
}

/// Radiometric surface term k_s R D G / (4 N.V) E0.
double surface_radiance(const Ndf& ndf, const SmithTable& smith, double mu, double ks,
                        const ShadingGeometry& geom, double E0);
Stokes4 surface_stokes(const Ndf& ndf, const SmithTable& smith, double mu, double ks,
                       const ShadingGeometry& geom, const FramePair& frames, const Stokes4& sIn);
double surface_radiance(const FmbrdfModel& m, const ShadingGeometry& geom, double E0);
Stokes4 surface_stokes(const FmbrdfModel& m, const ShadingGeometry& geom,
                       const FramePair& frames, const Stokes4& sIn);

// --- Body term --------------------------------------------------------------

/// Depolarizing interior behind a single flat interface with normal N:
/// (k / pi) T(theta_V) D_p T(theta_L) cos(theta_L) applied to sIn, with the
/// usual frame rotations. This is the body term of a mirror-facet surface.
Stokes4 flat_diffuse_stokes(double mu, double k, const Direction& N, const Direction& L,
                            const Direction& V, const FramePair* frames, const Stokes4& sIn);

double body_radiance(const FmbrdfModel& m, const Direction& N, const Direction& L,
                     const Direction& V, double E0);
Stokes4 body_stokes(const FmbrdfModel& m, const Direction& N, const Direction& L,
                    const Direction& V, const FramePair& frames, const Stokes4& sIn);

/// Body term with an explicit rule (builds a temporary integrator).
double body_radiance(const FmbrdfModel& m, const Direction& N, const Direction& L,
                     const Direction& V, double E0, const HemisphereRule& rule);

// --- Total ------------------------------------------------------------------

enum class EvalMode { kOracle, kSurrogate };

class SurrogateModel;

struct EvalResult {
  double radiance = 0.0;
  Stokes4 stokes = Stokes4::Zero();
  Stokes4 surface = Stokes4::Zero();
  Stokes4 body = Stokes4::Zero();
};

/// Surface plus body. Surrogate mode replaces the body integral and the Smith
/// table by the networks in `surrogate` and throws "surrogate domain
/// violation" outside their trained box.
EvalResult eval_total(const FmbrdfModel& m, const Direction& N, const Direction& V,
                      const LightSource& light, EvalMode mode = EvalMode::kOracle,
                      const SurrogateModel* surrogate = nullptr);

}  // namespace fmbrdf
