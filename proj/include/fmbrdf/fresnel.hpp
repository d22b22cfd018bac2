// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>

#include "fmbrdf/error.hpp"
#include "fmbrdf/geometry.hpp"

namespace fmbrdf {

/// Reflectances for s- and p-polarized light (intensity ratios).
template <typename Scalar>
struct FresnelReflectance {
  Scalar rs;
  Scalar rp;
  Scalar unpolarized() const { return (rs + rp) / Scalar(2); }
};

template <typename Scalar>
struct FresnelTransmittance {
  Scalar ts;
  Scalar tp;
  Scalar unpolarized;
};

/// Snaps angles within 1e-9 of [0, pi/2] onto the interval; rejects the rest.
double checked_incidence_angle(double theta);

/// Refraction angle entering a medium of relative index mu >= 1.
double snell_theta_t(double mu, double theta);

/// Fresnel reflectances for a dielectric given the cosine of the incidence
/// angle (clamped to [0, 1]).
template <typename Scalar>
FresnelReflectance<Scalar> fresnel_from_cos(const Scalar& mu,
                                            const Scalar& cosTheta) {
  using std::sqrt;
  Scalar c = cosTheta;
  if (c < Scalar(0)) c = Scalar(0);
  if (c > Scalar(1)) c = Scalar(1);
  if (mu == Scalar(1)) return {Scalar(0), Scalar(0)};
  Scalar sin2t = (Scalar(1) - c * c) / (mu * mu);
  if (sin2t > Scalar(1)) sin2t = Scalar(1);
  const Scalar ct = sqrt(Scalar(1) - sin2t);
  const Scalar s = (c - mu * ct) / (c + mu * ct);
  const Scalar p = (mu * c - ct) / (mu * c + ct);
  return {s * s, p * p};
}

template <typename Scalar>
FresnelReflectance<Scalar> fresnel_rs_rp(const Scalar& mu, double theta) {
  return fresnel_from_cos(mu, Scalar(std::cos(checked_incidence_angle(theta))));
}

template <typename Scalar>
FresnelTransmittance<Scalar> transmittances_from_cos(const Scalar& mu,
                                                     const Scalar& cosTheta) {
  const auto r = fresnel_from_cos(mu, cosTheta);
  const Scalar ts = Scalar(1) - r.rs;
  const Scalar tp = Scalar(1) - r.rp;
  return {ts, tp, (ts + tp) / Scalar(2)};
}

template <typename Scalar>
FresnelTransmittance<Scalar> transmittances(const Scalar& mu, double theta) {
  return transmittances_from_cos(
      mu, Scalar(std::cos(checked_incidence_angle(theta))));
}

inline double brewster_angle(double mu) { return std::atan(mu); }

}  // namespace fmbrdf
