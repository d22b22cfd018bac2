// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cmath>

#include "fmbrdf/fresnel.hpp"

namespace fmbrdf {

/// Stokes vector (s0, s1, s2, s3). s3 is carried but stays zero here.
template <typename Scalar>
using Stokes = Eigen::Matrix<Scalar, 4, 1>;
template <typename Scalar>
using Mueller = Eigen::Matrix<Scalar, 4, 4>;

using Stokes4 = Stokes<double>;
using Mueller4 = Mueller<double>;

inline Stokes4 unpolarized(double s0) { return Stokes4(s0, 0.0, 0.0, 0.0); }

/// s0 >= 0 and sqrt(s1^2 + s2^2) <= s0 up to a relative tolerance.
bool is_realizable(const Stokes4& s, double relTol = 1e-9);

/// Intensity behind a linear polarizer at angle phiC.
double filter_intensity(const Stokes4& s, double phiC);

/// Stokes vector from intensities behind filters at 0, 45, 90 and 135 deg.
/// Throws "inconsistent filter intensities" if the result is unrealizable.
Stokes4 stokes_from_four(double i0, double i45, double i90, double i135);

/// Degree of linear polarization. Throws "zero-radiance Stokes" if s0 <= 0.
double dolp(const Stokes4& s);
/// Angle of linear polarization in (-pi/2, pi/2]; 0 for unpolarized light.
double aolp(const Stokes4& s);

template <typename Scalar>
Mueller<Scalar> rotator(const Scalar& phi) {
  using std::cos;
  using std::sin;
  const Scalar c = cos(Scalar(2) * phi);
  const Scalar s = sin(Scalar(2) * phi);
  Mueller<Scalar> m = Mueller<Scalar>::Identity();
  m(1, 1) = c;
  m(1, 2) = -s;
  m(2, 1) = s;
  m(2, 2) = c;
  return m;
}

/// Rotator from precomputed cos(2 phi), sin(2 phi).
template <typename Scalar>
Mueller<Scalar> rotator_cs(const Scalar& cos2, const Scalar& sin2) {
  Mueller<Scalar> m = Mueller<Scalar>::Identity();
  m(1, 1) = cos2;
  m(1, 2) = -sin2;
  m(2, 1) = sin2;
  m(2, 2) = cos2;
  return m;
}

template <typename Scalar>
Mueller<Scalar> reflection_mueller_from_cos(const Scalar& mu,
                                            const Scalar& cosTheta) {
  using std::sqrt;
  const auto r = fresnel_from_cos(mu, cosTheta);
  const Scalar plus = (r.rs + r.rp) / Scalar(2);
  const Scalar minus = (r.rs - r.rp) / Scalar(2);
  // Phase flips sign at Brewster's angle: cos(delta) = -1 below it.
  const Scalar cosBrewster = Scalar(1) / sqrt(Scalar(1) + mu * mu);
  const Scalar cosDelta = cosTheta > cosBrewster ? Scalar(-1) : Scalar(1);
  const Scalar cross = sqrt(r.rs * r.rp) * cosDelta;
  Mueller<Scalar> m = Mueller<Scalar>::Zero();
  m(0, 0) = plus;
  m(0, 1) = minus;
  m(1, 0) = minus;
  m(1, 1) = plus;
  m(2, 2) = cross;
  m(3, 3) = cross;
  return m;
}

template <typename Scalar>
Mueller<Scalar> transmission_mueller_from_cos(const Scalar& mu,
                                              const Scalar& cosTheta) {
  using std::sqrt;
  const auto t = transmittances_from_cos(mu, cosTheta);
  const Scalar plus = (t.ts + t.tp) / Scalar(2);
  const Scalar minus = (t.ts - t.tp) / Scalar(2);
  const Scalar cross = sqrt(t.ts * t.tp);
  Mueller<Scalar> m = Mueller<Scalar>::Zero();
  m(0, 0) = plus;
  m(0, 1) = minus;
  m(1, 0) = minus;
  m(1, 1) = plus;
  m(2, 2) = cross;
  m(3, 3) = cross;
  return m;
}

Mueller4 reflection_mueller(double mu, double theta);
Mueller4 transmission_mueller(double mu, double theta);

/// Ideal depolarizer scaled by k: keeps only s0.
Mueller4 depolarizer(double k);

}  // namespace fmbrdf
