// SPDX-License-Identifier: Apache-2.0

#include "fmbrdf/polarization.hpp"

#include <cmath>

namespace fmbrdf {

bool is_realizable(const Stokes4& s, double relTol) {
  if (!s.allFinite()) return false;
  const double slack = relTol * std::max(1.0, std::abs(s[0]));
  if (s[0] < -slack) return false;
  return std::hypot(s[1], s[2]) <= s[0] + slack;
}

double filter_intensity(const Stokes4& s, double phiC) {
  return 0.5 * (s[0] + s[1] * std::cos(2.0 * phiC) + s[2] * std::sin(2.0 * phiC));
}

Stokes4 stokes_from_four(double i0, double i45, double i90, double i135) {
  const Stokes4 s(i0 + i90, i0 - i90, i45 - i135, 0.0);
  if (!is_realizable(s)) throw_domain("inconsistent filter intensities");
  return s;
}

double dolp(const Stokes4& s) {
  if (!(s[0] > 0.0)) throw_domain("zero-radiance Stokes");
  return std::min(1.0, std::hypot(s[1], s[2]) / s[0]);
}

double aolp(const Stokes4& s) {
  if (!(s[0] > 0.0)) throw_domain("zero-radiance Stokes");
  if (s[1] == 0.0 && s[2] == 0.0) return 0.0;
  double phi = 0.5 * std::atan2(s[2], s[1]);
  if (phi <= -kHalfPi) phi += kPi;
  return phi;
}

Mueller4 reflection_mueller(double mu, double theta) {
  return reflection_mueller_from_cos(mu, std::cos(checked_incidence_angle(theta)));
}

Mueller4 transmission_mueller(double mu, double theta) {
  return transmission_mueller_from_cos(mu,
                                       std::cos(checked_incidence_angle(theta)));
}

Mueller4 depolarizer(double k) {
  if (!(k >= 0.0)) throw_domain("depolarizer scale must be non-negative");
  Mueller4 m = Mueller4::Zero();
  m(0, 0) = k;
  return m;
}

}  // namespace fmbrdf
