// SPDX-License-Identifier: Apache-2.0

#include "fmbrdf/fresnel.hpp"

namespace fmbrdf {

double checked_incidence_angle(double theta) {
  constexpr double kSnap = 1e-9;
  if (!std::isfinite(theta) || theta < -kSnap || theta > kHalfPi + kSnap)
    throw_domain("incidence angle outside [0, pi/2]");
  return std::clamp(theta, 0.0, kHalfPi);
}

double snell_theta_t(double mu, double theta) {
  if (!(mu >= 1.0)) throw_domain("index of refraction below 1");
  theta = checked_incidence_angle(theta);
  return std::asin(std::sin(theta) / mu);
}

}  // namespace fmbrdf
