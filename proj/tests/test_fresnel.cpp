// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <boost/math/tools/roots.hpp>
#include <cmath>

#include "fmbrdf/error.hpp"
#include "fmbrdf/fresnel.hpp"

using namespace fmbrdf;

TEST(Snell, Examples) {
  EXPECT_EQ(snell_theta_t(1.5, 0.0), 0.0);
  EXPECT_NEAR(snell_theta_t(1.0, 0.7), 0.7, 1e-15);
  EXPECT_NEAR(snell_theta_t(1.5, kHalfPi), 0.7297276562269663, 1e-12);
}

TEST(Snell, RejectsOutOfRange) {
  EXPECT_THROW(snell_theta_t(1.5, kHalfPi + 1e-6), Error);
  EXPECT_THROW(snell_theta_t(1.5, -1e-6), Error);
  EXPECT_NO_THROW(snell_theta_t(1.5, kHalfPi + 1e-10));
  EXPECT_NO_THROW(snell_theta_t(1.5, -1e-10));
}

TEST(Reflectance, NormalIncidence) {
  const auto r = fresnel_rs_rp(1.5, 0.0);
  EXPECT_NEAR(r.rs, 0.04, 1e-12);
  EXPECT_NEAR(r.rp, 0.04, 1e-12);
  for (double mu : {1.1, 1.33, 2.0, 2.7}) {
    const double expected = std::pow((mu - 1.0) / (mu + 1.0), 2);
    EXPECT_NEAR(fresnel_rs_rp(mu, 0.0).unpolarized(), expected, 1e-12);
  }
}

TEST(Reflectance, Brewster) {
  EXPECT_LE(fresnel_rs_rp(1.5, std::atan(1.5)).rp, 1e-12);
}

TEST(Reflectance, Grazing) {
  const auto r = fresnel_rs_rp(1.5, kHalfPi);
  EXPECT_NEAR(r.rs, 1.0, 1e-12);
  EXPECT_NEAR(r.rp, 1.0, 1e-12);
}

TEST(Reflectance, SAtLeastP) {
  for (double mu : {1.05, 1.5, 2.5})
    for (int i = 1; i < 100; ++i) {
      const auto r = fresnel_rs_rp(mu, kHalfPi * i / 100.0);
      EXPECT_GE(r.rs, r.rp);
      EXPECT_GE(r.rp, 0.0);
      EXPECT_LE(r.rs, 1.0);
    }
}

TEST(Reflectance, MatchesAmplitudeFormulas) {
  // Textbook amplitude coefficients with an explicit Snell angle.
  for (double mu : {1.2, 1.5, 2.4})
    for (int i = 0; i < 50; ++i) {
      const double ti = 1.55 * i / 50.0;
      const double tt = std::asin(std::sin(ti) / mu);
      const double rs = (std::cos(ti) - mu * std::cos(tt)) / (std::cos(ti) + mu * std::cos(tt));
      const double rp = (mu * std::cos(ti) - std::cos(tt)) / (mu * std::cos(ti) + std::cos(tt));
      const auto r = fresnel_rs_rp(mu, ti);
      EXPECT_NEAR(r.rs, rs * rs, 1e-14);
      EXPECT_NEAR(r.rp, rp * rp, 1e-14);
    }
}

TEST(Reflectance, UniqueZeroOfRpAtBrewster) {
  for (double mu : {1.2, 1.5, 2.0, 3.0}) {
    // Rp changes sign through its amplitude; bisect the signed amplitude.
    auto amp = [mu](double t) {
      const double c = std::cos(t);
      const double ct = std::sqrt(1.0 - std::sin(t) * std::sin(t) / (mu * mu));
      return mu * c - ct;
    };
    boost::math::tools::eps_tolerance<double> tol(40);
    const auto root = boost::math::tools::bisect(amp, 1e-6, kHalfPi - 1e-6, tol);
    const double t0 = 0.5 * (root.first + root.second);
    EXPECT_NEAR(t0, brewster_angle(mu), 1e-9);
    EXPECT_LE(fresnel_rs_rp(mu, t0).rp, 1e-12);
    // No other zero on a fine grid.
    for (int i = 0; i <= 400; ++i) {
      const double t = kHalfPi * i / 400.0;
      if (std::abs(t - t0) > 0.01) {
        EXPECT_GT(fresnel_rs_rp(mu, t).rp, 1e-8);
      }
    }
  }
}

TEST(Transmittance, Examples) {
  const auto t0 = transmittances(1.5, 0.0);
  EXPECT_NEAR(t0.ts, 0.96, 1e-12);
  EXPECT_NEAR(t0.tp, 0.96, 1e-12);
  EXPECT_NEAR(t0.unpolarized, 0.96, 1e-12);
  for (double t : {0.0, 0.4, 1.2, kHalfPi}) {
    const auto v = transmittances(1.0, t);
    EXPECT_EQ(v.ts, 1.0);
    EXPECT_EQ(v.tp, 1.0);
    EXPECT_EQ(v.unpolarized, 1.0);
  }
  const auto g = transmittances(1.5, kHalfPi);
  EXPECT_NEAR(g.ts, 0.0, 1e-12);
  EXPECT_NEAR(g.tp, 0.0, 1e-12);
  EXPECT_NEAR(g.unpolarized, 0.0, 1e-12);
}

TEST(Transmittance, EnergyIdentities) {
  for (double mu : {1.0, 1.3, 1.5, 2.2, 3.0})
    for (int i = 0; i <= 100; ++i) {
      const double t = kHalfPi * i / 100.0;
      const auto r = fresnel_rs_rp(mu, t);
      const auto tr = transmittances(mu, t);
      EXPECT_LE(std::abs(r.rs + tr.ts - 1.0), 1e-15);
      EXPECT_LE(std::abs(r.rp + tr.tp - 1.0), 1e-15);
      EXPECT_NEAR(tr.unpolarized, 0.5 * (tr.ts + tr.tp), 1e-16);
    }
}
