// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fmbrdf/error.hpp"
#include "fmbrdf/polarization.hpp"

using namespace fmbrdf;

namespace {

Stokes4 random_realizable(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double s0 = 0.01 + 2.0 * u(rng);
  const double rho = u(rng);
  const double ang = kPi * u(rng);
  return Stokes4(s0, s0 * rho * std::cos(ang), s0 * rho * std::sin(ang), 0.0);
}

void check_cone_preserved(const Mueller4& m, std::mt19937_64& rng) {
  for (int i = 0; i < 10000; ++i) {
    const Stokes4 out = m * random_realizable(rng);
    ASSERT_TRUE(is_realizable(out)) << out.transpose();
  }
}

}  // namespace

TEST(FilterIntensity, Examples) {
  for (double phi : {0.0, 0.3, 1.2, 2.9}) EXPECT_NEAR(filter_intensity(Stokes4(2, 0, 0, 0), phi), 1.0, 1e-15);
  EXPECT_NEAR(filter_intensity(Stokes4(1, 1, 0, 0), 0.0), 1.0, 1e-15);
  EXPECT_NEAR(filter_intensity(Stokes4(1, 1, 0, 0), kHalfPi), 0.0, 1e-15);
  EXPECT_NEAR(filter_intensity(Stokes4(2, 1, 0, 0), kPi / 4), 1.0, 1e-15);
}

TEST(FilterIntensity, MatchesMeanAmplitudeForm) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, kPi);
  for (int i = 0; i < 100; ++i) {
    const Stokes4 s = random_realizable(rng);
    const double phiC = u(rng);
    const double ibar = 0.5 * s[0];
    const double rho = std::hypot(s[1], s[2]) / s[0];
    const double phi = 0.5 * std::atan2(s[2], s[1]);
    EXPECT_NEAR(filter_intensity(s, phiC), ibar + rho * ibar * std::cos(2 * phiC - 2 * phi), 1e-13);
  }
}

TEST(StokesFromFour, Examples) {
  EXPECT_LT((stokes_from_four(1, 1, 1, 1) - Stokes4(2, 0, 0, 0)).norm(), 1e-15);
  EXPECT_LT((stokes_from_four(1, 0.5, 0, 0.5) - Stokes4(1, 1, 0, 0)).norm(), 1e-15);
}

TEST(StokesFromFour, RoundTrip) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const Stokes4 s = random_realizable(rng);
    const Stokes4 r = stokes_from_four(filter_intensity(s, 0.0), filter_intensity(s, kPi / 4),
                                       filter_intensity(s, kHalfPi), filter_intensity(s, 3 * kPi / 4));
    EXPECT_LT((r - s).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(StokesFromFour, Inconsistent) {
  try {
    stokes_from_four(1.0, 1.0, 0.0, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "inconsistent filter intensities");
  }
}

TEST(Dolp, Examples) {
  EXPECT_NEAR(dolp(Stokes4(2, 1, 0, 0)), 0.5, 1e-15);
  EXPECT_NEAR(aolp(Stokes4(2, 1, 0, 0)), 0.0, 1e-15);
  EXPECT_EQ(dolp(Stokes4(1, 0, 0, 0)), 0.0);
  EXPECT_EQ(aolp(Stokes4(1, 0, 0, 0)), 0.0);
  EXPECT_NEAR(dolp(Stokes4(1, 0, 1, 0)), 1.0, 1e-15);
  EXPECT_NEAR(aolp(Stokes4(1, 0, 1, 0)), kPi / 4, 1e-15);
}

TEST(Dolp, ZeroRadiance) {
  try {
    dolp(Stokes4(0, 0, 0, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "zero-radiance Stokes");
  }
}

TEST(Aolp, Range) {
  EXPECT_NEAR(aolp(Stokes4(1, -1, 0, 0)), kHalfPi, 1e-15);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double a = aolp(random_realizable(rng));
    EXPECT_GT(a, -kHalfPi);
    EXPECT_LE(a, kHalfPi);
  }
}

TEST(Rotator, Examples) {
  EXPECT_EQ(rotator(0.0), Mueller4::Identity());
  const Stokes4 r = rotator(kHalfPi) * Stokes4(1, 1, 0, 0);
  EXPECT_LT((r - Stokes4(1, -1, 0, 0)).norm(), 1e-15);
}

TEST(Rotator, GroupProperty) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int i = 0; i < 50; ++i) {
    const double a = u(rng), b = u(rng);
    EXPECT_LT((rotator(a) * rotator(b) - rotator(a + b)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Rotator, RotatesAolp) {
  const Stokes4 s(1, 0.5, 0, 0);
  EXPECT_NEAR(aolp(rotator(0.3) * s), 0.3, 1e-14);
}

TEST(ReflectionMueller, NormalIncidence) {
  const Mueller4 m = reflection_mueller(1.5, 0.0);
  EXPECT_NEAR(m(0, 0), 0.04, 1e-12);
  EXPECT_NEAR(m(0, 1), 0.0, 1e-15);
  EXPECT_NEAR(m(1, 0), 0.0, 1e-15);
}

TEST(ReflectionMueller, BrewsterFullyPolarizes) {
  const Stokes4 out = reflection_mueller(1.5, std::atan(1.5)) * Stokes4(1, 0, 0, 0);
  EXPECT_NEAR(dolp(out), 1.0, 1e-10);
}

TEST(ReflectionMueller, CrossTermFlipsAcrossBrewster) {
  const double b = std::atan(1.5);
  EXPECT_LT(reflection_mueller(1.5, b - 0.05)(3, 3), 0.0);
  EXPECT_GT(reflection_mueller(1.5, b + 0.05)(3, 3), 0.0);
  EXPECT_LT(reflection_mueller(1.5, b - 0.05)(2, 2), 0.0);
  EXPECT_GT(reflection_mueller(1.5, b + 0.05)(2, 2), 0.0);
}

TEST(TransmissionMueller, Examples) {
  for (double t : {0.0, 0.5, 1.4}) EXPECT_LT((transmission_mueller(1.0, t) - Mueller4::Identity()).norm(), 1e-15);
  const Mueller4 m = transmission_mueller(1.5, 0.0);
  EXPECT_NEAR(m(0, 0), 0.96, 1e-12);
  EXPECT_NEAR(m(0, 1), 0.0, 1e-15);
  EXPECT_NEAR(m(1, 1), 0.96, 1e-12);
}

TEST(MuellerScalarConsistency, UnpolarizedInput) {
  for (double mu : {1.2, 1.5, 2.5})
    for (int i = 0; i <= 50; ++i) {
      const double t = kHalfPi * i / 50.0;
      const Stokes4 e(1, 0, 0, 0);
      EXPECT_LE(std::abs((reflection_mueller(mu, t) * e)[0] - fresnel_rs_rp(mu, t).unpolarized()), 1e-15);
      EXPECT_LE(std::abs((transmission_mueller(mu, t) * e)[0] - transmittances(mu, t).unpolarized), 1e-15);
    }
}

TEST(Depolarizer, Examples) {
  EXPECT_LT((depolarizer(1.0) * Stokes4(1, 1, 1, 0) - Stokes4(1, 0, 0, 0)).norm(), 1e-15);
  EXPECT_EQ(depolarizer(0.0) * Stokes4(1, 0.2, 0.3, 0), Stokes4::Zero());
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(dolp(depolarizer(0.7) * random_realizable(rng)), 0.0);
}

TEST(MuellerFamilies, PreserveRealizabilityCone) {
  std::mt19937_64 rng(6);
  check_cone_preserved(rotator(0.77), rng);
  check_cone_preserved(reflection_mueller(1.5, 0.3), rng);
  check_cone_preserved(reflection_mueller(1.5, std::atan(1.5)), rng);
  check_cone_preserved(reflection_mueller(2.0, 1.3), rng);
  check_cone_preserved(transmission_mueller(1.5, 0.9), rng);
  check_cone_preserved(transmission_mueller(2.5, 1.5), rng);
  check_cone_preserved(depolarizer(0.4), rng);
}
