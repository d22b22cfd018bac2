// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <random>

#include "fmbrdf/baselines.hpp"
#include "fmbrdf/error.hpp"
#include "fmbrdf/scene.hpp"

using namespace fmbrdf;

namespace {

const Direction kN(0.0, 0.0, 1.0);

Direction random_upper(std::mt19937_64& rng, double maxTheta = 1.3) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return Direction::from_spherical(maxTheta * u(rng), kTwoPi * u(rng));
}

// Oren-Nayar first-order model written out in spherical coordinates about +Z.
double oren_nayar_reference(double rho, double sigma, double ti, double pi, double tr, double pr) {
  const double s2 = sigma * sigma;
  const double A = 1.0 - 0.5 * s2 / (s2 + 0.33);
  const double B = 0.45 * s2 / (s2 + 0.09);
  const double a = std::max(ti, tr), b = std::min(ti, tr);
  return rho / kPi * std::cos(ti) * (A + B * std::max(0.0, std::cos(pi - pr)) * std::sin(a) * std::tan(b));
}

}  // namespace

TEST(Lambertian, Examples) {
  EXPECT_NEAR(lambertian(0.6, kN, kN, 2.0), 0.6 * 2.0 / kPi, 1e-15);
  EXPECT_EQ(lambertian(0.6, kN, Direction(1, 0, 0), 2.0), 0.0);
  EXPECT_EQ(lambertian(0.6, kN, Direction::from_spherical(2.0, 0.0), 2.0), 0.0);
}

TEST(Lambertian, ViewIndependent) {
  ModelSpec spec;
  spec.kind = ModelKind::kLambertian;
  spec.baseline.albedo = 0.5;
  const Evaluator eval(spec);
  const LightSource light = LightSource::unpolarized(Direction::from_spherical(0.7, 0.2), 1.0);
  const Stokes4 ref = eval.stokes(kN, kN, light);
  EXPECT_NEAR(ref[0], 0.5 / kPi * std::cos(0.7), 1e-15);
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(eval.stokes(kN, random_upper(rng), light), ref);
}

TEST(OrenNayar, ZeroRoughnessIsLambertian) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Direction L = random_upper(rng), V = random_upper(rng);
    EXPECT_NEAR(oren_nayar(0.4, 0.0, kN, L, V, 1.5), lambertian(0.4, kN, L, 1.5), 1e-15);
  }
}

TEST(OrenNayar, NormalConfigurationKeepsOnlyA) {
  const double s = 0.4, s2 = s * s;
  const double A = 1.0 - 0.5 * s2 / (s2 + 0.33);
  EXPECT_NEAR(oren_nayar(0.5, s, kN, kN, kN, 1.0), A * lambertian(0.5, kN, kN, 1.0), 1e-15);
}

TEST(OrenNayar, MatchesSphericalForm) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double ti = 1.4 * u(rng), pi = kTwoPi * u(rng), tr = 1.4 * u(rng), pr = kTwoPi * u(rng);
    const double got = oren_nayar(0.7, 0.35, kN, Direction::from_spherical(ti, pi),
                                  Direction::from_spherical(tr, pr), 1.0);
    EXPECT_NEAR(got, oren_nayar_reference(0.7, 0.35, ti, pi, tr, pr), 1e-13);
  }
}

TEST(OrenNayar, RetroReflectionPeak) {
  const Direction L = Direction::from_spherical(0.8, 0.0);
  const Direction mirrored = Direction::from_spherical(0.8, kPi);
  EXPECT_GT(oren_nayar(0.5, 0.5, kN, L, L, 1.0), oren_nayar(0.5, 0.5, kN, L, mirrored, 1.0));
}

TEST(TorranceSparrow, SharesSurfacePath) {
  std::mt19937_64 rng(3);
  const TorranceSparrow ts(0.3, 0.25, 1.6);
  const FmbrdfModel m({1.6, 0.3, 1.0, 0.25, 2.0, 1.0}, {4, 8, ThetaSpacing::kAngle});
  for (int i = 0; i < 200; ++i) {
    const Direction L = random_upper(rng), V = random_upper(rng);
    const ShadingGeometry g = make_shading(kN, L, V);
    const double a = ts.radiance(g, 1.0), b = surface_radiance(m, g, 1.0);
    EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, b));
    EXPECT_NEAR(torrance_sparrow(0.3, 0.25, 1.6, g, 1.0), a, 1e-12 * std::max(1.0, a));
  }
}

TEST(TorranceSparrow, PeakAtMirror) {
  // Narrow lobe: the off-specular shift from the Fresnel and cosine factors
  // stays well below the probed offsets.
  const TorranceSparrow ts(0.3, 0.05, 1.5);
  const Direction L = Direction::from_spherical(0.3, 0.0);
  const double peak = ts.radiance(make_shading(kN, L, Direction::from_spherical(0.3, kPi)), 1.0);
  for (double d : {-0.1, -0.04, -0.02, 0.02, 0.04, 0.1}) {
    const double t = 0.3 + d;
    const Direction V = t >= 0 ? Direction::from_spherical(t, kPi) : Direction::from_spherical(-t, 0.0);
    EXPECT_LT(ts.radiance(make_shading(kN, L, V), 1.0), peak);
  }
}

TEST(TorranceSparrow, Reciprocity) {
  std::mt19937_64 rng(4);
  const TorranceSparrow ts(0.3, 0.3, 1.5);
  for (int i = 0; i < 100; ++i) {
    const Direction L = random_upper(rng), V = random_upper(rng);
    const double a = ts.radiance(make_shading(kN, L, V), 1.0) / L.z();
    const double b = ts.radiance(make_shading(kN, V, L), 1.0) / V.z();
    EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, a));
  }
}

TEST(PbrdfFlat, UnpolarizedS0) {
  std::mt19937_64 rng(5);
  const PbrdfFlatParams p{1.5, 0.6, 0.2, 0.3};
  const TorranceSparrow spec(p.ks, p.sigma, p.mu);
  for (int i = 0; i < 100; ++i) {
    const Direction L = random_upper(rng), V = random_upper(rng);
    const ShadingGeometry g = make_shading(kN, L, V);
    const FramePair f = make_frames(kN, L, V);
    const Stokes4 s = pbrdf_flat(p, g, f, unpolarized(1.2));
    const double diffuse = transmittances_from_cos(p.mu, V.z()).unpolarized * p.kd / kPi *
                           transmittances_from_cos(p.mu, L.z()).unpolarized * L.z() * 1.2;
    EXPECT_NEAR(s[0], diffuse + spec.radiance(g, 1.2), 1e-12);
    EXPECT_TRUE(is_realizable(s));
  }
}

TEST(PbrdfFlat, DiffuseDolp) {
  const PbrdfFlat model({1.5, 0.6, 0.2, 0.3});
  const Direction L = Direction::from_spherical(0.5, 1.0);
  const Stokes4 atNormal = model.diffuse(make_shading(kN, L, kN), make_frames(kN, L, kN), unpolarized(1.0));
  EXPECT_NEAR(dolp(atNormal), 0.0, 1e-15);
  double prev = 0.0;
  for (int i = 1; i <= 16; ++i) {
    const Direction V = Direction::from_spherical(1.5 * i / 16.0, 2.0);
    const Stokes4 s = model.diffuse(make_shading(kN, L, V), make_frames(kN, L, V), unpolarized(1.0));
    const double d = dolp(s);
    EXPECT_GT(d, prev);
    prev = d;
  }
}

// With kappa = 0 and mu = 1 the two facet integrals decouple and Smith's
// projected-area identity int (v.m)+ D dm = cos(theta_v) (1 + Lambda(v))
// cancels the masking factors: the body term becomes (kb / pi) cos(theta_L)
// / int D d omega, a Lambertian shape. Oren-Nayar does not reduce to this.
TEST(Limits, UncorrelatedUnitIndexIsSeparable) {
  const FmbrdfParams p{1.0, 0.2, 2.0, 0.35, 1.8, 0.0};
  const FmbrdfModel m(p);
  const double hemi = kTwoPi * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                                   [&](double t) { return m.ndf()(t) * std::sin(t); }, 0.0, kHalfPi, 12,
                                   1e-15);
  std::mt19937_64 rng(6);
  double maxDiffOn = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Direction L = random_upper(rng, 1.1), V = random_upper(rng, 1.1);
    const double expected = p.kb() / kPi * L.z() / hemi;
    EXPECT_NEAR(body_radiance(m, kN, L, V, 1.0) / expected, 1.0, 2e-3);
    const double on = oren_nayar(p.kb(), p.alpha, kN, L, V, 1.0);
    maxDiffOn = std::max(maxDiffOn, std::abs(on / (p.kb() / kPi * L.z()) - 1.0));
  }
  EXPECT_GT(maxDiffOn, 0.01);
}

TEST(Limits, LargeKappaApproachesSingleFacet) {
  const double mu = 1.0, kb = 0.5, alpha = 0.3, beta = 2.0;
  const FmbrdfModel m({mu, 0.25, 2.0, alpha, beta, 300.0});
  const Direction L = Direction::from_spherical(0.6, 0.0);
  for (double t : {-0.9, -0.4, 0.0, 0.5, 1.0}) {
    const Direction V = t >= 0 ? Direction::from_spherical(t, 0.0) : Direction::from_spherical(-t, kPi);
    const double ref = single_facet_body(mu, kb, alpha, beta, kN, L, V, 1.0);
    EXPECT_NEAR(body_radiance(m, kN, L, V, 1.0) / ref, 1.0, 0.03) << t;
  }
}

TEST(ModelKind, Names) {
  for (ModelKind k : {ModelKind::kFmbrdf, ModelKind::kLambertian, ModelKind::kOrenNayar,
                      ModelKind::kTorranceSparrow, ModelKind::kPbrdfFlat})
    EXPECT_EQ(model_kind_from_string(to_string(k)), k);
  try {
    model_kind_from_string("phong");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

TEST(BaselineParams, Validation) {
  EXPECT_NO_THROW(BaselineParams{}.validate());
  BaselineParams b;
  b.albedo = -1.0;
  EXPECT_THROW(b.validate(), Error);
  b = BaselineParams{};
  b.mu = 0.5;
  EXPECT_THROW(b.validate(), Error);
}
