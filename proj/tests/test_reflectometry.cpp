// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fmbrdf/error.hpp"
#include "fmbrdf/parallel.hpp"
#include "fmbrdf/reflectometry.hpp"

using namespace fmbrdf;

namespace {

const FmbrdfParams kTruth{1.5, 0.3, 2.0, 0.3, 2.0, 5.0};

SceneSpec sphere_scene(int res) {
  SceneSpec s;
  s.width = s.height = res;
  s.light = LightSource::unpolarized(Direction::from_spherical(0.6, 0.3), 1.0);
  s.model.fmbrdf = kTruth;
  s.model.quad = {8, 16, ThetaSpacing::kAngle};
  return s;
}

class WithSurrogate : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    TrainingRecipe r;
    r.nSamples = 300;
    r.quad = {8, 16, ThetaSpacing::kAngle};
    r.train.bodyHidden = {32, 32, 32};
    r.train.smithHidden = {16, 16};
    r.train.epochs = 100;
    r.train.smithEpochs = 300;
    r.train.batchSize = 64;
    const TrainingSet ts = generate_training_set(r.ranges, r.nSamples, r.quad, r.dataSeed);
    model_ = new SurrogateModel(train(ts, r));
    SceneSpec s = sphere_scene(16);
    s.model.mode = EvalMode::kSurrogate;
    obs_ = new Observation(make_observation(render(s, model_), s.light.L, s.V, 1.0));
  }
  static void TearDownTestSuite() {
    delete obs_;
    delete model_;
  }
  static SurrogateModel* model_;
  static Observation* obs_;
};

SurrogateModel* WithSurrogate::model_ = nullptr;
Observation* WithSurrogate::obs_ = nullptr;

Observation uniform_dolp_observation(int n, double rho) {
  Observation o;
  o.width = n;
  o.height = 1;
  o.L = Direction(0, 0, 1);
  o.V = Direction(0, 0, 1);
  o.N.assign(n, Direction(0, 0, 1));
  o.intensity.assign(n, 0.1);
  o.dolp.assign(n, rho);
  o.mask.assign(n, 1);
  return o;
}

}  // namespace

TEST(Weights, IdenticalDolpGivesUnitWeights) {
  const Observation o = uniform_dolp_observation(100, 0.05);
  for (double w : compute_weights(o)) EXPECT_EQ(w, 1.0);
}

TEST(Weights, OutliersBalanceInliers) {
  Observation o = uniform_dolp_observation(1000, 0.05);
  for (int i = 0; i < 10; ++i) o.dolp[100 * i + 7] = 0.8;
  o.mask[3] = 0;
  const std::vector<double> w = compute_weights(o);
  EXPECT_EQ(w[3], 0.0);
  for (int i = 0; i < 1000; ++i) {
    if (i == 3) continue;
    EXPECT_EQ(w[i], i % 100 == 7 ? 989.0 / 10.0 : 1.0) << i;
  }
}

TEST(Weights, HighlightPixelsFlagged) {
  SceneSpec s = sphere_scene(24);
  s.light = LightSource::unpolarized(Direction::from_spherical(0.3, 0.0), 1.0);
  s.model.fmbrdf.ks = 0.6;
  const PolarimetricImage img = render(s);
  const Observation o = make_observation(img, s.light.L, s.V, 1.0);
  const std::vector<double> w = compute_weights(o);
  // The pixel with the brightest specular response has the largest DoLP.
  std::size_t top = 0;
  for (std::size_t i : o.valid_indices())
    if (o.dolp[i] > o.dolp[top]) top = i;
  EXPECT_GT(w[top], 1.0);
  int flagged = 0;
  for (std::size_t i : o.valid_indices()) flagged += w[i] != 1.0;
  EXPECT_LT(flagged, static_cast<int>(o.valid_count()) / 2);
}

TEST(Weights, EmptyMask) {
  Observation o = uniform_dolp_observation(5, 0.1);
  o.mask.assign(5, 0);
  EXPECT_THROW(compute_weights(o), Error);
}

TEST(Observation, MaskThresholds) {
  const SceneSpec s = sphere_scene(16);
  const PolarimetricImage img = render(s);
  const Observation o = make_observation(img, s.light.L, s.V, 1.0);
  EXPECT_GT(o.valid_count(), 0u);
  for (std::size_t i : o.valid_indices()) {
    EXPECT_GE(o.N[i].dot(s.V), 0.1);
    EXPECT_GE(o.N[i].dot(s.light.L), 0.1);
    EXPECT_GE(o.dolp[i], 0.0);
    EXPECT_LE(o.dolp[i], 1.0);
  }
}

TEST(Reparameterization, RoundTrip) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Bounds b;
  const Bounds narrowed = b.intersect(ParamRanges{});
  for (const Bounds* bounds : std::initializer_list<const Bounds*>{&b, &narrowed}) {
    for (int i = 0; i < 1000; ++i) {
      ParamVector p;
      for (int k = 0; k < 6; ++k) {
        const ParamBound& pb = bounds->b[k];
        const double span = pb.transform == Transform::kLogistic ? pb.hi - pb.lo : 5.0;
        p[k] = pb.lo + span * (0.001 + 0.998 * u(rng));
      }
      const ParamVector back = bounds->from_unconstrained(bounds->to_unconstrained(p));
      for (int k = 0; k < 6; ++k) EXPECT_NEAR(back[k], p[k], 1e-12 * std::max(1.0, std::abs(p[k])));
    }
  }
}

TEST(Reparameterization, DerivativeMatchesFiniteDifferences) {
  for (Transform t : {Transform::kLogistic, Transform::kExp, Transform::kSoftplus}) {
    const ParamBound pb{0.5, 2.5, t};
    for (double u : {-3.0, -0.5, 0.0, 0.7, 2.0}) {
      const double fd = (pb.forward(u + 1e-6) - pb.forward(u - 1e-6)) / 2e-6;
      EXPECT_NEAR(pb.derivative(u), fd, 1e-8);
      EXPECT_TRUE(pb.contains(pb.forward(u)));
    }
    EXPECT_EQ(transform_from_string(to_string(t)), t);
  }
  EXPECT_THROW(transform_from_string("tanh"), Error);
}

TEST(Reparameterization, IntersectRejectsDisjoint) {
  Bounds b;
  b.b[0] = {2.5, 3.0, Transform::kLogistic};
  EXPECT_THROW(b.intersect(ParamRanges{}), Error);
}

TEST(Loss, ZeroAtTruthInOracleMode) {
  const SceneSpec s = sphere_scene(12);
  const Observation o = make_observation(render(s), s.light.L, s.V, 1.0);
  const LossFunction f(o, compute_weights(o), EvalMode::kOracle, nullptr, s.model.quad);
  EXPECT_LT(f.value(kTruth), 1e-20);
  FmbrdfParams off = kTruth;
  off.alpha = 0.4;
  EXPECT_GT(f.value(off), 1e-8);
}

// A ten-pixel objective written out pixel by pixel against eval_total.
TEST(Loss, MatchesDirectImplementation) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Observation o;
  o.width = 10;
  o.height = 1;
  o.L = Direction::from_spherical(0.5, 0.2);
  o.V = Direction(0, 0, 1);
  for (int i = 0; i < 10; ++i) {
    o.N.push_back(Direction::from_spherical(0.6 * u(rng), kTwoPi * u(rng)));
    o.intensity.push_back(0.2 * u(rng));
    o.dolp.push_back(0.3 * u(rng));
    o.mask.push_back(i == 4 ? 0 : 1);
  }
  o.dolp[7] = 0.95;
  const std::vector<double> w = compute_weights(o);
  const FmbrdfParams p{1.6, 0.2, 1.5, 0.35, 1.8, 3.0};
  const FmbrdfModel m(p, {16, 32, ThetaSpacing::kAngle});
  double si = 0.0, sd = 0.0, sw = 0.0;
  int count = 0;
  for (int i = 0; i < 10; ++i) {
    if (!o.mask[i]) continue;
    const EvalResult r = eval_total(m, o.N[i], o.V, LightSource::unpolarized(o.L, 1.0));
    const double rho = std::hypot(r.stokes[1], r.stokes[2]) / r.stokes[0];
    si += (o.intensity[i] - r.stokes[0]) * (o.intensity[i] - r.stokes[0]);
    sd += w[i] * (o.dolp[i] - rho) * (o.dolp[i] - rho);
    sw += w[i];
    ++count;
  }
  const double expected = si / count + sd / sw;
  EXPECT_NEAR(loss(p, o, w), expected, 1e-12 * expected);
  EXPECT_GT(w[7], 1.0);
}

TEST(Loss, MisalignedWeights) {
  const Observation o = uniform_dolp_observation(5, 0.1);
  EXPECT_THROW(LossFunction(o, std::vector<double>(4, 1.0), EvalMode::kOracle, nullptr), Error);
  try {
    LossFunction(o, std::vector<double>(5, 1.0), EvalMode::kSurrogate, nullptr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

TEST_F(WithSurrogate, ZeroAtTruth) {
  const LossFunction f(*obs_, compute_weights(*obs_), EvalMode::kSurrogate, model_);
  EXPECT_LT(f.value(kTruth), 1e-20);
}

TEST_F(WithSurrogate, DoublingResidualsQuadruplesTerms) {
  const LossFunction ref(*obs_, compute_weights(*obs_), EvalMode::kSurrogate, model_);
  const FmbrdfParams p{1.6, 0.25, 1.7, 0.33, 2.2, 4.0};
  const Rendered r = ref.render(p);
  Observation a = *obs_, b = *obs_;
  const std::vector<std::size_t> idx = obs_->valid_indices();
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const std::size_t i = idx[j];
    a.intensity[i] = r.intensity[j] + (obs_->intensity[i] - r.intensity[j]);
    b.intensity[i] = r.intensity[j] + 2.0 * (obs_->intensity[i] - r.intensity[j]);
    a.dolp[i] = r.dolp[j] + (obs_->dolp[i] - r.dolp[j]);
    b.dolp[i] = r.dolp[j] + 2.0 * (obs_->dolp[i] - r.dolp[j]);
  }
  const std::vector<double> w = compute_weights(*obs_);
  const LossTerms ta = LossFunction(a, w, EvalMode::kSurrogate, model_).terms(p);
  const LossTerms tb = LossFunction(b, w, EvalMode::kSurrogate, model_).terms(p);
  EXPECT_NEAR(tb.intensity, 4.0 * ta.intensity, 1e-9 * tb.intensity);
  EXPECT_NEAR(tb.dolp, 4.0 * ta.dolp, 1e-9 * tb.dolp);
}

TEST_F(WithSurrogate, GradientMatchesFiniteDifferences) {
  const LossFunction f(*obs_, compute_weights(*obs_), EvalMode::kSurrogate, model_);
  const FmbrdfParams p{1.6, 0.25, 1.7, 0.33, 2.2, 4.0};
  ParamVector g;
  f.value_and_gradient(p, g);
  const ParamVector v = to_vector(p);
  for (int k = 0; k < 6; ++k) {
    const double h = 1e-4 * std::abs(v[k]);
    ParamVector vp = v, vm = v;
    vp[k] += h;
    vm[k] -= h;
    const double fd = (f.value(from_vector(vp)) - f.value(from_vector(vm))) / (2 * h);
    EXPECT_NEAR(g[k], fd, 1e-3 * std::abs(fd) + 1e-12) << kParamNames[k];
  }
  EXPECT_EQ(gradient(p, *obs_, compute_weights(*obs_), EvalMode::kSurrogate, model_), g);
}

TEST_F(WithSurrogate, OverBrightPushesKsDown) {
  const std::vector<double> w = compute_weights(*obs_);
  const LossFunction ref(*obs_, w, EvalMode::kSurrogate, model_);
  const Rendered r = ref.render(kTruth);
  Observation dim = *obs_;
  const std::vector<std::size_t> idx = obs_->valid_indices();
  for (std::size_t j = 0; j < idx.size(); ++j) dim.intensity[idx[j]] = 0.5 * r.intensity[j];
  ParamVector g;
  LossFunction(dim, w, EvalMode::kSurrogate, model_).value_and_gradient(kTruth, g);
  EXPECT_GT(g[1], 0.0);
}

TEST_F(WithSurrogate, FitFromTruthStaysPut) {
  FitConfig cfg;
  cfg.init = kTruth;
  cfg.iterations = 300;
  const FitReport r = fit(*obs_, cfg, model_);
  const ParamVector a = to_vector(r.params), b = to_vector(kTruth);
  for (int k = 0; k < 6; ++k) EXPECT_LT(std::abs(a[k] / b[k] - 1.0), 0.01) << kParamNames[k];
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.finalLoss, r.initialLoss);
}

TEST_F(WithSurrogate, FitIsDeterministicAndThreadIndependent) {
  FitConfig cfg;
  cfg.iterations = 60;
  cfg.multiStart = true;
  cfg.starts = 2;
  cfg.seed = 4;
  set_thread_count(1);
  const FitReport a = fit(*obs_, cfg, model_);
  set_thread_count(3);
  const FitReport b = fit(*obs_, cfg, model_);
  set_thread_count(0);
  EXPECT_EQ(to_vector(a.params), to_vector(b.params));
  EXPECT_EQ(a.lossTrajectory, b.lossTrajectory);
  EXPECT_EQ(a.startLosses.size(), 2u);
  EXPECT_TRUE(a.converged);
  EXPECT_LT(a.finalLoss, a.initialLoss);
  EXPECT_EQ(a.pixels, static_cast<int>(obs_->valid_count()));
}

TEST_F(WithSurrogate, FitReducesLossFromDefaults) {
  FitConfig cfg;
  cfg.iterations = 400;
  const FitReport r = fit(*obs_, cfg, model_);
  EXPECT_LT(r.finalLoss, 0.1 * r.initialLoss);
  EXPECT_EQ(r.lossTrajectory.size(), 401u);
  EXPECT_NE(r.to_json().find("\"converged\""), std::string::npos);
}

TEST(FitConfig, Validation) {
  FitConfig c;
  EXPECT_NO_THROW(c.validate());
  c.iterations = 0;
  EXPECT_THROW(c.validate(), Error);
  c = FitConfig{};
  c.step = -1.0;
  EXPECT_THROW(c.validate(), Error);
  const Observation o = uniform_dolp_observation(5, 0.1);
  try {
    fit(o, FitConfig{}, nullptr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}
