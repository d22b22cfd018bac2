// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "fmbrdf/error.hpp"
#include "fmbrdf/surrogate.hpp"

using namespace fmbrdf;

namespace {

Direction random_dir(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  return Direction::normalized(Eigen::Vector3d(g(rng), g(rng), g(rng)));
}

// Random N with L and V above its horizon.
void random_config(std::mt19937_64& rng, Direction& N, Direction& L, Direction& V) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  N = random_dir(rng);
  const Eigen::Matrix3d b = basis_about(N);
  L = Direction(b * Direction::from_spherical(1.3 * u(rng), kTwoPi * u(rng)).vec());
  V = Direction(b * Direction::from_spherical(1.3 * u(rng), kTwoPi * u(rng)).vec());
}

TrainingRecipe small_recipe() {
  TrainingRecipe r;
  r.nSamples = 400;
  r.quad = {8, 16, ThetaSpacing::kAngle};
  r.dataSeed = 3;
  r.train.bodyHidden = {32, 32, 32};
  r.train.smithHidden = {16, 16};
  r.train.epochs = 150;
  r.train.smithEpochs = 400;
  r.train.batchSize = 64;
  r.train.seed = 5;
  return r;
}

class SmallSurrogate : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    recipe_ = new TrainingRecipe(small_recipe());
    set_ = new TrainingSet(generate_training_set(recipe_->ranges, recipe_->nSamples, recipe_->quad,
                                                 recipe_->dataSeed));
    model_ = new SurrogateModel(train(*set_, *recipe_));
  }
  static void TearDownTestSuite() {
    delete model_;
    delete set_;
    delete recipe_;
  }
  static TrainingRecipe* recipe_;
  static TrainingSet* set_;
  static SurrogateModel* model_;
};

TrainingRecipe* SmallSurrogate::recipe_ = nullptr;
TrainingSet* SmallSurrogate::set_ = nullptr;
SurrogateModel* SmallSurrogate::model_ = nullptr;

}  // namespace

TEST(Canonicalize, CoincidentDirections) {
  const Direction N(0, 0, 1), L = Direction::from_spherical(0.4, 1.0);
  const Canonical c = canonicalize(N, L, L);
  EXPECT_NEAR(c.dphi, 0.0, 1e-12);
  EXPECT_NEAR(c.thetaL, 0.4, 1e-12);
  EXPECT_NEAR(c.thetaV, 0.4, 1e-12);
}

TEST(Canonicalize, RotationInvariant) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    Direction N, L, V;
    random_config(rng, N, L, V);
    const Canonical a = canonicalize(N, L, V);
    const Eigen::AngleAxisd rot(std::uniform_real_distribution<double>(0, kTwoPi)(rng), N.vec());
    const Canonical b = canonicalize(N, Direction(rot * L.vec()), Direction(rot * V.vec()));
    EXPECT_NEAR(a.thetaL, b.thetaL, 1e-12);
    EXPECT_NEAR(a.thetaV, b.thetaV, 1e-12);
    EXPECT_NEAR(a.dphi, b.dphi, 1e-12);
    EXPECT_GE(a.dphi, 0.0);
    EXPECT_LE(a.dphi, kPi);
  }
}

TEST(Canonicalize, FrameMapRoundTrip) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    Direction N, L, V;
    random_config(rng, N, L, V);
    const Canonical c = canonicalize(N, L, V);
    const Stokes4 s(1.0, 0.3, -0.4, 0.0);
    EXPECT_LT((c.frameMap.apply(c.frameMap.invert(s)) - s).norm(), 1e-12);
    EXPECT_LT((c.frameMap.invert(c.frameMap.apply(s)) - s).norm(), 1e-12);
  }
}

// The oracle evaluated in the canonical placement and mapped back agrees with
// the oracle evaluated in the caller's placement.
TEST(Canonicalize, MapsOracleStokes) {
  std::mt19937_64 rng(3);
  const FmbrdfModel m({1.5, 0.3, 2.0, 0.3, 2.0, 5.0}, {16, 32, ThetaSpacing::kAngle});
  for (int i = 0; i < 10; ++i) {
    Direction N, L, V;
    random_config(rng, N, L, V);
    const Canonical c = canonicalize(N, L, V);
    const Stokes4 world = body_stokes(m, N, L, V, make_frames(N, L, V), unpolarized(1.0));
    const Stokes4 canon = body_stokes(m, c.n(), c.l(), c.v(), make_frames(c.n(), c.l(), c.v()), unpolarized(1.0));
    EXPECT_LT((c.frameMap.apply(canon) - world).norm(), 1e-6 * world[0]);
  }
}

TEST(TrainingSet, EmptyAndDeterministic) {
  const ParamRanges r;
  const BodyQuadrature q{8, 16, ThetaSpacing::kAngle};
  const TrainingSet e = generate_training_set(r, 0, q, 1);
  EXPECT_EQ(e.size(), 0);
  const TrainingSet a = generate_training_set(r, 20, q, 9), b = generate_training_set(r, 20, q, 9);
  EXPECT_EQ(a.bodyX, b.bodyX);
  EXPECT_EQ(a.bodyY, b.bodyY);
  EXPECT_EQ(a.smithY, b.smithY);
  const TrainingSet c = generate_training_set(r, 20, q, 10);
  EXPECT_NE(a.bodyX, c.bodyX);
  const DomainBox box = r.body_box();
  for (int i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(box.contains(a.bodyX.col(i)));
    EXPECT_GT(a.bodyY(0, i), 0.0);
  }
}

TEST(TrainingSet, ResolutionSensitivity) {
  const ParamRanges r;
  const TrainingSet ts = generate_training_set(r, 100, {16, 32, ThetaSpacing::kAngle}, 4);
  // Every 100th sample (1%) re-evaluated at doubled resolution.
  for (int i = 0; i < ts.size(); i += 100) {
    const Eigen::Vector3d fine = body_target(ts.bodyX.col(i), {32, 64, ThetaSpacing::kAngle});
    EXPECT_LT(std::abs(fine[0] / ts.bodyY(0, i) - 1.0), 0.005);
  }
}

TEST(Train, ConstantTargets) {
  const ParamRanges r;
  TrainingSet ts = generate_training_set(r, 0, {8, 16, ThetaSpacing::kAngle}, 1);
  const int n = 200;
  ts.bodyX.resize(kBodyInputs, n);
  ts.bodyY.resize(3, n);
  ts.smithX.resize(kSmithInputs, n);
  ts.smithY.resize(n);
  const DomainBox box = r.body_box(), sbox = r.smith_box();
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < kBodyInputs; ++d) ts.bodyX(d, i) = box.lo[d] + (box.hi[d] - box.lo[d]) * u(rng);
    for (int d = 0; d < kSmithInputs; ++d) ts.smithX(d, i) = sbox.lo[d] + (sbox.hi[d] - sbox.lo[d]) * u(rng);
    ts.bodyY.col(i) << 0.7, 0.07, 0.0;
    ts.smithY[i] = 0.1;
  }
  TrainingRecipe rec = small_recipe();
  rec.train.epochs = 300;
  const SurrogateModel m = train(ts, rec);
  EXPECT_LT(m.validation.maxRelErrS0, 0.01);
  EXPECT_LT(m.validation.maxAbsErrDolp, 0.01);
  EXPECT_LT(m.validation.maxRelErrG1, 0.01);
}

TEST(Train, RejectsEmptySet) {
  const TrainingSet ts = generate_training_set(ParamRanges{}, 0, {8, 16, ThetaSpacing::kAngle}, 1);
  EXPECT_THROW(train(ts, small_recipe()), Error);
}

TEST(ValidationSplit, Deterministic) {
  const auto a = validation_indices(1000, 0.1, 3), b = validation_indices(1000, 0.1, 3);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 100u);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
}

TEST_F(SmallSurrogate, TrainingIsDeterministic) {
  const SurrogateModel again = train(*set_, *recipe_);
  EXPECT_EQ(again.validation.maxRelErrS0, model_->validation.maxRelErrS0);
  Eigen::VectorXd x(kBodyInputs);
  x << 0.4, 0.7, 1.1, 0.3, 2.0, 6.0, 1.5;
  EXPECT_EQ(again.body_sum(x), model_->body_sum(x));
}

TEST_F(SmallSurrogate, OutputsArePhysical) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const DomainBox& box = model_->bodyBox;
  for (int i = 0; i < 2000; ++i) {
    Eigen::VectorXd x(kBodyInputs);
    for (int d = 0; d < kBodyInputs; ++d) x[d] = box.lo[d] + (box.hi[d] - box.lo[d]) * u(rng);
    const Eigen::Vector3d s = model_->body_sum(x);
    EXPECT_GT(s[0], 0.0);
    EXPECT_LE(std::hypot(s[1], s[2]) / s[0], 1.0);
    const double lam = model_->lambda(x[1], x[3], x[4]);
    EXPECT_GE(lam, 0.0);
  }
}

TEST_F(SmallSurrogate, DomainViolation) {
  Eigen::VectorXd x(kBodyInputs);
  x << 0.4, 0.7, 1.1, 0.3, 2.0, 60.0, 1.5;
  try {
    model_->body_sum(x);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSurrogate);
    EXPECT_STREQ(e.what(), "surrogate domain violation");
  }
}

TEST_F(SmallSurrogate, InputGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  const DomainBox& box = model_->bodyBox;
  for (int k = 0; k < 20; ++k) {
    Eigen::VectorXd x(kBodyInputs);
    for (int d = 0; d < kBodyInputs; ++d) x[d] = box.lo[d] + (box.hi[d] - box.lo[d]) * u(rng);
    Eigen::MatrixXd jac;
    model_->body_sum(x, &jac);
    for (int d = 0; d < kBodyInputs; ++d) {
      const double h = 1e-4 * std::max(1.0, std::abs(x[d]));
      Eigen::VectorXd xp = x, xm = x;
      xp[d] += h;
      xm[d] -= h;
      const Eigen::Vector3d fd = (model_->body_sum(xp) - model_->body_sum(xm)) / (2 * h);
      for (int o = 0; o < 3; ++o)
        EXPECT_NEAR(jac(o, d), fd[o], 1e-3 * std::max(std::abs(fd[o]), 1e-3)) << d << " " << o;
    }
    Eigen::Vector3d g;
    const double lam = model_->lambda(x[1], x[3], x[4], &g);
    for (int d = 0; d < 3; ++d) {
      Eigen::Vector3d xp(x[1], x[3], x[4]), xm = xp;
      const double h = 1e-4;
      xp[d] += h;
      xm[d] -= h;
      const double fd = (model_->lambda(xp[0], xp[1], xp[2]) - model_->lambda(xm[0], xm[1], xm[2])) / (2 * h);
      EXPECT_NEAR(g[d], fd, 1e-3 * std::max(std::abs(fd), 1e-3));
    }
    (void)lam;
  }
}

TEST_F(SmallSurrogate, ParameterJacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  const FmbrdfParams p{1.6, 0.3, 1.8, 0.35, 1.9, 6.0};
  for (int k = 0; k < 5; ++k) {
    Direction N, L, V;
    random_config(rng, N, L, V);
    if (N.dot(L) < 0.2 || N.dot(V) < 0.2) continue;
    const FramePair fr = make_frames(N, L, V);
    const Ndf ndf(p.alpha, p.beta);
    const SurrogateEval e = surrogate_eval(*model_, p, ndf, N, L, V, fr, unpolarized(1.0), true);
    for (int j = 0; j < 6; ++j) {
      double v[6] = {p.mu, p.ks, p.rk, p.alpha, p.beta, p.kappa};
      const double h = 1e-4 * std::max(1.0, std::abs(v[j]));
      auto at = [&](double delta) {
        double w[6];
        std::copy(v, v + 6, w);
        w[j] += delta;
        const FmbrdfParams q{w[0], w[1], w[2], w[3], w[4], w[5]};
        const SurrogateEval r = surrogate_eval(*model_, q, Ndf(q.alpha, q.beta), N, L, V, fr, unpolarized(1.0));
        return Stokes4(r.surface + r.body);
      };
      const Stokes4 fd = (at(h) - at(-h)) / (2 * h);
      const Stokes4 an = e.dSurface.col(j) + e.dBody.col(j);
      const double scale = std::max(1e-6, (e.surface + e.body)[0]);
      for (int o = 0; o < 3; ++o) EXPECT_NEAR(an[o], fd[o], 1e-3 * std::max(std::abs(fd[o]), 1e-2 * scale)) << j << " " << o;
    }
  }
}

TEST_F(SmallSurrogate, ReciprocityWithinValidationTolerance) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  const DomainBox& box = model_->bodyBox;
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    Eigen::VectorXd x(kBodyInputs);
    for (int d = 0; d < kBodyInputs; ++d) x[d] = box.lo[d] + (box.hi[d] - box.lo[d]) * u(rng);
    Eigen::VectorXd y = x;
    std::swap(y[0], y[1]);
    worst = std::max(worst, std::abs(model_->body_sum(x)[0] / model_->body_sum(y)[0] - 1.0));
  }
  EXPECT_LE(worst, 2.0 * model_->validation.maxRelErrS0 + 1e-3);
}

TEST_F(SmallSurrogate, SerializationRoundTrip) {
  std::stringstream a;
  model_->write(a);
  const std::string bytes = a.str();
  std::stringstream in(bytes);
  const SurrogateModel back = SurrogateModel::read(in);
  std::stringstream b;
  back.write(b);
  EXPECT_EQ(b.str(), bytes);
  Eigen::VectorXd x(kBodyInputs);
  x << 0.4, 0.7, 1.1, 0.3, 2.0, 6.0, 1.5;
  EXPECT_EQ(back.body_sum(x), model_->body_sum(x));
  EXPECT_EQ(back.validation.maxRelErrS0, model_->validation.maxRelErrS0);
}

TEST_F(SmallSurrogate, CorruptedBinaryRejected) {
  std::stringstream a;
  model_->write(a);
  std::string bytes = a.str();
  bytes[1] ^= 0x5a;
  std::stringstream bad(bytes);
  try {
    SurrogateModel::read(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
  std::stringstream truncated(a.str().substr(0, a.str().size() / 2));
  EXPECT_THROW(SurrogateModel::read(truncated), Error);
}

TEST_F(SmallSurrogate, RevalidateReplaysMetrics) {
  const ValidationMetrics v = revalidate(*model_);
  EXPECT_NEAR(v.maxRelErrS0, model_->validation.maxRelErrS0, 1e-6);
  EXPECT_NEAR(v.maxAbsErrDolp, model_->validation.maxAbsErrDolp, 1e-6);
  EXPECT_EQ(v.count, model_->validation.count);
}

TEST_F(SmallSurrogate, BatchMatchesSingle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const DomainBox& box = model_->bodyBox;
  Eigen::MatrixXd xs(kBodyInputs, 16);
  for (int c = 0; c < 16; ++c)
    for (int d = 0; d < kBodyInputs; ++d) xs(d, c) = box.lo[d] + (box.hi[d] - box.lo[d]) * u(rng);
  SurrogateModel::BodyTape tape;
  const Eigen::MatrixXd out = model_->body_batch(xs, &tape);
  Eigen::MatrixXd adj = Eigen::MatrixXd::Random(3, 16);
  const Eigen::MatrixXd vjp = model_->body_batch_vjp(xs, tape, adj);
  for (int c = 0; c < 16; ++c) {
    Eigen::MatrixXd jac;
    const Eigen::Vector3d s = model_->body_sum(xs.col(c), &jac);
    EXPECT_LT((out.col(c) - s).norm(), 1e-12);
    EXPECT_LT((vjp.col(c) - jac.transpose() * adj.col(c)).norm(), 1e-10);
  }
}

TEST_F(SmallSurrogate, SurfaceUsesNetworkLambda) {
  const FmbrdfParams p{1.5, 0.3, 2.0, 0.3, 2.0, 5.0};
  const FmbrdfModel m(p, {8, 16, ThetaSpacing::kAngle});
  std::mt19937_64 rng(12);
  for (int k = 0; k < 50; ++k) {
    Direction N, L, V;
    random_config(rng, N, L, V);
    const ShadingGeometry g = make_shading(N, L, V);
    const FramePair fr = make_frames(N, L, V);
    const Stokes4 oracle = surface_stokes(m, g, fr, unpolarized(1.0));
    const Stokes4 sur = surrogate_surface(*model_, p, m.ndf(), g, fr, unpolarized(1.0));
    // Same expression with the table Lambda swapped for the network's.
    const double tL = std::acos(g.cosNL), tV = std::acos(g.cosNV);
    const double swap = (1.0 + smith_lambda(m.smith(), tL)) * (1.0 + smith_lambda(m.smith(), tV)) /
                        ((1.0 + model_->lambda(tL, p.alpha, p.beta)) * (1.0 + model_->lambda(tV, p.alpha, p.beta)));
    EXPECT_LT((sur - oracle * swap).norm(), 1e-10 * oracle[0] + 1e-300);
  }
}
