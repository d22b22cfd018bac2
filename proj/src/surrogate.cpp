// SPDX-License-Identifier: Apache-2.0

#include "fmbrdf/surrogate.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "fmbrdf/error.hpp"
#include "fmbrdf/parallel.hpp"

namespace fmbrdf {

// ---------------------------------------------------------------------------
// Canonical configuration

Stokes4 FrameMap::apply(const Stokes4& c) const {
  const double s2 = mirrored ? -c[2] : c[2];
  return Stokes4(c[0], cos2psi * c[1] + sin2psi * s2, -sin2psi * c[1] + cos2psi * s2, c[3]);
}

Stokes4 FrameMap::invert(const Stokes4& w) const {
  const double s1 = cos2psi * w[1] - sin2psi * w[2];
  const double s2 = sin2psi * w[1] + cos2psi * w[2];
  return Stokes4(w[0], s1, mirrored ? -s2 : s2, w[3]);
}

Direction Canonical::l() const {
  return Direction::from_spherical(thetaL, dphi);
}

Direction Canonical::v() const { return Direction::from_spherical(thetaV, 0.0); }

Canonical canonicalize(const Direction& N, const Direction& L, const Direction& V) {
  const Eigen::Vector3d& n = N.vec();
  constexpr double kTiny = 1e-12;
  const Eigen::Vector3d vp = V.vec() - V.dot(N) * n;
  const Eigen::Vector3d lp = L.vec() - L.dot(N) * n;
  Eigen::Vector3d e1;
  if (vp.norm() > kTiny) {
    e1 = vp.normalized();
  } else if (lp.norm() > kTiny) {
    e1 = lp.normalized();
  } else {
    e1 = basis_about(N).col(0);
  }
  Eigen::Vector3d e2 = n.cross(e1);
  Canonical c;
  const double ly = L.vec().dot(e2);
  c.frameMap.mirrored = ly < 0.0;
  if (c.frameMap.mirrored) e2 = -e2;
  c.thetaL = angle_between(L, N);
  c.thetaV = angle_between(V, N);
  c.dphi = lp.norm() > kTiny ? std::atan2(std::abs(ly), L.vec().dot(e1)) : 0.0;

  // Canonical outgoing frame carried into world coordinates, then compared
  // with the caller's outgoing frame about the shared propagation axis.
  const PolarizationFrame fc = frame_about(-c.v(), c.n());
  Eigen::Matrix3d m;
  m.col(0) = e1;
  m.col(1) = e2;
  m.col(2) = n;
  Eigen::Vector3d gx = m * fc.xAxis.vec();
  const Eigen::Vector3d gy = m * fc.yAxis.vec();
  if (c.frameMap.mirrored) gx = -gx;
  const PolarizationFrame fw = frame_about(-V, N);
  const double psi = std::atan2(fw.xAxis.vec().dot(gy), fw.xAxis.vec().dot(gx));
  c.frameMap.cos2psi = std::cos(2.0 * psi);
  c.frameMap.sin2psi = std::sin(2.0 * psi);
  return c;
}

// ---------------------------------------------------------------------------
// Oracle targets

namespace {

Eigen::Vector3d canonical_sum(const BodyIntegrator& body, double mu, double thetaL,
                              double thetaV, double dphi) {
  const Direction n(0.0, 0.0, 1.0);
  const Direction l = Direction::from_spherical(thetaL, dphi);
  const Direction v = Direction::from_spherical(thetaV, 0.0);
  const FramePair frames = make_frames(n, l, v);
  return body.integrate(mu, n, l, v, &frames, Stokes4(1.0, 0.0, 0.0, 0.0));
}

// Ndf, correlation and integrator for one parameter point; the Smith table is
// not needed for the raw sum.
struct BodyOracle {
  Ndf ndf;
  CorrelationFn corr;
  BodyIntegrator body;
  BodyOracle(double alpha, double beta, double kappa, const BodyQuadrature& q)
      : ndf(alpha, beta),
        corr(ndf, kappa),
        body(ndf, corr, HemisphereRule(q.nTheta, q.nPhi, q.spacing)) {}
};

// Sobol points (Joe-Kuo direction numbers) with a random digital shift.
class Sobol {
 public:
  static constexpr int kDims = 7;

  explicit Sobol(std::uint64_t seed) {
    struct Poly {
      int s;
      unsigned a;
      std::array<unsigned, 4> m;
    };
    static constexpr Poly kPolys[kDims - 1] = {{1, 0, {1, 0, 0, 0}}, {2, 1, {1, 3, 0, 0}},
                                               {3, 1, {1, 3, 1, 0}}, {3, 2, {1, 1, 1, 0}},
                                               {4, 1, {1, 1, 3, 3}}, {4, 4, {1, 3, 5, 13}}};
    for (int k = 0; k < 32; ++k) v_[0][k] = 1u << (31 - k);
    for (int d = 1; d < kDims; ++d) {
      const Poly& p = kPolys[d - 1];
      for (int k = 0; k < p.s; ++k) v_[d][k] = p.m[k] << (31 - k);
      for (int k = p.s; k < 32; ++k) {
        std::uint32_t x = v_[d][k - p.s] ^ (v_[d][k - p.s] >> p.s);
        for (int j = 1; j < p.s; ++j)
          if ((p.a >> (p.s - 1 - j)) & 1u) x ^= v_[d][k - j];
        v_[d][k] = x;
      }
    }
    std::mt19937_64 rng(seed);
    for (int d = 0; d < kDims; ++d) shift_[d] = static_cast<std::uint32_t>(rng() >> 32);
  }

  double operator()(std::uint64_t i, int d) const {
    std::uint32_t x = shift_[d];
    for (int k = 0; i != 0 && k < 32; ++k, i >>= 1)
      if (i & 1u) x ^= v_[d][k];
    return (static_cast<double>(x) + 0.5) / 4294967296.0;
  }

 private:
  std::uint32_t v_[kDims][32];
  std::uint32_t shift_[kDims];
};

// Body Stokes per unit (kb / pi) E0 cos(thetaL). The Smith factors of the
// prefactor cancel most of the grazing growth of the raw sum.
Eigen::Vector3d normalized_body(const BodyOracle& o, double mu, double thetaL, double thetaV,
                                double dphi) {
  const double g1L = 1.0 / (1.0 + smith_lambda_direct(o.ndf, thetaL, o.ndf.alpha()));
  const double g1V = 1.0 / (1.0 + smith_lambda_direct(o.ndf, thetaV, o.ndf.alpha()));
  return canonical_sum(o.body, mu, thetaL, thetaV, dphi) *
         (g1L * g1V / (std::cos(thetaL) * std::cos(thetaV)));
}

}  // namespace

Eigen::Vector3d body_target(const Eigen::VectorXd& x, const BodyQuadrature& quad) {
  const BodyOracle o(x[3], x[4], x[5], quad);
  return normalized_body(o, x[6], x[0], x[1], x[2]);
}

DomainBox ParamRanges::body_box() const {
  DomainBox b;
  b.lo.resize(kBodyInputs);
  b.hi.resize(kBodyInputs);
  b.lo << 0.0, 0.0, 0.0, alphaLo, betaLo, kappaLo, muLo;
  b.hi << thetaMax, thetaMax, kPi, alphaHi, betaHi, kappaHi, muHi;
  return b;
}

DomainBox ParamRanges::smith_box() const {
  DomainBox b;
  b.lo.resize(kSmithInputs);
  b.hi.resize(kSmithInputs);
  b.lo << 0.0, alphaLo, betaLo;
  b.hi << thetaMax, alphaHi, betaHi;
  return b;
}

TrainingSet generate_training_set(const ParamRanges& ranges, int nSamples,
                                  const BodyQuadrature& quad, std::uint64_t seed,
                                  int geometriesPerParam, int smithSamples) {
  if (nSamples < 0) throw_domain("sample count must be >= 0");
  if (geometriesPerParam < 1) throw_domain("geometries per parameter point must be >= 1");
  if (smithSamples < 0) smithSamples = nSamples;
  const DomainBox box = ranges.body_box();
  TrainingSet ts;
  ts.bodyX.resize(kBodyInputs, nSamples);
  ts.bodyY.resize(3, nSamples);
  const Sobol sobol(seed);
  const int groups = (nSamples + geometriesPerParam - 1) / geometriesPerParam;
  auto scaled = [&](std::uint64_t i, int d) {
    return box.lo[d] + (box.hi[d] - box.lo[d]) * sobol(i, d);
  };
  parallel_for(static_cast<std::size_t>(groups), [&](std::size_t g) {
    // Parameters come from the first point of the group.
    const std::uint64_t head = g * static_cast<std::uint64_t>(geometriesPerParam);
    const double alpha = scaled(head, 3), beta = scaled(head, 4);
    const double kappa = scaled(head, 5), mu = scaled(head, 6);
    const BodyOracle o(alpha, beta, kappa, quad);
    for (int j = 0; j < geometriesPerParam; ++j) {
      const std::uint64_t i = head + j;
      if (i >= static_cast<std::uint64_t>(nSamples)) break;
      const double tl = scaled(i, 0), tv = scaled(i, 1), dp = scaled(i, 2);
      ts.bodyX.col(i) << tl, tv, dp, alpha, beta, kappa, mu;
      ts.bodyY.col(i) = normalized_body(o, mu, tl, tv, dp);
    }
  });
  const DomainBox sbox = ranges.smith_box();
  const Sobol smithSobol(seed ^ 0x5851f42d4c957f2dULL);
  ts.smithX.resize(kSmithInputs, smithSamples);
  ts.smithY.resize(smithSamples);
  parallel_for(static_cast<std::size_t>(smithSamples), [&](std::size_t i) {
    Eigen::Vector3d x;
    for (int d = 0; d < kSmithInputs; ++d)
      x[d] = sbox.lo[d] + (sbox.hi[d] - sbox.lo[d]) * smithSobol(i, d);
    const Ndf ndf(x[1], x[2]);
    ts.smithX.col(i) = x;
    ts.smithY[i] = std::log1p(smith_lambda_direct(ndf, x[0], x[1]));
  });
  if (!ts.bodyY.allFinite() || !ts.smithY.allFinite()) throw_evaluation("non-finite training target");
  return ts;
}

}  // namespace fmbrdf


// ---------------------------------------------------------------------------
// Networks

namespace fmbrdf {

namespace {

double silu(double z) { return z / (1.0 + std::exp(-z)); }

double silu_grad(double z) {
  const double sg = 1.0 / (1.0 + std::exp(-z));
  return sg * (1.0 + z * (1.0 - sg));
}

// Uniform on [-1, 1) from the top 53 bits, so initialization does not depend
// on the standard library's distribution code.
double symmetric_uniform(std::mt19937_64& rng) {
  return 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0;
}

void shuffle(std::vector<int>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

}  // namespace

Mlp::Mlp(int inputs, const std::vector<int>& hidden, int outputs, std::uint64_t seed) {
  if (inputs < 1 || outputs < 1) throw_domain("network needs at least one input and output");
  layerSizes_.push_back(inputs);
  for (int h : hidden) {
    if (h < 1) throw_domain("hidden layer width must be >= 1");
    layerSizes_.push_back(h);
  }
  layerSizes_.push_back(outputs);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < layerSizes_.size(); ++l) {
    const int fanIn = layerSizes_[l], fanOut = layerSizes_[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fanIn));
    Eigen::MatrixXd w(fanOut, fanIn);
    for (int j = 0; j < fanIn; ++j)
      for (int i = 0; i < fanOut; ++i) w(i, j) = bound * symmetric_uniform(rng);
    Eigen::VectorXd b(fanOut);
    for (int i = 0; i < fanOut; ++i) b[i] = bound * symmetric_uniform(rng);
    w_.push_back(std::move(w));
    b_.push_back(std::move(b));
  }
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < w_.size(); ++l) n += w_[l].size() + b_[l].size();
  return n;
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& x,
                                   std::vector<Eigen::MatrixXd>* pre) const {
  if (w_.empty()) throw_surrogate("empty network");
  if (x.rows() != inputs()) throw_domain("network input size mismatch");
  if (pre) pre->clear();
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    Eigen::MatrixXd z = w_[l] * a;
    z.colwise() += b_[l];
    if (l + 1 == w_.size()) return z;
    a = z.unaryExpr([](double v) { return silu(v); });
    if (pre) pre->push_back(std::move(z));
  }
  return a;
}

Eigen::MatrixXd Mlp::backward(const std::vector<Eigen::MatrixXd>& pre,
                              const Eigen::MatrixXd& adjoint) const {
  if (pre.size() + 1 != w_.size()) throw_domain("backward needs a recorded forward pass");
  Eigen::MatrixXd delta = adjoint;
  for (std::size_t l = w_.size(); l-- > 0;) {
    delta = w_[l].transpose() * delta;
    if (l > 0) delta.array() *= pre[l - 1].unaryExpr([](double v) { return silu_grad(v); }).array();
  }
  return delta;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const { return forward_batch(x).col(0); }

Eigen::VectorXd Mlp::forward_jacobian(const Eigen::VectorXd& x, Eigen::MatrixXd& jac) const {
  if (w_.empty()) throw_surrogate("empty network");
  if (x.size() != inputs()) throw_domain("network input size mismatch");
  Eigen::VectorXd a = x;
  Eigen::MatrixXd j = Eigen::MatrixXd::Identity(x.size(), x.size());
  for (std::size_t l = 0; l < w_.size(); ++l) {
    const Eigen::VectorXd z = w_[l] * a + b_[l];
    j = w_[l] * j;
    if (l + 1 == w_.size()) {
      a = z;
      break;
    }
    for (Eigen::Index i = 0; i < z.size(); ++i) j.row(i) *= silu_grad(z[i]);
    a = z.unaryExpr([](double v) { return silu(v); });
  }
  jac = j;
  return a;
}

void Mlp::quantize() {
  for (auto& w : w_) w = w.cast<float>().cast<double>();
  for (auto& b : b_) b = b.cast<float>().cast<double>();
}

bool DomainBox::contains(const Eigen::VectorXd& x, double slack) const {
  if (x.size() != lo.size()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!(x[i] >= lo[i] - slack && x[i] <= hi[i] + slack)) return false;
  return true;
}

Eigen::VectorXd DomainBox::normalize(const Eigen::VectorXd& x) const {
  return (x - lo).cwiseProduct(normalize_scale()) - Eigen::VectorXd::Ones(x.size());
}

Eigen::VectorXd DomainBox::normalize_scale() const {
  Eigen::VectorXd s(lo.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = hi[i] > lo[i] ? 2.0 / (hi[i] - lo[i]) : 0.0;
  return s;
}

Eigen::VectorXd body_features(const DomainBox& box, const Eigen::VectorXd& x,
                              Eigen::MatrixXd* jac) {
  if (x.size() != kBodyInputs) throw_domain("body input size mismatch");
  Eigen::VectorXd f(kBodyFeatures);
  f.head(kBodyInputs) = box.normalize(x);
  const double sl = std::sin(x[0]), cl = std::cos(x[0]);
  const double sv = std::sin(x[1]), cv = std::cos(x[1]);
  const double sp = std::sin(x[2]), cp = std::cos(x[2]);
  const double u = 0.5 * sl * sv * (1.0 - cp);
  const double kHi = box.hi[5] > 0.0 ? box.hi[5] : 1.0;
  f[7] = 2.0 * u - 1.0;
  f[8] = 2.0 * u * x[5] / kHi - 1.0;
  if (jac) {
    jac->setZero(kBodyFeatures, kBodyInputs);
    jac->topLeftCorner(kBodyInputs, kBodyInputs) = box.normalize_scale().asDiagonal();
    const Eigen::Vector3d du(0.5 * cl * sv * (1.0 - cp), 0.5 * sl * cv * (1.0 - cp),
                             0.5 * sl * sv * sp);
    for (int c = 0; c < 3; ++c) {
      (*jac)(7, c) = 2.0 * du[c];
      (*jac)(8, c) = 2.0 * du[c] * x[5] / kHi;
    }
    (*jac)(8, 5) = 2.0 * u / kHi;
  }
  return f;
}

// ---------------------------------------------------------------------------
// Training

namespace {

// Polarization ratio (s1, s2) / s0 = v tanh|v| / |v|, which keeps DoLP < 1.
Eigen::Vector2d polarization_ratio(const Eigen::Vector2d& v, Eigen::Matrix2d* jac) {
  const double n = v.norm();
  if (n < 1e-8) {
    if (jac) jac->setIdentity();
    return v;
  }
  const double t = std::tanh(n);
  if (jac) {
    *jac = (t / n) * Eigen::Matrix2d::Identity() +
           ((1.0 - t * t) - t / n) / (n * n) * (v * v.transpose());
  }
  return v * (t / n);
}

// (s0, s1, s2) from the raw outputs; s0 = exp(o0).
Eigen::Vector3d body_activation(const Eigen::Vector3d& o, Eigen::Matrix3d* jac) {
  const double s0 = std::exp(o[0]);
  Eigen::Matrix2d jr;
  const Eigen::Vector2d r = polarization_ratio(o.tail<2>(), jac ? &jr : nullptr);
  const Eigen::Vector3d out(s0, s0 * r[0], s0 * r[1]);
  if (jac) {
    jac->setZero();
    jac->col(0) = out;
    jac->bottomRightCorner<2, 2>() = s0 * jr;
  }
  return out;
}

// Minibatch Adam with an exponential learning-rate schedule. lossGrad(out,
// target, grad) returns the summed loss of a batch and its gradient with
// respect to the raw outputs.
template <typename LossGrad>
void train_network(Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int epochs,
                   const TrainConfig& cfg, std::uint64_t seed, LossGrad&& lossGrad) {
  const int n = static_cast<int>(x.cols());
  if (n == 0) throw_domain("training set is empty");
  if (epochs < 1) throw_domain("epochs must be >= 1");
  if (!(cfg.learningRate > 0.0) || !(cfg.finalLearningRate > 0.0))
    throw_domain("learning rates must be positive");
  auto& w = net.weights();
  auto& b = net.biases();
  const std::size_t nl = w.size();
  std::vector<Eigen::MatrixXd> mW, vW;
  std::vector<Eigen::VectorXd> mB, vB;
  for (std::size_t l = 0; l < nl; ++l) {
    mW.push_back(Eigen::MatrixXd::Zero(w[l].rows(), w[l].cols()));
    vW.push_back(mW.back());
    mB.push_back(Eigen::VectorXd::Zero(b[l].size()));
    vB.push_back(mB.back());
  }
  constexpr double kB1 = 0.9, kB2 = 0.999, kEps = 1e-8;
  const int batch = std::clamp(cfg.batchSize, 1, n);
  const long stepsPerEpoch = (n + batch - 1) / batch;
  const double total = static_cast<double>(epochs) * static_cast<double>(stepsPerEpoch);
  const double decay = std::log(cfg.finalLearningRate / cfg.learningRate);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::vector<Eigen::MatrixXd> act(nl + 1), pre(nl);
  Eigen::MatrixXd xb, yb, delta;
  long step = 0;
  double p1 = 1.0, p2 = 1.0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    shuffle(order, rng);
    for (long s = 0; s < stepsPerEpoch; ++s) {
      const int start = static_cast<int>(s * batch);
      const int m = std::min(batch, n - start);
      xb.resize(x.rows(), m);
      yb.resize(y.rows(), m);
      for (int j = 0; j < m; ++j) {
        xb.col(j) = x.col(order[start + j]);
        yb.col(j) = y.col(order[start + j]);
      }
      act[0] = xb;
      for (std::size_t l = 0; l < nl; ++l) {
        pre[l].noalias() = w[l] * act[l];
        pre[l].colwise() += b[l];
        if (l + 1 < nl)
          act[l + 1] = pre[l].unaryExpr([](double v) { return silu(v); });
        else
          act[l + 1] = pre[l];
      }
      const double loss = lossGrad(act[nl], yb, delta);
      if (!std::isfinite(loss) || !delta.allFinite()) throw_surrogate("training diverged");
      delta /= static_cast<double>(m);

      const double lr = cfg.learningRate * std::exp(decay * static_cast<double>(step) / total);
      ++step;
      p1 *= kB1;
      p2 *= kB2;
      const double c1 = 1.0 / (1.0 - p1), c2 = 1.0 / (1.0 - p2);
      for (std::size_t l = nl; l-- > 0;) {
        const Eigen::MatrixXd gW = delta * act[l].transpose();
        const Eigen::VectorXd gB = delta.rowwise().sum();
        if (l > 0) {
          delta = (w[l].transpose() * delta)
                      .cwiseProduct(pre[l - 1].unaryExpr([](double v) { return silu_grad(v); }));
        }
        mW[l] = kB1 * mW[l] + (1.0 - kB1) * gW;
        vW[l] = kB2 * vW[l] + (1.0 - kB2) * gW.cwiseAbs2();
        mB[l] = kB1 * mB[l] + (1.0 - kB1) * gB;
        vB[l] = kB2 * vB[l] + (1.0 - kB2) * gB.cwiseAbs2();
        w[l].array() -= lr * (mW[l].array() * c1) / ((vW[l].array() * c2).sqrt() + kEps);
        b[l].array() -= lr * (mB[l].array() * c1) / ((vB[l].array() * c2).sqrt() + kEps);
      }
    }
  }
}

double body_loss(const Eigen::MatrixXd& o, const Eigen::MatrixXd& y, Eigen::MatrixXd& g) {
  g.resize(3, o.cols());
  double loss = 0.0;
  Eigen::Matrix2d jr;
  for (Eigen::Index c = 0; c < o.cols(); ++c) {
    const double d0 = o(0, c) - y(0, c);
    const Eigen::Vector2d r = polarization_ratio(o.block<2, 1>(1, c), &jr);
    const Eigen::Vector2d e = r - y.block<2, 1>(1, c);
    loss += d0 * d0 + e.squaredNorm();
    g(0, c) = 2.0 * d0;
    g.block<2, 1>(1, c) = 2.0 * (jr * e);
  }
  return loss;
}

double smith_loss(const Eigen::MatrixXd& o, const Eigen::MatrixXd& y, Eigen::MatrixXd& g) {
  g = 2.0 * (o - y);
  return (o - y).squaredNorm();
}

std::vector<int> complement(int n, const std::vector<int>& held) {
  std::vector<char> mark(n, 0);
  for (int i : held) mark[i] = 1;
  std::vector<int> rest;
  for (int i = 0; i < n; ++i)
    if (!mark[i]) rest.push_back(i);
  return rest;
}

constexpr std::uint64_t kSmithSplitSalt = 0x9e3779b97f4a7c15ULL;

double lambda_unchecked(const SurrogateModel& m, const Eigen::Vector3d& x, Eigen::Vector3d* grad) {
  const Eigen::VectorXd xn = m.smithBox.normalize(x);
  Eigen::MatrixXd jac;
  const double y = grad ? m.smith.forward_jacobian(xn, jac)[0] : m.smith.forward(xn)[0];
  // Lambda >= 0 keeps G1 <= 1.
  if (y <= 0.0) {
    if (grad) grad->setZero();
    return 0.0;
  }
  if (grad) *grad = std::exp(y) * jac.row(0).transpose().cwiseProduct(m.smithBox.normalize_scale());
  return std::expm1(y);
}

}  // namespace

std::vector<int> validation_indices(int n, double fraction, std::uint64_t seed) {
  if (n < 0) throw_domain("sample count must be >= 0");
  if (!(fraction >= 0.0 && fraction < 1.0)) throw_domain("validation fraction must be in [0, 1)");
  const int count = std::min(static_cast<int>(std::floor(fraction * n)), std::max(n - 1, 0));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  shuffle(order, rng);
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

SurrogateModel train(const TrainingSet& ts, const TrainingRecipe& recipe) {
  if (ts.size() == 0 || ts.smithX.cols() == 0) throw_domain("training set is empty");
  const TrainConfig& cfg = recipe.train;
  SurrogateModel m;
  m.recipe = recipe;
  m.bodyBox = recipe.ranges.body_box();
  m.smithBox = recipe.ranges.smith_box();

  const std::vector<int> bodyTrain =
      complement(ts.size(), validation_indices(ts.size(), cfg.validationFraction, cfg.seed));
  Eigen::MatrixXd x(kBodyFeatures, bodyTrain.size()), y(3, bodyTrain.size());
  for (std::size_t j = 0; j < bodyTrain.size(); ++j) {
    const int i = bodyTrain[j];
    const double s0 = ts.bodyY(0, i);
    if (!(s0 > 0.0)) throw_domain("body target with non-positive s0");
    x.col(j) = body_features(m.bodyBox, ts.bodyX.col(i));
    y.col(j) << std::log(s0), ts.bodyY(1, i) / s0, ts.bodyY(2, i) / s0;
  }
  m.body = Mlp(kBodyFeatures, cfg.bodyHidden, 3, cfg.seed);
  train_network(m.body, x, y, cfg.epochs, cfg, cfg.seed + 1, body_loss);

  const int ns = static_cast<int>(ts.smithX.cols());
  const std::vector<int> smithTrain = complement(
      ns, validation_indices(ns, cfg.validationFraction, cfg.seed ^ kSmithSplitSalt));
  Eigen::MatrixXd sx(kSmithInputs, smithTrain.size()), sy(1, smithTrain.size());
  for (std::size_t j = 0; j < smithTrain.size(); ++j) {
    sx.col(j) = m.smithBox.normalize(ts.smithX.col(smithTrain[j]));
    sy(0, j) = ts.smithY[smithTrain[j]];
  }
  m.smith = Mlp(kSmithInputs, cfg.smithHidden, 1, cfg.seed + 2);
  train_network(m.smith, sx, sy, cfg.smithEpochs, cfg, cfg.seed + 3, smith_loss);

  m.body.quantize();
  m.smith.quantize();
  m.validation = validate(m, ts);
  return m;
}

ValidationMetrics validate(const SurrogateModel& m, const TrainingSet& ts) {
  const double frac = m.recipe.train.validationFraction;
  const std::uint64_t seed = m.recipe.train.seed;
  ValidationMetrics v;
  double sumSq = 0.0;
  for (int i : validation_indices(ts.size(), frac, seed)) {
    const Eigen::Vector3d p = m.body_sum_unchecked(ts.bodyX.col(i));
    const Eigen::Vector3d t = ts.bodyY.col(i);
    const double rel = std::abs(p[0] / t[0] - 1.0);
    v.maxRelErrS0 = std::max(v.maxRelErrS0, rel);
    sumSq += rel * rel;
    const double dp = std::hypot(p[1], p[2]) / p[0], dt = std::hypot(t[1], t[2]) / t[0];
    v.maxAbsErrDolp = std::max(v.maxAbsErrDolp, std::abs(dp - dt));
    ++v.count;
  }
  if (v.count > 0) v.rmsRelErrS0 = std::sqrt(sumSq / v.count);
  const int ns = static_cast<int>(ts.smithX.cols());
  for (int i : validation_indices(ns, frac, seed ^ kSmithSplitSalt)) {
    const double lp = lambda_unchecked(m, ts.smithX.col(i), nullptr);
    const double lt = std::expm1(ts.smithY[i]);
    v.maxRelErrG1 = std::max(v.maxRelErrG1, std::abs((1.0 + lt) / (1.0 + lp) - 1.0));
  }
  return v;
}

ValidationMetrics revalidate(const SurrogateModel& m) {
  const TrainingRecipe& r = m.recipe;
  const TrainingSet ts =
      generate_training_set(r.ranges, r.nSamples, r.quad, r.dataSeed, r.geometriesPerParam);
  return validate(m, ts);
}

// ---------------------------------------------------------------------------
// Inference

Eigen::Vector3d SurrogateModel::body_sum(const Eigen::VectorXd& input, Eigen::MatrixXd* jac) const {
  if (!bodyBox.contains(input)) throw_surrogate("surrogate domain violation");
  return body_sum_unchecked(input, jac);
}

Eigen::Vector3d SurrogateModel::body_sum_unchecked(const Eigen::VectorXd& input,
                                                   Eigen::MatrixXd* jac) const {
  Eigen::MatrixXd jf, jn;
  const Eigen::VectorXd f = body_features(bodyBox, input, jac ? &jf : nullptr);
  const Eigen::Vector3d o = jac ? Eigen::Vector3d(body.forward_jacobian(f, jn))
                                : Eigen::Vector3d(body.forward(f));
  Eigen::Matrix3d ja;
  const Eigen::Vector3d out = body_activation(o, jac ? &ja : nullptr);
  if (jac) *jac = ja * jn * jf;
  return out;
}

Eigen::MatrixXd SurrogateModel::body_batch(const Eigen::MatrixXd& inputs, BodyTape* tape) const {
  Eigen::MatrixXd f(kBodyFeatures, inputs.cols());
  for (Eigen::Index c = 0; c < inputs.cols(); ++c) {
    if (!bodyBox.contains(inputs.col(c))) throw_surrogate("surrogate domain violation");
    f.col(c) = body_features(bodyBox, inputs.col(c));
  }
  const Eigen::MatrixXd raw = body.forward_batch(f, tape ? &tape->pre : nullptr);
  Eigen::MatrixXd out(3, inputs.cols());
  for (Eigen::Index c = 0; c < inputs.cols(); ++c)
    out.col(c) = body_activation(raw.col(c), nullptr);
  if (tape) tape->raw = raw;
  return out;
}

Eigen::MatrixXd SurrogateModel::body_batch_vjp(const Eigen::MatrixXd& inputs, const BodyTape& tape,
                                               const Eigen::MatrixXd& adjoint) const {
  Eigen::MatrixXd adjRaw(3, inputs.cols());
  Eigen::Matrix3d ja;
  for (Eigen::Index c = 0; c < inputs.cols(); ++c) {
    body_activation(tape.raw.col(c), &ja);
    adjRaw.col(c) = ja.transpose() * adjoint.col(c);
  }
  const Eigen::MatrixXd adjF = body.backward(tape.pre, adjRaw);
  Eigen::MatrixXd out(kBodyInputs, inputs.cols());
  Eigen::MatrixXd jf;
  for (Eigen::Index c = 0; c < inputs.cols(); ++c) {
    body_features(bodyBox, inputs.col(c), &jf);
    out.col(c) = jf.transpose() * adjF.col(c);
  }
  return out;
}

double SurrogateModel::lambda(double thetaV, double alpha, double beta,
                              Eigen::Vector3d* grad) const {
  const Eigen::Vector3d x(thetaV, alpha, beta);
  if (!smithBox.contains(x)) throw_surrogate("surrogate domain violation");
  return lambda_unchecked(*this, x, grad);
}

namespace {

using ParamGrad = Eigen::Matrix<double, 6, 1>;
using Ad = Eigen::AutoDiffScalar<ParamGrad>;

Ad ad_param(double v, int k) { return Ad(v, ParamGrad::Unit(k)); }

// G1 = 1 / (1 + Lambda) with Lambda's (alpha, beta) derivatives.
Ad ad_g1(double lambda, const Eigen::Vector3d& grad) {
  ParamGrad d = ParamGrad::Zero();
  d[3] = grad[1];
  d[4] = grad[2];
  return Ad(1.0) / (Ad(1.0) + Ad(lambda, d));
}

}  // namespace

Stokes4 surrogate_surface(const SurrogateModel& s, const FmbrdfParams& p, const Ndf& ndf,
                          const ShadingGeometry& g, const FramePair& frames, const Stokes4& sIn,
                          ParamJacobian* jac) {
  Eigen::Vector3d gradL, gradV;
  const double lamL = s.lambda(angle_between(g.N, g.L), p.alpha, p.beta, &gradL);
  const double lamV = s.lambda(angle_between(g.N, g.V), p.alpha, p.beta, &gradV);
  const Eigen::Vector2d rotIn = double_angle(frames.incident, g.H.vec());
  const Eigen::Vector2d rotOut = double_angle(frames.outgoing, g.H.vec());
  if (!jac) {
    const double D = ndf_value_t<double>(ndf, p.alpha, p.beta, g.thetaH);
    return surface_stokes_t<double>(p.mu, p.ks, D, 1.0 / (1.0 + lamL), 1.0 / (1.0 + lamV), g,
                                    rotIn, rotOut, sIn);
  }
  const Ad alpha = ad_param(p.alpha, 3), beta = ad_param(p.beta, 4);
  const Ad D = ndf_value_t<Ad>(ndf, alpha, beta, g.thetaH);
  const Stokes<Ad> st = surface_stokes_t<Ad>(ad_param(p.mu, 0), ad_param(p.ks, 1), D,
                                             ad_g1(lamL, gradL), ad_g1(lamV, gradV), g, rotIn,
                                             rotOut, sIn);
  Stokes4 out;
  jac->setZero();
  for (int i = 0; i < 4; ++i) {
    out[i] = st[i].value();
    if (st[i].derivatives().size() == 6) jac->row(i) = st[i].derivatives().transpose();
  }
  return out;
}

SurrogateEval surrogate_eval(const SurrogateModel& s, const FmbrdfParams& p, const Ndf& ndf,
                             const Direction& N, const Direction& L, const Direction& V,
                             const FramePair& frames, const Stokes4& sIn, bool withJacobian) {
  if (sIn[1] != 0.0 || sIn[2] != 0.0 || sIn[3] != 0.0)
    throw_domain("surrogate evaluation supports unpolarized input only");
  const ShadingGeometry g = make_shading(N, L, V);
  if (!(g.cosNL > 0.0) || !(g.cosNV > 0.0)) throw_domain("below-horizon direction");
  const Canonical c = canonicalize(N, L, V);
  SurrogateEval r;
  r.surface = surrogate_surface(s, p, ndf, g, frames, sIn, withJacobian ? &r.dSurface : nullptr);

  Eigen::VectorXd x(kBodyInputs);
  x << c.thetaL, c.thetaV, c.dphi, p.alpha, p.beta, p.kappa, p.mu;
  Eigen::MatrixXd jac;
  const Eigen::Vector3d t = s.body_sum(x, withJacobian ? &jac : nullptr);
  const double unit = sIn[0] * g.cosNL / kPi;
  const double scale = p.kb() * unit;
  r.body = c.frameMap.apply(Stokes4(scale * t[0], scale * t[1], scale * t[2], 0.0));
  if (withJacobian) {
    auto lift = [&](const Eigen::Vector3d& v) {
      return c.frameMap.apply(Stokes4(v[0], v[1], v[2], 0.0));
    };
    r.dBody.col(0) = lift(scale * jac.col(6));
    r.dBody.col(1) = lift(p.rk * unit * t);
    r.dBody.col(2) = lift(p.ks * unit * t);
    r.dBody.col(3) = lift(scale * jac.col(3));
    r.dBody.col(4) = lift(scale * jac.col(4));
    r.dBody.col(5) = lift(scale * jac.col(5));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Serialization


namespace {

constexpr char kMagic[8] = {'F', 'M', 'S', 'U', 'R', 'R', '\0', '\1'};
constexpr std::uint32_t kActivationSilu = 1;
constexpr std::uint32_t kMaxCount = 1u << 24;

template <typename T>
void put(std::ostream& out, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.write(b, sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  char b[sizeof(T)];
  if (!in.read(b, sizeof(T))) throw_config("truncated surrogate file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

std::uint32_t get_count(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  if (n > kMaxCount) throw_config("corrupt surrogate file");
  return n;
}

void put_widths(std::ostream& out, const std::vector<int>& w) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(w.size()));
  for (int v : w) put<std::int32_t>(out, v);
}

std::vector<int> get_widths(std::istream& in) {
  std::vector<int> w(get_count(in));
  for (int& v : w) v = get<std::int32_t>(in);
  return w;
}

void put_box(std::ostream& out, const DomainBox& b) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(b.lo.size()));
  for (Eigen::Index i = 0; i < b.lo.size(); ++i) {
    put<double>(out, b.lo[i]);
    put<double>(out, b.hi[i]);
  }
}

DomainBox get_box(std::istream& in, int dims) {
  if (get_count(in) != static_cast<std::uint32_t>(dims)) throw_config("corrupt surrogate file");
  DomainBox b;
  b.lo.resize(dims);
  b.hi.resize(dims);
  for (int i = 0; i < dims; ++i) {
    b.lo[i] = get<double>(in);
    b.hi[i] = get<double>(in);
  }
  return b;
}

void put_net(std::ostream& out, const Mlp& net) {
  put<std::uint32_t>(out, kActivationSilu);
  put_widths(out, net.layer_sizes());
  for (std::size_t l = 0; l < net.weights().size(); ++l) {
    const Eigen::MatrixXd& w = net.weights()[l];
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) put<float>(out, static_cast<float>(w(i, j)));
    for (Eigen::Index i = 0; i < net.biases()[l].size(); ++i)
      put<float>(out, static_cast<float>(net.biases()[l][i]));
  }
}

Mlp get_net(std::istream& in, int inputs, int outputs) {
  if (get<std::uint32_t>(in) != kActivationSilu) throw_config("unsupported activation");
  const std::vector<int> sizes = get_widths(in);
  if (sizes.size() < 2 || sizes.front() != inputs || sizes.back() != outputs)
    throw_config("corrupt surrogate file");
  for (int s : sizes)
    if (s < 1 || s > 65536) throw_config("corrupt surrogate file");
  Mlp net(inputs, std::vector<int>(sizes.begin() + 1, sizes.end() - 1), outputs, 0);
  for (std::size_t l = 0; l < net.weights().size(); ++l) {
    Eigen::MatrixXd& w = net.weights()[l];
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = get<float>(in);
    for (Eigen::Index i = 0; i < net.biases()[l].size(); ++i) net.biases()[l][i] = get<float>(in);
  }
  return net;
}

}  // namespace

void SurrogateModel::write(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  const ParamRanges& g = recipe.ranges;
  for (double v : {g.thetaMax, g.alphaLo, g.alphaHi, g.betaLo, g.betaHi, g.kappaLo, g.kappaHi,
                   g.muLo, g.muHi})
    put<double>(out, v);
  put<std::int32_t>(out, recipe.quad.nTheta);
  put<std::int32_t>(out, recipe.quad.nPhi);
  put<std::int32_t>(out, static_cast<std::int32_t>(recipe.quad.spacing));
  put<std::int32_t>(out, recipe.nSamples);
  put<std::int32_t>(out, recipe.geometriesPerParam);
  put<std::uint64_t>(out, recipe.dataSeed);
  const TrainConfig& t = recipe.train;
  put_widths(out, t.bodyHidden);
  put_widths(out, t.smithHidden);
  put<std::int32_t>(out, t.epochs);
  put<std::int32_t>(out, t.smithEpochs);
  put<std::int32_t>(out, t.batchSize);
  put<double>(out, t.learningRate);
  put<double>(out, t.finalLearningRate);
  put<double>(out, t.validationFraction);
  put<std::uint64_t>(out, t.seed);
  put<double>(out, validation.maxRelErrS0);
  put<double>(out, validation.rmsRelErrS0);
  put<double>(out, validation.maxAbsErrDolp);
  put<double>(out, validation.maxRelErrG1);
  put<std::int32_t>(out, validation.count);
  put_box(out, bodyBox);
  put_box(out, smithBox);
  put_net(out, body);
  put_net(out, smith);
  if (!out) throw_config("failed to write surrogate");
}

SurrogateModel SurrogateModel::read(std::istream& in) {
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw_config("not a surrogate file (bad magic)");
  if (get<std::uint32_t>(in) != kVersion) throw_config("unsupported surrogate version");
  SurrogateModel m;
  ParamRanges& g = m.recipe.ranges;
  for (double* v : {&g.thetaMax, &g.alphaLo, &g.alphaHi, &g.betaLo, &g.betaHi, &g.kappaLo,
                    &g.kappaHi, &g.muLo, &g.muHi})
    *v = get<double>(in);
  m.recipe.quad.nTheta = get<std::int32_t>(in);
  m.recipe.quad.nPhi = get<std::int32_t>(in);
  const auto spacing = get<std::int32_t>(in);
  if (spacing != static_cast<std::int32_t>(ThetaSpacing::kCosine) &&
      spacing != static_cast<std::int32_t>(ThetaSpacing::kAngle))
    throw_config("corrupt surrogate file");
  m.recipe.quad.spacing = static_cast<ThetaSpacing>(spacing);
  m.recipe.nSamples = get<std::int32_t>(in);
  m.recipe.geometriesPerParam = get<std::int32_t>(in);
  m.recipe.dataSeed = get<std::uint64_t>(in);
  TrainConfig& t = m.recipe.train;
  t.bodyHidden = get_widths(in);
  t.smithHidden = get_widths(in);
  t.epochs = get<std::int32_t>(in);
  t.smithEpochs = get<std::int32_t>(in);
  t.batchSize = get<std::int32_t>(in);
  t.learningRate = get<double>(in);
  t.finalLearningRate = get<double>(in);
  t.validationFraction = get<double>(in);
  t.seed = get<std::uint64_t>(in);
  m.validation.maxRelErrS0 = get<double>(in);
  m.validation.rmsRelErrS0 = get<double>(in);
  m.validation.maxAbsErrDolp = get<double>(in);
  m.validation.maxRelErrG1 = get<double>(in);
  m.validation.count = get<std::int32_t>(in);
  m.bodyBox = get_box(in, kBodyInputs);
  m.smithBox = get_box(in, kSmithInputs);
  m.body = get_net(in, kBodyFeatures, 3);
  m.smith = get_net(in, kSmithInputs, 1);
  return m;
}

void SurrogateModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_config("cannot open " + path + " for writing");
  write(out);
}

SurrogateModel SurrogateModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_config("cannot open " + path);
  return read(in);
}

}  // namespace fmbrdf
