// SPDX-License-Identifier: Apache-2.0

#include "fmbrdf/reflectometry.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <random>

#include "fmbrdf/error.hpp"
#include "fmbrdf/parallel.hpp"

namespace fmbrdf {

// ---------------------------------------------------------------------------
// Observation

std::size_t Observation::valid_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

std::vector<std::size_t> Observation::valid_indices() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) idx.push_back(i);
  return idx;
}

Observation make_observation(const PolarimetricImage& img, const Direction& L,
                             const Direction& V, double E0, double minCosV, double minCosL) {
  Observation obs;
  obs.width = img.width;
  obs.height = img.height;
  obs.L = L;
  obs.V = V;
  obs.E0 = E0;
  const std::size_t n = img.size();
  obs.N = img.normals;
  obs.intensity.assign(n, 0.0);
  obs.dolp.assign(n, 0.0);
  obs.mask.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!img.mask[i]) continue;
    const Stokes4& s = img.stokes[i];
    if (!s.allFinite() || !(s[0] > 0.0)) continue;
    if (img.normals[i].dot(V) < minCosV || img.normals[i].dot(L) < minCosL) continue;
    obs.intensity[i] = s[0];
    obs.dolp[i] = std::clamp(dolp(s), 0.0, 1.0);
    obs.mask[i] = 1;
  }
  return obs;
}

namespace {

double median(std::vector<double> v) {
  const std::size_t k = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + k, v.end());
  double m = v[k];
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + k));
  return m;
}

}  // namespace

std::vector<double> compute_weights(const Observation& obs, double madFactor) {
  const std::vector<std::size_t> idx = obs.valid_indices();
  if (idx.empty()) throw_domain("no valid pixels");
  std::vector<double> rho;
  rho.reserve(idx.size());
  for (std::size_t i : idx) rho.push_back(obs.dolp[i]);
  const double med = median(rho);
  std::vector<double> dev;
  dev.reserve(rho.size());
  for (double r : rho) dev.push_back(std::abs(r - med));
  const double cut = med + madFactor * median(dev);

  std::size_t outliers = 0;
  for (double r : rho)
    if (r > cut) ++outliers;
  std::vector<double> w(obs.size(), 0.0);
  const double wOut =
      outliers ? static_cast<double>(idx.size() - outliers) / static_cast<double>(outliers) : 1.0;
  for (std::size_t i : idx) w[i] = obs.dolp[i] > cut ? wOut : 1.0;
  return w;
}

// ---------------------------------------------------------------------------
// Reparameterization

std::string to_string(Transform t) {
  switch (t) {
    case Transform::kLogistic:
      return "logistic";
    case Transform::kExp:
      return "exp";
    case Transform::kSoftplus:
      return "softplus";
  }
  return "unknown";
}

Transform transform_from_string(const std::string& s) {
  if (s == "logistic") return Transform::kLogistic;
  if (s == "exp") return Transform::kExp;
  if (s == "softplus") return Transform::kSoftplus;
  throw_config("unknown transform: " + s);
}

namespace {

double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

double softplus(double u) { return u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u)); }

// Inverse of softplus for y > 0.
double softplus_inverse(double y) { return y > 30.0 ? y + std::log1p(-std::exp(-y)) : std::log(std::expm1(y)); }

constexpr double kTinyOffset = 1e-300;

}  // namespace

double ParamBound::forward(double u) const {
  switch (transform) {
    case Transform::kLogistic:
      return lo + (hi - lo) * sigmoid(u);
    case Transform::kExp:
      return lo + std::exp(u);
    case Transform::kSoftplus:
      return lo + softplus(u);
  }
  return lo;
}

double ParamBound::inverse(double p) const {
  switch (transform) {
    case Transform::kLogistic:
      return std::log((p - lo) / (hi - p));
    case Transform::kExp:
      return std::log(std::max(p - lo, kTinyOffset));
    case Transform::kSoftplus:
      return softplus_inverse(std::max(p - lo, kTinyOffset));
  }
  return 0.0;
}

double ParamBound::derivative(double u) const {
  switch (transform) {
    case Transform::kLogistic: {
      const double s = sigmoid(u);
      return (hi - lo) * s * (1.0 - s);
    }
    case Transform::kExp:
      return std::exp(u);
    case Transform::kSoftplus:
      return sigmoid(u);
  }
  return 0.0;
}

bool ParamBound::contains(double p) const {
  if (transform == Transform::kLogistic) return p > lo && p < hi;
  return p > lo;
}

ParamVector to_vector(const FmbrdfParams& p) {
  ParamVector v;
  v << p.mu, p.ks, p.rk, p.alpha, p.beta, p.kappa;
  return v;
}

FmbrdfParams from_vector(const ParamVector& v) {
  return FmbrdfParams{v[0], v[1], v[2], v[3], v[4], v[5]};
}

ParamVector Bounds::to_unconstrained(const ParamVector& p) const {
  ParamVector u;
  for (int k = 0; k < 6; ++k) u[k] = b[k].inverse(p[k]);
  return u;
}

ParamVector Bounds::from_unconstrained(const ParamVector& u) const {
  ParamVector p;
  for (int k = 0; k < 6; ++k) p[k] = b[k].forward(u[k]);
  return p;
}

ParamVector Bounds::derivative(const ParamVector& u) const {
  ParamVector d;
  for (int k = 0; k < 6; ++k) d[k] = b[k].derivative(u[k]);
  return d;
}

Bounds Bounds::intersect(const ParamRanges& r) const {
  Bounds out = *this;
  auto narrow = [](ParamBound& pb, double lo, double hi) {
    pb.lo = std::max(pb.lo, lo);
    pb.hi = pb.transform == Transform::kLogistic ? std::min(pb.hi, hi) : hi;
    pb.transform = Transform::kLogistic;
    if (!(pb.lo < pb.hi)) throw_config("parameter bounds do not overlap the surrogate domain");
  };
  narrow(out.b[0], r.muLo, r.muHi);
  narrow(out.b[3], r.alphaLo, r.alphaHi);
  narrow(out.b[4], r.betaLo, r.betaHi);
  narrow(out.b[5], r.kappaLo, r.kappaHi);
  return out;
}

ParamVector Bounds::clamp_inside(const ParamVector& p) const {
  ParamVector q = p;
  for (int k = 0; k < 6; ++k) {
    const ParamBound& pb = b[k];
    if (pb.transform == Transform::kLogistic) {
      const double margin = 1e-6 * (pb.hi - pb.lo);
      q[k] = std::clamp(q[k], pb.lo + margin, pb.hi - margin);
    } else {
      q[k] = std::max(q[k], pb.lo + 1e-9 * std::max(1.0, std::abs(pb.lo)));
    }
  }
  return q;
}

void Bounds::validate() const {
  for (int k = 0; k < 6; ++k) {
    const ParamBound& pb = b[k];
    if (!std::isfinite(pb.lo)) throw_config(std::string("bound of ") + kParamNames[k] + " must have a finite lower end");
    if (pb.transform == Transform::kLogistic && !(std::isfinite(pb.hi) && pb.hi > pb.lo))
      throw_config(std::string("bound of ") + kParamNames[k] + " needs lo < hi");
  }
  if (b[0].lo < 1.0) throw_config("mu bound must stay >= 1");
  for (int k : {1, 2, 3, 5})
    if (b[k].lo < 0.0) throw_config(std::string("bound of ") + kParamNames[k] + " must stay >= 0");
  if (b[3].lo <= 0.0 && b[3].transform != Transform::kLogistic)
    throw_config("alpha bound must be > 0");
  if (b[4].lo <= 0.0) throw_config("beta bound must be > 0");
}

void FitConfig::validate() const {
  bounds.validate();
  init.validate();
  if (iterations < 1) throw_config("iterations must be >= 1");
  if (!(step > 0.0)) throw_config("step must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw_config("Adam decay rates must be in [0, 1)");
  if (!(epsilon > 0.0)) throw_config("epsilon must be > 0");
  if (!(madFactor >= 0.0)) throw_config("outlier factor must be >= 0");
  if (multiStart && starts < 1) throw_config("starts must be >= 1");
  if (!(perturbation >= 0.0 && perturbation < 1.0)) throw_config("perturbation must be in [0, 1)");
  if (!(fdStep > 0.0)) throw_config("finite-difference step must be > 0");
}

// ---------------------------------------------------------------------------
// Loss

LossFunction::LossFunction(const Observation& obs, std::vector<double> weights, EvalMode mode,
                           const SurrogateModel* surrogate, const BodyQuadrature& quad,
                           bool usePolarization, double fdStep)
    : obs_(obs),
      weights_(std::move(weights)),
      mode_(mode),
      surrogate_(surrogate),
      quad_(quad),
      usePolarization_(usePolarization),
      fdStep_(fdStep) {
  if (weights_.size() != obs.size()) throw_domain("weights not aligned with the mask");
  if (mode == EvalMode::kSurrogate && !surrogate)
    throw_config("surrogate mode requires a surrogate model");
  pixels_ = obs.valid_indices();
  if (pixels_.empty()) throw_domain("no valid pixels");
  geom_.resize(pixels_.size());
  for (std::size_t j = 0; j < pixels_.size(); ++j) {
    const std::size_t i = pixels_[j];
    if (!(weights_[i] >= 0.0)) throw_domain("weights must be >= 0");
    weightSum_ += weights_[i];
    PixelGeometry& pg = geom_[j];
    pg.g = make_shading(obs.N[i], obs.L, obs.V);
    pg.frames = make_frames(obs.N[i], obs.L, obs.V);
    pg.canon = canonicalize(obs.N[i], obs.L, obs.V);
    pg.rotIn = double_angle(pg.frames.incident, pg.g.H.vec());
    pg.rotOut = double_angle(pg.frames.outgoing, pg.g.H.vec());
  }
  if (usePolarization_ && !(weightSum_ > 0.0)) throw_domain("weights sum to zero");
}

namespace {

double dolp_or_zero(const Stokes4& s) {
  return s[0] > 0.0 ? std::hypot(s[1], s[2]) / s[0] : 0.0;
}

}  // namespace

LossTerms LossFunction::combine(const Rendered& r) const {
  LossTerms t;
  double dolpNum = 0.0;
  for (std::size_t j = 0; j < pixels_.size(); ++j) {
    const std::size_t i = pixels_[j];
    if (!std::isfinite(r.intensity[j]) || !std::isfinite(r.dolp[j]))
      throw_evaluation("evaluation failure at pixel " + std::to_string(i));
    const double di = obs_.intensity[i] - r.intensity[j];
    t.intensity += di * di;
    const double dr = obs_.dolp[i] - r.dolp[j];
    dolpNum += weights_[i] * dr * dr;
  }
  t.intensity /= static_cast<double>(pixels_.size());
  t.dolp = weightSum_ > 0.0 ? dolpNum / weightSum_ : 0.0;
  t.total = t.intensity + (usePolarization_ ? t.dolp : 0.0);
  return t;
}

Rendered LossFunction::render_oracle(const FmbrdfParams& p) const {
  const FmbrdfModel model(p, quad_);
  const LightSource light = LightSource::unpolarized(obs_.L, obs_.E0);
  Rendered r;
  r.intensity.resize(pixels_.size());
  r.dolp.resize(pixels_.size());
  parallel_for(pixels_.size(), [&](std::size_t j) {
    const Stokes4 s = eval_total(model, obs_.N[pixels_[j]], obs_.V, light).stokes;
    r.intensity[j] = s[0];
    r.dolp[j] = dolp_or_zero(s);
  });
  return r;
}

void LossFunction::surrogate_pass(const FmbrdfParams& p, bool withGrad, SurrogatePass& out) const {
  const std::size_t n = pixels_.size();
  const Ndf ndf(p.alpha, p.beta);
  const Stokes4 sIn(obs_.E0, 0.0, 0.0, 0.0);

  // Body network over all pixels in one batch.
  out.x.resize(kBodyInputs, static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    const Canonical& c = geom_[j].canon;
    out.x.col(static_cast<Eigen::Index>(j)) << c.thetaL, c.thetaV, c.dphi, p.alpha, p.beta,
        p.kappa, p.mu;
  }
  out.t = surrogate_->body_batch(out.x, withGrad ? &out.tape : nullptr);

  out.total.resize(n);
  out.unit.resize(n);
  out.dSurface.resize(withGrad ? n : 0);
  parallel_for(n, [&](std::size_t j) {
    const PixelGeometry& pg = geom_[j];
    const Stokes4 surf = surrogate_surface(*surrogate_, p, ndf, pg.g, pg.frames, sIn,
                                           withGrad ? &out.dSurface[j] : nullptr);
    out.unit[j] = obs_.E0 * pg.g.cosNL / kPi;
    const Eigen::Vector3d b = p.kb() * out.unit[j] * out.t.col(static_cast<Eigen::Index>(j));
    out.total[j] = surf + pg.canon.frameMap.apply(Stokes4(b[0], b[1], b[2], 0.0));
  });
}

namespace {

Rendered rendered_from(const std::vector<Stokes4>& total) {
  Rendered r;
  r.intensity.resize(total.size());
  r.dolp.resize(total.size());
  for (std::size_t j = 0; j < total.size(); ++j) {
    r.intensity[j] = total[j][0];
    r.dolp[j] = dolp_or_zero(total[j]);
  }
  return r;
}

}  // namespace

Rendered LossFunction::render(const FmbrdfParams& p) const {
  p.validate();
  if (mode_ == EvalMode::kOracle) return render_oracle(p);
  SurrogatePass pass;
  surrogate_pass(p, false, pass);
  return rendered_from(pass.total);
}

LossTerms LossFunction::terms(const FmbrdfParams& p) const { return combine(render(p)); }

LossTerms LossFunction::value_and_gradient(const FmbrdfParams& p, ParamVector& grad) const {
  p.validate();
  return mode_ == EvalMode::kSurrogate ? gradient_surrogate(p, grad) : gradient_oracle(p, grad);
}

LossTerms LossFunction::gradient_surrogate(const FmbrdfParams& p, ParamVector& grad) const {
  const std::size_t n = pixels_.size();
  SurrogatePass pass;
  surrogate_pass(p, true, pass);
  const std::vector<Stokes4>& total = pass.total;
  const Eigen::MatrixXd& t = pass.t;
  const Rendered r = rendered_from(total);
  const LossTerms terms = combine(r);

  // Adjoint of the loss with respect to each pixel's world Stokes vector.
  const double invM = 1.0 / static_cast<double>(n);
  std::vector<Stokes4> adj(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t i = pixels_[j];
    const Stokes4& s = total[j];
    Stokes4 a = Stokes4::Zero();
    a[0] = -2.0 * invM * (obs_.intensity[i] - s[0]);
    if (usePolarization_ && weightSum_ > 0.0 && s[0] > 0.0) {
      const double q = std::hypot(s[1], s[2]);
      const double c = -2.0 * weights_[i] / weightSum_ * (obs_.dolp[i] - r.dolp[j]);
      a[0] += c * (-r.dolp[j] / s[0]);
      if (q > 0.0) {
        a[1] = c * s[1] / (q * s[0]);
        a[2] = c * s[2] / (q * s[0]);
      }
    }
    adj[j] = a;
  }

  Eigen::MatrixXd adjT(3, static_cast<Eigen::Index>(n));
  ParamVector g = ParamVector::Zero();
  for (std::size_t j = 0; j < n; ++j) {
    g += pass.dSurface[j].transpose() * adj[j];
    const Stokes4 ac = geom_[j].canon.frameMap.invert(adj[j]);
    const Eigen::Vector3d a3 = ac.head<3>();
    const Eigen::Index col = static_cast<Eigen::Index>(j);
    const double dot = a3.dot(t.col(col)) * pass.unit[j];
    g[1] += p.rk * dot;
    g[2] += p.ks * dot;
    adjT.col(col) = p.kb() * pass.unit[j] * a3;
  }
  const Eigen::MatrixXd dx = surrogate_->body_batch_vjp(pass.x, pass.tape, adjT);
  const Eigen::VectorXd dxSum = dx.rowwise().sum();
  g[0] += dxSum[6];
  g[3] += dxSum[3];
  g[4] += dxSum[4];
  g[5] += dxSum[5];
  grad = g;
  return terms;
}

LossTerms LossFunction::gradient_oracle(const FmbrdfParams& p, ParamVector& grad) const {
  const LossTerms base = terms(p);
  const ParamVector v = to_vector(p);
  for (int k = 0; k < 6; ++k) {
    const double h = fdStep_ * std::max(std::abs(v[k]), 1e-2);
    ParamVector up = v, dn = v;
    up[k] += h;
    dn[k] -= h;
    // Stay inside the physical range; fall back to one-sided differences.
    const double floor = k == 0 ? 1.0 : (k == 3 || k == 4 ? 1e-6 : 0.0);
    if (dn[k] < floor) {
      grad[k] = (value(from_vector(up)) - base.total) / h;
      continue;
    }
    grad[k] = (value(from_vector(up)) - value(from_vector(dn))) / (2.0 * h);
  }
  return base;
}

double loss(const FmbrdfParams& p, const Observation& obs, const std::vector<double>& weights,
            EvalMode mode, const SurrogateModel* surrogate) {
  return LossFunction(obs, weights, mode, surrogate).value(p);
}

ParamVector gradient(const FmbrdfParams& p, const Observation& obs,
                     const std::vector<double>& weights, EvalMode mode,
                     const SurrogateModel* surrogate) {
  ParamVector g;
  LossFunction(obs, weights, mode, surrogate).value_and_gradient(p, g);
  return g;
}

// ---------------------------------------------------------------------------
// Fit

namespace {

struct RunResult {
  ParamVector params = ParamVector::Zero();
  std::vector<double> trajectory;
  double initialLoss = 0.0;
  double finalLoss = 0.0;
  bool finite = true;
};

RunResult adam(const LossFunction& f, const Bounds& bounds, const ParamVector& init,
               const FitConfig& cfg) {
  RunResult out;
  ParamVector u = bounds.to_unconstrained(init);
  ParamVector m = ParamVector::Zero(), v = ParamVector::Zero();
  ParamVector lastFinite = u;
  ParamVector bestU = u;
  double bestLoss = std::numeric_limits<double>::infinity();
  out.trajectory.reserve(static_cast<std::size_t>(cfg.iterations) + 1);
  for (int it = 0; it < cfg.iterations; ++it) {
    ParamVector g;
    double value;
    try {
      value = f.value_and_gradient(from_vector(bounds.from_unconstrained(u)), g).total;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kEvaluation) throw;
      value = std::numeric_limits<double>::quiet_NaN();
    }
    if (!std::isfinite(value) || !g.allFinite()) {
      out.finite = false;
      u = lastFinite;
      break;
    }
    out.trajectory.push_back(value);
    if (it == 0) out.initialLoss = value;
    lastFinite = u;
    if (value < bestLoss) {
      bestLoss = value;
      bestU = u;
    }
    const ParamVector gu = g.cwiseProduct(bounds.derivative(u));
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * gu;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * gu.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg.beta1, it + 1);
    const double c2 = 1.0 - std::pow(cfg.beta2, it + 1);
    u -= cfg.step * ((m / c1).array() / ((v / c2).array().sqrt() + cfg.epsilon)).matrix();
  }
  out.params = bounds.from_unconstrained(u);
  if (out.finite) {
    try {
      out.finalLoss = f.value(from_vector(out.params));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kEvaluation) throw;
      out.finalLoss = std::numeric_limits<double>::quiet_NaN();
    }
    // Adam keeps moving near a minimum; report the best iterate seen.
    if (!(out.finalLoss <= bestLoss) && std::isfinite(bestLoss)) {
      out.params = bounds.from_unconstrained(bestU);
      out.finalLoss = bestLoss;
    }
    if (!std::isfinite(out.finalLoss)) out.finite = false;
    out.trajectory.push_back(out.finalLoss);
  } else {
    out.finalLoss = out.trajectory.empty() ? std::numeric_limits<double>::quiet_NaN()
                                           : out.trajectory.back();
  }
  return out;
}

}  // namespace

FitReport fit(const Observation& obs, const FitConfig& cfg, const SurrogateModel* surrogate) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  Bounds bounds = cfg.bounds;
  if (cfg.mode == EvalMode::kSurrogate) {
    if (!surrogate) throw_config("surrogate mode requires a surrogate model");
    bounds = bounds.intersect(surrogate->recipe.ranges);
  }
  const std::vector<double> w = compute_weights(obs, cfg.madFactor);
  const LossFunction f(obs, w, cfg.mode, surrogate, cfg.quad, cfg.usePolarization, cfg.fdStep);

  FitReport rep;
  rep.init = cfg.init;
  rep.mode = cfg.mode;
  rep.usePolarization = cfg.usePolarization;
  rep.pixels = static_cast<int>(f.pixels().size());
  for (std::size_t i : f.pixels())
    if (w[i] != 1.0) ++rep.outliers;

  const int starts = cfg.multiStart ? cfg.starts : 1;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> jitter(-cfg.perturbation, cfg.perturbation);
  RunResult best;
  bool haveBest = false;
  for (int s = 0; s < starts; ++s) {
    ParamVector init = to_vector(cfg.init);
    if (s > 0)
      for (int k = 0; k < 6; ++k) init[k] *= 1.0 + jitter(rng);
    init = bounds.clamp_inside(init);
    RunResult r = adam(f, bounds, init, cfg);
    rep.startLosses.push_back(r.finalLoss);
    const bool better = !haveBest || (r.finite && !best.finite) ||
                        (r.finite == best.finite && r.finalLoss < best.finalLoss);
    if (better) {
      best = std::move(r);
      rep.bestStart = s;
      haveBest = true;
    }
  }

  rep.params = from_vector(best.params);
  rep.lossTrajectory = best.trajectory;
  rep.initialLoss = best.initialLoss;
  rep.finalLoss = best.finalLoss;
  rep.iterations = static_cast<int>(best.trajectory.size()) - (best.finite ? 1 : 0);
  rep.converged = best.finite && best.finalLoss <= best.initialLoss;
  if (best.finite) {
    const Rendered r = f.render(rep.params);
    double si = 0.0, sd = 0.0;
    for (std::size_t j = 0; j < f.pixels().size(); ++j) {
      const std::size_t i = f.pixels()[j];
      si += (obs.intensity[i] - r.intensity[j]) * (obs.intensity[i] - r.intensity[j]);
      sd += (obs.dolp[i] - r.dolp[j]) * (obs.dolp[i] - r.dolp[j]);
    }
    const double m = static_cast<double>(f.pixels().size());
    rep.intensityRms = std::sqrt(si / m);
    rep.dolpRms = std::sqrt(sd / m);
  } else {
    rep.intensityRms = rep.dolpRms = std::numeric_limits<double>::quiet_NaN();
  }
  rep.wallSeconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

// ---------------------------------------------------------------------------
// Report output

namespace {

nlohmann::json params_json(const FmbrdfParams& p) {
  return {{"mu", p.mu},       {"ks", p.ks},     {"rk", p.rk},
          {"alpha", p.alpha}, {"beta", p.beta}, {"kappa", p.kappa}};
}

// JSON has no NaN; non-finite values are written as null.
nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

}  // namespace

std::string FitReport::to_json() const {
  nlohmann::json j;
  j["params"] = params_json(params);
  j["init"] = params_json(init);
  j["initial_loss"] = number(initialLoss);
  j["final_loss"] = number(finalLoss);
  j["intensity_rms"] = number(intensityRms);
  j["dolp_rms"] = number(dolpRms);
  j["wall_seconds"] = wallSeconds;
  j["converged"] = converged;
  j["iterations"] = iterations;
  j["pixels"] = pixels;
  j["outliers"] = outliers;
  j["best_start"] = bestStart;
  nlohmann::json sl = nlohmann::json::array();
  for (double v : startLosses) sl.push_back(number(v));
  j["start_losses"] = sl;
  j["mode"] = mode == EvalMode::kSurrogate ? "surrogate" : "oracle";
  j["use_polarization"] = usePolarization;
  return j.dump(2);
}

void FitReport::write_json(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw_config("cannot open " + path + " for writing");
  out << to_json() << '\n';
}

void FitReport::write_trajectory_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw_config("cannot open " + path + " for writing");
  out << "iteration,loss\n";
  out.precision(17);
  for (std::size_t i = 0; i < lossTrajectory.size(); ++i)
    out << i << ',' << lossTrajectory[i] << '\n';
}

}  // namespace fmbrdf
