// SPDX-License-Identifier: Apache-2.0

#include "config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "fmbrdf/error.hpp"

namespace fmbrdf::cli {

using nlohmann::json;

namespace {

constexpr double kDeg = kPi / 180.0;

// Reads fields of one JSON object and rejects keys nobody asked for.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw_config(path_ + " must be an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() == 0) finish();
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = raw(key)) {
      if (!v->is_number()) throw_config(where(key) + " must be a number");
      out = v->get<double>();
      if (!std::isfinite(out)) throw_config(where(key) + " must be finite");
    }
  }

  void degrees(const std::string& key, double& radians) {
    double d = radians / kDeg;
    number(key, d);
    radians = d * kDeg;
  }

  void integer(const std::string& key, int& out) {
    if (const json* v = raw(key)) {
      if (!v->is_number_integer()) throw_config(where(key) + " must be an integer");
      out = v->get<int>();
    }
  }

  void seed(const std::string& key, std::uint64_t& out) {
    if (const json* v = raw(key)) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0))
        throw_config(where(key) + " must be a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = raw(key)) {
      if (!v->is_boolean()) throw_config(where(key) + " must be a boolean");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const json* v = raw(key)) {
      if (!v->is_string()) throw_config(where(key) + " must be a string");
      out = v->get<std::string>();
    }
  }

  void numbers(const std::string& key, std::vector<double>& out) {
    if (const json* v = raw(key)) {
      if (!v->is_array()) throw_config(where(key) + " must be an array");
      out.clear();
      for (const json& e : *v) {
        if (!e.is_number()) throw_config(where(key) + " must hold numbers");
        out.push_back(e.get<double>());
      }
    }
  }

  void integers(const std::string& key, std::vector<int>& out) {
    if (const json* v = raw(key)) {
      if (!v->is_array()) throw_config(where(key) + " must be an array");
      out.clear();
      for (const json& e : *v) {
        if (!e.is_number_integer()) throw_config(where(key) + " must hold integers");
        out.push_back(e.get<int>());
      }
    }
  }

  // [x, y, z] (normalized) or {"theta_deg": .., "phi_deg": ..}.
  void direction(const std::string& key, Direction& out) {
    const json* v = raw(key);
    if (!v) return;
    if (v->is_array()) {
      std::vector<double> c;
      numbers(key, c);
      if (c.size() != 3) throw_config(where(key) + " must have 3 components");
      try {
        out = Direction::normalized(Eigen::Vector3d(c[0], c[1], c[2]));
      } catch (const Error&) {
        throw_config(where(key) + " must be nonzero");
      }
      return;
    }
    Reader r(*v, where(key));
    double theta = 0.0, phi = 0.0;
    r.degrees("theta_deg", theta);
    r.degrees("phi_deg", phi);
    out = Direction::from_spherical(theta, phi);
  }

  // Sub-object, or an empty one when absent.
  Reader object(const std::string& key) {
    const json* v = raw(key);
    return Reader(v ? *v : empty(), where(key));
  }

  std::string where(const std::string& key) const { return path_ + "." + key; }

 private:
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw_config("unknown key " + where(it.key()));
  }
  static const json& empty() {
    static const json e = json::object();
    return e;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

EvalMode mode_from_string(const std::string& s) {
  if (s == "oracle") return EvalMode::kOracle;
  if (s == "surrogate") return EvalMode::kSurrogate;
  throw_config("unknown evaluation mode: " + s);
}

std::string to_string(EvalMode m) { return m == EvalMode::kOracle ? "oracle" : "surrogate"; }

void read_quadrature(Reader r, BodyQuadrature& q) {
  r.integer("n_theta", q.nTheta);
  r.integer("n_phi", q.nPhi);
  std::string s = to_string(q.spacing);
  r.string("spacing", s);
  q.spacing = theta_spacing_from_string(s);
  if (q.nTheta < 2 || q.nPhi < 4 || q.nPhi % 2 != 0)
    throw_config("quadrature needs n_theta >= 2 and an even n_phi >= 4");
}

void read_params(Reader r, FmbrdfParams& p) {
  r.number("mu", p.mu);
  r.number("ks", p.ks);
  r.number("rk", p.rk);
  r.degrees("alpha_deg", p.alpha);
  r.number("beta", p.beta);
  r.number("kappa", p.kappa);
}

void read_range(Reader& r, const std::string& key, double& lo, double& hi, double scale) {
  std::vector<double> v{lo / scale, hi / scale};
  r.numbers(key, v);
  if (v.size() != 2 || !(v[0] < v[1])) throw_config(r.where(key) + " must be [lo, hi] with lo < hi");
  lo = v[0] * scale;
  hi = v[1] * scale;
}

// Rethrows domain errors from validate() calls as config errors.
template <typename F>
void as_config(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kDomain) throw_config(e.what());
    throw;
  }
}

json params_json(const FmbrdfParams& p) {
  return {{"mu", p.mu},
          {"ks", p.ks},
          {"rk", p.rk},
          {"alpha_deg", p.alpha / kDeg},
          {"beta", p.beta},
          {"kappa", p.kappa}};
}

json dir_json(const Direction& d) { return json::array({d.x(), d.y(), d.z()}); }

json quad_json(const BodyQuadrature& q) {
  return {{"n_theta", q.nTheta}, {"n_phi", q.nPhi}, {"spacing", to_string(q.spacing)}};
}

}  // namespace

Config parse_config(const json& j) {
  Config c;
  {
    Reader root(j, "config");
    int version = 0;
    if (!root.has("version")) throw_config("config.version is required");
    root.integer("version", version);
    if (version != 1) throw_config("unsupported config version " + std::to_string(version));

    {
      Reader s = root.object("scene");
      std::string shape = to_string(c.scene.shape);
      s.string("shape", shape);
      c.scene.shape = shape_from_string(shape);
      s.integer("width", c.scene.width);
      s.integer("height", c.scene.height);
      s.direction("view", c.scene.V);
      s.direction("plane_normal", c.scene.planeNormal);
      s.number("limb_cut", c.scene.limbCut);
      {
        Reader l = s.object("light");
        l.direction("direction", c.scene.light.L);
        l.number("e0", c.scene.light.E0);
        std::vector<double> st{1.0, 0.0, 0.0, 0.0};
        const bool customStokes = l.has("stokes");
        l.numbers("stokes", st);
        if (st.size() != 4) throw_config("config.scene.light.stokes must have 4 components");
        c.scene.light.stokesIn = customStokes
                                     ? Stokes4(st[0], st[1], st[2], st[3]) * c.scene.light.E0
                                     : Stokes4(c.scene.light.E0, 0.0, 0.0, 0.0);
      }
      {
        Reader n = s.object("noise");
        n.number("rel_sigma", c.scene.noise.relSigma);
        n.seed("seed", c.scene.noise.seed);
      }
    }
    {
      Reader m = root.object("model");
      ModelSpec& ms = c.scene.model;
      std::string kind = to_string(ms.kind);
      m.string("kind", kind);
      ms.kind = model_kind_from_string(kind);
      std::string mode = to_string(ms.mode);
      m.string("mode", mode);
      ms.mode = mode_from_string(mode);
      read_quadrature(m.object("quadrature"), ms.quad);
      read_params(m.object("params"), ms.fmbrdf);
      Reader b = m.object("baseline");
      b.number("albedo", ms.baseline.albedo);
      b.degrees("sigma_deg", ms.baseline.sigma);
      b.number("ks", ms.baseline.ks);
      b.number("mu", ms.baseline.mu);
      b.number("kd", ms.baseline.kd);
    }
    {
      Reader f = root.object("fit");
      FitConfig& fc = c.fit;
      read_params(f.object("init"), fc.init);
      {
        Reader bounds = f.object("bounds");
        const char* keys[6] = {"mu", "ks", "rk", "alpha_deg", "beta", "kappa"};
        for (int k = 0; k < 6; ++k) {
          Reader pb = bounds.object(keys[k]);
          const double scale = k == 3 ? kDeg : 1.0;
          ParamBound& b = fc.bounds.b[k];
          double lo = b.lo / scale, hi = b.hi / scale;
          pb.number("lo", lo);
          pb.number("hi", hi);
          b.lo = lo * scale;
          b.hi = hi * scale;
          std::string t = to_string(b.transform);
          pb.string("transform", t);
          b.transform = transform_from_string(t);
        }
      }
      f.number("step", fc.step);
      f.number("beta1", fc.beta1);
      f.number("beta2", fc.beta2);
      f.number("epsilon", fc.epsilon);
      f.integer("iterations", fc.iterations);
      std::string mode = to_string(fc.mode);
      f.string("mode", mode);
      fc.mode = mode_from_string(mode);
      read_quadrature(f.object("quadrature"), fc.quad);
      f.number("mad_factor", fc.madFactor);
      f.boolean("use_polarization", fc.usePolarization);
      f.boolean("multi_start", fc.multiStart);
      f.integer("starts", fc.starts);
      f.number("perturbation", fc.perturbation);
      f.seed("seed", fc.seed);
      f.number("fd_step", fc.fdStep);
      f.number("min_cos_view", c.minCosView);
      f.number("min_cos_light", c.minCosLight);
    }
    {
      Reader s = root.object("surrogate");
      TrainingRecipe& r = c.surrogate;
      s.string("path", c.surrogatePath);
      s.integer("n_samples", r.nSamples);
      s.seed("data_seed", r.dataSeed);
      s.integer("geometries_per_param", r.geometriesPerParam);
      read_quadrature(s.object("quadrature"), r.quad);
      {
        Reader g = s.object("ranges");
        g.degrees("theta_max_deg", r.ranges.thetaMax);
        read_range(g, "mu", r.ranges.muLo, r.ranges.muHi, 1.0);
        read_range(g, "alpha_deg", r.ranges.alphaLo, r.ranges.alphaHi, kDeg);
        read_range(g, "beta", r.ranges.betaLo, r.ranges.betaHi, 1.0);
        read_range(g, "kappa", r.ranges.kappaLo, r.ranges.kappaHi, 1.0);
      }
      {
        Reader t = s.object("train");
        TrainConfig& tc = r.train;
        t.integers("body_hidden", tc.bodyHidden);
        t.integers("smith_hidden", tc.smithHidden);
        t.integer("epochs", tc.epochs);
        t.integer("smith_epochs", tc.smithEpochs);
        t.integer("batch_size", tc.batchSize);
        t.number("learning_rate", tc.learningRate);
        t.number("final_learning_rate", tc.finalLearningRate);
        t.number("validation_fraction", tc.validationFraction);
        t.seed("seed", tc.seed);
      }
      {
        Reader q = s.object("thresholds");
        q.number("max_rel_s0", c.thresholds.maxRelErrS0);
        q.number("max_abs_dolp", c.thresholds.maxAbsErrDolp);
      }
    }
    {
      Reader cv = root.object("curves");
      cv.numbers("sweep_angles_deg", c.curves.sweepAnglesDeg);
    }
  }

  as_config([&] {
    c.scene.validate();
    c.fit.validate();
  });
  const TrainingRecipe& r = c.surrogate;
  const ParamRanges& g = r.ranges;
  if (r.nSamples < 10) throw_config("surrogate.n_samples must be >= 10");
  if (r.geometriesPerParam < 1) throw_config("surrogate.geometries_per_param must be >= 1");
  if (!(g.thetaMax > 0.0 && g.thetaMax < kHalfPi)) throw_config("theta_max_deg must be in (0, 90)");
  if (g.muLo < 1.0 || g.alphaLo <= 0.0 || g.betaLo <= 0.0 || g.kappaLo < 0.0)
    throw_config("surrogate.ranges out of the physical domain");
  const TrainConfig& tc = r.train;
  for (int w : tc.bodyHidden)
    if (w < 1) throw_config("hidden widths must be >= 1");
  for (int w : tc.smithHidden)
    if (w < 1) throw_config("hidden widths must be >= 1");
  if (tc.epochs < 1 || tc.smithEpochs < 1 || tc.batchSize < 1)
    throw_config("epochs and batch size must be >= 1");
  if (!(tc.learningRate > 0.0) || !(tc.finalLearningRate > 0.0))
    throw_config("learning rates must be > 0");
  if (!(tc.validationFraction > 0.0 && tc.validationFraction < 1.0))
    throw_config("validation_fraction must be in (0, 1)");
  if (!(c.minCosView >= 0.0 && c.minCosView < 1.0) || !(c.minCosLight >= 0.0 && c.minCosLight < 1.0))
    throw_config("min_cos_view and min_cos_light must be in [0, 1)");
  for (double a : c.curves.sweepAnglesDeg)
    if (!(a > -90.0 && a < 90.0)) throw_config("sweep angles must be in (-90, 90) degrees");

  c.canonical = to_json(c);
  c.hash = fnv1a(c.canonical.dump());
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_config("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw_config("malformed config " + path + ": " + e.what());
  }
  return parse_config(j);
}

json to_json(const Config& c) {
  const SceneSpec& s = c.scene;
  const ModelSpec& m = s.model;
  const FitConfig& f = c.fit;
  const TrainingRecipe& r = c.surrogate;
  json bounds;
  const char* keys[6] = {"mu", "ks", "rk", "alpha_deg", "beta", "kappa"};
  for (int k = 0; k < 6; ++k) {
    const double scale = k == 3 ? kDeg : 1.0;
    bounds[keys[k]] = {{"lo", f.bounds.b[k].lo / scale},
                       {"hi", f.bounds.b[k].hi / scale},
                       {"transform", to_string(f.bounds.b[k].transform)}};
  }
  const double e0 = s.light.E0;
  const Stokes4 st = e0 > 0.0 ? Stokes4(s.light.stokesIn / e0) : Stokes4(1.0, 0.0, 0.0, 0.0);
  return {
      {"version", 1},
      {"scene",
       {{"shape", to_string(s.shape)},
        {"width", s.width},
        {"height", s.height},
        {"view", dir_json(s.V)},
        {"plane_normal", dir_json(s.planeNormal)},
        {"limb_cut", s.limbCut},
        {"light",
         {{"direction", dir_json(s.light.L)},
          {"e0", e0},
          {"stokes", json::array({st[0], st[1], st[2], st[3]})}}},
        {"noise", {{"rel_sigma", s.noise.relSigma}, {"seed", s.noise.seed}}}}},
      {"model",
       {{"kind", to_string(m.kind)},
        {"mode", to_string(m.mode)},
        {"quadrature", quad_json(m.quad)},
        {"params", params_json(m.fmbrdf)},
        {"baseline",
         {{"albedo", m.baseline.albedo},
          {"sigma_deg", m.baseline.sigma / kDeg},
          {"ks", m.baseline.ks},
          {"mu", m.baseline.mu},
          {"kd", m.baseline.kd}}}}},
      {"fit",
       {{"init", params_json(f.init)},
        {"bounds", bounds},
        {"step", f.step},
        {"beta1", f.beta1},
        {"beta2", f.beta2},
        {"epsilon", f.epsilon},
        {"iterations", f.iterations},
        {"mode", to_string(f.mode)},
        {"quadrature", quad_json(f.quad)},
        {"mad_factor", f.madFactor},
        {"use_polarization", f.usePolarization},
        {"multi_start", f.multiStart},
        {"starts", f.starts},
        {"perturbation", f.perturbation},
        {"seed", f.seed},
        {"fd_step", f.fdStep},
        {"min_cos_view", c.minCosView},
        {"min_cos_light", c.minCosLight}}},
      {"surrogate",
       {{"path", c.surrogatePath},
        {"n_samples", r.nSamples},
        {"data_seed", r.dataSeed},
        {"geometries_per_param", r.geometriesPerParam},
        {"quadrature", quad_json(r.quad)},
        {"ranges",
         {{"theta_max_deg", r.ranges.thetaMax / kDeg},
          {"mu", {r.ranges.muLo, r.ranges.muHi}},
          {"alpha_deg", {r.ranges.alphaLo / kDeg, r.ranges.alphaHi / kDeg}},
          {"beta", {r.ranges.betaLo, r.ranges.betaHi}},
          {"kappa", {r.ranges.kappaLo, r.ranges.kappaHi}}}},
        {"train",
         {{"body_hidden", r.train.bodyHidden},
          {"smith_hidden", r.train.smithHidden},
          {"epochs", r.train.epochs},
          {"smith_epochs", r.train.smithEpochs},
          {"batch_size", r.train.batchSize},
          {"learning_rate", r.train.learningRate},
          {"final_learning_rate", r.train.finalLearningRate},
          {"validation_fraction", r.train.validationFraction},
          {"seed", r.train.seed}}},
        {"thresholds",
         {{"max_rel_s0", c.thresholds.maxRelErrS0},
          {"max_abs_dolp", c.thresholds.maxAbsErrDolp}}}}},
      {"curves", {{"sweep_angles_deg", c.curves.sweepAnglesDeg}}}};
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_config("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a(ss.str());
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace fmbrdf::cli
