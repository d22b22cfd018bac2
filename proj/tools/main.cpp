// SPDX-License-Identifier: Apache-2.0

// fmbrdf command-line tool: render, fit, curves, train-surrogate, selftest.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <string>

#include "config.hpp"
#include "fmbrdf/error.hpp"
#include "fmbrdf/parallel.hpp"
#include "fmbrdf/reflectometry.hpp"
#include "fmbrdf/scene.hpp"
#include "fmbrdf/surrogate.hpp"
#include "plot.hpp"
#include "selftest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fmbrdf;
using namespace fmbrdf::cli;

namespace {

enum ExitCode { kOk = 0, kTestFailure = 1, kConfigError = 2, kEvalError = 3, kSurrogateError = 4 };

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::kConfig:
      return kConfigError;
    case ErrorKind::kSurrogate:
      return kSurrogateError;
    case ErrorKind::kDomain:
    case ErrorKind::kEvaluation:
      return kEvalError;
  }
  return kEvalError;
}

struct Common {
  std::string config;
  std::string out = ".";
  std::string model;
  std::string mode;
  std::string surrogate;
};

Config load_with_overrides(const Common& o) {
  json j = json{{"version", 1}};
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw_config("cannot open config " + o.config);
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw_config("malformed config " + o.config + ": " + e.what());
    }
  }
  if (!j.is_object()) throw_config("config must be an object");
  if (!o.model.empty()) j["model"]["kind"] = o.model;
  if (!o.mode.empty()) {
    j["model"]["mode"] = o.mode;
    j["fit"]["mode"] = o.mode;
  }
  if (!o.surrogate.empty()) j["surrogate"]["path"] = o.surrogate;
  return parse_config(j);
}

std::unique_ptr<SurrogateModel> maybe_load_surrogate(const Config& c, bool needed) {
  if (!needed) return nullptr;
  if (c.surrogatePath.empty()) throw_config("surrogate mode needs surrogate.path or --surrogate");
  return std::make_unique<SurrogateModel>(SurrogateModel::load(c.surrogatePath));
}

fs::path prepare_out(const std::string& out) {
  fs::path p(out);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw_config("cannot create output directory " + out);
  return p;
}

class Manifest {
 public:
  Manifest(std::string command, const Config& c) {
    j_["command"] = std::move(command);
    j_["config_hash"] = hex64(c.hash);
    j_["config"] = c.canonical;
    j_["outputs"] = json::object();
    j_["inputs"] = json::object();
  }
  void input(const std::string& path) { j_["inputs"][path] = hex64(file_hash(path)); }
  void output(const fs::path& dir, const std::string& name) {
    j_["outputs"][name] = hex64(file_hash((dir / name).string()));
  }
  json& extra() { return j_; }
  void write(const fs::path& dir) const {
    std::ofstream out(dir / "manifest.json");
    if (!out) throw_config("cannot write manifest");
    out << j_.dump(2) << '\n';
  }

 private:
  json j_;
};

void write_curve_files(const fs::path& dir, const std::string& stem, const Curve& c,
                       Manifest& man) {
  write_curve_csv((dir / (stem + ".csv")).string(), c);
  Series scatter{c.angleDeg, c.value, {150, 170, 220}, true};
  Series mean;
  mean.color = {200, 40, 40};
  for (const CurveBin& b : c.bins) {
    mean.x.push_back(b.angleDeg);
    mean.y.push_back(b.mean);
  }
  plot_png((dir / (stem + ".png")).string(), {scatter, mean});
  man.output(dir, stem + ".csv");
  man.output(dir, stem + ".png");
}

// --- render -------------------------------------------------------------------

int cmd_render(const Common& o) {
  const Config c = load_with_overrides(o);
  const bool needSurrogate =
      c.scene.model.kind == ModelKind::kFmbrdf && c.scene.model.mode == EvalMode::kSurrogate;
  const auto sur = maybe_load_surrogate(c, needSurrogate);
  const PolarimetricImage img = render(c.scene, sur.get());
  const fs::path dir = prepare_out(o.out);
  Manifest man("render", c);
  man.extra()["spec_hash"] = hex64(img.specHash);
  man.extra()["valid_pixels"] = img.valid_count();
  if (needSurrogate) man.input(c.surrogatePath);
  write_stokes_pfm((dir / "image").string(), img);
  write_normals_pfm((dir / "normals").string(), img);
  write_previews((dir / "image").string(), img);
  for (const char* s : {"image.s0.pfm", "image.s1.pfm", "image.s2.pfm", "image.mask.pfm",
                        "normals.nx.pfm", "normals.ny.pfm", "normals.nz.pfm",
                        "image.intensity.png", "image.dolp.png", "image.aolp.png"})
    man.output(dir, s);
  try {
    write_curve_files(dir, "dolp_curve", dolp_curve(img, c.scene.V), man);
    write_curve_files(dir, "intensity_curve", intensity_curve(img, c.scene.light.L), man);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kDomain) throw;
    std::cerr << "note: curves skipped: " << e.what() << '\n';
  }
  man.write(dir);
  std::cout << "rendered " << img.width << "x" << img.height << ", " << img.valid_count()
            << " valid pixels, config " << hex64(c.hash) << '\n';
  return kOk;
}

// --- fit ----------------------------------------------------------------------

struct FitOptions {
  std::string image;
  std::string normals;
  bool noPolarization = false;
  bool multiStart = false;
  int iterations = 0;
};

int cmd_fit(const Common& o, const FitOptions& f) {
  Config c = load_with_overrides(o);
  if (f.noPolarization) c.fit.usePolarization = false;
  if (f.multiStart) c.fit.multiStart = true;
  if (f.iterations > 0) c.fit.iterations = f.iterations;
  const auto sur = maybe_load_surrogate(c, c.fit.mode == EvalMode::kSurrogate);
  const std::string normals = f.normals.empty() ? f.image : f.normals;
  const PolarimetricImage img = read_image_pfm(f.image, normals);
  const Observation obs = make_observation(img, c.scene.light.L, c.scene.V, c.scene.light.E0,
                                           c.minCosView, c.minCosLight);
  if (obs.valid_count() == 0) throw_config("image has no usable pixels");
  const FitReport rep = fit(obs, c.fit, sur.get());

  const fs::path dir = prepare_out(o.out);
  rep.write_json((dir / "fit.json").string());
  rep.write_trajectory_csv((dir / "loss.csv").string());
  Manifest man("fit", c);
  for (const char* s : {".s0.pfm", ".s1.pfm", ".s2.pfm", ".mask.pfm"}) man.input(f.image + s);
  for (const char* s : {".nx.pfm", ".ny.pfm", ".nz.pfm"}) man.input(normals + s);
  if (sur) man.input(c.surrogatePath);
  man.extra()["use_polarization"] = c.fit.usePolarization;
  man.output(dir, "loss.csv");
  man.write(dir);
  std::cout << rep.to_json() << '\n';
  return rep.converged ? kOk : kEvalError;
}

// --- curves -------------------------------------------------------------------

struct CurveOpts {
  std::string image;
  std::string normals;
};

double rmse(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

int cmd_curves(const Common& o, const CurveOpts& co) {
  const Config c = load_with_overrides(o);
  const ModelSpec& ms = c.scene.model;
  const bool needSurrogate = ms.kind == ModelKind::kFmbrdf && ms.mode == EvalMode::kSurrogate;
  const auto sur = maybe_load_surrogate(c, needSurrogate);
  const std::string tag = to_string(ms.kind);
  const fs::path dir = prepare_out(o.out);
  Manifest man("curves", c);
  man.extra()["model"] = tag;

  PolarimetricImage modelImg;
  if (co.image.empty()) {
    modelImg = render(c.scene, sur.get());
  } else {
    const std::string normals = co.normals.empty() ? co.image : co.normals;
    const PolarimetricImage obs = read_image_pfm(co.image, normals);
    for (const char* s : {".s0.pfm", ".s1.pfm", ".s2.pfm", ".mask.pfm"}) man.input(co.image + s);
    for (const char* s : {".nx.pfm", ".ny.pfm", ".nz.pfm"}) man.input(normals + s);
    write_curve_files(dir, "observed.dolp_curve", dolp_curve(obs, c.scene.V), man);
    write_curve_files(dir, "observed.intensity_curve", intensity_curve(obs, c.scene.light.L), man);

    // Model evaluated at the observed normals.
    const Evaluator eval(ms, sur.get());
    modelImg = obs;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      if (!obs.mask[i]) continue;
      try {
        modelImg.stokes[i] = eval.stokes(obs.normals[i], c.scene.V, c.scene.light);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::kConfig) throw;
        modelImg.mask[i] = 0;
        modelImg.stokes[i] = Stokes4::Zero();
      }
    }
    std::vector<double> oi, mi, od, md;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      if (!modelImg.mask[i] || !(obs.stokes[i][0] > 0.0) || !(modelImg.stokes[i][0] > 0.0))
        continue;
      oi.push_back(obs.stokes[i][0]);
      mi.push_back(modelImg.stokes[i][0]);
      od.push_back(dolp(obs.stokes[i]));
      md.push_back(dolp(modelImg.stokes[i]));
    }
    if (oi.empty()) throw_domain("no valid pixels");
    std::ofstream out(dir / (tag + ".rmse.csv"));
    out.precision(10);
    out << "model,curve,rmse,count\n";
    out << tag << ",dolp," << rmse(od, md) << ',' << od.size() << '\n';
    out << tag << ",intensity," << rmse(oi, mi) << ',' << oi.size() << '\n';
    out.close();
    man.output(dir, tag + ".rmse.csv");
  }
  write_curve_files(dir, tag + ".dolp_curve", dolp_curve(modelImg, c.scene.V), man);
  write_curve_files(dir, tag + ".intensity_curve", intensity_curve(modelImg, c.scene.light.L),
                    man);

  if (!c.curves.sweepAnglesDeg.empty()) {
    const Evaluator eval(ms, sur.get());
    const std::vector<SweepSample> sweep = planar_sweep(eval, c.scene.light, c.curves.sweepAnglesDeg);
    const std::string name = tag + ".sweep.csv";
    std::ofstream out(dir / name);
    out.precision(10);
    out << "angle_deg,value,count\n";
    Series line;
    line.color = {40, 40, 200};
    for (const SweepSample& s : sweep) {
      out << s.angleDeg << ',' << s.intensity << ",1\n";
      line.x.push_back(s.angleDeg);
      line.y.push_back(s.intensity);
    }
    out.close();
    plot_png((dir / (tag + ".sweep.png")).string(), {line});
    man.output(dir, name);
    man.output(dir, tag + ".sweep.png");
  }
  man.write(dir);
  std::cout << "curves for " << tag << " written to " << dir.string() << '\n';
  return kOk;
}

// --- train-surrogate ----------------------------------------------------------

json metrics_json(const ValidationMetrics& m) {
  return {{"max_rel_err_s0", m.maxRelErrS0},
          {"rms_rel_err_s0", m.rmsRelErrS0},
          {"max_abs_err_dolp", m.maxAbsErrDolp},
          {"max_rel_err_g1", m.maxRelErrG1},
          {"count", m.count}};
}

bool within(const ValidationMetrics& m, const QualityThresholds& t) {
  return m.maxRelErrS0 <= t.maxRelErrS0 && m.maxAbsErrDolp <= t.maxAbsErrDolp;
}

int cmd_validate(const Config& c, const std::string& path) {
  const SurrogateModel m = SurrogateModel::load(path);
  const ValidationMetrics again = revalidate(m);
  const ValidationMetrics& st = m.validation;
  const double diff = std::max({std::abs(again.maxRelErrS0 - st.maxRelErrS0),
                                std::abs(again.rmsRelErrS0 - st.rmsRelErrS0),
                                std::abs(again.maxAbsErrDolp - st.maxAbsErrDolp),
                                std::abs(again.maxRelErrG1 - st.maxRelErrG1)});
  const json j = {{"stored", metrics_json(st)},
                  {"recomputed", metrics_json(again)},
                  {"max_difference", diff},
                  {"replay_ok", diff <= 1e-6 && again.count == st.count},
                  {"within_thresholds", within(again, c.thresholds)}};
  std::cout << j.dump(2) << '\n';
  if (diff > 1e-6 || again.count != st.count) {
    std::cerr << "stored validation metrics do not replay\n";
    return kSurrogateError;
  }
  return within(again, c.thresholds) ? kOk : kSurrogateError;
}

int cmd_train(const Common& o, const std::string& validatePath) {
  const Config c = load_with_overrides(o);
  if (!validatePath.empty()) return cmd_validate(c, validatePath);
  const auto t0 = std::chrono::steady_clock::now();
  const TrainingRecipe& r = c.surrogate;
  std::cerr << "generating " << r.nSamples << " training samples\n";
  const TrainingSet ts =
      generate_training_set(r.ranges, r.nSamples, r.quad, r.dataSeed, r.geometriesPerParam);
  std::cerr << "training\n";
  const SurrogateModel m = train(ts, r);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path dir = prepare_out(o.out);
  m.save((dir / "surrogate.bin").string());
  const json j = {{"validation", metrics_json(m.validation)},
                  {"thresholds",
                   {{"max_rel_s0", c.thresholds.maxRelErrS0},
                    {"max_abs_dolp", c.thresholds.maxAbsErrDolp}}},
                  {"within_thresholds", within(m.validation, c.thresholds)},
                  {"wall_seconds", secs}};
  {
    std::ofstream out(dir / "validation.json");
    out << j.dump(2) << '\n';
  }
  Manifest man("train-surrogate", c);
  man.output(dir, "surrogate.bin");
  man.output(dir, "validation.json");
  man.write(dir);
  std::cout << j.dump(2) << '\n';
  return within(m.validation, c.thresholds) ? kOk : kSurrogateError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fresnel microfacet BRDF toolkit"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker thread cap (0 = all cores)")->check(CLI::NonNegativeNumber);

  Common common;
  auto addCommon = [&](CLI::App* sub, bool withModel) {
    sub->add_option("--config", common.config, "JSON config (version 1)");
    sub->add_option("--out", common.out, "Output directory")->capture_default_str();
    sub->add_option("--mode", common.mode, "oracle or surrogate");
    sub->add_option("--surrogate", common.surrogate, "Surrogate model file");
    if (withModel) sub->add_option("--model", common.model, "fmbrdf, lambertian, oren-nayar, torrance-sparrow, pbrdf-flat");
  };

  CLI::App* render = app.add_subcommand("render", "Render a synthetic polarimetric image");
  addCommon(render, true);

  FitOptions fo;
  CLI::App* fitCmd = app.add_subcommand("fit", "Fit model parameters to a polarimetric image");
  addCommon(fitCmd, false);
  fitCmd->add_option("--image", fo.image, "Stokes image prefix (<prefix>.s0.pfm ...)")->required();
  fitCmd->add_option("--normals", fo.normals, "Normal map prefix (<prefix>.nx.pfm ...)");
  fitCmd->add_flag("--no-polarization", fo.noPolarization, "Intensity term only");
  fitCmd->add_flag("--multi-start", fo.multiStart, "Run several perturbed starts");
  fitCmd->add_option("--iterations", fo.iterations, "Override the iteration count");

  CurveOpts co;
  CLI::App* curves = app.add_subcommand("curves", "DoLP and intensity curves");
  addCommon(curves, true);
  curves->add_option("--image", co.image, "Observed Stokes image prefix");
  curves->add_option("--normals", co.normals, "Normal map prefix");

  std::string validatePath;
  CLI::App* trainCmd = app.add_subcommand("train-surrogate", "Train and validate the surrogate");
  addCommon(trainCmd, false);
  trainCmd->add_option("--validate", validatePath, "Replay the stored validation of a model file");

  CLI::App* selftest = app.add_subcommand("selftest", "Run the fast invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    set_thread_count(threads);
    if (render->parsed()) return cmd_render(common);
    if (fitCmd->parsed()) return cmd_fit(common, fo);
    if (curves->parsed()) return cmd_curves(common, co);
    if (trainCmd->parsed()) return cmd_train(common, validatePath);
    if (selftest->parsed()) return run_selftest(std::cout) == 0 ? kOk : kTestFailure;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kEvalError;
  }
  return kOk;
}
