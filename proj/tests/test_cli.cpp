// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "fmbrdf/baselines.hpp"
#include "fmbrdf/reflectometry.hpp"
#include "fmbrdf/scene.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fmbrdf;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(::testing::TempDir()) / ("fmbrdf_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& args) {
  const std::string cmd = std::string(FMBRDF_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

json small_config(int size = 12) {
  return {{"version", 1},
          {"scene",
           {{"width", size},
            {"height", size},
            {"light", {{"direction", {{"theta_deg", 30.0}, {"phi_deg", 15.0}}}}}}},
          {"model", {{"mode", "oracle"}, {"quadrature", {{"n_theta", 4}, {"n_phi", 8}}}}},
          {"fit", {{"mode", "oracle"}, {"quadrature", {{"n_theta", 4}, {"n_phi", 8}}}}}};
}

}  // namespace

TEST(Cli, SelftestPasses) { EXPECT_EQ(run("selftest"), 0); }

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  const fs::path d = scratch("usage");
  EXPECT_EQ(run("render --model phong --out " + d.string()), 2);
  EXPECT_EQ(run("curves --model phong --out " + d.string()), 2);
}

TEST(Cli, ConfigErrors) {
  const fs::path d = scratch("config");
  json j = small_config();
  j["scene"]["colour"] = 3;
  EXPECT_EQ(run("render --config " + write_config(d, j).string() + " --out " + d.string()), 2);
  j = small_config();
  j.erase("version");
  EXPECT_EQ(run("render --config " + write_config(d, j).string() + " --out " + d.string()), 2);
  j = small_config();
  j["scene"]["width"] = "wide";
  EXPECT_EQ(run("render --config " + write_config(d, j).string() + " --out " + d.string()), 2);
  std::ofstream(d / "broken.json") << "{ \"version\": 1, ";
  EXPECT_EQ(run("render --config " + (d / "broken.json").string() + " --out " + d.string()), 2);
}

TEST(Cli, RenderIsDeterministicAndFillsDefaults) {
  const fs::path a = scratch("render_a"), b = scratch("render_b");
  json j = small_config();
  j["scene"]["noise"] = {{"rel_sigma", 0.01}, {"seed", 4}};
  const fs::path cfg = write_config(a, j);
  ASSERT_EQ(run("--threads 1 render --config " + cfg.string() + " --out " + a.string()), 0);
  ASSERT_EQ(run("--threads 2 render --config " + cfg.string() + " --out " + b.string()), 0);
  const std::string ma = slurp(a / "manifest.json");
  EXPECT_EQ(ma, slurp(b / "manifest.json"));
  EXPECT_EQ(slurp(a / "image.s0.pfm"), slurp(b / "image.s0.pfm"));
  const json m = json::parse(ma);
  EXPECT_EQ(m["command"], "render");
  // Fields absent from the file appear with their defaults.
  EXPECT_DOUBLE_EQ(m["config"]["model"]["params"]["mu"].get<double>(), FmbrdfParams{}.mu);
  EXPECT_EQ(m["config"]["fit"]["iterations"].get<int>(), FitConfig{}.iterations);
  EXPECT_TRUE(m["outputs"].contains("image.dolp.png"));
  EXPECT_GT(fs::file_size(a / "image.dolp.png"), 0u);
  EXPECT_GT(fs::file_size(a / "dolp_curve.csv"), 0u);

  j["scene"]["noise"]["seed"] = 5;
  const fs::path c = scratch("render_c");
  ASSERT_EQ(run("render --config " + write_config(c, j).string() + " --out " + c.string()), 0);
  EXPECT_NE(json::parse(slurp(c / "manifest.json"))["config_hash"], m["config_hash"]);
  EXPECT_NE(slurp(c / "image.s0.pfm"), slurp(a / "image.s0.pfm"));
}

TEST(Cli, FitRejectsMismatchedDimensions) {
  const fs::path a = scratch("fit_a"), b = scratch("fit_b");
  ASSERT_EQ(run("render --config " + write_config(a, small_config(12)).string() + " --out " + a.string()), 0);
  ASSERT_EQ(run("render --config " + write_config(b, small_config(16)).string() + " --out " + b.string()), 0);
  const fs::path out = scratch("fit_out");
  EXPECT_EQ(run("fit --config " + (a / "config.json").string() + " --image " + (a / "image").string() +
                " --normals " + (b / "normals").string() + " --out " + out.string()),
            2);
  EXPECT_EQ(run("fit --config " + (a / "config.json").string() + " --image " + (a / "missing").string() +
                " --out " + out.string()),
            2);
}

TEST(Cli, FitWritesReport) {
  const fs::path a = scratch("fit_run");
  const fs::path cfg = write_config(a, small_config(12));
  ASSERT_EQ(run("render --config " + cfg.string() + " --out " + a.string()), 0);
  const fs::path out = a / "fit";
  ASSERT_EQ(run("fit --config " + cfg.string() + " --image " + (a / "image").string() + " --normals " +
                (a / "normals").string() + " --iterations 4 --no-polarization --out " + out.string()),
            0);
  const json r = json::parse(slurp(out / "fit.json"));
  EXPECT_FALSE(r["use_polarization"].get<bool>());
  EXPECT_EQ(r["iterations"].get<int>(), 4);
  EXPECT_EQ(r["mode"], "oracle");
  EXPECT_TRUE(r["converged"].get<bool>());
  EXPECT_GT(fs::file_size(out / "loss.csv"), 0u);
  const json m = json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(m["inputs"].size(), 7u);
}

TEST(Cli, CurvesRmseMatchesRecomputation) {
  const fs::path a = scratch("curves");
  json j = small_config(24);
  const fs::path cfg = write_config(a, j);
  ASSERT_EQ(run("render --config " + cfg.string() + " --out " + a.string()), 0);
  const fs::path out = a / "curves";
  ASSERT_EQ(run("curves --config " + cfg.string() + " --model lambertian --image " + (a / "image").string() +
                " --normals " + (a / "normals").string() + " --out " + out.string()),
            0);
  ASSERT_EQ(run("curves --config " + cfg.string() + " --model oren-nayar --image " + (a / "image").string() +
                " --normals " + (a / "normals").string() + " --out " + out.string()),
            0);
  EXPECT_NE(slurp(out / "lambertian.intensity_curve.csv"), slurp(out / "oren-nayar.intensity_curve.csv"));
  EXPECT_GT(fs::file_size(out / "lambertian.dolp_curve.png"), 0u);

  // Lambertian intensity and DoLP RMSE recomputed from the observed files.
  const PolarimetricImage obs = read_image_pfm((a / "image").string(), (a / "normals").string());
  const Direction L = Direction::from_spherical(30.0 * kPi / 180.0, 15.0 * kPi / 180.0);
  const double albedo = BaselineParams{}.albedo;
  double si = 0.0, sd = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (!obs.mask[i]) continue;
    const double model = lambertian(albedo, obs.normals[i], L, 1.0);
    if (!(obs.stokes[i][0] > 0.0) || !(model > 0.0)) continue;
    si += (obs.stokes[i][0] - model) * (obs.stokes[i][0] - model);
    const double rho = std::hypot(obs.stokes[i][1], obs.stokes[i][2]) / obs.stokes[i][0];
    sd += rho * rho;
    ++n;
  }
  std::ifstream in(out / "lambertian.rmse.csv");
  std::string header, dolpLine, intLine;
  std::getline(in, header);
  std::getline(in, dolpLine);
  std::getline(in, intLine);
  EXPECT_EQ(header, "model,curve,rmse,count");
  auto field = [](const std::string& line, int k) {
    std::stringstream ss(line);
    std::string f;
    for (int i = 0; i <= k; ++i) std::getline(ss, f, ',');
    return f;
  };
  EXPECT_EQ(std::stoi(field(intLine, 3)), n);
  EXPECT_NEAR(std::stod(field(intLine, 2)), std::sqrt(si / n), 1e-6 * std::sqrt(si / n));
  EXPECT_NEAR(std::stod(field(dolpLine, 2)), std::sqrt(sd / n), 1e-6 * std::sqrt(sd / n));
}

TEST(Cli, CorruptedSurrogateRejected) {
  const fs::path d = scratch("surrogate");
  std::ofstream(d / "bad.bin", std::ios::binary) << "not a surrogate model at all";
  EXPECT_EQ(run("train-surrogate --validate " + (d / "bad.bin").string()), 2);
  EXPECT_EQ(run("render --mode surrogate --surrogate " + (d / "bad.bin").string() + " --out " + d.string()), 2);
  EXPECT_EQ(run("render --mode surrogate --out " + d.string()), 2);
}
