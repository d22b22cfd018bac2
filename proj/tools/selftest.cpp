// SPDX-License-Identifier: Apache-2.0

#include "selftest.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "fmbrdf/error.hpp"
#include "fmbrdf/reflectometry.hpp"
#include "fmbrdf/scene.hpp"
#include "fmbrdf/surrogate.hpp"

namespace fmbrdf::cli {

namespace {

bool fresnel_identities() {
  for (double mu : {1.2, 1.5, 2.0})
    for (int i = 0; i <= 20; ++i) {
      const double t = 0.999 * kHalfPi * i / 20.0;
      const FresnelReflectance<double> r = fresnel_rs_rp(mu, t);
      const FresnelTransmittance<double> tr = transmittances(mu, t);
      if (std::abs(r.rs + tr.ts - 1.0) > 1e-15 || std::abs(r.rp + tr.tp - 1.0) > 1e-15)
        return false;
    }
  return std::abs(fresnel_rs_rp(1.5, 0.0).unpolarized() - 0.04) < 1e-12 &&
         fresnel_rs_rp(1.5, brewster_angle(1.5)).rp < 1e-12;
}

bool ndf_normalization() {
  for (double alpha : {0.1, 0.3, 0.8})
    for (double beta : {1.0, 2.0, 3.5}) {
      const Ndf ndf(alpha, beta);
      const double v = kTwoPi * integrate_profile(
                                    [&](double t) { return ndf(t) * std::cos(t) * std::sin(t); },
                                    0.0, kHalfPi, alpha);
      if (std::abs(v - 1.0) > 1e-6) return false;
    }
  return true;
}

bool stokes_round_trip() {
  const Stokes4 s(1.0, 0.3, -0.2, 0.0);
  const std::array<double, 4> f = filter_intensities(s);
  const Stokes4 r = stokes_from_four(f[0], f[1], f[2], f[3]);
  return (r - s).norm() < 1e-14;
}

bool model_consistency() {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const FmbrdfParams p{1.5, 0.3, 1.5, 0.3, 2.0, 3.0};
  const FmbrdfModel m(p, {8, 16, ThetaSpacing::kAngle});
  const Direction N(0.0, 0.0, 1.0);
  for (int k = 0; k < 4; ++k) {
    const Direction L = Direction::from_spherical(1.3 * u(rng), kTwoPi * u(rng));
    const Direction V = Direction::from_spherical(1.3 * u(rng), kTwoPi * u(rng));
    const FramePair fr = make_frames(N, L, V);
    const ShadingGeometry g = make_shading(N, L, V);
    const Stokes4 sIn = unpolarized(1.0);
    const double bs = body_stokes(m, N, L, V, fr, sIn)[0];
    const double br = body_radiance(m, N, L, V, 1.0);
    const double ss = surface_stokes(m, g, fr, sIn)[0];
    const double sr = surface_radiance(m, g, 1.0);
    if (std::abs(bs - br) > 1e-12 * std::max(1.0, br) || std::abs(ss - sr) > 1e-12 * std::max(1.0, sr))
      return false;
    // Reciprocity of the BRDF.
    const double fLV = (br + sr) / g.cosNL;
    const double bRev = body_radiance(m, N, V, L, 1.0);
    const double sRev = surface_radiance(m, make_shading(N, V, L), 1.0);
    const double fVL = (bRev + sRev) / g.cosNV;
    if (std::abs(fLV - fVL) > 1e-6 * std::abs(fLV)) return false;
  }
  return true;
}

bool pfm_round_trip() {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("fmbrdf_selftest_" + std::to_string(std::random_device{}()));
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "t.pfm").string();
  std::vector<float> data(12 * 9);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = 0.25f * static_cast<float>(i) - 3.0f;
  write_pfm(path, 12, 9, data);
  int w = 0, h = 0;
  const std::vector<float> back = read_pfm(path, w, h);
  std::filesystem::remove_all(dir);
  return w == 12 && h == 9 && back == data;
}

bool surrogate_serialization() {
  SurrogateModel m;
  const ParamRanges r;
  m.body = Mlp(kBodyFeatures, {8, 8}, 3, 1);
  m.smith = Mlp(kSmithInputs, {4}, 1, 2);
  m.body.quantize();
  m.smith.quantize();
  m.bodyBox = r.body_box();
  m.smithBox = r.smith_box();
  std::stringstream ss;
  m.write(ss);
  const std::string bytes = ss.str();
  std::stringstream in(bytes);
  const SurrogateModel back = SurrogateModel::read(in);
  Eigen::VectorXd x(kBodyInputs);
  x << 0.3, 0.4, 1.0, 0.3, 2.0, 5.0, 1.5;
  if ((back.body_sum(x) - m.body_sum(x)).norm() != 0.0) return false;
  std::string bad = bytes;
  bad[0] = 'X';
  std::stringstream badIn(bad);
  try {
    SurrogateModel::read(badIn);
  } catch (const Error& e) {
    return e.kind() == ErrorKind::kConfig;
  }
  return false;
}

bool reparameterization() {
  const Bounds b;
  const ParamVector p = to_vector(FmbrdfParams{1.7, 0.2, 3.0, 0.25, 1.4, 12.0});
  return (b.from_unconstrained(b.to_unconstrained(p)) - p).cwiseAbs().maxCoeff() < 1e-12;
}

}  // namespace

int run_selftest(std::ostream& out) {
  const std::pair<const char*, std::function<bool()>> checks[] = {
      {"fresnel identities", fresnel_identities},
      {"ndf slope-area normalization", ndf_normalization},
      {"stokes from filter intensities", stokes_round_trip},
      {"s0 consistency and reciprocity", model_consistency},
      {"pfm round trip", pfm_round_trip},
      {"surrogate serialization", surrogate_serialization},
      {"bounded reparameterization", reparameterization},
  };
  int failures = 0;
  for (const auto& [name, check] : checks) {
    bool ok = false;
    try {
      ok = check();
    } catch (const std::exception& e) {
      out << "  error: " << e.what() << '\n';
    }
    out << (ok ? "PASS " : "FAIL ") << name << '\n';
    if (!ok) ++failures;
  }
  return failures;
}

}  // namespace fmbrdf::cli
