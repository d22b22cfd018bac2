// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fmbrdf/baselines.hpp"
#include "fmbrdf/brdf.hpp"
#include "fmbrdf/surrogate.hpp"

namespace fmbrdf {

enum class Shape { kSphere, kPlane };

std::string to_string(Shape s);
Shape shape_from_string(const std::string& s);

struct NoiseSpec {
  /// Standard deviation of the additive Gaussian noise on each filter
  /// intensity, as a fraction of the mean filter intensity over valid pixels.
  double relSigma = 0.0;
  std::uint64_t seed = 0;
};

/// Which reflectance model a scene uses, with the parameters of each.
struct ModelSpec {
  ModelKind kind = ModelKind::kFmbrdf;
  FmbrdfParams fmbrdf;
  BaselineParams baseline;
  EvalMode mode = EvalMode::kOracle;
  BodyQuadrature quad;
};

struct SceneSpec {
  Shape shape = Shape::kSphere;
  int width = 64;
  int height = 64;
  /// Orthographic view axis (towards the camera).
  Direction V{0.0, 0.0, 1.0};
  LightSource light{Direction(0.0, 0.0, 1.0), 1.0, Stokes4(1.0, 0.0, 0.0, 0.0)};
  /// Surface normal of the plane shape.
  Direction planeNormal{0.0, 0.0, 1.0};
  ModelSpec model;
  NoiseSpec noise;
  /// Pixels with N.V below this are background.
  double limbCut = 0.1;

  void validate() const;
  /// Stable FNV-1a hash over every field.
  std::uint64_t hash() const;
};

struct PolarimetricImage {
  int width = 0;
  int height = 0;
  std::vector<Stokes4> stokes;
  std::vector<Direction> normals;
  std::vector<std::uint8_t> mask;
  std::uint64_t specHash = 0;

  std::size_t size() const { return stokes.size(); }
  std::size_t valid_count() const;
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

/// Per-pixel reflectance evaluator for one model and parameter set. Built
/// once so tables are shared across pixels; evaluation is thread-safe.
class Evaluator {
 public:
  Evaluator(const ModelSpec& spec, const SurrogateModel* surrogate = nullptr);

  Stokes4 stokes(const Direction& N, const Direction& V, const LightSource& light) const;

  const ModelSpec& spec() const { return spec_; }

 private:
  ModelSpec spec_;
  const SurrogateModel* surrogate_;
  std::shared_ptr<const FmbrdfModel> fmbrdf_;
  std::shared_ptr<const TorranceSparrow> ts_;
  std::shared_ptr<const PbrdfFlat> pbrdf_;
};

/// Orthographic sphere normal at pixel (x, y), or nothing off the
/// silhouette. The camera basis has z = V.
bool sphere_normal(int x, int y, int width, int height, const Direction& V, Direction& N);

/// Renders every pixel; pixels whose evaluation fails or that fall below the
/// limb cut are masked out and zeroed. Filter-intensity noise is applied
/// after evaluation.
PolarimetricImage render(const SceneSpec& spec, const SurrogateModel* surrogate = nullptr);

/// Intensities behind linear polarizers at 0, 45, 90 and 135 degrees.
std::array<double, 4> filter_intensities(const Stokes4& s);

// --- Curves -----------------------------------------------------------------

struct CurveBin {
  double angleDeg = 0.0;  // bin center
  double mean = 0.0;
  int count = 0;
};

struct Curve {
  std::vector<double> angleDeg;  // per-pixel samples
  std::vector<double> value;
  std::vector<CurveBin> bins;
};

inline constexpr int kCurveBins = 64;

/// DoLP against angle(N, V) in degrees over [0, 90].
Curve dolp_curve(const PolarimetricImage& img, const Direction& V);
/// s0 against angle(N, L) in degrees over [0, 90].
Curve intensity_curve(const PolarimetricImage& img, const Direction& L);

/// Intensity of a flat patch (normal +Z) seen from a camera rotated in the
/// x-z plane, which also contains L. Angles in degrees; positive angles tilt
/// the camera towards +x.
struct SweepSample {
  double angleDeg = 0.0;
  double intensity = 0.0;
};
std::vector<SweepSample> planar_sweep(const Evaluator& eval, const LightSource& light,
                                      const std::vector<double>& anglesDeg);

/// View direction for a planar-sweep angle.
Direction sweep_view(double angleDeg);

// --- I/O ----------------------------------------------------------------------

/// Grayscale PFM (little-endian, bottom-to-top rows as the format requires).
void write_pfm(const std::string& path, int width, int height, const std::vector<float>& data);
std::vector<float> read_pfm(const std::string& path, int& width, int& height);

/// Writes <prefix>.s0.pfm, .s1.pfm, .s2.pfm and <prefix>.mask.pfm.
void write_stokes_pfm(const std::string& prefix, const PolarimetricImage& img);
/// Writes <prefix>.nx.pfm, .ny.pfm, .nz.pfm.
void write_normals_pfm(const std::string& prefix, const PolarimetricImage& img);
/// Reads the files written by write_stokes_pfm and write_normals_pfm. Throws
/// a config error when their dimensions disagree.
PolarimetricImage read_image_pfm(const std::string& stokesPrefix, const std::string& normalPrefix);

/// 8-bit previews: intensity (gray, scaled to the 99th percentile), DoLP
/// (gray, 0..1) and AoLP (hue wheel, black where masked).
void write_previews(const std::string& prefix, const PolarimetricImage& img);
void write_png_rgb(const std::string& path, int width, int height,
                   const std::vector<std::uint8_t>& rgb);

void write_curve_csv(const std::string& path, const Curve& c);

}  // namespace fmbrdf
