// SPDX-License-Identifier: Apache-2.0

#include "fmbrdf/scene.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "fmbrdf/error.hpp"
#include "fmbrdf/parallel.hpp"

namespace fmbrdf {

std::string to_string(Shape s) { return s == Shape::kSphere ? "sphere" : "plane"; }

Shape shape_from_string(const std::string& s) {
  if (s == "sphere") return Shape::kSphere;
  if (s == "plane") return Shape::kPlane;
  throw_config("unknown shape: " + s);
}

void SceneSpec::validate() const {
  if (width < 8 || height < 8) throw_config("resolution must be at least 8x8");
  if (!(limbCut >= 0.0 && limbCut < 1.0)) throw_config("limb cut must be in [0, 1)");
  if (!(noise.relSigma >= 0.0) || !std::isfinite(noise.relSigma))
    throw_config("noise sigma must be finite and >= 0");
  light.validate();
  model.fmbrdf.validate();
  model.baseline.validate();
}

namespace {

class Fnv {
 public:
  template <typename T>
  void add(const T& v) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (unsigned char c : b) {
      h_ ^= c;
      h_ *= 0x100000001b3ULL;
    }
  }
  void add_dir(const Direction& d) {
    add(d.x());
    add(d.y());
    add(d.z());
  }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace

std::uint64_t SceneSpec::hash() const {
  Fnv f;
  f.add(static_cast<int>(shape));
  f.add(width);
  f.add(height);
  f.add_dir(V);
  f.add_dir(light.L);
  f.add(light.E0);
  for (int i = 0; i < 4; ++i) f.add(light.stokesIn[i]);
  f.add_dir(planeNormal);
  f.add(static_cast<int>(model.kind));
  const FmbrdfParams& p = model.fmbrdf;
  for (double v : {p.mu, p.ks, p.rk, p.alpha, p.beta, p.kappa}) f.add(v);
  const BaselineParams& b = model.baseline;
  for (double v : {b.albedo, b.sigma, b.ks, b.mu, b.kd}) f.add(v);
  f.add(static_cast<int>(model.mode));
  f.add(model.quad.nTheta);
  f.add(model.quad.nPhi);
  f.add(static_cast<int>(model.quad.spacing));
  f.add(noise.relSigma);
  f.add(noise.seed);
  f.add(limbCut);
  return f.value();
}

std::size_t PolarimetricImage::valid_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

// ---------------------------------------------------------------------------
// Evaluator

Evaluator::Evaluator(const ModelSpec& spec, const SurrogateModel* surrogate)
    : spec_(spec), surrogate_(surrogate) {
  switch (spec.kind) {
    case ModelKind::kFmbrdf:
      if (spec.mode == EvalMode::kSurrogate && !surrogate)
        throw_config("surrogate mode requires a surrogate model");
      fmbrdf_ = std::make_shared<const FmbrdfModel>(spec.fmbrdf, spec.quad);
      break;
    case ModelKind::kTorranceSparrow:
      ts_ = std::make_shared<const TorranceSparrow>(spec.baseline.ks, spec.baseline.sigma,
                                                    spec.baseline.mu);
      break;
    case ModelKind::kPbrdfFlat:
      pbrdf_ = std::make_shared<const PbrdfFlat>(PbrdfFlatParams{
          spec.baseline.mu, spec.baseline.kd, spec.baseline.ks, spec.baseline.sigma});
      break;
    case ModelKind::kLambertian:
    case ModelKind::kOrenNayar:
      spec.baseline.validate();
      break;
  }
}

Stokes4 Evaluator::stokes(const Direction& N, const Direction& V, const LightSource& light) const {
  if (!(N.dot(light.L) > 0.0) || !(N.dot(V) > 0.0)) throw_domain("below-horizon direction");
  const BaselineParams& b = spec_.baseline;
  switch (spec_.kind) {
    case ModelKind::kFmbrdf:
      return eval_total(*fmbrdf_, N, V, light, spec_.mode, surrogate_).stokes;
    case ModelKind::kLambertian:
      return Stokes4(lambertian(b.albedo, N, light.L, light.stokesIn[0]), 0.0, 0.0, 0.0);
    case ModelKind::kOrenNayar:
      return Stokes4(oren_nayar(b.albedo, b.sigma, N, light.L, V, light.stokesIn[0]), 0.0, 0.0,
                     0.0);
    case ModelKind::kTorranceSparrow:
      return ts_->stokes(make_shading(N, light.L, V), make_frames(N, light.L, V),
                         light.stokesIn);
    case ModelKind::kPbrdfFlat:
      return pbrdf_->stokes(make_shading(N, light.L, V), make_frames(N, light.L, V),
                            light.stokesIn);
  }
  throw_config("unknown model");
}

// ---------------------------------------------------------------------------
// Rendering

bool sphere_normal(int x, int y, int width, int height, const Direction& V, Direction& N) {
  const double u = 2.0 * (x + 0.5) / width - 1.0;
  const double v = 1.0 - 2.0 * (y + 0.5) / height;
  const double r2 = u * u + v * v;
  if (r2 >= 1.0) return false;
  const Eigen::Matrix3d cam = basis_about(V);
  N = Direction::normalized(u * cam.col(0) + v * cam.col(1) + std::sqrt(1.0 - r2) * V.vec());
  return true;
}

std::array<double, 4> filter_intensities(const Stokes4& s) {
  return {filter_intensity(s, 0.0), filter_intensity(s, 0.25 * kPi),
          filter_intensity(s, 0.5 * kPi), filter_intensity(s, 0.75 * kPi)};
}

namespace {

// Box-Muller on raw 53-bit uniforms, independent of the standard library's
// distribution code.
class Gaussian {
 public:
  explicit Gaussian(std::uint64_t seed) : rng_(seed) {}
  double operator()() {
    if (has_) {
      has_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    } while (u1 <= 0.0);
    const double u2 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    has_ = true;
    return r * std::cos(kTwoPi * u2);
  }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_ = false;
};

}  // namespace

PolarimetricImage render(const SceneSpec& spec, const SurrogateModel* surrogate) {
  spec.validate();
  const Evaluator eval(spec.model, surrogate);
  PolarimetricImage img;
  img.width = spec.width;
  img.height = spec.height;
  const std::size_t n = static_cast<std::size_t>(spec.width) * spec.height;
  img.stokes.assign(n, Stokes4::Zero());
  img.normals.assign(n, Direction());
  img.mask.assign(n, 0);
  img.specHash = spec.hash();

  parallel_for(n, [&](std::size_t i) {
    const int x = static_cast<int>(i % spec.width), y = static_cast<int>(i / spec.width);
    Direction N = spec.planeNormal;
    if (spec.shape == Shape::kSphere && !sphere_normal(x, y, spec.width, spec.height, spec.V, N))
      return;
    img.normals[i] = N;
    if (N.dot(spec.V) < spec.limbCut) return;
    try {
      const Stokes4 s = eval.stokes(N, spec.V, spec.light);
      if (!s.allFinite()) return;
      img.stokes[i] = s;
      img.mask[i] = 1;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kConfig) throw;
    }
  });

  if (spec.noise.relSigma > 0.0) {
    double mean = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (img.mask[i]) {
        mean += 0.5 * img.stokes[i][0];
        ++count;
      }
    if (count > 0) mean /= static_cast<double>(count);
    const double sigma = spec.noise.relSigma * mean;
    Gaussian gauss(spec.noise.seed);
    for (std::size_t i = 0; i < n; ++i) {
      if (!img.mask[i]) continue;
      std::array<double, 4> f = filter_intensities(img.stokes[i]);
      for (double& v : f) v = std::max(0.0, v + sigma * gauss());
      try {
        img.stokes[i] = stokes_from_four(f[0], f[1], f[2], f[3]);
      } catch (const Error&) {
        img.stokes[i] = Stokes4::Zero();
        img.mask[i] = 0;
      }
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// Curves

namespace {

template <typename Value>
Curve make_curve(const PolarimetricImage& img, const Direction& axis, Value&& value) {
  Curve c;
  std::vector<double> sum(kCurveBins, 0.0);
  std::vector<int> count(kCurveBins, 0);
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (!img.mask[i]) continue;
    const double a = angle_between(img.normals[i], axis) * 180.0 / kPi;
    double v;
    if (!value(img.stokes[i], v)) continue;
    c.angleDeg.push_back(a);
    c.value.push_back(v);
    if (a > 90.0) continue;
    const int b = std::min(kCurveBins - 1, static_cast<int>(a / 90.0 * kCurveBins));
    sum[b] += v;
    ++count[b];
  }
  if (c.value.empty()) throw_domain("no valid pixels");
  for (int b = 0; b < kCurveBins; ++b) {
    if (count[b] == 0) continue;
    c.bins.push_back({(b + 0.5) * 90.0 / kCurveBins, sum[b] / count[b], count[b]});
  }
  return c;
}

}  // namespace

Curve dolp_curve(const PolarimetricImage& img, const Direction& V) {
  return make_curve(img, V, [](const Stokes4& s, double& v) {
    if (!(s[0] > 0.0)) return false;
    v = dolp(s);
    return true;
  });
}

Curve intensity_curve(const PolarimetricImage& img, const Direction& L) {
  return make_curve(img, L, [](const Stokes4& s, double& v) {
    v = s[0];
    return true;
  });
}

Direction sweep_view(double angleDeg) {
  const double a = angleDeg * kPi / 180.0;
  return Direction(std::sin(a), 0.0, std::cos(a));
}

std::vector<SweepSample> planar_sweep(const Evaluator& eval, const LightSource& light,
                                      const std::vector<double>& anglesDeg) {
  const Direction N(0.0, 0.0, 1.0);
  std::vector<SweepSample> out(anglesDeg.size());
  for (double a : anglesDeg)
    if (!(a > -90.0 && a < 90.0)) throw_domain("sweep angles must be in (-90, 90) degrees");
  parallel_for(anglesDeg.size(), [&](std::size_t i) {
    out[i] = {anglesDeg[i], eval.stokes(N, sweep_view(anglesDeg[i]), light)[0]};
  });
  return out;
}

// ---------------------------------------------------------------------------
// I/O

void write_pfm(const std::string& path, int width, int height, const std::vector<float>& data) {
  if (data.size() != static_cast<std::size_t>(width) * height)
    throw_domain("PFM data size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_config("cannot open " + path + " for writing");
  out << "Pf\n" << width << ' ' << height << "\n-1.0\n";
  for (int y = height - 1; y >= 0; --y)
    for (int x = 0; x < width; ++x) {
      float v = data[static_cast<std::size_t>(y) * width + x];
      char b[4];
      std::memcpy(b, &v, 4);
      if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + 4);
      out.write(b, 4);
    }
  if (!out) throw_config("failed to write " + path);
}

std::vector<float> read_pfm(const std::string& path, int& width, int& height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_config("cannot open " + path);
  std::string magic;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  if (!in || magic != "Pf") throw_config("not a grayscale PFM: " + path);
  if (width < 1 || height < 1 || width > 1 << 15 || height > 1 << 15 || scale == 0.0)
    throw_config("bad PFM header: " + path);
  in.get();  // single whitespace before the raster
  const bool little = scale < 0.0;
  std::vector<float> data(static_cast<std::size_t>(width) * height);
  for (int y = height - 1; y >= 0; --y)
    for (int x = 0; x < width; ++x) {
      char b[4];
      if (!in.read(b, 4)) throw_config("truncated PFM: " + path);
      if (little != (std::endian::native == std::endian::little)) std::reverse(b, b + 4);
      std::memcpy(&data[static_cast<std::size_t>(y) * width + x], b, 4);
    }
  return data;
}

void write_stokes_pfm(const std::string& prefix, const PolarimetricImage& img) {
  const std::size_t n = img.size();
  std::vector<float> s0(n), s1(n), s2(n), m(n);
  for (std::size_t i = 0; i < n; ++i) {
    s0[i] = static_cast<float>(img.stokes[i][0]);
    s1[i] = static_cast<float>(img.stokes[i][1]);
    s2[i] = static_cast<float>(img.stokes[i][2]);
    m[i] = img.mask[i] ? 1.0f : 0.0f;
  }
  write_pfm(prefix + ".s0.pfm", img.width, img.height, s0);
  write_pfm(prefix + ".s1.pfm", img.width, img.height, s1);
  write_pfm(prefix + ".s2.pfm", img.width, img.height, s2);
  write_pfm(prefix + ".mask.pfm", img.width, img.height, m);
}

void write_normals_pfm(const std::string& prefix, const PolarimetricImage& img) {
  const std::size_t n = img.size();
  std::vector<float> nx(n), ny(n), nz(n);
  for (std::size_t i = 0; i < n; ++i) {
    nx[i] = static_cast<float>(img.normals[i].x());
    ny[i] = static_cast<float>(img.normals[i].y());
    nz[i] = static_cast<float>(img.normals[i].z());
  }
  write_pfm(prefix + ".nx.pfm", img.width, img.height, nx);
  write_pfm(prefix + ".ny.pfm", img.width, img.height, ny);
  write_pfm(prefix + ".nz.pfm", img.width, img.height, nz);
}

PolarimetricImage read_image_pfm(const std::string& stokesPrefix,
                                 const std::string& normalPrefix) {
  const char* stokesSuffix[] = {".s0.pfm", ".s1.pfm", ".s2.pfm", ".mask.pfm"};
  const char* normalSuffix[] = {".nx.pfm", ".ny.pfm", ".nz.pfm"};
  std::vector<std::vector<float>> ch;
  int w0 = -1, h0 = -1;
  auto load = [&](const std::string& path) {
    int w, h;
    ch.push_back(read_pfm(path, w, h));
    if (w0 < 0) {
      w0 = w;
      h0 = h;
    } else if (w != w0 || h != h0) {
      throw_config("image dimension mismatch: " + path);
    }
  };
  for (const char* s : stokesSuffix) load(stokesPrefix + s);
  for (const char* s : normalSuffix) load(normalPrefix + s);
  PolarimetricImage img;
  img.width = w0;
  img.height = h0;
  const std::size_t n = static_cast<std::size_t>(w0) * h0;
  img.stokes.assign(n, Stokes4::Zero());
  img.normals.assign(n, Direction());
  img.mask.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(ch[3][i] > 0.5)) continue;
    const Eigen::Vector3d nv(ch[4][i], ch[5][i], ch[6][i]);
    const Stokes4 s(ch[0][i], ch[1][i], ch[2][i], 0.0);
    if (!nv.allFinite() || nv.norm() < 0.5 || !s.allFinite()) continue;
    img.normals[i] = Direction::normalized(nv);
    img.stokes[i] = s;
    img.mask[i] = 1;
  }
  return img;
}

void write_png_rgb(const std::string& path, int width, int height,
                   const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3)
    throw_domain("PNG data size mismatch");
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw_config("cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw_config("failed to write " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(&rgb[static_cast<std::size_t>(y) * width * 3]));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
}

// Fully saturated hue wheel, h in [0, 1).
void hue_rgb(double h, std::uint8_t* out) {
  const double k[3] = {5.0, 3.0, 1.0};
  for (int c = 0; c < 3; ++c) {
    const double t = std::fmod(k[c] + 6.0 * h, 6.0);
    out[c] = to_byte(1.0 - std::max(0.0, std::min({t, 4.0 - t, 1.0})));
  }
}

}  // namespace

void write_previews(const std::string& prefix, const PolarimetricImage& img) {
  const std::size_t n = img.size();
  std::vector<double> s0;
  for (std::size_t i = 0; i < n; ++i)
    if (img.mask[i]) s0.push_back(img.stokes[i][0]);
  double top = 1.0;
  if (!s0.empty()) {
    const std::size_t k = static_cast<std::size_t>(0.99 * (s0.size() - 1));
    std::nth_element(s0.begin(), s0.begin() + k, s0.end());
    if (s0[k] > 0.0) top = s0[k];
  }
  std::vector<std::uint8_t> inten(3 * n, 0), dl(3 * n, 0), ao(3 * n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!img.mask[i]) continue;
    const Stokes4& s = img.stokes[i];
    std::fill_n(&inten[3 * i], 3, to_byte(s[0] / top));
    if (s[0] > 0.0) {
      std::fill_n(&dl[3 * i], 3, to_byte(dolp(s)));
      hue_rgb((aolp(s) + 0.5 * kPi) / kPi, &ao[3 * i]);
    }
  }
  write_png_rgb(prefix + ".intensity.png", img.width, img.height, inten);
  write_png_rgb(prefix + ".dolp.png", img.width, img.height, dl);
  write_png_rgb(prefix + ".aolp.png", img.width, img.height, ao);
}

void write_curve_csv(const std::string& path, const Curve& c) {
  std::ofstream out(path);
  if (!out) throw_config("cannot open " + path + " for writing");
  out << "angle_deg,value,count\n";
  out.precision(10);
  for (const CurveBin& b : c.bins) out << b.angleDeg << ',' << b.mean << ',' << b.count << '\n';
  if (!out) throw_config("failed to write " + path);
}

}  // namespace fmbrdf
