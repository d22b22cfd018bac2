// SPDX-License-Identifier: Apache-2.0

#include "fmbrdf/microfacet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fmbrdf/error.hpp"

namespace fmbrdf {

namespace {

void check_ndf_params(double alpha, double beta) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw_domain("alpha must be positive and finite");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw_domain("beta must be positive and finite");
}

// Largest angle at which the NDF shape is above ~1e-300.
double support_limit(double alpha, double beta) {
  return std::min(kHalfPi, alpha * std::pow(690.0, 1.0 / beta));
}

}  // namespace

// ---------------------------------------------------------------------------
// Ndf

Ndf::Ndf(double alpha, double beta) : alpha_(alpha), beta_(beta) {
  check_ndf_params(alpha, beta);
  delta_ = alpha <= kDeltaAlpha;
  if (delta_) return;
  const double tMax = support_limit(alpha, beta);
  auto shapeAt = [&](double t) { return shape(t); };
  const double projected = kTwoPi * integrate_profile(
      [&](double t) { return shapeAt(t) * std::cos(t) * std::sin(t); }, 0.0, tMax, alpha);
  normC_ = 1.0 / projected;
  // d/dp exp(-u), u = (t/alpha)^beta.
  const double dA = kTwoPi * integrate_profile(
      [&](double t) {
        const double u = std::pow(t / alpha, beta);
        return std::exp(-u) * u * beta / alpha * std::cos(t) * std::sin(t);
      },
      0.0, tMax, alpha);
  const double dB = kTwoPi * integrate_profile(
      [&](double t) {
        if (t <= 0.0) return 0.0;
        const double u = std::pow(t / alpha, beta);
        return -std::exp(-u) * u * std::log(t / alpha) * std::cos(t) * std::sin(t);
      },
      0.0, tMax, alpha);
  dNormDAlpha_ = -normC_ * normC_ * dA;
  dNormDBeta_ = -normC_ * normC_ * dB;
  hemisphereIntegral_ = normC_ * kTwoPi * integrate_profile(
      [&](double t) { return shapeAt(t) * std::sin(t); }, 0.0, tMax, alpha);
}

double Ndf::shape(double theta) const {
  if (theta >= kHalfPi) return 0.0;
  return std::exp(-std::pow(std::abs(theta) / alpha_, beta_));
}

double Ndf::operator()(double thetaH) const {
  if (delta_) throw_domain("delta NDF has no pointwise density");
  return normC_ * shape(thetaH);
}

double ndf_eval(const Ndf& ndf, double thetaH) { return ndf(thetaH); }

// ---------------------------------------------------------------------------
// Smith masking

SmithTable::SmithTable(const Ndf& ndf, int resolution)
    : delta_(ndf.is_delta()), resolution_(resolution) {
  if (resolution < 8) throw_domain("Smith table resolution must be >= 8");
  if (delta_) {
    spline_ = UniformSpline(0.0, kHalfPi, std::vector<double>(resolution + 1, 0.0));
    return;
  }
  std::vector<double> q;
  if (auto cached = table_cache::load(table_cache::Kind::kSmith, ndf.alpha(), ndf.beta(),
                                      0.0, resolution)) {
    q = std::move(*cached);
  }
  if (q.size() != static_cast<std::size_t>(resolution + 1)) {
    q.assign(resolution + 1, 0.0);
    const double h = kHalfPi / resolution;
    for (int i = 1; i < resolution; ++i) {
      const double t = i * h;
      q[i] = smith_lambda_direct(ndf, t, ndf.alpha()) * std::cos(t);
    }
    // Grazing limit of Lambda cos(thetaV): integral of 2 sin^2 D.
    q[resolution] = integrate_profile(
        [&](double t) { return 2.0 * std::sin(t) * std::sin(t) * ndf(t); }, 0.0,
        support_limit(ndf.alpha(), ndf.beta()), ndf.alpha());
    table_cache::store(table_cache::Kind::kSmith, ndf.alpha(), ndf.beta(), 0.0, resolution, q);
  }
  spline_ = UniformSpline(0.0, kHalfPi, std::move(q));
}

double SmithTable::lambda(double thetaV) const {
  if (!(thetaV < kHalfPi)) throw_domain("grazing masking undefined");
  if (delta_ || thetaV <= 0.0) return 0.0;
  return std::max(0.0, spline_(thetaV)) / std::cos(thetaV);
}

double smith_lambda(const SmithTable& table, double thetaV) { return table.lambda(thetaV); }

double smith_g1(const SmithTable& table, const Direction& v, const Direction& N,
                const Direction& facetN) {
  if (v.dot(facetN) <= 0.0) return 0.0;
  return 1.0 / (1.0 + table.lambda(angle_between(v, N)));
}

double masking_shadowing(const SmithTable& table, const Direction& L, const Direction& V,
                         const Direction& N, const Direction& H) {
  return smith_g1(table, L, N, H) * smith_g1(table, V, N, H);
}

// ---------------------------------------------------------------------------
// Bessel

double bessel_i0e(double x) {
  x = std::abs(x);
  if (x < 25.0) {
    // Power series sum (x/2)^{2k} / (k!)^2.
    const double q = 0.25 * x * x;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 200; ++k) {
      term *= q / (static_cast<double>(k) * k);
      sum += term;
      if (term < 1e-17 * sum) break;
    }
    return sum * std::exp(-x);
  }
  // Asymptotic expansion; smallest term at x = 25 is far below 1e-16.
  const double inv8x = 1.0 / (8.0 * x);
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 40; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = term * odd * odd * inv8x / k;
    if (next > term) break;
    term = next;
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum / std::sqrt(kTwoPi * x);
}

// ---------------------------------------------------------------------------
// Correlation function

double CorrelationFn::ring_kernel(double t0, double t1) const {
  return kTwoPi * std::exp(kappa_ * (std::cos(t0 - t1) - 1.0)) *
         bessel_i0e(kappa_ * std::sin(t0) * std::sin(t1));
}

CorrelationFn::CorrelationFn(const Ndf& ndf, double kappa, int tableSize)
    : kappa_(kappa), tableSize_(tableSize) {
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw_domain("kappa must be finite and >= 0");
  if (tableSize < 8) throw_domain("correlation table size must be >= 8");
  if (ndf.is_delta()) {
    // Every facet is the macro normal; only the constant matters.
    logConstant_ = 0.0;
    spline_ = UniformSpline(0.0, kHalfPi, std::vector<double>(tableSize + 1, 0.0));
    return;
  }
  if (kappa == 0.0) {
    logConstant_ = -0.5 * std::log(ndf.hemisphere_integral());
    spline_ = UniformSpline(0.0, kHalfPi, std::vector<double>(tableSize + 1, logConstant_));
    return;
  }

  // Composite Gauss-Legendre grid fine enough for both the kernel width and
  // the NDF scale.
  constexpr int kPanelOrder = 8;
  const double width = std::min({kHalfPi / 16.0, 0.5 * ndf.alpha(), 0.5 / std::sqrt(kappa)});
  const int panels = static_cast<int>(std::ceil(kHalfPi / width));
  const double h = kHalfPi / panels;
  const GaussLegendre gl = gauss_legendre(kPanelOrder, 0.0, h);
  const int m = panels * kPanelOrder;
  nodes_.resize(m);
  std::vector<double> g(m);
  for (int p = 0; p < panels; ++p)
    for (int j = 0; j < kPanelOrder; ++j) {
      const int k = p * kPanelOrder + j;
      nodes_[k] = p * h + gl.nodes[j];
      g[k] = gl.weights[j] * std::sin(nodes_[k]) * ndf(nodes_[k]);
    }

  std::vector<double> c;
  if (auto cached = table_cache::load(table_cache::Kind::kCorrelation, ndf.alpha(), ndf.beta(),
                                      kappa, m)) {
    c = std::move(*cached);
  }
  if (c.size() != static_cast<std::size_t>(m)) {
    Eigen::MatrixXd q(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j <= i; ++j) q(i, j) = q(j, i) = ring_kernel(nodes_[i], nodes_[j]);
    const Eigen::Map<const Eigen::VectorXd> gv(g.data(), m);
    // Start from the kappa = 0 solution.
    Eigen::VectorXd cv =
        Eigen::VectorXd::Constant(m, 1.0 / std::sqrt(std::max(1e-300, kTwoPi * gv.sum())));
    Eigen::VectorXd kc(m);
    double residual = INFINITY;
    for (int iter = 0; iter < 20000 && residual > 1e-14; ++iter) {
      kc.noalias() = q * gv.cwiseProduct(cv);
      residual = 0.0;
      for (int k = 0; k < m; ++k) {
        const double r = cv[k] * kc[k];
        if (g[k] > 0.0) residual = std::max(residual, std::abs(r - 1.0));
        cv[k] = std::sqrt(cv[k] / kc[k]);
      }
    }
    if (!cv.allFinite()) throw_evaluation("correlation normalization failed");
    // One Nystrom sweep so node values equal the interpolation formula.
    kc.noalias() = q * gv.cwiseProduct(cv);
    c.assign(m, 0.0);
    for (int k = 0; k < m; ++k) c[k] = 1.0 / kc[k];
    table_cache::store(table_cache::Kind::kCorrelation, ndf.alpha(), ndf.beta(), kappa, m, c);
  }
  gc_.resize(m);
  for (int k = 0; k < m; ++k) gc_[k] = g[k] * c[k];

  std::vector<double> logTable(tableSize + 1);
  for (int i = 0; i <= tableSize; ++i)
    logTable[i] = log_norm_exact(kHalfPi * i / tableSize);
  spline_ = UniformSpline(0.0, kHalfPi, std::move(logTable));
}

double CorrelationFn::log_norm_exact(double theta) const {
  if (nodes_.empty()) return spline_.values().empty() ? logConstant_ : spline_.values()[0];
  double sum = 0.0;
  for (std::size_t l = 0; l < nodes_.size(); ++l) sum += ring_kernel(theta, nodes_[l]) * gc_[l];
  return -std::log(std::max(sum, 1e-300));
}

double CorrelationFn::norm_factor_exact(double theta) const {
  return std::exp(std::min(300.0, log_norm_exact(theta)));
}

double CorrelationFn::norm_factor(double theta) const {
  return std::exp(std::min(300.0, spline_(theta)));
}

double CorrelationFn::eval(const Direction& n, const Direction& ni, const Direction& N) const {
  return eval_angles(angle_between(n, N), angle_between(ni, N), n.dot(ni));
}

double corr_eval(const CorrelationFn& f, const Direction& n, const Direction& ni,
                 const Direction& N) {
  return f.eval(n, ni, N);
}

// ---------------------------------------------------------------------------
// Table cache

namespace table_cache {

namespace {

constexpr char kMagic[8] = {'F', 'M', 'T', 'B', 'L', 0, 0, 1};

std::uint64_t bits(double x) {
  std::uint64_t b;
  std::memcpy(&b, &x, sizeof b);
  return b;
}

std::filesystem::path file_for(Kind kind, double alpha, double beta, double kappa,
                               int resolution) {
  std::ostringstream name;
  name << (kind == Kind::kSmith ? "smith" : "corr") << '_' << std::hex << bits(alpha) << '_'
       << bits(beta) << '_' << bits(kappa) << '_' << std::dec << resolution << ".bin";
  return std::filesystem::path(directory()) / name.str();
}

}  // namespace

std::string directory() {
  const char* dir = std::getenv("FMBRDF_CACHE_DIR");
  return dir ? std::string(dir) : std::string();
}

std::optional<std::vector<double>> load(Kind kind, double alpha, double beta, double kappa,
                                        int resolution) {
  if (directory().empty()) return std::nullopt;
  std::ifstream in(file_for(kind, alpha, beta, kappa, resolution), std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  std::uint32_t k = 0;
  std::uint64_t count = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&k), sizeof k);
  in.read(reinterpret_cast<char*>(&count), sizeof count);
  if (!in || std::memcmp(magic, kMagic, 8) != 0 || k != static_cast<unsigned>(kind) ||
      count > (1u << 24))
    return std::nullopt;
  std::vector<double> values(count);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * 8));
  if (!in) return std::nullopt;
  return values;
}

void store(Kind kind, double alpha, double beta, double kappa, int resolution,
           const std::vector<double>& values) {
  if (directory().empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(directory(), ec);
  const auto path = file_for(kind, alpha, beta, kappa, resolution);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) return;
    const std::uint32_t k = static_cast<unsigned>(kind);
    const std::uint64_t count = values.size();
    out.write(kMagic, 8);
    out.write(reinterpret_cast<const char*>(&k), sizeof k);
    out.write(reinterpret_cast<const char*>(&count), sizeof count);
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(count * 8));
    if (!out) return;
  }
  std::filesystem::rename(tmp, path, ec);
}

}  // namespace table_cache

}  // namespace fmbrdf
