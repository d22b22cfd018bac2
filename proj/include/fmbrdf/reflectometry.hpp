// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fmbrdf/brdf.hpp"
#include "fmbrdf/scene.hpp"
#include "fmbrdf/surrogate.hpp"

namespace fmbrdf {

/// Intensity (s0) and DoLP per pixel with known normals, for one directional
/// light. Only pixels with mask set take part in a fit.
struct Observation {
  int width = 0;
  int height = 0;
  std::vector<Direction> N;
  std::vector<double> intensity;
  std::vector<double> dolp;
  std::vector<std::uint8_t> mask;
  Direction L;
  Direction V;
  double E0 = 1.0;

  std::size_t size() const { return N.size(); }
  std::size_t valid_count() const;
  /// Indices of the masked-in pixels in increasing order.
  std::vector<std::size_t> valid_indices() const;
};

/// Builds an observation from an image. A pixel is kept when it is valid in
/// the image, N.V and N.L reach the given thresholds and s0 is positive.
Observation make_observation(const PolarimetricImage& img, const Direction& L,
                             const Direction& V, double E0, double minCosV = 0.1,
                             double minCosL = 0.1);

/// Outlier-balancing weights over the masked-in pixels (zero elsewhere).
/// Outliers are pixels whose DoLP exceeds median + k * MAD; they get weight
/// #inliers / #outliers, inliers get 1.
std::vector<double> compute_weights(const Observation& obs, double madFactor = 2.0);

// --- Reparameterization -------------------------------------------------------

enum class Transform { kLogistic, kExp, kSoftplus };

std::string to_string(Transform t);
Transform transform_from_string(const std::string& s);

/// Bound of one parameter. kLogistic needs a finite hi; kExp maps onto
/// (lo, inf) as lo + exp(u); kSoftplus onto (lo, inf) as lo + log(1 + e^u).
struct ParamBound {
  double lo = 0.0;
  double hi = 0.0;
  Transform transform = Transform::kLogistic;

  double forward(double u) const;        // unconstrained -> parameter
  double inverse(double p) const;        // parameter -> unconstrained
  double derivative(double u) const;     // d parameter / d u
  bool contains(double p) const;
};

using ParamVector = Eigen::Matrix<double, 6, 1>;

/// Parameter order throughout: mu, ks, rk, alpha, beta, kappa.
ParamVector to_vector(const FmbrdfParams& p);
FmbrdfParams from_vector(const ParamVector& v);
inline constexpr std::array<const char*, 6> kParamNames{"mu", "ks", "rk", "alpha", "beta", "kappa"};

struct Bounds {
  std::array<ParamBound, 6> b{{{1.05, 3.0, Transform::kLogistic},
                               {0.0, 0.0, Transform::kExp},
                               {0.0, 0.0, Transform::kExp},
                               {0.01, 1.2, Transform::kLogistic},
                               {0.6, 4.0, Transform::kLogistic},
                               {0.0, 100.0, Transform::kSoftplus}}};

  ParamVector to_unconstrained(const ParamVector& p) const;
  ParamVector from_unconstrained(const ParamVector& u) const;
  ParamVector derivative(const ParamVector& u) const;
  /// Narrows the bounds to the surrogate training box. A softplus bound that
  /// becomes finite switches to a logistic map.
  Bounds intersect(const ParamRanges& r) const;
  /// Moves p strictly inside the bounds.
  ParamVector clamp_inside(const ParamVector& p) const;
  void validate() const;
};

// --- Loss -------------------------------------------------------------------

struct FitConfig {
  FmbrdfParams init{1.5, 0.1, 1.0, 0.3, 2.0, 1.0};
  Bounds bounds;
  double step = 0.02;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int iterations = 2000;
  EvalMode mode = EvalMode::kSurrogate;
  BodyQuadrature quad{16, 32, ThetaSpacing::kAngle};
  double madFactor = 2.0;
  bool usePolarization = true;
  bool multiStart = false;
  int starts = 3;
  double perturbation = 0.2;
  std::uint64_t seed = 0;
  /// Relative central-difference step of the oracle-mode gradient.
  double fdStep = 1e-4;

  void validate() const;
};

struct LossTerms {
  double total = 0.0;
  double intensity = 0.0;  // (1/M) sum (I_obs - I)^2
  double dolp = 0.0;       // sum w (rho_obs - rho)^2 / sum w
};

/// Rendered intensity and DoLP per masked-in pixel (in valid_indices order).
struct Rendered {
  std::vector<double> intensity;
  std::vector<double> dolp;
};

/// Weighted least-squares objective over intensity and DoLP. The renderer
/// only exposes s0 and DoLP to the objective. Thread-safe.
class LossFunction {
 public:
  LossFunction(const Observation& obs, std::vector<double> weights, EvalMode mode,
               const SurrogateModel* surrogate, const BodyQuadrature& quad = {16, 32, ThetaSpacing::kAngle},
               bool usePolarization = true, double fdStep = 1e-4);

  Rendered render(const FmbrdfParams& p) const;
  LossTerms terms(const FmbrdfParams& p) const;
  double value(const FmbrdfParams& p) const { return terms(p).total; }
  /// Gradient with respect to (mu, ks, rk, alpha, beta, kappa): chain rule
  /// through the networks in surrogate mode, central differences in oracle
  /// mode.
  LossTerms value_and_gradient(const FmbrdfParams& p, ParamVector& grad) const;

  const std::vector<std::size_t>& pixels() const { return pixels_; }
  EvalMode mode() const { return mode_; }

  /// Loss from rendered values; public for independent checks.
  LossTerms combine(const Rendered& r) const;

 private:
  struct PixelGeometry {
    ShadingGeometry g;
    FramePair frames;
    Canonical canon;
    Eigen::Vector2d rotIn, rotOut;
  };

  struct SurrogatePass {
    Eigen::MatrixXd x, t;
    SurrogateModel::BodyTape tape;
    std::vector<Stokes4> total;
    std::vector<ParamJacobian> dSurface;
    std::vector<double> unit;
  };

  Rendered render_oracle(const FmbrdfParams& p) const;
  void surrogate_pass(const FmbrdfParams& p, bool withGrad, SurrogatePass& out) const;
  LossTerms gradient_surrogate(const FmbrdfParams& p, ParamVector& grad) const;
  LossTerms gradient_oracle(const FmbrdfParams& p, ParamVector& grad) const;

  const Observation& obs_;
  std::vector<double> weights_;
  EvalMode mode_;
  const SurrogateModel* surrogate_;
  BodyQuadrature quad_;
  bool usePolarization_;
  double fdStep_;
  std::vector<std::size_t> pixels_;
  std::vector<PixelGeometry> geom_;
  double weightSum_ = 0.0;
};

/// Convenience wrappers over LossFunction.
double loss(const FmbrdfParams& p, const Observation& obs, const std::vector<double>& weights,
            EvalMode mode = EvalMode::kOracle, const SurrogateModel* surrogate = nullptr);
ParamVector gradient(const FmbrdfParams& p, const Observation& obs,
                     const std::vector<double>& weights, EvalMode mode,
                     const SurrogateModel* surrogate = nullptr);

// --- Fit ----------------------------------------------------------------------

struct FitReport {
  FmbrdfParams params;
  FmbrdfParams init;
  std::vector<double> lossTrajectory;
  double initialLoss = 0.0;
  double finalLoss = 0.0;
  double intensityRms = 0.0;
  double dolpRms = 0.0;
  double wallSeconds = 0.0;
  bool converged = false;
  int iterations = 0;
  int pixels = 0;
  int outliers = 0;
  int bestStart = 0;
  std::vector<double> startLosses;
  EvalMode mode = EvalMode::kSurrogate;
  bool usePolarization = true;

  std::string to_json() const;
  void write_json(const std::string& path) const;
  void write_trajectory_csv(const std::string& path) const;
};

/// Adam on the unconstrained parameters. Deterministic for a fixed seed and
/// independent of the thread count.
FitReport fit(const Observation& obs, const FitConfig& cfg,
              const SurrogateModel* surrogate = nullptr);

}  // namespace fmbrdf
