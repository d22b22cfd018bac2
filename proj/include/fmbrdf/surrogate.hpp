// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fmbrdf/brdf.hpp"
#include "fmbrdf/geometry.hpp"
#include "fmbrdf/polarization.hpp"

namespace fmbrdf {

// --- Canonical configuration -------------------------------------------------

/// Maps Stokes vectors from the canonical outgoing frame back to the caller's
/// outgoing frame: an optional mirror (s2 -> -s2) followed by a frame rotation.
struct FrameMap {
  bool mirrored = false;
  double cos2psi = 1.0;
  double sin2psi = 0.0;

  Stokes4 apply(const Stokes4& canonical) const;
  Stokes4 invert(const Stokes4& world) const;
};

/// Canonical placement: N = +Z, V in the x-z plane with positive x, and L with
/// azimuth dphi in [0, pi] measured from V.
struct Canonical {
  double thetaL = 0.0;
  double thetaV = 0.0;
  double dphi = 0.0;
  FrameMap frameMap;

  Direction n() const { return Direction(0.0, 0.0, 1.0); }
  Direction l() const;
  Direction v() const;
};

Canonical canonicalize(const Direction& N, const Direction& L, const Direction& V);

// --- Networks ---------------------------------------------------------------

/// Fully connected network with SiLU hidden activations and a linear output
/// layer. Inputs are affinely mapped from a box onto [-1, 1].
class Mlp {
 public:
  Mlp() = default;
  Mlp(int inputs, const std::vector<int>& hidden, int outputs, std::uint64_t seed);

  int inputs() const { return layerSizes_.front(); }
  int outputs() const { return layerSizes_.back(); }
  const std::vector<int>& layer_sizes() const { return layerSizes_; }
  std::size_t parameter_count() const;

  /// Raw network output for a column of normalized inputs.
  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  /// Output and Jacobian (outputs x inputs) with respect to normalized inputs.
  Eigen::VectorXd forward_jacobian(const Eigen::VectorXd& x, Eigen::MatrixXd& jac) const;
  /// Batched forward pass; columns are samples. When pre is given it receives
  /// the pre-activations of the hidden layers for backward().
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x,
                                std::vector<Eigen::MatrixXd>* pre = nullptr) const;
  /// Per column adjoint^T d out / d x from recorded pre-activations.
  Eigen::MatrixXd backward(const std::vector<Eigen::MatrixXd>& pre,
                           const Eigen::MatrixXd& adjoint) const;

  std::vector<Eigen::MatrixXd>& weights() { return w_; }
  std::vector<Eigen::VectorXd>& biases() { return b_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return w_; }
  const std::vector<Eigen::VectorXd>& biases() const { return b_; }

  /// Rounds every weight to float32, the storage precision.
  void quantize();

 private:
  std::vector<int> layerSizes_;
  std::vector<Eigen::MatrixXd> w_;
  std::vector<Eigen::VectorXd> b_;
};

/// Axis-aligned box over the network inputs.
struct DomainBox {
  Eigen::VectorXd lo, hi;

  bool contains(const Eigen::VectorXd& x, double slack = 1e-9) const;
  Eigen::VectorXd normalize(const Eigen::VectorXd& x) const;
  /// d normalized / d raw, per input.
  Eigen::VectorXd normalize_scale() const;
};

// --- Training data ----------------------------------------------------------

/// Body inputs in order: thetaL, thetaV, dphi, alpha, beta, kappa, mu.
inline constexpr int kBodyInputs = 7;
/// Smith inputs in order: thetaV, alpha, beta.
inline constexpr int kSmithInputs = 3;

struct ParamRanges {
  double thetaMax = 1.4706289056333368;  // acos(0.1)
  double alphaLo = 0.15, alphaHi = 0.6;
  double betaLo = 1.0, betaHi = 3.0;
  double kappaLo = 0.0, kappaHi = 20.0;
  double muLo = 1.2, muHi = 2.0;

  DomainBox body_box() const;
  DomainBox smith_box() const;
};

/// Body targets are the canonical-frame body Stokes (s0, s1, s2) per unit
/// (kb / pi) E0 cos(thetaL) for unpolarized input. s2 is kept: it vanishes
/// only when L lies in the plane of N and V.
struct TrainingSet {
  Eigen::MatrixXd bodyX;   // 7 x n
  Eigen::MatrixXd bodyY;   // 3 x n
  Eigen::MatrixXd smithX;  // 3 x m
  Eigen::VectorXd smithY;  // log(1 + Lambda)

  int size() const { return static_cast<int>(bodyX.cols()); }
};

/// Normalized canonical body Stokes for one input row (see TrainingSet).
Eigen::Vector3d body_target(const Eigen::VectorXd& input, const BodyQuadrature& quad);

/// Scrambled Sobol points over the body box, with targets from the quadrature
/// oracle. Parameter sets are shared by groups of geometry samples so tables
/// are built once per group. Deterministic given seed.
TrainingSet generate_training_set(const ParamRanges& ranges, int nSamples,
                                  const BodyQuadrature& quad, std::uint64_t seed,
                                  int geometriesPerParam = 1, int smithSamples = -1);

// --- Model ------------------------------------------------------------------

struct TrainConfig {
  std::vector<int> bodyHidden{128, 128, 128, 128, 128, 128};
  std::vector<int> smithHidden{32, 32};
  int epochs = 600;
  int smithEpochs = 3000;
  int batchSize = 256;
  double learningRate = 3e-3;
  double finalLearningRate = 3e-5;
  double validationFraction = 0.1;
  std::uint64_t seed = 7;
};

struct ValidationMetrics {
  double maxRelErrS0 = 0.0;
  double rmsRelErrS0 = 0.0;
  double maxAbsErrDolp = 0.0;
  double maxRelErrG1 = 0.0;
  int count = 0;
};

/// Recipe that regenerates the training set, stored with the model so the
/// validation split can be replayed.
struct TrainingRecipe {
  ParamRanges ranges;
  BodyQuadrature quad{16, 32, ThetaSpacing::kAngle};
  int nSamples = 10000;
  int geometriesPerParam = 1;
  std::uint64_t dataSeed = 1;
  TrainConfig train;
};

class SurrogateModel {
 public:
  static constexpr std::uint32_t kVersion = 1;

  Mlp body;
  Mlp smith;
  DomainBox bodyBox;
  DomainBox smithBox;
  TrainingRecipe recipe;
  ValidationMetrics validation;

  /// Normalized canonical body Stokes (see TrainingSet) and, optionally, its
  /// 3 x 7 Jacobian with respect to the body inputs. Throws "surrogate domain
  /// violation" outside bodyBox.
  Eigen::Vector3d body_sum(const Eigen::VectorXd& input, Eigen::MatrixXd* jac = nullptr) const;
  /// Smith Lambda and its derivatives with respect to (thetaV, alpha, beta).
  double lambda(double thetaV, double alpha, double beta, Eigen::Vector3d* grad = nullptr) const;

  struct BodyTape {
    std::vector<Eigen::MatrixXd> pre;
    Eigen::MatrixXd raw;
  };
  /// body_sum over the columns of a 7 x P input matrix.
  Eigen::MatrixXd body_batch(const Eigen::MatrixXd& inputs, BodyTape* tape = nullptr) const;
  /// Per column adjoint^T d body / d input (7 x P) for a recorded batch.
  Eigen::MatrixXd body_batch_vjp(const Eigen::MatrixXd& inputs, const BodyTape& tape,
                                 const Eigen::MatrixXd& adjoint) const;

  /// Same as body_sum without the domain check.
  Eigen::Vector3d body_sum_unchecked(const Eigen::VectorXd& input,
                                     Eigen::MatrixXd* jac = nullptr) const;

  void save(const std::string& path) const;
  static SurrogateModel load(const std::string& path);
  void write(std::ostream& out) const;
  static SurrogateModel read(std::istream& in);
};

/// Trains both networks; throws "training diverged" if the loss turns
/// non-finite.
SurrogateModel train(const TrainingSet& ts, const TrainingRecipe& recipe);

/// Metrics on the held-out split of ts.
ValidationMetrics validate(const SurrogateModel& m, const TrainingSet& ts);

/// Regenerates the training set from the stored recipe and recomputes the
/// validation metrics.
ValidationMetrics revalidate(const SurrogateModel& m);

/// Indices of the held-out samples for a set of size n.
std::vector<int> validation_indices(int n, double fraction, std::uint64_t seed);

/// Network inputs derived from the 7 body inputs: the box-normalized inputs
/// plus u = sin(thetaL) sin(thetaV) (1 - cos(dphi)) / 2 and kappa * u, which
/// carry most of the correlation falloff between opposing facets.
inline constexpr int kBodyFeatures = 9;
Eigen::VectorXd body_features(const DomainBox& box, const Eigen::VectorXd& input,
                              Eigen::MatrixXd* jac = nullptr);

/// Parameter order of surrogate Jacobians: mu, ks, rk, alpha, beta, kappa.
using ParamJacobian = Eigen::Matrix<double, 4, 6>;

struct SurrogateEval {
  Stokes4 surface = Stokes4::Zero();
  Stokes4 body = Stokes4::Zero();
  ParamJacobian dSurface = ParamJacobian::Zero();
  ParamJacobian dBody = ParamJacobian::Zero();
};

/// Surface term with Smith Lambda from the network, and optionally its
/// Jacobian. Unpolarized or polarized input.
Stokes4 surrogate_surface(const SurrogateModel& s, const FmbrdfParams& p, const Ndf& ndf,
                          const ShadingGeometry& g, const FramePair& frames, const Stokes4& sIn,
                          ParamJacobian* jac = nullptr);

/// Surface and body terms with the Smith table and body integral replaced by
/// the networks; ndf supplies the NDF normalization for (p.alpha, p.beta).
/// Unpolarized input only. Jacobians are filled when withJacobian is set.
SurrogateEval surrogate_eval(const SurrogateModel& s, const FmbrdfParams& p, const Ndf& ndf,
                             const Direction& N, const Direction& L, const Direction& V,
                             const FramePair& frames, const Stokes4& sIn,
                             bool withJacobian = false);

}  // namespace fmbrdf
