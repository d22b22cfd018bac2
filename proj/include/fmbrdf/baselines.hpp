// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>

#include "fmbrdf/brdf.hpp"
#include "fmbrdf/geometry.hpp"
#include "fmbrdf/microfacet.hpp"
#include "fmbrdf/polarization.hpp"

namespace fmbrdf {

/// (albedo / pi) max(0, N.L) E0.
double lambertian(double albedo, const Direction& N, const Direction& L, double E0);

/// First-order Oren-Nayar closed form (no interreflection term); sigma is the
/// facet slope standard deviation in radians.
double oren_nayar(double albedo, double sigma, const Direction& N, const Direction& L,
                  const Direction& V, double E0);

/// Microfacet specular term with a Gaussian NDF (beta = 2, alpha = sigma).
/// Evaluation goes through the same code as the FMBRDF surface term.
class TorranceSparrow {
 public:
  TorranceSparrow(double ks, double sigma, double mu);

  double radiance(const ShadingGeometry& g, double E0) const;
  Stokes4 stokes(const ShadingGeometry& g, const FramePair& frames, const Stokes4& sIn) const;

  double ks() const { return ks_; }
  double sigma() const { return ndf_.alpha(); }
  double mu() const { return mu_; }

 private:
  double ks_, mu_;
  Ndf ndf_;
  std::shared_ptr<const SmithTable> smith_;
};

/// One-shot convenience; builds the Smith table on every call.
double torrance_sparrow(double ks, double sigma, double mu, const ShadingGeometry& g, double E0);

/// Flat-interface polarimetric diffuse plus microfacet specular.
struct PbrdfFlatParams {
  double mu = 1.5;
  double kd = 0.5;
  double ks = 0.1;
  double sigma = 0.3;
};

class PbrdfFlat {
 public:
  explicit PbrdfFlat(const PbrdfFlatParams& p);

  const PbrdfFlatParams& params() const { return p_; }
  Stokes4 diffuse(const ShadingGeometry& g, const FramePair& frames, const Stokes4& sIn) const;
  Stokes4 stokes(const ShadingGeometry& g, const FramePair& frames, const Stokes4& sIn) const;

 private:
  PbrdfFlatParams p_;
  TorranceSparrow specular_;
};

Stokes4 pbrdf_flat(const PbrdfFlatParams& p, const ShadingGeometry& g, const FramePair& frames,
                   const Stokes4& sIn);

/// Body radiance of a surface whose subsurface transport never leaves the
/// entry facet: (kb / pi) G1(L) G1(V) / (N.V) times the integral over facet
/// normals n of D(n) (V.n)+ T(V.n) (L.n)+ T(L.n). Evaluated with its
/// own tensor Gauss-Legendre rule and direct Smith integrals; used as the
/// large-kappa reference.
double single_facet_body(double mu, double kb, double alpha, double beta, const Direction& N,
                         const Direction& L, const Direction& V, double E0, int nTheta = 256,
                         int nPhi = 512);

// --- Model selection ---------------------------------------------------------

enum class ModelKind { kFmbrdf, kLambertian, kOrenNayar, kTorranceSparrow, kPbrdfFlat };

std::string to_string(ModelKind k);
/// Accepts fmbrdf, lambertian, oren-nayar, torrance-sparrow, pbrdf-flat.
/// Throws a config error otherwise.
ModelKind model_kind_from_string(const std::string& s);

/// Parameters of every baseline; each model reads only its own fields.
struct BaselineParams {
  double albedo = 0.5;   // Lambertian, Oren-Nayar
  double sigma = 0.3;    // Oren-Nayar, Torrance-Sparrow, flat pBRDF
  double ks = 0.1;       // Torrance-Sparrow, flat pBRDF
  double mu = 1.5;       // Torrance-Sparrow, flat pBRDF
  double kd = 0.5;       // flat pBRDF

  void validate() const;
};

}  // namespace fmbrdf
