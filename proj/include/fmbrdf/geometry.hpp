// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace fmbrdf {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kHalfPi = 0.5 * kPi;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Unit 3-vector. Construction checks the norm; use normalized() for
/// arbitrary input.
class Direction {
 public:
  Direction() : v_(0.0, 0.0, 1.0) {}
  Direction(double x, double y, double z);
  explicit Direction(const Eigen::Vector3d& v);

  /// Normalizes v; throws on a (near) zero vector.
  static Direction normalized(const Eigen::Vector3d& v);
  /// Unit vector from spherical angles about +Z.
  static Direction from_spherical(double theta, double phi);

  const Eigen::Vector3d& vec() const { return v_; }
  double x() const { return v_.x(); }
  double y() const { return v_.y(); }
  double z() const { return v_.z(); }
  double dot(const Direction& o) const { return v_.dot(o.v_); }
  double dot(const Eigen::Vector3d& o) const { return v_.dot(o); }
  Direction operator-() const;

 private:
  struct Unchecked {};
  Direction(const Eigen::Vector3d& v, Unchecked) : v_(v) {}
  Eigen::Vector3d v_;
};

/// Angle between two unit vectors, robust near 0 and pi.
double angle_between(const Direction& a, const Direction& b);

/// Unit bisector of L and V. Throws "antipodal directions" when L = -V.
Direction halfway(const Direction& L, const Direction& V);

struct ShadingGeometry {
  Direction N, L, V, H;
  double thetaH = 0.0;  // angle N -> H
  double thetaD = 0.0;  // angle L -> H (= V -> H)
  double cosNL = 0.0;
  double cosNV = 0.0;
};

ShadingGeometry make_shading(const Direction& N, const Direction& L,
                             const Direction& V);

/// Right-handed polarization reference frame; zAxis is the propagation
/// direction.
struct PolarizationFrame {
  Direction xAxis, yAxis, zAxis;
};

struct FramePair {
  PolarizationFrame incident;  // z = L
  PolarizationFrame outgoing;  // z = -V
};

/// Frame with the given propagation direction whose y-axis is the component
/// of `reference` orthogonal to z. Falls back to global +X, then +Y, when the
/// reference is (anti)parallel to z.
PolarizationFrame frame_about(const Direction& z, const Direction& reference);

/// Incident (z = L) and outgoing (z = -V) frames with y-axes towards N.
/// Throws "below-horizon direction" when N.L <= 0 or N.V <= 0.
FramePair make_frames(const Direction& N, const Direction& L,
                      const Direction& V);

/// Signed angle in (-pi, pi] from the frame y-axis to the projection of m
/// onto the frame x-y plane, positive about +z. Throws "normal parallel to
/// propagation" when the projection vanishes.
double frame_angle(const PolarizationFrame& frame, const Direction& m);

/// Components of m in the frame (x, y) plane as (m.y, -m.x); the angle of
/// this pair is frame_angle(). Useful when only cos/sin of 2*phi are needed.
Eigen::Vector2d frame_projection(const PolarizationFrame& frame,
                                 const Eigen::Vector3d& m);

/// Rotation about +Z mapping (x, y, z) -> world. Columns are tangent,
/// bitangent, normal.
Eigen::Matrix3d basis_about(const Direction& n);

}  // namespace fmbrdf
