// SPDX-License-Identifier: Apache-2.0

#include "fmbrdf/geometry.hpp"

#include <cmath>

#include "fmbrdf/error.hpp"

namespace fmbrdf {

namespace {

constexpr double kUnitTolerance = 1e-9;
constexpr double kFrameDegenerate = 1e-9;

void check_unit(const Eigen::Vector3d& v) {
  if (!v.allFinite() || std::abs(v.norm() - 1.0) > kUnitTolerance)
    throw_domain("direction is not unit length");
}

}  // namespace

Direction::Direction(double x, double y, double z) : v_(x, y, z) {
  check_unit(v_);
}

Direction::Direction(const Eigen::Vector3d& v) : v_(v) { check_unit(v_); }

Direction Direction::normalized(const Eigen::Vector3d& v) {
  const double n = v.norm();
  if (!(n > 1e-300) || !std::isfinite(n))
    throw_domain("cannot normalize zero-length vector");
  return Direction(v / n, Unchecked{});
}

Direction Direction::from_spherical(double theta, double phi) {
  const double s = std::sin(theta);
  return Direction(
      Eigen::Vector3d(s * std::cos(phi), s * std::sin(phi), std::cos(theta)),
      Unchecked{});
}

Direction Direction::operator-() const { return Direction(-v_, Unchecked{}); }

double angle_between(const Direction& a, const Direction& b) {
  // atan2 form stays accurate where acos(dot) loses digits.
  return std::atan2(a.vec().cross(b.vec()).norm(), a.dot(b));
}

Direction halfway(const Direction& L, const Direction& V) {
  const Eigen::Vector3d sum = L.vec() + V.vec();
  if (sum.norm() < 1e-12) throw_domain("antipodal directions");
  return Direction::normalized(sum);
}

ShadingGeometry make_shading(const Direction& N, const Direction& L,
                             const Direction& V) {
  ShadingGeometry g;
  g.N = N;
  g.L = L;
  g.V = V;
  g.H = halfway(L, V);
  g.thetaH = angle_between(N, g.H);
  g.thetaD = angle_between(L, g.H);
  g.cosNL = N.dot(L);
  g.cosNV = N.dot(V);
  return g;
}

PolarizationFrame frame_about(const Direction& z, const Direction& reference) {
  const Eigen::Vector3d& zv = z.vec();
  auto orthogonal = [&](const Eigen::Vector3d& r) -> Eigen::Vector3d {
    return r - r.dot(zv) * zv;
  };
  Eigen::Vector3d y = orthogonal(reference.vec());
  if (y.norm() < kFrameDegenerate) y = orthogonal(Eigen::Vector3d::UnitX());
  if (y.norm() < kFrameDegenerate) y = orthogonal(Eigen::Vector3d::UnitY());
  PolarizationFrame f;
  f.zAxis = z;
  f.yAxis = Direction::normalized(y);
  // x = y cross z gives x cross y = z.
  f.xAxis = Direction::normalized(f.yAxis.vec().cross(zv));
  return f;
}

FramePair make_frames(const Direction& N, const Direction& L,
                      const Direction& V) {
  if (N.dot(L) <= 0.0 || N.dot(V) <= 0.0) throw_domain("below-horizon direction");
  return FramePair{frame_about(L, N), frame_about(-V, N)};
}

Eigen::Vector2d frame_projection(const PolarizationFrame& frame,
                                 const Eigen::Vector3d& m) {
  return {frame.yAxis.dot(m), -frame.xAxis.dot(m)};
}

double frame_angle(const PolarizationFrame& frame, const Direction& m) {
  const Eigen::Vector2d p = frame_projection(frame, m.vec());
  if (p.norm() < 1e-12) throw_domain("normal parallel to propagation");
  double phi = std::atan2(p.y(), p.x());
  if (phi <= -kPi) phi += kTwoPi;
  return phi;
}

Eigen::Matrix3d basis_about(const Direction& n) {
  // Branchless orthonormal basis (Duff et al. 2017).
  const double sign = std::copysign(1.0, n.z());
  const double a = -1.0 / (sign + n.z());
  const double b = n.x() * n.y() * a;
  Eigen::Matrix3d m;
  m.col(0) << 1.0 + sign * n.x() * n.x() * a, sign * b, -sign * n.x();
  m.col(1) << b, sign + n.y() * n.y() * a, -n.y();
  m.col(2) = n.vec();
  return m;
}

}  // namespace fmbrdf
