#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include "cfreg/error.hpp"
#include "cfreg/random.hpp"

namespace cfreg {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Matrix4 = Eigen::Matrix<Scalar, 4, 4>;

using Point3 = Eigen::Vector3d;
using PointCloud = std::vector<Point3>;

/// Rotation plus translation, acting as p -> R p + t.
template <typename Scalar>
struct RigidTransform {
  Matrix3<Scalar> rotation = Matrix3<Scalar>::Identity();
  Vector3<Scalar> translation = Vector3<Scalar>::Zero();

  static RigidTransform identity() { return {}; }

  template <typename Derived>
  Vector3<Scalar> operator()(const Eigen::MatrixBase<Derived>& p) const {
    return rotation * p + translation;
  }

  Matrix4<Scalar> matrix() const {
    Matrix4<Scalar> m = Matrix4<Scalar>::Identity();
    m.template topLeftCorner<3, 3>() = rotation;
    m.template topRightCorner<3, 1>() = translation;
    return m;
  }

  static RigidTransform from_matrix(const Matrix4<Scalar>& m) {
    return {m.template topLeftCorner<3, 3>(), m.template topRightCorner<3, 1>()};
  }
};

using RigidTransformd = RigidTransform<double>;

template <typename Scalar, typename Derived>
Vector3<Scalar> apply(const RigidTransform<Scalar>& t, const Eigen::MatrixBase<Derived>& p) {
  return t(p);
}

/// compose(a, b)(p) == a(b(p)).
template <typename Scalar>
RigidTransform<Scalar> compose(const RigidTransform<Scalar>& a, const RigidTransform<Scalar>& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

template <typename Scalar>
RigidTransform<Scalar> invert(const RigidTransform<Scalar>& t) {
  const Matrix3<Scalar> rt = t.rotation.transpose();
  return {rt, -(rt * t.translation)};
}

inline PointCloud transform_cloud(const RigidTransformd& t, const PointCloud& cloud) {
  PointCloud out;
  out.reserve(cloud.size());
  for (const auto& p : cloud) out.push_back(t(p));
  return out;
}

template <typename Scalar>
bool is_rotation(const Matrix3<Scalar>& r, Scalar tol) {
  return (r.transpose() * r - Matrix3<Scalar>::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(r.determinant() - Scalar(1)) <= tol;
}

/// Rodrigues formula. The zero vector maps to the identity.
template <typename Derived>
Matrix3<typename Derived::Scalar> axis_angle_to_rotation(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Scalar theta = v.norm();
  Matrix3<Scalar> k;
  k << Scalar(0), -v(2), v(1), v(2), Scalar(0), -v(0), -v(1), v(0), Scalar(0);
  // sin(x)/x and (1-cos(x))/x^2, with series near zero
  Scalar a, b;
  if (theta < Scalar(1e-4)) {
    const Scalar t2 = theta * theta;
    a = Scalar(1) - t2 / Scalar(6);
    b = Scalar(0.5) - t2 / Scalar(24);
  } else {
    a = std::sin(theta) / theta;
    b = (Scalar(1) - std::cos(theta)) / (theta * theta);
  }
  return Matrix3<Scalar>::Identity() + a * k + b * k * k;
}

/// Inverse of axis_angle_to_rotation with the angle in [0, pi]. At pi (within
/// rounding) the axis sign is fixed so that its largest-magnitude component is positive.
/// Throws InvalidArgument when r is not a proper rotation within 1e-6.
template <typename Derived>
Vector3<typename Derived::Scalar> rotation_to_axis_angle(const Eigen::MatrixBase<Derived>& r) {
  using Scalar = typename Derived::Scalar;
  const Matrix3<Scalar> m = r;
  if (!m.allFinite() || !is_rotation<Scalar>(m, Scalar(1e-6))) {
    throw InvalidArgument("rotation_to_axis_angle: matrix is not a proper rotation");
  }
  // w = sin(theta) * axis
  const Vector3<Scalar> w(Scalar(0.5) * (m(2, 1) - m(1, 2)), Scalar(0.5) * (m(0, 2) - m(2, 0)),
                          Scalar(0.5) * (m(1, 0) - m(0, 1)));
  const Scalar c = std::clamp((m.trace() - Scalar(1)) * Scalar(0.5), Scalar(-1), Scalar(1));
  const Scalar s = w.norm();
  const Scalar theta = std::atan2(s, c);
  if (theta == Scalar(0)) return Vector3<Scalar>::Zero();
  if (c > Scalar(0)) return (theta / s) * w;

  // Near pi: recover the axis from the symmetric part, (1 - c) a a^T.
  const Matrix3<Scalar> b = Scalar(0.5) * (m + m.transpose()) - c * Matrix3<Scalar>::Identity();
  Eigen::Index k;
  b.diagonal().maxCoeff(&k);
  Vector3<Scalar> axis = b.col(k) / std::sqrt(std::max(b(k, k), Scalar(0)) * (Scalar(1) - c));
  axis.normalize();
  // at pi, w is rounding noise and carries no sign information
  const Scalar d = axis.dot(w);
  if (std::abs(d) <= Scalar(64) * std::numeric_limits<Scalar>::epsilon()) {
    Eigen::Index j;
    axis.cwiseAbs().maxCoeff(&j);
    if (axis(j) < Scalar(0)) axis = -axis;
  } else if (d < Scalar(0)) {
    axis = -axis;
  }
  return theta * axis;
}

/// ||I - R_pred R_gt^T||_F.
template <typename Scalar>
Scalar rotation_accuracy(const Matrix3<Scalar>& r_gt, const Matrix3<Scalar>& r_pred) {
  return (Matrix3<Scalar>::Identity() - r_pred * r_gt.transpose()).norm();
}

enum class RotationMagnitude { small, large };

/// Half-width of the per-component sampling interval: pi/8 (small) or pi/2 (large).
inline double rotation_half_range(RotationMagnitude m) {
  return m == RotationMagnitude::small ? std::numbers::pi / 8.0 : std::numbers::pi / 2.0;
}

/// Each component independently uniform in [-h, h). Not uniform over SO(3).
inline Eigen::Vector3d sample_rotation_vector(RotationMagnitude m, Random& rng) {
  const double h = rotation_half_range(m);
  Eigen::Vector3d v;
  for (int i = 0; i < 3; ++i) v(i) = rng.uniform(-h, h);
  return v;
}

inline Eigen::Vector3d sample_rotation_vector(RotationMagnitude m, std::uint64_t seed) {
  Random rng(seed);
  return sample_rotation_vector(m, rng);
}

inline Point3 centroid(const PointCloud& cloud) {
  Point3 c = Point3::Zero();
  for (const auto& p : cloud) c += p;
  return cloud.empty() ? c : Point3(c / static_cast<double>(cloud.size()));
}

}  // namespace cfreg
