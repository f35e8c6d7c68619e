#pragma once

#include <cmath>
#include <limits>
#include <utility>

#include <Eigen/Core>
#include <Eigen/LU>

#include "cfreg/geometry.hpp"

namespace cfreg {

/// H = U diag(singular_values) V^T with singular values descending.
template <typename Scalar>
struct SvdResult {
  Matrix3<Scalar> u = Matrix3<Scalar>::Identity();
  Vector3<Scalar> singular_values = Vector3<Scalar>::Zero();
  Matrix3<Scalar> v = Matrix3<Scalar>::Identity();
  Scalar det_u = Scalar(1);
  Scalar det_v = Scalar(1);
  int sweeps = 0;
};

/// Cyclic Jacobi eigendecomposition of a symmetric 3x3 matrix. On return
/// `a` is (numerically) diagonal and a_in = vecs * a * vecs^T.
/// Returns the number of sweeps performed.
template <typename Scalar>
int jacobi_eigen_symmetric3(Matrix3<Scalar>& a, Matrix3<Scalar>& vecs, Scalar tol = Scalar(1e-14),
                            int max_sweeps = 30) {
  vecs.setIdentity();
  constexpr int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
  const Scalar scale = a.norm();
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    const Scalar off = std::sqrt(a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2));
    if (off <= tol * scale) break;
    for (const auto& pq : pairs) {
      const int p = pq[0], q = pq[1];
      const Scalar apq = a(p, q);
      if (apq == Scalar(0)) continue;
      const Scalar tau = (a(q, q) - a(p, p)) / (Scalar(2) * apq);
      const Scalar t = (tau >= Scalar(0) ? Scalar(1) : Scalar(-1)) /
                       (std::abs(tau) + std::sqrt(Scalar(1) + tau * tau));
      const Scalar c = Scalar(1) / std::sqrt(Scalar(1) + t * t);
      const Scalar s = t * c;
      Matrix3<Scalar> j = Matrix3<Scalar>::Identity();
      j(p, p) = c;
      j(q, q) = c;
      j(p, q) = s;
      j(q, p) = -s;
      a = (j.transpose() * a * j).eval();
      a(p, q) = a(q, p) = Scalar(0);
      vecs = (vecs * j).eval();
    }
  }
  return sweep;
}

namespace detail {

// Unit vector orthogonal to u (assumed unit), built from the least aligned axis.
template <typename Scalar>
Vector3<Scalar> any_orthogonal(const Vector3<Scalar>& u) {
  Eigen::Index k;
  u.cwiseAbs().minCoeff(&k);
  Vector3<Scalar> e = Vector3<Scalar>::Unit(k);
  e -= u.dot(e) * u;
  return e.normalized();
}

}  // namespace detail

/// Singular value decomposition of a 3x3 matrix via Jacobi on H^T H.
///
/// V comes from the eigenvectors of H^T H; U and the singular values are read
/// off the columns of H V. Columns of U whose singular value is negligible are
/// completed to an orthonormal basis, so U and V are always orthonormal. The
/// zero matrix yields U = V = I and zero singular values.
template <typename Scalar>
SvdResult<Scalar> svd3(const Matrix3<Scalar>& h) {
  SvdResult<Scalar> out;
  Matrix3<Scalar> a = h.transpose() * h;
  Matrix3<Scalar> vecs;
  out.sweeps = jacobi_eigen_symmetric3(a, vecs);

  // order eigenpairs by descending eigenvalue
  int order[3] = {0, 1, 2};
  const Vector3<Scalar> lambda = a.diagonal();
  if (lambda(order[0]) < lambda(order[1])) std::swap(order[0], order[1]);
  if (lambda(order[1]) < lambda(order[2])) std::swap(order[1], order[2]);
  if (lambda(order[0]) < lambda(order[1])) std::swap(order[0], order[1]);
  for (int i = 0; i < 3; ++i) out.v.col(i) = vecs.col(order[i]);

  const Matrix3<Scalar> hv = h * out.v;
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const Scalar s0 = hv.col(0).norm();
  if (s0 == Scalar(0)) {
    out.u.setIdentity();
    out.singular_values.setZero();
  } else {
    out.singular_values(0) = s0;
    out.u.col(0) = hv.col(0) / s0;

    Vector3<Scalar> r1 = hv.col(1) - out.u.col(0).dot(hv.col(1)) * out.u.col(0);
    const Scalar n1 = r1.norm();
    if (n1 > eps * s0) {
      out.u.col(1) = r1 / n1;
      out.singular_values(1) = n1;
    } else {
      out.u.col(1) = detail::any_orthogonal<Scalar>(out.u.col(0));
      out.singular_values(1) = std::max(out.u.col(1).dot(hv.col(1)), Scalar(0));
    }

    out.u.col(2) = out.u.col(0).cross(out.u.col(1));
    Scalar s2 = out.u.col(2).dot(hv.col(2));
    if (s2 < Scalar(0)) {
      out.u.col(2) = -out.u.col(2);
      s2 = -s2;
    }
    out.singular_values(2) = s2;
  }

  // keep the descending order exact after the recomputation above
  for (int pass = 0; pass < 2; ++pass) {
    for (int i = 0; i < 2; ++i) {
      if (out.singular_values(i) < out.singular_values(i + 1)) {
        std::swap(out.singular_values(i), out.singular_values(i + 1));
        out.u.col(i).swap(out.u.col(i + 1));
        out.v.col(i).swap(out.v.col(i + 1));
      }
    }
  }
  out.det_u = out.u.determinant();
  out.det_v = out.v.determinant();
  return out;
}

}  // namespace cfreg
