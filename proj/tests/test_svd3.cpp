#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "cfreg/svd3.hpp"
#include "support.hpp"

using namespace cfreg;

namespace {

void check_decomposition(const Eigen::Matrix3d& h) {
  const auto s = svd3(h);
  const Eigen::Matrix3d rec = s.u * s.singular_values.asDiagonal() * s.v.transpose();
  const double scale = std::max(h.norm(), 1e-300);
  CHECK((rec - h).norm() / scale < 1e-10);
  CHECK((s.u.transpose() * s.u - Eigen::Matrix3d::Identity()).norm() < 1e-10);
  CHECK((s.v.transpose() * s.v - Eigen::Matrix3d::Identity()).norm() < 1e-10);
  CHECK(s.singular_values(0) >= s.singular_values(1));
  CHECK(s.singular_values(1) >= s.singular_values(2));
  CHECK(s.singular_values(2) >= 0.0);
  CHECK(s.det_u == doctest::Approx(s.u.determinant()));
  CHECK(s.det_v == doctest::Approx(s.v.determinant()));
}

}  // namespace

TEST_CASE("diagonal and permuted inputs") {
  Eigen::Matrix3d d = Eigen::Vector3d(1, 3, 2).asDiagonal();
  const auto s = svd3(d);
  CHECK((s.singular_values - Eigen::Vector3d(3, 2, 1)).norm() < 1e-14);
  check_decomposition(d);
  check_decomposition(-d);
  check_decomposition(Eigen::Matrix3d::Identity());
}

TEST_CASE("rank deficient inputs") {
  check_decomposition(Eigen::Matrix3d::Zero());
  const Eigen::Vector3d a(1, 2, 3), b(-1, 0.5, 2);
  check_decomposition(a * b.transpose());
  check_decomposition(a * b.transpose() + b * a.transpose());
  Eigen::Matrix3d m;
  m << 1, 2, 3, 2, 4, 6, 0, 0, 0;
  check_decomposition(m);
  const auto s = svd3(m);
  CHECK(s.singular_values(1) < 1e-12);
}

TEST_CASE("rank deficient singular values against an SVD oracle") {
  // sqrt of eigenvalues of H^T H is only accurate to ~1e-8 near zero, so the
  // reference here is a direct two-sided Jacobi SVD
  Random rng(55);
  for (int i = 0; i < 500; ++i) {
    Eigen::Matrix3d h;
    for (int k = 0; k < 9; ++k) h(k) = rng.uniform(-1, 1);
    h.col(2) = 0.3 * h.col(0) - 1.7 * h.col(1);
    if (i % 2) h.col(1) = -2.0 * h.col(0);
    check_decomposition(h);
    const Eigen::JacobiSVD<Eigen::Matrix3d> ref(h);
    CHECK((svd3(h).singular_values - ref.singularValues()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("random matrices against the eigenvalue oracle") {
  Random rng(101);
  for (int i = 0; i < 2000; ++i) {
    Eigen::Matrix3d h;
    for (int k = 0; k < 9; ++k) h(k) = rng.uniform(-1, 1);
    check_decomposition(h);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(h.transpose() * h);
    Eigen::Vector3d expect = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().reverse();
    CHECK((svd3(h).singular_values - expect).norm() < 1e-9);
  }
}

TEST_CASE("symmetric Jacobi diagonalizes") {
  Random rng(4);
  for (int i = 0; i < 200; ++i) {
    Eigen::Matrix3d b;
    for (int k = 0; k < 9; ++k) b(k) = rng.normal();
    const Eigen::Matrix3d a0 = b + b.transpose();
    Eigen::Matrix3d a = a0, v;
    const int sweeps = jacobi_eigen_symmetric3(a, v);
    CHECK(sweeps <= 30);
    Eigen::Matrix3d off = a;
    off.diagonal().setZero();
    CHECK(off.norm() < 1e-12 * a0.norm());
    CHECK((v * a * v.transpose() - a0).norm() < 1e-12 * a0.norm());
  }
}
