#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cfreg/geometry.hpp"
#include "support.hpp"

using namespace cfreg;
using std::numbers::pi;

TEST_CASE("axis-angle round trip over random vectors") {
  Random rng(11);
  for (int i = 0; i < 1000; ++i) {
    Eigen::Vector3d v = rng.in_ball(pi - 1e-3);
    const Eigen::Matrix3d r = axis_angle_to_rotation(v);
    CHECK(is_rotation<double>(r, 1e-12));
    const Eigen::Vector3d back = rotation_to_axis_angle(r);
    CHECK((back - v).norm() < 1e-9);
  }
}

TEST_CASE("tiny angles use the series branch") {
  const Eigen::Vector3d v(1e-7, -2e-7, 3e-8);
  const Eigen::Matrix3d r = axis_angle_to_rotation(v);
  CHECK(is_rotation<double>(r, 1e-15));
  CHECK((rotation_to_axis_angle(r) - v).norm() < 1e-15);
  CHECK(axis_angle_to_rotation(Eigen::Vector3d::Zero().eval()) == Eigen::Matrix3d::Identity());
}

TEST_CASE("angle pi returns a canonical axis") {
  for (const Eigen::Vector3d axis :
       {Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(0, -1, 0), Eigen::Vector3d(-1, 2, 2).normalized()}) {
    const Eigen::Matrix3d r = axis_angle_to_rotation((pi * axis).eval());
    const Eigen::Vector3d v = rotation_to_axis_angle(r);
    CHECK(v.norm() == doctest::Approx(pi).epsilon(1e-9));
    Eigen::Index j;
    v.cwiseAbs().maxCoeff(&j);
    CHECK(v(j) > 0.0);
    CHECK((axis_angle_to_rotation(v) - r).norm() < 1e-9);
  }
}

TEST_CASE("rotation_to_axis_angle rejects non-rotations") {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(2, 2) = -1.0;
  CHECK_THROWS_AS(rotation_to_axis_angle(m), InvalidArgument);
  CHECK_THROWS_AS(rotation_to_axis_angle((2.0 * Eigen::Matrix3d::Identity()).eval()), InvalidArgument);
}

TEST_CASE("compose and invert") {
  const auto a = test::random_transform(1), b = test::random_transform(2);
  const Point3 p(0.3, -0.2, 0.9);
  CHECK((compose(a, b)(p) - a(b(p))).norm() < 1e-12);
  CHECK((invert(a)(a(p)) - p).norm() < 1e-12);
  CHECK((compose(a, invert(a)).matrix() - Eigen::Matrix4d::Identity()).norm() < 1e-12);
  CHECK((RigidTransformd::from_matrix(a.matrix()).matrix() - a.matrix()).norm() == 0.0);
}

TEST_CASE("rotation sampling stays in range and is reproducible") {
  for (auto m : {RotationMagnitude::small, RotationMagnitude::large}) {
    const double h = rotation_half_range(m);
    Random rng(5);
    for (int i = 0; i < 2000; ++i) {
      const auto v = sample_rotation_vector(m, rng);
      CHECK(v.maxCoeff() < h);
      CHECK(v.minCoeff() >= -h);
    }
    CHECK(sample_rotation_vector(m, 42) == sample_rotation_vector(m, 42));
    CHECK(sample_rotation_vector(m, 42) != sample_rotation_vector(m, 43));
  }
  CHECK(rotation_half_range(RotationMagnitude::small) == pi / 8);
  CHECK(rotation_half_range(RotationMagnitude::large) == pi / 2);
}

TEST_CASE("rotation accuracy values") {
  const Eigen::Matrix3d i = Eigen::Matrix3d::Identity();
  CHECK(rotation_accuracy<double>(i, i) == 0.0);
  // half turn: I - R = diag(2, 2, 0)
  const Eigen::Matrix3d rz = axis_angle_to_rotation(Eigen::Vector3d(0, 0, pi));
  CHECK(rotation_accuracy<double>(i, rz) == doctest::Approx(std::sqrt(8.0)));
  // ||I - R||_F = 2 sqrt(2) |sin(theta / 2)| for any angle
  for (double th : {0.1, 0.7, 1.5, 2.9}) {
    const Eigen::Matrix3d r = axis_angle_to_rotation(Eigen::Vector3d(th, 0, 0));
    CHECK(rotation_accuracy<double>(i, r) ==
          doctest::Approx(2.0 * std::sqrt(2.0) * std::sin(th / 2)).epsilon(1e-12));
  }
}

TEST_CASE("rotation accuracy is symmetric and left invariant") {
  Random rng(8);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Matrix3d a = axis_angle_to_rotation(rng.in_ball(3.0));
    const Eigen::Matrix3d b = axis_angle_to_rotation(rng.in_ball(3.0));
    const Eigen::Matrix3d c = axis_angle_to_rotation(rng.in_ball(3.0));
    const double ab = rotation_accuracy<double>(a, b);
    CHECK(ab == doctest::Approx(rotation_accuracy<double>(b, a)).epsilon(1e-12));
    CHECK(ab == doctest::Approx(rotation_accuracy<double>((c * a).eval(), (c * b).eval())).epsilon(1e-10));
    // direct entrywise sum of squares
    const Eigen::Matrix3d d = Eigen::Matrix3d::Identity() - b * a.transpose();
    double s = 0.0;
    for (int r = 0; r < 3; ++r)
      for (int q = 0; q < 3; ++q) s += d(r, q) * d(r, q);
    CHECK(ab == doctest::Approx(std::sqrt(s)).epsilon(1e-14));
    CHECK(ab <= std::sqrt(8.0) + 1e-12);
  }
}

TEST_CASE("centroid") {
  const PointCloud c{{0, 0, 0}, {2, 0, 0}, {0, 4, 0}, {0, 0, 8}};
  CHECK((centroid(c) - Point3(0.5, 1, 2)).norm() < 1e-15);
}

TEST_CASE("random draws") {
  Random a(3), b(3);
  for (int i = 0; i < 100; ++i) CHECK(a.bits() == b.bits());
  Random r(9);
  double sum = 0, sum2 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double z = r.normal();
    sum += z;
    sum2 += z * z;
    CHECK(r.in_ball(0.5).norm() <= 0.5);
    CHECK(r.on_sphere(2.0).norm() == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.below(7) < 7);
  }
  CHECK(std::abs(sum / n) < 0.03);
  CHECK(std::abs(sum2 / n - 1.0) < 0.05);
  CHECK(derive_seed(1, 2) != derive_seed(2, 1));
}
