#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "cfreg/experiment.hpp"
#include "cfreg/geometry.hpp"
#include "cfreg/procrustes.hpp"
#include "cfreg/random.hpp"

namespace cfreg::test {

inline std::string fixture(const std::string& name) {
  return std::string(CFREG_FIXTURE_DIR) + "/" + name;
}

inline PointCloud random_cloud(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  Random rng(seed);
  PointCloud c(n);
  for (auto& p : c) p = Point3(rng.uniform(-scale, scale), rng.uniform(-scale, scale),
                               rng.uniform(-scale, scale));
  return c;
}

// Jittered grid on z = 0; jitter keeps the k-NN sets free of exact ties.
inline PointCloud plane_cloud(std::size_t side, double spacing, std::uint64_t seed) {
  Random rng(seed);
  PointCloud c;
  for (std::size_t i = 0; i < side; ++i) {
    for (std::size_t j = 0; j < side; ++j) {
      c.emplace_back(spacing * (i + 0.2 * rng.uniform()), spacing * (j + 0.2 * rng.uniform()), 0.0);
    }
  }
  return c;
}

inline PointCloud sphere_cloud(std::size_t n, double radius, const Point3& center,
                               std::uint64_t seed) {
  Random rng(seed);
  PointCloud c(n);
  for (auto& p : c) p = center + rng.on_sphere(radius);
  return c;
}

inline RigidTransformd random_transform(std::uint64_t seed, double t_scale = 1.0) {
  Random rng(seed);
  const Eigen::Vector3d rv = sample_rotation_vector(RotationMagnitude::large, rng);
  RigidTransformd t;
  t.rotation = axis_angle_to_rotation(rv);
  t.translation = Eigen::Vector3d(rng.uniform(-t_scale, t_scale), rng.uniform(-t_scale, t_scale),
                                  rng.uniform(-t_scale, t_scale));
  return t;
}

struct WeightedPairs {
  PointCloud p, q;
  std::vector<double> w;
};

inline PairAccumulatord accumulate(const WeightedPairs& s) {
  PairAccumulatord acc;
  for (std::size_t i = 0; i < s.w.size(); ++i) acc.add(s.p[i], s.q[i], s.w[i]);
  return acc;
}

// sum w |R p + t - q|^2 with the optimal t for R (weighted centroids)
inline double weighted_cost(const WeightedPairs& s, const Eigen::Matrix3d& r) {
  Eigen::Vector3d pm = Eigen::Vector3d::Zero(), qm = Eigen::Vector3d::Zero();
  double sw = 0.0;
  for (std::size_t i = 0; i < s.w.size(); ++i) {
    pm += s.w[i] * s.p[i];
    qm += s.w[i] * s.q[i];
    sw += s.w[i];
  }
  pm /= sw;
  qm /= sw;
  double c = 0.0;
  for (std::size_t i = 0; i < s.w.size(); ++i)
    c += s.w[i] * (r * (s.p[i] - pm) - (s.q[i] - qm)).squaredNorm();
  return c;
}

inline Eigen::Matrix3d euler_zyx(double a, double b, double c) {
  return (Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(b, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(c, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

// Source points mirrored through z = 0 and moved rigidly, so the unconstrained
// fit is a reflection. `flat` squeezes the source into a 2e-3 thick slab and
// shrinks the target noise to match.
inline WeightedPairs reflected_case(std::uint64_t seed, std::size_t n, bool flat) {
  Random rng(seed);
  WeightedPairs s;
  const Eigen::Matrix3d rot = axis_angle_to_rotation(rng.in_ball(3.0));
  const Eigen::Matrix3d mirror = rot * Eigen::Vector3d(1, 1, -1).asDiagonal();
  const double thickness = flat ? 1e-3 : 0.5, noise = flat ? 1e-6 : 0.01;
  for (std::size_t i = 0; i < n; ++i) {
    Point3 p(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-thickness, thickness));
    s.p.push_back(p);
    s.q.push_back(mirror * p + Eigen::Vector3d(0.5, -1, 2) + noise * rng.in_ball(1.0));
    s.w.push_back(rng.uniform(0.1, 1.0));
  }
  return s;
}

inline const PointCloud& bunny() {
  static const PointCloud cloud = [] {
    ExperimentConfig cfg;
    cfg.data_dir = CFREG_DATA_DIR;
    return load_dataset(cfg);
  }();
  return cloud;
}

}  // namespace cfreg::test
