#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cfreg/features.hpp"
#include "cfreg/geometry.hpp"
#include "cfreg/parallel.hpp"
#include "cfreg/procrustes.hpp"

namespace cfreg {

struct SolverConfig {
  double beta = 100.0;         // feature-distance scale of the similarity weight
  std::size_t k = 150;         // neighbors for normals and FPFH
  double weight_floor = 0.0;   // w = max(similarity, weight_floor)
  KeypointParams keypoints;    // CFK only
  Execution execution = Execution::parallel;

  void validate() const;
};

/// Wall-clock milliseconds per pipeline stage.
struct StageTimings {
  double normals_ms = 0.0;
  double features_ms = 0.0;
  double keypoints_ms = 0.0;
  double accumulate_ms = 0.0;
  double solve_ms = 0.0;
  double total_ms = 0.0;
};

struct RegistrationResult {
  RigidTransformd transform;
  std::string algorithm;
  double weight_sum = 0.0;
  std::size_t pair_count = 0;
  Eigen::Vector3d singular_values = Eigen::Vector3d::Zero();
  bool reflection_corrected = false;
  bool ill_conditioned = false;
  std::size_t keypoints_source = 0;  // CFK
  std::size_t keypoints_target = 0;
  std::size_t iterations = 0;        // ICP
  double fitness = 0.0;              // ICP: final mean squared correspondence error
  std::string termination;           // ICP stop reason
  std::vector<double> mse_history;   // ICP
  StageTimings timing;
};

/// exp(-|f_p - f_q|^2 / beta), in (0, 1] up to underflow.
double pair_weight(const Descriptor& f_p, const Descriptor& f_q, double beta);

/// Streams all |P| x |Q| pairs with w = max(pair_weight, weight_floor) into a
/// PairAccumulator in O(|P| |Q|) time and O(1) extra memory. The source index
/// range is cut into fixed blocks combined in order, so sequential and
/// parallel execution give identical sums.
/// Throws DegenerateInput when the total weight is zero.
PairAccumulatord accumulate_full_connection(const PointCloud& source, const PointCloud& target,
                                            const DescriptorSet& f_source,
                                            const DescriptorSet& f_target,
                                            const SolverConfig& cfg);

/// Same, restricted to the given index subsets of each cloud.
PairAccumulatord accumulate_full_connection(const PointCloud& source, const PointCloud& target,
                                            const DescriptorSet& f_source,
                                            const DescriptorSet& f_target,
                                            std::span<const std::size_t> source_indices,
                                            std::span<const std::size_t> target_indices,
                                            const SolverConfig& cfg);

/// One-step correspondence-free registration: normals, FPFH, similarity
/// weights over the full connection of both clouds, weighted closed-form
/// solve. The transform maps `source` into the frame of `target`.
RegistrationResult register_cf(const PointCloud& source, const PointCloud& target,
                               const SolverConfig& cfg = {});

/// Keypoint variant: descriptors on the full clouds, full connection between
/// keypoints only. Throws DegenerateInput when either cloud yields fewer than
/// three keypoints; register_cf is the fallback.
RegistrationResult register_cfk(const PointCloud& source, const PointCloud& target,
                                const SolverConfig& cfg = {});

/// CFK with caller-supplied keypoint sets.
RegistrationResult register_cfk(const PointCloud& source, const PointCloud& target,
                                const KeypointSet& source_keypoints,
                                const KeypointSet& target_keypoints, const SolverConfig& cfg = {});

struct IcpParams {
  double max_correspondence_distance = 0.5;
  std::size_t max_iterations = 1000;
  double transformation_epsilon = 1e-9;
  double euclidean_fitness_epsilon = 0.05;
  Execution execution = Execution::parallel;

  void validate() const;
};

/// Point-to-point ICP. Each iteration matches every source point to its
/// nearest target point (gated by max_correspondence_distance) and re-solves
/// the unweighted closed form from the original source points. Stops when
///   - max_iterations is reached,
///   - consecutive 4x4 transforms differ by less than transformation_epsilon
///     (max absolute entry), or
///   - the relative change of the correspondence MSE between iterations drops
///     below euclidean_fitness_epsilon (or the MSE itself is below 1e-12).
/// With no correspondence inside the gate the best transform so far is
/// returned with termination "no_correspondences".
RegistrationResult register_icp(const PointCloud& source, const PointCloud& target,
                                const IcpParams& params = {},
                                const RigidTransformd& init = RigidTransformd::identity());

}  // namespace cfreg
