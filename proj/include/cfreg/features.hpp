#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "cfreg/geometry.hpp"
#include "cfreg/kdtree.hpp"
#include "cfreg/parallel.hpp"

namespace cfreg {

inline constexpr int kBinsPerFeature = 11;
inline constexpr int kDescriptorSize = 3 * kBinsPerFeature;

/// FPFH layout: three 11-bin blocks for alpha, phi and theta.
using Descriptor = Eigen::Matrix<double, kDescriptorSize, 1, Eigen::DontAlign>;

/// k nearest neighbors of every point of a cloud, self included, stored flat.
struct NeighborGraph {
  std::size_t k = 0;
  std::vector<std::size_t> indices;     // size() == n * k
  std::vector<double> squared_distances;

  std::size_t point_count() const { return k == 0 ? 0 : indices.size() / k; }
  std::span<const std::size_t> neighbors(std::size_t i) const {
    return {indices.data() + i * k, k};
  }
  std::span<const double> distances2(std::size_t i) const {
    return {squared_distances.data() + i * k, k};
  }
};

NeighborGraph build_neighbor_graph(const PointCloud& cloud, const KdTree3d& tree, std::size_t k,
                                   Execution mode = Execution::parallel);
NeighborGraph build_neighbor_graph(const PointCloud& cloud, std::size_t k,
                                   Execution mode = Execution::parallel);

struct NormalSet {
  std::vector<Eigen::Vector3d> normals;  // unit length where valid, zero otherwise
  std::vector<double> surface_variation;  // lambda_min / trace, in [0, 1/3]
  std::vector<std::uint8_t> valid;        // 0 for degenerate neighborhoods
  std::size_t k = 0;

  std::size_t size() const { return normals.size(); }
  bool is_valid(std::size_t i) const { return valid[i] != 0; }
};

/// PCA normals over k-NN neighborhoods. The normal is the eigenvector of the
/// neighborhood covariance with the smallest eigenvalue, oriented to have a
/// nonnegative dot product with (point - cloud centroid); exact ties prefer a
/// positive z, then y, then x component. Neighborhoods whose points all
/// coincide are flagged invalid. Requires 3 <= k <= cloud.size().
NormalSet estimate_normals(const PointCloud& cloud, const NeighborGraph& graph,
                           Execution mode = Execution::parallel);
NormalSet estimate_normals(const PointCloud& cloud, std::size_t k,
                           Execution mode = Execution::parallel);

/// Darboux-frame angles of an oriented point pair (alpha, phi, theta).
/// Returns false when the pair is coincident or the frame is undefined.
bool pair_features(const Eigen::Vector3d& p1, const Eigen::Vector3d& n1,
                   const Eigen::Vector3d& p2, const Eigen::Vector3d& n2,
                   Eigen::Vector3d& alpha_phi_theta);

/// Simplified point feature histogram of `index` against `neighbors`.
/// Coincident pairs and neighbors with invalid normals are skipped; each
/// block is normalized to sum 100 over the remaining pairs (all-zero if none).
Descriptor compute_spfh(const PointCloud& cloud, const NormalSet& normals, std::size_t index,
                        std::span<const std::size_t> neighbors);

struct DescriptorSet {
  std::vector<Descriptor> descriptors;
  std::size_t k = 0;
  std::uint64_t cloud_fingerprint = 0;

  std::size_t size() const { return descriptors.size(); }
  const Descriptor& operator[](std::size_t i) const { return descriptors[i]; }
};

/// Hash of the cloud's coordinates; ties a DescriptorSet to its source.
std::uint64_t cloud_fingerprint(const PointCloud& cloud);

/// FPFH descriptors. Per 11-bin block,
///   FPFH(p) = (SPFH(p) + N(sum_i SPFH(p_i) / |p - p_i|)) / 2
/// where N rescales the distance-weighted neighbor sum to 100. When one of the
/// two parts is empty the other is used alone, so every block of a point with
/// at least one valid pair sums to 100. Points with an invalid normal get an
/// all-zero descriptor.
DescriptorSet compute_fpfh(const PointCloud& cloud, const NormalSet& normals,
                           const NeighborGraph& graph, Execution mode = Execution::parallel);
DescriptorSet compute_fpfh(const PointCloud& cloud, const NormalSet& normals, std::size_t k,
                           Execution mode = Execution::parallel);

struct KeypointParams {
  double nms_radius = 0.0;  // <= 0 selects 4x the median nearest-neighbor spacing
  double threshold = 0.02;  // minimum surface variation
  std::size_t max_keypoints = 200;
};

struct KeypointSet {
  std::vector<std::size_t> indices;  // unique, ascending
  KeypointParams params;             // nms_radius resolved to the value used
  bool empty() const { return indices.empty(); }
};

/// Median distance from each point to its nearest other point.
double median_nn_spacing(const PointCloud& cloud, const KdTree3d& tree);

/// Points whose surface variation exceeds the threshold and is a strict local
/// maximum (ties to the lower index) within nms_radius; the strongest
/// max_keypoints are kept. Requires at least 50 points. Returns an empty set
/// when nothing passes the threshold.
KeypointSet detect_keypoints(const PointCloud& cloud, const NormalSet& normals,
                             const KeypointParams& params = {});

}  // namespace cfreg
