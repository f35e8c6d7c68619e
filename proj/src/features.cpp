#include "cfreg/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <unordered_map>

#include <Eigen/Eigenvalues>

#include "cfreg/error.hpp"

namespace cfreg {

NeighborGraph build_neighbor_graph(const PointCloud& cloud, const KdTree3d& tree, std::size_t k,
                                   Execution mode) {
  if (k == 0 || k > tree.size()) throw InvalidArgument("neighbor graph: k must be in [1, N]");
  NeighborGraph g;
  g.k = k;
  g.indices.resize(cloud.size() * k);
  g.squared_distances.resize(cloud.size() * k);
  parallel_for(cloud.size(), mode, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto nn = tree.knn(cloud[i], k);
      for (std::size_t j = 0; j < k; ++j) {
        g.indices[i * k + j] = nn[j].index;
        g.squared_distances[i * k + j] = nn[j].squared_distance;
      }
    }
  });
  return g;
}

NeighborGraph build_neighbor_graph(const PointCloud& cloud, std::size_t k, Execution mode) {
  const KdTree3d tree(cloud);
  return build_neighbor_graph(cloud, tree, k, mode);
}

namespace {

void orient_outward(Eigen::Vector3d& n, const Eigen::Vector3d& radial) {
  const double d = n.dot(radial);
  if (std::abs(d) > 1e-12 * radial.norm()) {
    if (d < 0.0) n = -n;
    return;
  }
  for (int axis : {2, 1, 0}) {
    if (n(axis) != 0.0) {
      if (n(axis) < 0.0) n = -n;
      return;
    }
  }
}

}  // namespace

NormalSet estimate_normals(const PointCloud& cloud, const NeighborGraph& graph, Execution mode) {
  if (graph.k < 3) throw InvalidArgument("estimate_normals: k must be at least 3");
  if (graph.point_count() != cloud.size()) {
    throw InvalidArgument("estimate_normals: neighbor graph does not match the cloud");
  }
  const std::size_t n = cloud.size();
  NormalSet out;
  out.k = graph.k;
  out.normals.assign(n, Eigen::Vector3d::Zero());
  out.surface_variation.assign(n, 0.0);
  out.valid.assign(n, 0);
  const Eigen::Vector3d c = centroid(cloud);

  parallel_for(n, mode, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto nbrs = graph.neighbors(i);
      Eigen::Vector3d mean = Eigen::Vector3d::Zero();
      for (std::size_t j : nbrs) mean += cloud[j];
      mean /= static_cast<double>(nbrs.size());
      Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
      for (std::size_t j : nbrs) {
        const Eigen::Vector3d d = cloud[j] - mean;
        cov += d * d.transpose();
      }
      cov /= static_cast<double>(nbrs.size());
      const double trace = cov.trace();
      if (!(trace > 0.0)) continue;

      const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
      Eigen::Vector3d normal = es.eigenvectors().col(0).normalized();
      orient_outward(normal, cloud[i] - c);
      out.normals[i] = normal;
      out.surface_variation[i] = std::clamp(es.eigenvalues()(0) / trace, 0.0, 1.0 / 3.0);
      out.valid[i] = 1;
    }
  });
  return out;
}

NormalSet estimate_normals(const PointCloud& cloud, std::size_t k, Execution mode) {
  if (k < 3) throw InvalidArgument("estimate_normals: k must be at least 3");
  if (k > cloud.size()) throw InvalidArgument("estimate_normals: k exceeds the cloud size");
  return estimate_normals(cloud, build_neighbor_graph(cloud, k, mode), mode);
}

constexpr double kSwapTolerance = 1e-12;

bool pair_features(const Eigen::Vector3d& p1, const Eigen::Vector3d& n1, const Eigen::Vector3d& p2,
                   const Eigen::Vector3d& n2, Eigen::Vector3d& alpha_phi_theta) {
  Eigen::Vector3d dp = p2 - p1;
  const double dist = dp.norm();
  if (dist == 0.0) return false;

  // The source of the frame is the point whose normal makes the smaller angle
  // with the connecting line. Equal normals tie exactly; the tolerance keeps
  // the call order there instead of letting rounding pick.
  const double a1 = n1.dot(dp) / dist;
  const double a2 = n2.dot(dp) / dist;
  const Eigen::Vector3d* ns = &n1;
  const Eigen::Vector3d* nt = &n2;
  double phi = a1;
  if (std::abs(a1) < std::abs(a2) - kSwapTolerance) {
    ns = &n2;
    nt = &n1;
    dp = -dp;
    phi = -a2;
  }
  Eigen::Vector3d v = dp.cross(*ns);
  const double vn = v.norm();
  if (vn == 0.0) return false;
  v /= vn;
  const Eigen::Vector3d w = ns->cross(v);
  const double alpha = v.dot(*nt);
  const double theta = std::atan2(w.dot(*nt), ns->dot(*nt));
  alpha_phi_theta = {alpha, phi, theta};
  return true;
}

namespace {

int bin_of(double value, double lo, double hi) {
  const int b = static_cast<int>(std::floor(kBinsPerFeature * (value - lo) / (hi - lo)));
  return std::clamp(b, 0, kBinsPerFeature - 1);
}

}  // namespace

Descriptor compute_spfh(const PointCloud& cloud, const NormalSet& normals, std::size_t index,
                        std::span<const std::size_t> neighbors) {
  Descriptor h = Descriptor::Zero();
  if (!normals.is_valid(index)) return h;
  int count = 0;
  Eigen::Vector3d f;
  for (std::size_t j : neighbors) {
    if (j == index || !normals.is_valid(j)) continue;
    if (!pair_features(cloud[index], normals.normals[index], cloud[j], normals.normals[j], f)) {
      continue;
    }
    h(bin_of(f(0), -1.0, 1.0)) += 1.0;
    h(kBinsPerFeature + bin_of(f(1), -1.0, 1.0)) += 1.0;
    h(2 * kBinsPerFeature + bin_of(f(2), -std::numbers::pi, std::numbers::pi)) += 1.0;
    ++count;
  }
  if (count > 0) h *= 100.0 / count;
  return h;
}

std::uint64_t cloud_fingerprint(const PointCloud& cloud) {
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  for (const auto& p : cloud) {
    for (int i = 0; i < 3; ++i) {
      std::uint64_t bits;
      const double v = p(i);
      std::memcpy(&bits, &v, sizeof bits);
      for (int b = 0; b < 8; ++b) {
        hash ^= (bits >> (8 * b)) & 0xFF;
        hash *= 0x100000001B3ULL;
      }
    }
  }
  return hash;
}

DescriptorSet compute_fpfh(const PointCloud& cloud, const NormalSet& normals,
                           const NeighborGraph& graph, Execution mode) {
  if (graph.k < 3) throw InvalidArgument("compute_fpfh: k must be at least 3");
  if (graph.point_count() != cloud.size() || normals.size() != cloud.size()) {
    throw InvalidArgument("compute_fpfh: normals or neighbor graph do not match the cloud");
  }
  const std::size_t n = cloud.size();
  std::vector<Descriptor> spfh(n);
  parallel_for(n, mode, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      spfh[i] = compute_spfh(cloud, normals, i, graph.neighbors(i));
    }
  });

  DescriptorSet out;
  out.k = graph.k;
  out.cloud_fingerprint = cloud_fingerprint(cloud);
  out.descriptors.assign(n, Descriptor::Zero());
  parallel_for(n, mode, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      if (!normals.is_valid(i)) continue;
      const auto nbrs = graph.neighbors(i);
      const auto d2 = graph.distances2(i);
      Descriptor spread = Descriptor::Zero();
      for (std::size_t j = 0; j < nbrs.size(); ++j) {
        if (nbrs[j] == i || d2[j] == 0.0) continue;
        spread += spfh[nbrs[j]] / std::sqrt(d2[j]);
      }
      Descriptor& f = out.descriptors[i];
      for (int b = 0; b < 3; ++b) {
        const auto self = spfh[i].segment<kBinsPerFeature>(b * kBinsPerFeature);
        auto other = spread.segment<kBinsPerFeature>(b * kBinsPerFeature);
        const double self_sum = self.sum();
        const double other_sum = other.sum();
        auto dst = f.segment<kBinsPerFeature>(b * kBinsPerFeature);
        if (self_sum > 0.0 && other_sum > 0.0) {
          dst = 0.5 * (self + (100.0 / other_sum) * other);
        } else if (self_sum > 0.0) {
          dst = self;
        } else if (other_sum > 0.0) {
          dst = (100.0 / other_sum) * other;
        }
      }
    }
  });
  return out;
}

DescriptorSet compute_fpfh(const PointCloud& cloud, const NormalSet& normals, std::size_t k,
                           Execution mode) {
  if (k < 3) throw InvalidArgument("compute_fpfh: k must be at least 3");
  if (k > cloud.size()) throw InvalidArgument("compute_fpfh: k exceeds the cloud size");
  return compute_fpfh(cloud, normals, build_neighbor_graph(cloud, k, mode), mode);
}

double median_nn_spacing(const PointCloud& cloud, const KdTree3d& tree) {
  if (cloud.size() < 2) throw InvalidArgument("median_nn_spacing: need at least two points");
  std::vector<double> d(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    d[i] = std::sqrt(tree.knn(cloud[i], 2)[1].squared_distance);
  }
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid;
}

namespace {

struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& c) const {
    std::uint64_t h = splitmix64(static_cast<std::uint64_t>(c.x));
    h = splitmix64(h ^ static_cast<std::uint64_t>(c.y));
    return splitmix64(h ^ static_cast<std::uint64_t>(c.z));
  }
};

}  // namespace

KeypointSet detect_keypoints(const PointCloud& cloud, const NormalSet& normals,
                             const KeypointParams& params) {
  if (cloud.size() < 50) throw InvalidArgument("detect_keypoints: need at least 50 points");
  if (normals.size() != cloud.size()) {
    throw InvalidArgument("detect_keypoints: normals do not match the cloud");
  }
  KeypointSet out;
  out.params = params;
  if (out.params.nms_radius <= 0.0) {
    const KdTree3d tree(cloud);
    out.params.nms_radius = 4.0 * median_nn_spacing(cloud, tree);
  }
  const double r = out.params.nms_radius;
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw DegenerateInput("detect_keypoints: suppression radius resolves to zero");
  }

  const auto cell_of = [r](const Point3& p) {
    return CellKey{static_cast<std::int64_t>(std::floor(p.x() / r)),
                   static_cast<std::int64_t>(std::floor(p.y() / r)),
                   static_cast<std::int64_t>(std::floor(p.z() / r))};
  };
  std::unordered_map<CellKey, std::vector<std::size_t>, CellHash> grid;
  for (std::size_t i = 0; i < cloud.size(); ++i) grid[cell_of(cloud[i])].push_back(i);

  const auto& var = normals.surface_variation;
  const double r2 = r * r;
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!normals.is_valid(i) || !(var[i] > params.threshold)) continue;
    const CellKey c = cell_of(cloud[i]);
    bool is_max = true;
    for (std::int64_t dx = -1; dx <= 1 && is_max; ++dx) {
      for (std::int64_t dy = -1; dy <= 1 && is_max; ++dy) {
        for (std::int64_t dz = -1; dz <= 1 && is_max; ++dz) {
          const auto it = grid.find({c.x + dx, c.y + dy, c.z + dz});
          if (it == grid.end()) continue;
          for (std::size_t j : it->second) {
            if (j == i || (cloud[j] - cloud[i]).squaredNorm() > r2) continue;
            if (var[j] > var[i] || (var[j] == var[i] && j < i)) {
              is_max = false;
              break;
            }
          }
        }
      }
    }
    if (is_max) candidates.push_back(i);
  }

  std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
    return var[a] > var[b] || (var[a] == var[b] && a < b);
  });
  if (candidates.size() > params.max_keypoints) candidates.resize(params.max_keypoints);
  std::sort(candidates.begin(), candidates.end());
  out.indices = std::move(candidates);
  return out;
}

}  // namespace cfreg
