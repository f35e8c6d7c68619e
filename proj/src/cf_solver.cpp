#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "cfreg/error.hpp"
#include "cfreg/registration.hpp"

namespace cfreg {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

// Source indices per accumulation task. Fixed, so the summation order does not
// depend on the number of threads.
constexpr std::size_t kAccumulateBlock = 32;

struct PreparedCloud {
  NeighborGraph graph;
  NormalSet normals;
  DescriptorSet descriptors;
};

PreparedCloud prepare(const PointCloud& cloud, const SolverConfig& cfg, StageTimings& timing) {
  PreparedCloud out;
  auto t0 = Clock::now();
  out.graph = build_neighbor_graph(cloud, cfg.k, cfg.execution);
  out.normals = estimate_normals(cloud, out.graph, cfg.execution);
  timing.normals_ms += elapsed_ms(t0);
  t0 = Clock::now();
  out.descriptors = compute_fpfh(cloud, out.normals, out.graph, cfg.execution);
  timing.features_ms += elapsed_ms(t0);
  return out;
}

void check_cloud_size(const PointCloud& cloud, const SolverConfig& cfg, const char* which) {
  if (cloud.size() < cfg.k) {
    throw DegenerateInput(std::string(which) + " cloud has " + std::to_string(cloud.size()) +
                          " points, fewer than k = " + std::to_string(cfg.k));
  }
}

RegistrationResult finish(const PointCloud& source, const PointCloud& target,
                          const PreparedCloud& ps, const PreparedCloud& pt,
                          std::span<const std::size_t> si, std::span<const std::size_t> ti,
                          const SolverConfig& cfg, RegistrationResult result) {
  auto t0 = Clock::now();
  const auto acc =
      accumulate_full_connection(source, target, ps.descriptors, pt.descriptors, si, ti, cfg);
  result.timing.accumulate_ms = elapsed_ms(t0);
  t0 = Clock::now();
  const auto sol = solve_weighted_closed_form(acc);
  result.timing.solve_ms = elapsed_ms(t0);

  result.transform = sol.transform;
  result.weight_sum = acc.weight_sum;
  result.pair_count = acc.pair_count;
  result.singular_values = sol.svd.singular_values;
  result.reflection_corrected = sol.reflection_corrected;
  result.ill_conditioned = sol.ill_conditioned;
  return result;
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

double total_of(const StageTimings& t) {
  return t.normals_ms + t.features_ms + t.keypoints_ms + t.accumulate_ms + t.solve_ms;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidArgument("beta must be positive");
  if (k < 3) throw InvalidArgument("k must be at least 3");
  if (!(weight_floor >= 0.0) || weight_floor > 1.0) {
    throw InvalidArgument("weight floor must be in [0, 1]");
  }
}

double pair_weight(const Descriptor& f_p, const Descriptor& f_q, double beta) {
  return std::exp(-(f_p - f_q).squaredNorm() / beta);
}

PairAccumulatord accumulate_full_connection(const PointCloud& source, const PointCloud& target,
                                            const DescriptorSet& f_source,
                                            const DescriptorSet& f_target,
                                            std::span<const std::size_t> source_indices,
                                            std::span<const std::size_t> target_indices,
                                            const SolverConfig& cfg) {
  cfg.validate();
  if (f_source.size() != source.size() || f_target.size() != target.size()) {
    throw InvalidArgument("accumulate_full_connection: descriptor count does not match cloud");
  }
  if (source_indices.empty() || target_indices.empty()) {
    throw InvalidArgument("accumulate_full_connection: empty point set");
  }
  for (auto i : source_indices) {
    if (i >= source.size()) throw InvalidArgument("accumulate_full_connection: bad source index");
  }
  for (auto j : target_indices) {
    if (j >= target.size()) throw InvalidArgument("accumulate_full_connection: bad target index");
  }

  const double inv_beta = 1.0 / cfg.beta;
  const std::size_t blocks = (source_indices.size() + kAccumulateBlock - 1) / kAccumulateBlock;
  std::vector<PairAccumulatord> partial(blocks);
  run_tasks(blocks, cfg.execution, [&](std::size_t b) {
    PairAccumulatord& acc = partial[b];
    const std::size_t end = std::min(source_indices.size(), (b + 1) * kAccumulateBlock);
    for (std::size_t a = b * kAccumulateBlock; a < end; ++a) {
      const std::size_t i = source_indices[a];
      const Descriptor& fi = f_source[i];
      double s_w = 0.0;
      Eigen::Vector3d s_q = Eigen::Vector3d::Zero();
      for (std::size_t j : target_indices) {
        const double w =
            std::max(std::exp(-(fi - f_target[j]).squaredNorm() * inv_beta), cfg.weight_floor);
        s_w += w;
        s_q += w * target[j];
      }
      acc.add_fan(source[i], s_w, s_q, target_indices.size());
    }
  });

  PairAccumulatord total;
  for (const auto& acc : partial) total.merge(acc);
  if (!(total.weight_sum > 0.0)) {
    throw DegenerateInput(
        "full-connection weights are all zero; raise beta or set a weight floor");
  }
  return total;
}

PairAccumulatord accumulate_full_connection(const PointCloud& source, const PointCloud& target,
                                            const DescriptorSet& f_source,
                                            const DescriptorSet& f_target,
                                            const SolverConfig& cfg) {
  const auto si = iota_indices(source.size());
  const auto ti = iota_indices(target.size());
  return accumulate_full_connection(source, target, f_source, f_target, si, ti, cfg);
}

RegistrationResult register_cf(const PointCloud& source, const PointCloud& target,
                               const SolverConfig& cfg) {
  cfg.validate();
  check_cloud_size(source, cfg, "source");
  check_cloud_size(target, cfg, "target");
  RegistrationResult result;
  result.algorithm = "cf";
  const auto ps = prepare(source, cfg, result.timing);
  const auto pt = prepare(target, cfg, result.timing);
  const auto si = iota_indices(source.size());
  const auto ti = iota_indices(target.size());
  result = finish(source, target, ps, pt, si, ti, cfg, std::move(result));
  result.timing.total_ms = total_of(result.timing);
  return result;
}

namespace {

void check_keypoints(const KeypointSet& kp, const PointCloud& cloud, const char* which) {
  if (kp.indices.size() < 3) {
    throw DegenerateInput(std::string("CFK: ") + which + " cloud has " +
                          std::to_string(kp.indices.size()) +
                          " keypoints (need 3); fall back to cf or lower the threshold");
  }
  for (auto i : kp.indices) {
    if (i >= cloud.size()) throw InvalidArgument("CFK: keypoint index out of range");
  }
}

}  // namespace

RegistrationResult register_cfk(const PointCloud& source, const PointCloud& target,
                                const KeypointSet& source_keypoints,
                                const KeypointSet& target_keypoints, const SolverConfig& cfg) {
  cfg.validate();
  check_cloud_size(source, cfg, "source");
  check_cloud_size(target, cfg, "target");
  check_keypoints(source_keypoints, source, "source");
  check_keypoints(target_keypoints, target, "target");
  RegistrationResult result;
  result.algorithm = "cfk";
  const auto ps = prepare(source, cfg, result.timing);
  const auto pt = prepare(target, cfg, result.timing);
  result.keypoints_source = source_keypoints.indices.size();
  result.keypoints_target = target_keypoints.indices.size();
  result = finish(source, target, ps, pt, source_keypoints.indices, target_keypoints.indices, cfg,
                  std::move(result));
  result.timing.total_ms = total_of(result.timing);
  return result;
}

RegistrationResult register_cfk(const PointCloud& source, const PointCloud& target,
                                const SolverConfig& cfg) {
  cfg.validate();
  check_cloud_size(source, cfg, "source");
  check_cloud_size(target, cfg, "target");
  RegistrationResult result;
  result.algorithm = "cfk";
  const auto ps = prepare(source, cfg, result.timing);
  const auto pt = prepare(target, cfg, result.timing);

  auto t0 = Clock::now();
  const auto kp_s = detect_keypoints(source, ps.normals, cfg.keypoints);
  const auto kp_t = detect_keypoints(target, pt.normals, cfg.keypoints);
  result.timing.keypoints_ms = elapsed_ms(t0);
  check_keypoints(kp_s, source, "source");
  check_keypoints(kp_t, target, "target");
  result.keypoints_source = kp_s.indices.size();
  result.keypoints_target = kp_t.indices.size();

  result = finish(source, target, ps, pt, kp_s.indices, kp_t.indices, cfg, std::move(result));
  result.timing.total_ms = total_of(result.timing);
  return result;
}

}  // namespace cfreg
