#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cfreg/geometry.hpp"
#include "cfreg/registration.hpp"

namespace cfreg {

enum class Algorithm { cf, cfk, icp };
enum class RotationMode { small_centered, large_origin };
enum class OutlierShape { ball, sphere };
enum class ExperimentKind { noise, outliers, accuracy };

std::string_view to_string(Algorithm a);
std::string_view to_string(RotationMode m);
std::string_view to_string(ExperimentKind k);
Algorithm parse_algorithm(std::string_view s);
RotationMode parse_rotation_mode(std::string_view s);
ExperimentKind parse_experiment_kind(std::string_view s);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::accuracy;
  std::string dataset = "bunny";  // bunny | dragon | armadillo | path to a cloud file
  std::filesystem::path data_dir;  // empty: CFREG_DATA_DIR, then the bundled data/
  std::size_t sample_size = 500;
  RotationMode rotation = RotationMode::large_origin;
  std::vector<double> sigmas = {0.002, 0.004, 0.006, 0.008, 0.01, 0.012, 0.014, 0.016, 0.018, 0.02};
  std::size_t outlier_count = 100;
  double outlier_radius = 0.2;
  OutlierShape outlier_shape = OutlierShape::ball;
  std::size_t trials = 20;
  std::uint64_t seed = 1;
  std::vector<Algorithm> algorithms = {Algorithm::cf, Algorithm::cfk, Algorithm::icp};
  bool fixed_rotation = false;  // noise study: one rotation shared by every trial
  bool deterministic = false;   // sequential execution, wall_ms recorded as 0
  SolverConfig solver;
  IcpParams icp;

  void validate() const;
};

struct TrialRecord {
  ExperimentKind kind = ExperimentKind::accuracy;
  std::string dataset;
  Algorithm algorithm = Algorithm::cf;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  double sigma = 0.0;
  std::size_t outliers = 0;
  RotationMode rotation = RotationMode::large_origin;
  RigidTransformd truth;
  RigidTransformd estimate;
  double avg_shift = 0.0;
  double rot_acc = 0.0;
  double t_err = 0.0;
  double wall_ms = 0.0;
  bool fell_back = false;  // CFK found too few keypoints and ran CF instead
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // unbiased (n - 1); 0 for a single sample
};

struct SummaryRow {
  Algorithm algorithm = Algorithm::cf;
  double sigma = 0.0;
  std::size_t count = 0;
  MetricSummary avg_shift, rot_acc, t_err, wall_ms;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<TrialRecord> records;
  std::vector<SummaryRow> summary;
};

struct Subsample {
  PointCloud points;
  std::vector<std::size_t> indices;  // ascending; points[i] == cloud[indices[i]]
};

/// n distinct points chosen uniformly without replacement, kept in cloud order.
Subsample subsample(const PointCloud& cloud, std::size_t n, std::uint64_t seed);

/// small-centered: rotation drawn from [-pi/8, pi/8)^3 applied about the
/// centroid c of `cloud` (t = c - R c). large-origin: rotation drawn from
/// [-pi/2, pi/2)^3 about the origin (t = 0).
RigidTransformd make_transform(RotationMode mode, const PointCloud& cloud, std::uint64_t seed);
RigidTransformd make_transform(RotationMode mode, const PointCloud& cloud,
                               const Eigen::Vector3d& rotation_vector);

/// Adds N(0, sigma^2) independently to every coordinate.
PointCloud add_gaussian_noise(const PointCloud& cloud, double sigma, std::uint64_t seed);

/// Appends `count` points drawn uniformly in the ball (or on the sphere) of
/// `radius` around the centroid of `cloud`. Existing points keep their indices.
PointCloud add_spherical_outliers(const PointCloud& cloud, std::size_t count, double radius,
                                  std::uint64_t seed, OutlierShape shape = OutlierShape::ball);

/// Mean of |T_est(p) - T_gt(p)| over the inlier points.
double average_shift(const RigidTransformd& estimate, const RigidTransformd& truth,
                     std::span<const Point3> inliers);

MetricSummary summarize(std::span<const double> values);
std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records);

/// Resolves a dataset name to a cloud file. Throws IoError with a download
/// hint when the file is missing.
std::filesystem::path resolve_dataset(const ExperimentConfig& cfg);
PointCloud load_dataset(const ExperimentConfig& cfg);

/// Seed of trial i, a pure function of (master, i).
std::uint64_t trial_seed(std::uint64_t master, std::size_t trial);

ExperimentReport run_noise_experiment(const ExperimentConfig& cfg, const PointCloud& dataset);
ExperimentReport run_outlier_experiment(const ExperimentConfig& cfg, const PointCloud& dataset);
ExperimentReport run_accuracy_experiment(const ExperimentConfig& cfg, const PointCloud& dataset);
/// Loads the configured dataset and dispatches on cfg.kind.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

/// Header: experiment,dataset,algorithm,trial,seed,sigma,outliers,
/// rotation_mode,avg_shift,rot_acc,t_err,wall_ms
void write_trials_csv(std::ostream& os, const std::vector<TrialRecord>& records);
std::vector<TrialRecord> read_trials_csv(std::istream& is);
void write_summary_csv(std::ostream& os, ExperimentKind kind, std::string_view dataset,
                       const std::vector<SummaryRow>& rows);

/// Mean +- std of a metric against sigma (noise study) or per algorithm.
std::string render_svg(const ExperimentReport& report, std::string_view metric = "avg_shift");

}  // namespace cfreg
