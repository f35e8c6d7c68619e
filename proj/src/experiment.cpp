#include "cfreg/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "cfreg/error.hpp"
#include "cfreg/io.hpp"
#include "cfreg/random.hpp"

#ifndef CFREG_DEFAULT_DATA_DIR
#define CFREG_DEFAULT_DATA_DIR "data"
#endif

namespace cfreg {

// Stream ids for derive_seed(trial_seed, stream).
namespace stream {
constexpr std::uint64_t kSubsample = 1;
constexpr std::uint64_t kSubsampleTarget = 2;
constexpr std::uint64_t kRotation = 3;
constexpr std::uint64_t kOutliers = 4;
constexpr std::uint64_t kNoise = 100;  // + sigma index
constexpr std::uint64_t kFixedRotation = 0xF1C5ED;
}  // namespace stream

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::cf: return "cf";
    case Algorithm::cfk: return "cfk";
    case Algorithm::icp: return "icp";
  }
  return "?";
}

std::string_view to_string(RotationMode m) {
  return m == RotationMode::small_centered ? "small-centered" : "large-origin";
}

std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::noise: return "noise";
    case ExperimentKind::outliers: return "outliers";
    case ExperimentKind::accuracy: return "accuracy";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view s) {
  if (s == "cf") return Algorithm::cf;
  if (s == "cfk") return Algorithm::cfk;
  if (s == "icp") return Algorithm::icp;
  throw InvalidArgument("unknown algorithm '" + std::string(s) + "'");
}

RotationMode parse_rotation_mode(std::string_view s) {
  if (s == "small-centered" || s == "small") return RotationMode::small_centered;
  if (s == "large-origin" || s == "large") return RotationMode::large_origin;
  throw InvalidArgument("unknown rotation mode '" + std::string(s) + "'");
}

ExperimentKind parse_experiment_kind(std::string_view s) {
  if (s == "noise") return ExperimentKind::noise;
  if (s == "outliers") return ExperimentKind::outliers;
  if (s == "accuracy") return ExperimentKind::accuracy;
  throw InvalidArgument("unknown experiment '" + std::string(s) + "'");
}

void ExperimentConfig::validate() const {
  solver.validate();
  icp.validate();
  if (trials == 0) throw InvalidArgument("trial count must be at least 1");
  if (sample_size < solver.k) throw InvalidArgument("sample size must be at least k");
  if (algorithms.empty()) throw InvalidArgument("no algorithm selected");
  if (kind == ExperimentKind::noise && sigmas.empty()) throw InvalidArgument("no noise level");
  for (double s : sigmas) {
    if (!(s >= 0.0)) throw InvalidArgument("noise sigma must be nonnegative");
  }
  if (!(outlier_radius >= 0.0)) throw InvalidArgument("outlier radius must be nonnegative");
}

Subsample subsample(const PointCloud& cloud, std::size_t n, std::uint64_t seed) {
  if (n > cloud.size()) {
    throw InvalidArgument("subsample: requested " + std::to_string(n) + " of " +
                          std::to_string(cloud.size()) + " points");
  }
  // partial Fisher-Yates over an index permutation
  std::vector<std::size_t> perm(cloud.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Random rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + rng.below(cloud.size() - i);
    std::swap(perm[i], perm[j]);
  }
  Subsample out;
  out.indices.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n));
  std::sort(out.indices.begin(), out.indices.end());
  out.points.reserve(n);
  for (auto i : out.indices) out.points.push_back(cloud[i]);
  return out;
}

RigidTransformd make_transform(RotationMode mode, const PointCloud& cloud,
                               const Eigen::Vector3d& rotation_vector) {
  RigidTransformd t;
  t.rotation = axis_angle_to_rotation(rotation_vector);
  if (mode == RotationMode::small_centered) {
    const Point3 c = centroid(cloud);
    t.translation = c - t.rotation * c;
  }
  return t;
}

RigidTransformd make_transform(RotationMode mode, const PointCloud& cloud, std::uint64_t seed) {
  const auto magnitude =
      mode == RotationMode::small_centered ? RotationMagnitude::small : RotationMagnitude::large;
  return make_transform(mode, cloud, sample_rotation_vector(magnitude, seed));
}

PointCloud add_gaussian_noise(const PointCloud& cloud, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw InvalidArgument("noise sigma must be nonnegative");
  PointCloud out = cloud;
  if (sigma == 0.0) return out;
  Random rng(seed);
  for (auto& p : out) {
    for (int i = 0; i < 3; ++i) p(i) += sigma * rng.normal();
  }
  return out;
}

PointCloud add_spherical_outliers(const PointCloud& cloud, std::size_t count, double radius,
                                  std::uint64_t seed, OutlierShape shape) {
  PointCloud out = cloud;
  if (count == 0) return out;
  const Point3 c = centroid(cloud);
  Random rng(seed);
  out.reserve(cloud.size() + count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(c + (shape == OutlierShape::ball ? rng.in_ball(radius) : rng.on_sphere(radius)));
  }
  return out;
}

double average_shift(const RigidTransformd& estimate, const RigidTransformd& truth,
                     std::span<const Point3> inliers) {
  if (inliers.empty()) throw InvalidArgument("average_shift: no inlier points");
  double sum = 0.0;
  for (const auto& p : inliers) sum += (estimate(p) - truth(p)).norm();
  return sum / static_cast<double>(inliers.size());
}

MetricSummary summarize(std::span<const double> values) {
  MetricSummary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records) {
  // groups in order of first appearance
  std::vector<std::pair<Algorithm, double>> keys;
  for (const auto& r : records) {
    const std::pair key{r.algorithm, r.sigma};
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  std::stable_sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) {
    return a.first < b.first || (a.first == b.first && a.second < b.second);
  });
  std::vector<SummaryRow> rows;
  for (const auto& [algo, sigma] : keys) {
    std::vector<double> shift, acc, terr, wall;
    for (const auto& r : records) {
      if (r.algorithm != algo || r.sigma != sigma) continue;
      shift.push_back(r.avg_shift);
      acc.push_back(r.rot_acc);
      terr.push_back(r.t_err);
      wall.push_back(r.wall_ms);
    }
    rows.push_back({algo, sigma, shift.size(), summarize(shift), summarize(acc), summarize(terr),
                    summarize(wall)});
  }
  return rows;
}

std::filesystem::path resolve_dataset(const ExperimentConfig& cfg) {
  std::filesystem::path dir = cfg.data_dir;
  if (dir.empty()) {
    const char* env = std::getenv("CFREG_DATA_DIR");
    dir = env && *env ? std::filesystem::path(env) : std::filesystem::path(CFREG_DEFAULT_DATA_DIR);
  }
  const bool named =
      cfg.dataset == "bunny" || cfg.dataset == "dragon" || cfg.dataset == "armadillo";
  const std::filesystem::path path =
      named ? dir / (cfg.dataset + ".ply") : std::filesystem::path(cfg.dataset);
  if (!std::filesystem::exists(path)) {
    std::string hint;
    if (cfg.dataset == "armadillo") {
      hint = "; place a sampled cloud of the Stanford model "
             "(http://graphics.stanford.edu/data/3Dscanrep/) there";
    } else if (named) {
      hint = "; regenerate it with scripts/make_datasets.py";
    }
    throw IoError("dataset '" + cfg.dataset + "' not found at " + path.string() + hint);
  }
  return path;
}

PointCloud load_dataset(const ExperimentConfig& cfg) { return read_cloud(resolve_dataset(cfg)); }

std::uint64_t trial_seed(std::uint64_t master, std::size_t trial) {
  return derive_seed(master, static_cast<std::uint64_t>(trial));
}

namespace {

struct TrialData {
  PointCloud source;   // PC1
  PointCloud target;   // PC2, inliers first
  RigidTransformd truth;
};

RegistrationResult run_algorithm(Algorithm algo, const TrialData& d, const ExperimentConfig& cfg,
                                 bool& fell_back) {
  SolverConfig solver = cfg.solver;
  IcpParams icp = cfg.icp;
  if (cfg.deterministic) {
    solver.execution = Execution::sequential;
    icp.execution = Execution::sequential;
  }
  fell_back = false;
  switch (algo) {
    case Algorithm::cf:
      return register_cf(d.source, d.target, solver);
    case Algorithm::cfk:
      try {
        return register_cfk(d.source, d.target, solver);
      } catch (const DegenerateInput&) {
        fell_back = true;
        return register_cf(d.source, d.target, solver);
      }
    case Algorithm::icp:
      return register_icp(d.source, d.target, icp);
  }
  throw InvalidArgument("unknown algorithm");
}

void run_trial(const ExperimentConfig& cfg, const TrialData& d, std::size_t trial,
               std::uint64_t seed, double sigma, std::size_t outliers,
               std::vector<TrialRecord>& out) {
  for (Algorithm algo : cfg.algorithms) {
    const auto start = std::chrono::steady_clock::now();
    bool fell_back = false;
    const auto result = run_algorithm(algo, d, cfg, fell_back);
    const double wall =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    TrialRecord r;
    r.kind = cfg.kind;
    r.dataset = cfg.dataset;
    r.algorithm = algo;
    r.trial = trial;
    r.seed = seed;
    r.sigma = sigma;
    r.outliers = outliers;
    r.rotation = cfg.rotation;
    r.truth = d.truth;
    r.estimate = result.transform;
    r.avg_shift = average_shift(result.transform, d.truth, d.source);
    r.rot_acc = rotation_accuracy(d.truth.rotation, result.transform.rotation);
    r.t_err = (result.transform.translation - d.truth.translation).norm();
    r.wall_ms = cfg.deterministic ? 0.0 : wall;
    r.fell_back = fell_back;
    out.push_back(std::move(r));
  }
}

ExperimentReport finish_report(const ExperimentConfig& cfg, std::vector<TrialRecord> records) {
  ExperimentReport report;
  report.config = cfg;
  report.records = std::move(records);
  report.summary = summarize(report.records);
  return report;
}

}  // namespace

ExperimentReport run_noise_experiment(const ExperimentConfig& cfg_in, const PointCloud& dataset) {
  ExperimentConfig cfg = cfg_in;
  cfg.kind = ExperimentKind::noise;
  cfg.validate();
  const auto magnitude = cfg.rotation == RotationMode::small_centered ? RotationMagnitude::small
                                                                      : RotationMagnitude::large;
  const Eigen::Vector3d fixed_rv =
      sample_rotation_vector(magnitude, derive_seed(cfg.seed, stream::kFixedRotation));

  std::vector<TrialRecord> records;
  for (std::size_t s = 0; s < cfg.sigmas.size(); ++s) {
    for (std::size_t i = 0; i < cfg.trials; ++i) {
      const std::uint64_t ts = trial_seed(cfg.seed, i);
      TrialData d;
      d.source = subsample(dataset, cfg.sample_size, derive_seed(ts, stream::kSubsample)).points;
      d.truth = cfg.fixed_rotation
                    ? make_transform(cfg.rotation, d.source, fixed_rv)
                    : make_transform(cfg.rotation, d.source, derive_seed(ts, stream::kRotation));
      d.target = add_gaussian_noise(transform_cloud(d.truth, d.source), cfg.sigmas[s],
                                    derive_seed(ts, stream::kNoise + s));
      run_trial(cfg, d, i, ts, cfg.sigmas[s], 0, records);
    }
  }
  return finish_report(cfg, std::move(records));
}

ExperimentReport run_outlier_experiment(const ExperimentConfig& cfg_in, const PointCloud& dataset) {
  ExperimentConfig cfg = cfg_in;
  cfg.kind = ExperimentKind::outliers;
  cfg.validate();
  std::vector<TrialRecord> records;
  for (std::size_t i = 0; i < cfg.trials; ++i) {
    const std::uint64_t ts = trial_seed(cfg.seed, i);
    TrialData d;
    d.source = subsample(dataset, cfg.sample_size, derive_seed(ts, stream::kSubsample)).points;
    d.truth = make_transform(cfg.rotation, d.source, derive_seed(ts, stream::kRotation));
    d.target = add_spherical_outliers(transform_cloud(d.truth, d.source), cfg.outlier_count,
                                      cfg.outlier_radius, derive_seed(ts, stream::kOutliers),
                                      cfg.outlier_shape);
    run_trial(cfg, d, i, ts, 0.0, cfg.outlier_count, records);
  }
  return finish_report(cfg, std::move(records));
}

ExperimentReport run_accuracy_experiment(const ExperimentConfig& cfg_in, const PointCloud& dataset) {
  ExperimentConfig cfg = cfg_in;
  cfg.kind = ExperimentKind::accuracy;
  cfg.validate();
  std::vector<TrialRecord> records;
  for (std::size_t i = 0; i < cfg.trials; ++i) {
    const std::uint64_t ts = trial_seed(cfg.seed, i);
    TrialData d;
    // reference and rotated model are sampled independently
    d.source = subsample(dataset, cfg.sample_size, derive_seed(ts, stream::kSubsample)).points;
    d.truth = make_transform(cfg.rotation, d.source, derive_seed(ts, stream::kRotation));
    const auto other =
        subsample(dataset, cfg.sample_size, derive_seed(ts, stream::kSubsampleTarget)).points;
    d.target = transform_cloud(d.truth, other);
    run_trial(cfg, d, i, ts, 0.0, 0, records);
  }
  return finish_report(cfg, std::move(records));
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const PointCloud dataset = load_dataset(cfg);
  switch (cfg.kind) {
    case ExperimentKind::noise: return run_noise_experiment(cfg, dataset);
    case ExperimentKind::outliers: return run_outlier_experiment(cfg, dataset);
    case ExperimentKind::accuracy: return run_accuracy_experiment(cfg, dataset);
  }
  throw InvalidArgument("unknown experiment");
}

void write_trials_csv(std::ostream& os, const std::vector<TrialRecord>& records) {
  os << "experiment,dataset,algorithm,trial,seed,sigma,outliers,rotation_mode,avg_shift,rot_acc,"
        "t_err,wall_ms\n";
  for (const auto& r : records) {
    os << to_string(r.kind) << ',' << r.dataset << ',' << to_string(r.algorithm) << ',' << r.trial
       << ',' << r.seed << ',' << format_double(r.sigma) << ',' << r.outliers << ','
       << to_string(r.rotation) << ',' << format_double(r.avg_shift) << ','
       << format_double(r.rot_acc) << ',' << format_double(r.t_err) << ','
       << format_double(r.wall_ms) << '\n';
  }
}

std::vector<TrialRecord> read_trials_csv(std::istream& is) {
  std::vector<TrialRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 12) {
      throw FormatError("trials csv: line " + std::to_string(line_no) + ": expected 12 fields");
    }
    try {
      TrialRecord r;
      r.kind = parse_experiment_kind(f[0]);
      r.dataset = f[1];
      r.algorithm = parse_algorithm(f[2]);
      r.trial = std::stoull(f[3]);
      r.seed = std::stoull(f[4]);
      r.sigma = std::stod(f[5]);
      r.outliers = std::stoull(f[6]);
      r.rotation = parse_rotation_mode(f[7]);
      r.avg_shift = std::stod(f[8]);
      r.rot_acc = std::stod(f[9]);
      r.t_err = std::stod(f[10]);
      r.wall_ms = std::stod(f[11]);
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw FormatError("trials csv: line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_summary_csv(std::ostream& os, ExperimentKind kind, std::string_view dataset,
                       const std::vector<SummaryRow>& rows) {
  os << "experiment,dataset,algorithm,sigma,n,avg_shift_mean,avg_shift_std,rot_acc_mean,"
        "rot_acc_std,t_err_mean,t_err_std,wall_ms_mean,wall_ms_std\n";
  for (const auto& r : rows) {
    os << to_string(kind) << ',' << dataset << ',' << to_string(r.algorithm) << ','
       << format_double(r.sigma) << ',' << r.count << ',' << format_double(r.avg_shift.mean) << ','
       << format_double(r.avg_shift.std) << ',' << format_double(r.rot_acc.mean) << ','
       << format_double(r.rot_acc.std) << ',' << format_double(r.t_err.mean) << ','
       << format_double(r.t_err.std) << ',' << format_double(r.wall_ms.mean) << ','
       << format_double(r.wall_ms.std) << '\n';
  }
}

}  // namespace cfreg
