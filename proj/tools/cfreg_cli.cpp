// cfreg: command-line front end for correspondence-free rigid registration.
//
// Exit codes: 0 success, 1 usage error, 2 I/O error, 3 degenerate input.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cfreg/error.hpp"
#include "cfreg/experiment.hpp"
#include "cfreg/features.hpp"
#include "cfreg/io.hpp"
#include "cfreg/registration.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kIo = 2, kDegenerate = 3 };

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw cfreg::IoError("cannot write " + path);
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw cfreg::IoError("error writing " + path);
}

struct SolverOptions {
  std::size_t k = 150;
  double beta = 100.0;
  double weight_floor = 0.0;
  double tau = 0.02;
  double nms = 0.0;
  std::size_t max_keypoints = 200;
  bool deterministic = false;

  void add_to(CLI::App* cmd, bool keypoints) {
    cmd->add_option("--k", k, "neighbors for normals and FPFH")->capture_default_str();
    cmd->add_option("--beta", beta, "feature-distance scale of the weights")->capture_default_str();
    cmd->add_option("--weight-floor", weight_floor, "lower bound on pair weights")
        ->capture_default_str();
    if (keypoints) {
      cmd->add_option("--tau", tau, "keypoint surface-variation threshold")->capture_default_str();
      cmd->add_option("--nms", nms, "keypoint suppression radius (<= 0: 4x median spacing)")
          ->capture_default_str();
      cmd->add_option("--max", max_keypoints, "maximum keypoints per cloud")->capture_default_str();
    }
    cmd->add_flag("--deterministic", deterministic, "sequential execution");
  }

  cfreg::SolverConfig config() const {
    cfreg::SolverConfig cfg;
    cfg.k = k;
    cfg.beta = beta;
    cfg.weight_floor = weight_floor;
    cfg.keypoints = {nms, tau, max_keypoints};
    cfg.execution = deterministic ? cfreg::Execution::sequential : cfreg::Execution::parallel;
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cfreg - one-step correspondence-free rigid point cloud registration"};
  app.require_subcommand(1);

  // register
  auto* reg = app.add_subcommand("register", "register a source cloud onto a target cloud");
  std::string reg_src, reg_dst, reg_algo = "cf", reg_out, reg_transformed, reg_diag;
  SolverOptions reg_opts;
  reg->add_option("src", reg_src, "source cloud (PLY or xyz)")->required();
  reg->add_option("dst", reg_dst, "target cloud (PLY or xyz)")->required();
  reg->add_option("--algo", reg_algo, "cf | cfk | icp")
      ->check(CLI::IsMember({"cf", "cfk", "icp"}))
      ->capture_default_str();
  reg->add_option("--out", reg_out, "write the 4x4 transform here instead of stdout");
  reg->add_option("--transformed", reg_transformed, "write the transformed source cloud");
  reg->add_option("--diagnostics", reg_diag, "write a JSON diagnostics document");
  reg_opts.add_to(reg, true);

  // features
  auto* feat = app.add_subcommand("features", "export normals and FPFH descriptors as CSV");
  std::string feat_src, feat_normals, feat_fpfh;
  std::size_t feat_k = 150;
  bool feat_det = false;
  feat->add_option("src", feat_src, "input cloud")->required();
  feat->add_option("--k", feat_k, "neighbors")->capture_default_str();
  feat->add_option("--normals-out", feat_normals, "normals CSV");
  feat->add_option("--fpfh-out", feat_fpfh, "FPFH CSV (stdout when no output is given)");
  feat->add_flag("--deterministic", feat_det, "sequential execution");

  // keypoints
  auto* kp = app.add_subcommand("keypoints", "export keypoint indices");
  std::string kp_src, kp_out;
  SolverOptions kp_opts;
  kp->add_option("src", kp_src, "input cloud")->required();
  kp->add_option("--out", kp_out, "index file (stdout by default)");
  kp->add_option("--k", kp_opts.k, "neighbors for normals")->capture_default_str();
  kp->add_option("--tau", kp_opts.tau, "surface-variation threshold")->capture_default_str();
  kp->add_option("--nms", kp_opts.nms, "suppression radius (<= 0: 4x median spacing)")
      ->capture_default_str();
  kp->add_option("--max", kp_opts.max_keypoints, "maximum keypoints")->capture_default_str();

  // experiment
  auto* exp = app.add_subcommand("experiment", "run a seeded robustness/accuracy study");
  std::string exp_kind, exp_dataset = "bunny", exp_data_dir, exp_csv, exp_summary, exp_plot;
  std::string exp_metric = "avg_shift", exp_rotation = "large", exp_shape = "ball";
  std::vector<std::string> exp_algos = {"cf", "cfk", "icp"};
  std::vector<double> exp_sigmas;
  std::size_t exp_trials = 0, exp_outliers = 100, exp_sample = 500;
  std::uint64_t exp_seed = 1;
  double exp_radius = 0.2;
  bool exp_fixed = false;
  SolverOptions exp_opts;
  exp->add_option("kind", exp_kind, "noise | outliers | accuracy")
      ->required()
      ->check(CLI::IsMember({"noise", "outliers", "accuracy"}));
  exp->add_option("--dataset", exp_dataset, "bunny | dragon | armadillo | path")
      ->capture_default_str();
  exp->add_option("--data-dir", exp_data_dir, "directory holding <dataset>.ply");
  exp->add_option("--trials", exp_trials,
                  "trials (default: 30 per noise level, 100 for outliers and accuracy)");
  exp->add_option("--seed", exp_seed, "master seed")->capture_default_str();
  exp->add_option("--csv", exp_csv, "per-trial CSV (stdout by default)");
  exp->add_option("--summary", exp_summary, "summary CSV (mean and std per algorithm)");
  exp->add_option("--plot", exp_plot, "SVG plot of the summary");
  exp->add_option("--metric", exp_metric, "plotted metric: avg_shift | rot_acc | t_err | wall_ms")
      ->check(CLI::IsMember({"avg_shift", "rot_acc", "t_err", "wall_ms"}))
      ->capture_default_str();
  exp->add_option("--algos", exp_algos, "algorithms")->delimiter(',')->capture_default_str();
  exp->add_option("--rotation", exp_rotation, "small (about the centroid) | large (about the origin)")
      ->check(CLI::IsMember({"small", "large", "small-centered", "large-origin"}))
      ->capture_default_str();
  exp->add_option("--sigmas", exp_sigmas, "noise levels (noise study)")->delimiter(',');
  exp->add_option("--outliers", exp_outliers, "outlier count")->capture_default_str();
  exp->add_option("--radius", exp_radius, "outlier radius")->capture_default_str();
  exp->add_option("--outlier-shape", exp_shape, "ball | sphere")
      ->check(CLI::IsMember({"ball", "sphere"}))
      ->capture_default_str();
  exp->add_option("--sample-size", exp_sample, "points per cloud")->capture_default_str();
  exp->add_flag("--fixed-rotation", exp_fixed, "noise study: one rotation for every trial");
  exp_opts.add_to(exp, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*reg) {
      const auto source = cfreg::read_cloud(reg_src);
      const auto target = cfreg::read_cloud(reg_dst);
      const auto cfg = reg_opts.config();
      cfreg::RegistrationResult result;
      if (reg_algo == "cf") {
        result = cfreg::register_cf(source, target, cfg);
      } else if (reg_algo == "cfk") {
        result = cfreg::register_cfk(source, target, cfg);
      } else {
        cfreg::IcpParams icp;
        icp.execution = cfg.execution;
        result = cfreg::register_icp(source, target, icp);
      }
      if (reg_out.empty()) {
        std::cout << cfreg::format_transform(result.transform);
      } else {
        cfreg::write_transform(result.transform, reg_out);
      }
      if (!reg_transformed.empty()) {
        cfreg::write_cloud(cfreg::transform_cloud(result.transform, source), reg_transformed,
                           cfreg::format_from_extension(reg_transformed));
      }
      if (!reg_diag.empty()) write_text(reg_diag, cfreg::diagnostics_json(result));
      if (result.ill_conditioned) std::cerr << "warning: ill-conditioned cross-covariance\n";
      std::cerr << reg_algo << ": " << result.timing.total_ms << " ms\n";
    } else if (*feat) {
      const auto cloud = cfreg::read_cloud(feat_src);
      if (feat_k > cloud.size()) {
        throw cfreg::DegenerateInput("cloud has fewer points than k = " + std::to_string(feat_k));
      }
      const auto mode = feat_det ? cfreg::Execution::sequential : cfreg::Execution::parallel;
      const auto graph = cfreg::build_neighbor_graph(cloud, feat_k, mode);
      const auto normals = cfreg::estimate_normals(cloud, graph, mode);
      if (!feat_normals.empty()) {
        auto out = open_out(feat_normals);
        cfreg::write_normals_csv(out, cloud, normals);
      }
      if (!feat_fpfh.empty() || feat_normals.empty()) {
        const auto fpfh = cfreg::compute_fpfh(cloud, normals, graph, mode);
        if (feat_fpfh.empty()) {
          cfreg::write_descriptors_csv(std::cout, fpfh);
        } else {
          auto out = open_out(feat_fpfh);
          cfreg::write_descriptors_csv(out, fpfh);
        }
      }
    } else if (*kp) {
      const auto cloud = cfreg::read_cloud(kp_src);
      if (kp_opts.k > cloud.size()) {
        throw cfreg::DegenerateInput("cloud has fewer points than k = " +
                                     std::to_string(kp_opts.k));
      }
      const auto normals = cfreg::estimate_normals(cloud, kp_opts.k);
      const auto keypoints = cfreg::detect_keypoints(cloud, normals, kp_opts.config().keypoints);
      std::ostringstream ss;
      for (auto i : keypoints.indices) ss << i << '\n';
      if (kp_out.empty()) {
        std::cout << ss.str();
      } else {
        write_text(kp_out, ss.str());
      }
      std::cerr << keypoints.indices.size() << " keypoints (nms radius "
                << keypoints.params.nms_radius << ")\n";
      if (keypoints.empty()) std::cerr << "warning: no point passed the threshold\n";
    } else if (*exp) {
      cfreg::ExperimentConfig cfg;
      cfg.kind = cfreg::parse_experiment_kind(exp_kind);
      cfg.dataset = exp_dataset;
      cfg.data_dir = exp_data_dir;
      cfg.sample_size = exp_sample;
      cfg.rotation = cfreg::parse_rotation_mode(exp_rotation);
      if (!exp_sigmas.empty()) cfg.sigmas = exp_sigmas;
      cfg.outlier_count = exp_outliers;
      cfg.outlier_radius = exp_radius;
      cfg.outlier_shape = exp_shape == "ball" ? cfreg::OutlierShape::ball
                                              : cfreg::OutlierShape::sphere;
      cfg.trials = exp_trials > 0 ? exp_trials : (cfg.kind == cfreg::ExperimentKind::noise ? 30 : 100);
      cfg.seed = exp_seed;
      cfg.algorithms.clear();
      for (const auto& a : exp_algos) cfg.algorithms.push_back(cfreg::parse_algorithm(a));
      cfg.fixed_rotation = exp_fixed;
      cfg.deterministic = exp_opts.deterministic;
      cfg.solver = exp_opts.config();

      const auto report = cfreg::run_experiment(cfg);
      if (exp_csv.empty()) {
        cfreg::write_trials_csv(std::cout, report.records);
      } else {
        auto out = open_out(exp_csv);
        cfreg::write_trials_csv(out, report.records);
      }
      if (!exp_summary.empty()) {
        auto out = open_out(exp_summary);
        cfreg::write_summary_csv(out, cfg.kind, cfg.dataset, report.summary);
      }
      if (!exp_plot.empty()) write_text(exp_plot, cfreg::render_svg(report, exp_metric));
      for (const auto& row : report.summary) {
        std::fprintf(stderr, "%-4s sigma=%-6g n=%-4zu avg_shift %.4g +- %.4g  rot_acc %.4g +- %.4g\n",
                     std::string(cfreg::to_string(row.algorithm)).c_str(), row.sigma, row.count,
                     row.avg_shift.mean, row.avg_shift.std, row.rot_acc.mean, row.rot_acc.std);
      }
    }
  } catch (const cfreg::DegenerateInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDegenerate;
  } catch (const cfreg::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const cfreg::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kOk;
}
