#include <doctest.h>

#include <cmath>
#include <numeric>

#include "cfreg/registration.hpp"
#include "support.hpp"

using namespace cfreg;

namespace {

struct Prepared {
  PointCloud cloud;
  DescriptorSet features;
};

Prepared prepare(const PointCloud& c, std::size_t k) {
  const auto g = build_neighbor_graph(c, k);
  return {c, compute_fpfh(c, estimate_normals(c, g), g)};
}

SolverConfig small_config() {
  SolverConfig cfg;
  cfg.k = 30;
  return cfg;
}

const PointCloud& bunny_sample() {
  static const PointCloud s = subsample(test::bunny(), 300, 17).points;
  return s;
}

}  // namespace

TEST_CASE("pair weight values") {
  Descriptor a = Descriptor::Zero(), b = Descriptor::Zero();
  CHECK(pair_weight(a, b, 100.0) == 1.0);
  b(0) = 10.0;  // |f_p - f_q|^2 = 100
  CHECK(pair_weight(a, b, 100.0) == doctest::Approx(0.36787944117144233));
  b(0) = std::sqrt(1000.0);
  CHECK(pair_weight(a, b, 100.0) == doctest::Approx(4.5399929762484854e-05));
  CHECK(pair_weight(a, b, 100.0) == pair_weight(b, a, 100.0));
}

TEST_CASE("accumulator matches a naive double loop") {
  const auto p = prepare(test::random_cloud(60, 1), 15);
  const auto q = prepare(test::random_cloud(45, 2), 15);
  SolverConfig cfg;
  cfg.k = 15;
  const auto acc = accumulate_full_connection(p.cloud, q.cloud, p.features, q.features, cfg);
  PairAccumulatord naive;
  for (std::size_t i = 0; i < p.cloud.size(); ++i)
    for (std::size_t j = 0; j < q.cloud.size(); ++j)
      naive.add(p.cloud[i], q.cloud[j], pair_weight(p.features[i], q.features[j], cfg.beta));
  CHECK(acc.pair_count == 60 * 45);
  CHECK(acc.weight_sum == doctest::Approx(naive.weight_sum).epsilon(1e-12));
  CHECK((acc.source_sum - naive.source_sum).norm() < 1e-10 * naive.source_sum.norm());
  CHECK((acc.target_sum - naive.target_sum).norm() < 1e-10 * naive.target_sum.norm());
  CHECK((acc.cross_sum - naive.cross_sum).norm() < 1e-10 * naive.cross_sum.norm());

  SolverConfig floor = cfg;
  floor.weight_floor = 0.5;
  const auto f = accumulate_full_connection(p.cloud, q.cloud, p.features, q.features, floor);
  CHECK(f.weight_sum >= 0.5 * 60 * 45);
}

TEST_CASE("accumulation is independent of execution mode") {
  const auto p = prepare(test::random_cloud(150, 3), 20);
  const auto q = prepare(test::random_cloud(130, 4), 20);
  SolverConfig seq, par;
  seq.k = par.k = 20;
  seq.execution = Execution::sequential;
  par.execution = Execution::parallel;
  const auto a = accumulate_full_connection(p.cloud, q.cloud, p.features, q.features, seq);
  const auto b = accumulate_full_connection(p.cloud, q.cloud, p.features, q.features, par);
  CHECK(a.weight_sum == b.weight_sum);
  CHECK(a.cross_sum == b.cross_sum);
  CHECK(a.source_sum == b.source_sum);
  CHECK(a.target_sum == b.target_sum);
}

TEST_CASE("mismatched descriptor sets are rejected") {
  const auto p = prepare(test::random_cloud(40, 1), 10);
  const auto q = prepare(test::random_cloud(50, 2), 10);
  SolverConfig cfg;
  CHECK_THROWS_AS(accumulate_full_connection(p.cloud, q.cloud, q.features, p.features, cfg),
                  InvalidArgument);
}

TEST_CASE("self registration recovers the identity") {
  const auto r = register_cf(bunny_sample(), bunny_sample(), small_config());
  CHECK(rotation_accuracy<double>(Eigen::Matrix3d::Identity(), r.transform.rotation) < 1e-9);
  CHECK(r.transform.translation.norm() < 1e-9);
  CHECK(r.pair_count == 300 * 300);
  CHECK(r.algorithm == "cf");
}

TEST_CASE("a rigidly moved copy is recovered exactly") {
  const auto truth = test::random_transform(7, 0.2);
  const auto moved = transform_cloud(truth, bunny_sample());
  const auto r = register_cf(bunny_sample(), moved, small_config());
  CHECK(rotation_accuracy<double>(truth.rotation, r.transform.rotation) < 1e-6);
  CHECK((r.transform.translation - truth.translation).norm() < 1e-6);
}

TEST_CASE("swapping the clouds inverts the estimate") {
  const auto a = subsample(test::bunny(), 250, 1).points;
  const auto b = transform_cloud(test::random_transform(3, 0.1), subsample(test::bunny(), 250, 2).points);
  const auto ab = register_cf(a, b, small_config());
  const auto ba = register_cf(b, a, small_config());
  // W is symmetric under the swap, so the optimum is exactly inverted
  CHECK(rotation_accuracy<double>(ab.transform.rotation, invert(ba.transform).rotation) < 1e-9);
  CHECK((ab.transform.translation - invert(ba.transform).translation).norm() < 1e-9);
}

TEST_CASE("scaling both clouds scales the translation only") {
  const auto a = subsample(test::bunny(), 250, 5).points;
  const auto b = transform_cloud(test::random_transform(9, 0.1), subsample(test::bunny(), 250, 6).points);
  const double s = 10.0;
  PointCloud as = a, bs = b;
  for (auto& p : as) p *= s;
  for (auto& p : bs) p *= s;
  const auto r1 = register_cf(a, b, small_config());
  const auto r2 = register_cf(as, bs, small_config());
  CHECK(rotation_accuracy<double>(r1.transform.rotation, r2.transform.rotation) < 1e-6);
  CHECK((r2.transform.translation - s * r1.transform.translation).norm() < 1e-6 * s);
}

TEST_CASE("rotating the target rotates the estimate") {
  const auto a = subsample(test::bunny(), 250, 11).points;
  const auto b = subsample(test::bunny(), 250, 12).points;
  const auto r0 = test::random_transform(13, 0.0).rotation;
  const RigidTransformd rot{r0, Eigen::Vector3d::Zero()};
  const auto base = register_cf(a, b, small_config());
  const auto turned = register_cf(a, transform_cloud(rot, b), small_config());
  CHECK(rotation_accuracy<double>((r0 * base.transform.rotation).eval(), turned.transform.rotation) <= 0.05);
}

TEST_CASE("CFK with every point as keypoint equals CF") {
  const auto a = subsample(test::bunny(), 200, 21).points;
  const auto b = transform_cloud(test::random_transform(4, 0.1), subsample(test::bunny(), 200, 22).points);
  KeypointSet all_a, all_b;
  all_a.indices.resize(a.size());
  all_b.indices.resize(b.size());
  std::iota(all_a.indices.begin(), all_a.indices.end(), 0);
  std::iota(all_b.indices.begin(), all_b.indices.end(), 0);
  const auto cf = register_cf(a, b, small_config());
  const auto cfk = register_cfk(a, b, all_a, all_b, small_config());
  CHECK(cf.transform.matrix() == cfk.transform.matrix());
  CHECK(cf.weight_sum == cfk.weight_sum);
  CHECK(cfk.keypoints_source == 200);
}

TEST_CASE("CFK on the bunny finds keypoints and aligns") {
  const auto a = subsample(test::bunny(), 500, 31).points;
  const auto truth = test::random_transform(5, 0.1);
  const auto b = transform_cloud(truth, a);
  const auto r = register_cfk(a, b);
  CHECK(r.keypoints_source >= 3);
  CHECK(r.keypoints_target >= 3);
  CHECK(r.pair_count == r.keypoints_source * r.keypoints_target);
  CHECK(rotation_accuracy<double>(truth.rotation, r.transform.rotation) < 0.5);
}

TEST_CASE("solver preconditions") {
  SolverConfig cfg;
  cfg.beta = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  const auto tiny = test::random_cloud(20, 1);
  CHECK_THROWS_AS(register_cf(tiny, tiny), DegenerateInput);
  // a plane has no keypoints
  const auto plane = test::plane_cloud(15, 0.01, 2);
  SolverConfig c;
  c.k = 20;
  CHECK_THROWS_AS(register_cfk(plane, plane, c), DegenerateInput);
}

TEST_CASE("sequential results are bit reproducible") {
  SolverConfig cfg = small_config();
  cfg.execution = Execution::sequential;
  const auto b = transform_cloud(test::random_transform(2, 0.1), bunny_sample());
  const auto r1 = register_cf(bunny_sample(), b, cfg);
  const auto r2 = register_cf(bunny_sample(), b, cfg);
  CHECK(r1.transform.matrix() == r2.transform.matrix());
  cfg.execution = Execution::parallel;
  CHECK(register_cf(bunny_sample(), b, cfg).transform.matrix() == r1.transform.matrix());
}
