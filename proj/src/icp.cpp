#include <chrono>
#include <cmath>
#include <limits>

#include "cfreg/error.hpp"
#include "cfreg/kdtree.hpp"
#include "cfreg/registration.hpp"

namespace cfreg {

void IcpParams::validate() const {
  if (!(max_correspondence_distance > 0.0) || max_iterations == 0 ||
      !(transformation_epsilon > 0.0) || !(euclidean_fitness_epsilon > 0.0)) {
    throw InvalidArgument("ICP parameters must all be positive");
  }
}

RegistrationResult register_icp(const PointCloud& source, const PointCloud& target,
                                const IcpParams& params, const RigidTransformd& init) {
  params.validate();
  if (source.empty() || target.empty()) throw InvalidArgument("ICP: empty cloud");
  const auto start = std::chrono::steady_clock::now();

  RegistrationResult result;
  result.algorithm = "icp";
  result.termination = "max_iterations";
  const KdTree3d tree(target);
  const double gate2 = params.max_correspondence_distance * params.max_correspondence_distance;
  constexpr std::size_t kNoMatch = std::numeric_limits<std::size_t>::max();

  RigidTransformd current = init;
  std::vector<std::size_t> match(source.size());
  std::vector<double> dist2(source.size());
  double prev_mse = std::numeric_limits<double>::infinity();

  for (std::size_t iter = 1; iter <= params.max_iterations; ++iter) {
    parallel_for(source.size(), params.execution, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const auto nn = tree.knn(current(source[i]), 1).front();
        match[i] = nn.squared_distance <= gate2 ? nn.index : kNoMatch;
        dist2[i] = nn.squared_distance;
      }
    });

    PairAccumulatord acc;
    double sum_d2 = 0.0;
    for (std::size_t i = 0; i < source.size(); ++i) {
      if (match[i] == kNoMatch) continue;
      acc.add(source[i], target[match[i]], 1.0);
      sum_d2 += dist2[i];
    }
    if (acc.pair_count == 0) {
      result.termination = "no_correspondences";
      break;
    }
    const double mse = sum_d2 / static_cast<double>(acc.pair_count);
    result.mse_history.push_back(mse);
    result.fitness = mse;

    const auto sol = solve_weighted_closed_form(acc);
    const double delta = (sol.transform.matrix() - current.matrix()).cwiseAbs().maxCoeff();
    current = sol.transform;
    result.iterations = iter;
    result.pair_count = acc.pair_count;
    result.weight_sum = acc.weight_sum;
    result.singular_values = sol.svd.singular_values;
    result.reflection_corrected = sol.reflection_corrected;
    result.ill_conditioned = sol.ill_conditioned;

    if (mse <= 1e-12) {
      result.termination = "absolute_mse";
      break;
    }
    if (delta < params.transformation_epsilon) {
      result.termination = "transformation_epsilon";
      break;
    }
    if (std::abs(mse - prev_mse) / prev_mse < params.euclidean_fitness_epsilon) {
      result.termination = "euclidean_fitness_epsilon";
      break;
    }
    prev_mse = mse;
  }

  result.transform = current;
  result.timing.total_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  result.timing.solve_ms = result.timing.total_ms;
  return result;
}

}  // namespace cfreg
