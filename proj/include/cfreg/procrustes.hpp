#pragma once

#include <cstddef>

#include <Eigen/Core>

#include "cfreg/error.hpp"
#include "cfreg/geometry.hpp"
#include "cfreg/svd3.hpp"

namespace cfreg {

/// Sufficient statistics of a weighted pair set {(p_i, q_i, w_i)}:
///   weight_sum = sum w,  source_sum = sum w p,  target_sum = sum w q,
///   cross_sum = sum w p q^T.
/// The closed-form rigid solve needs nothing else, so neither the pair list
/// nor the diagonal weight matrix is ever stored.
template <typename Scalar>
struct PairAccumulator {
  Scalar weight_sum = Scalar(0);
  Vector3<Scalar> source_sum = Vector3<Scalar>::Zero();
  Vector3<Scalar> target_sum = Vector3<Scalar>::Zero();
  Matrix3<Scalar> cross_sum = Matrix3<Scalar>::Zero();
  std::size_t pair_count = 0;

  template <typename DerivedP, typename DerivedQ>
  void add(const Eigen::MatrixBase<DerivedP>& p, const Eigen::MatrixBase<DerivedQ>& q, Scalar w) {
    weight_sum += w;
    source_sum += w * p;
    target_sum += w * q;
    cross_sum += (w * p) * q.transpose();
    ++pair_count;
  }

  /// Adds the pairs (p, q_j, w_j) for all j at once, given s_w = sum_j w_j and
  /// s_q = sum_j w_j q_j. Algebraically identical to calling add() per pair.
  template <typename DerivedP, typename DerivedQ>
  void add_fan(const Eigen::MatrixBase<DerivedP>& p, Scalar s_w,
               const Eigen::MatrixBase<DerivedQ>& s_q, std::size_t count) {
    weight_sum += s_w;
    source_sum += s_w * p;
    target_sum += s_q;
    cross_sum += p * s_q.transpose();
    pair_count += count;
  }

  void merge(const PairAccumulator& other) {
    weight_sum += other.weight_sum;
    source_sum += other.source_sum;
    target_sum += other.target_sum;
    cross_sum += other.cross_sum;
    pair_count += other.pair_count;
  }
};

using PairAccumulatord = PairAccumulator<double>;

template <typename Scalar>
struct ClosedFormSolution {
  RigidTransform<Scalar> transform;
  SvdResult<Scalar> svd;
  Vector3<Scalar> source_mean = Vector3<Scalar>::Zero();
  Vector3<Scalar> target_mean = Vector3<Scalar>::Zero();
  bool reflection_corrected = false;
  bool ill_conditioned = false;
};

/// Ratio to the largest singular value below which a singular value counts as
/// zero. Two or more zero singular values (collinear or point-like data) leave
/// the rotation undetermined, and the solve is flagged ill-conditioned.
inline constexpr double kIllConditionedRatio = 1e-9;

/// Weighted closed-form rigid solve from accumulated statistics.
///
/// Weighted means p' = S_p / S_w and q' = S_q / S_w; cross-covariance
/// H = S_pq - S_w p' q'^T; H = U S V^T; R = V U^T with the last column of V
/// negated when det(V) det(U) < 0; t = q' - R p'.
/// Throws DegenerateInput when no weight has been accumulated.
template <typename Scalar>
ClosedFormSolution<Scalar> solve_weighted_closed_form(const PairAccumulator<Scalar>& acc) {
  if (!(acc.weight_sum > Scalar(0)) || !std::isfinite(acc.weight_sum)) {
    throw DegenerateInput("closed-form solve: total pair weight is zero");
  }
  ClosedFormSolution<Scalar> out;
  out.source_mean = acc.source_sum / acc.weight_sum;
  out.target_mean = acc.target_sum / acc.weight_sum;
  const Matrix3<Scalar> h =
      acc.cross_sum - acc.weight_sum * out.source_mean * out.target_mean.transpose();
  out.svd = svd3<Scalar>(h);

  Matrix3<Scalar> v = out.svd.v;
  if (out.svd.det_v * out.svd.det_u < Scalar(0)) {
    v.col(2) = -v.col(2);
    out.reflection_corrected = true;
  }
  out.transform.rotation = v * out.svd.u.transpose();
  out.transform.translation = out.target_mean - out.transform.rotation * out.source_mean;

  const Vector3<Scalar>& s = out.svd.singular_values;
  out.ill_conditioned = !(s(0) > Scalar(0)) || s(1) / s(0) < Scalar(kIllConditionedRatio);
  return out;
}

}  // namespace cfreg
