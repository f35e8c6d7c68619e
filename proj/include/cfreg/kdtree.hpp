#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <queue>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "cfreg/error.hpp"
#include "cfreg/geometry.hpp"

namespace cfreg {

/// Exact k-nearest-neighbor index over an immutable copy of a point set.
///
/// Nodes split at the median of the axis with the widest extent. Queries
/// return original indices ordered by (squared distance, index), so equal
/// distances resolve to the lower index and results are reproducible.
template <typename Scalar>
class KdTree3 {
 public:
  using Point = Vector3<Scalar>;

  struct Neighbor {
    std::size_t index;
    Scalar squared_distance;

    friend bool operator<(const Neighbor& a, const Neighbor& b) {
      return a.squared_distance < b.squared_distance ||
             (a.squared_distance == b.squared_distance && a.index < b.index);
    }
    friend bool operator==(const Neighbor&, const Neighbor&) = default;
  };

  explicit KdTree3(std::span<const Point> points, std::size_t leaf_size = 8)
      : points_(points.begin(), points.end()), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
    if (points_.empty()) throw InvalidArgument("KdTree3: cannot index an empty cloud");
    for (const auto& p : points_) {
      if (!p.allFinite()) throw InvalidArgument("KdTree3: cloud contains a non-finite point");
    }
    order_.resize(points_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
    build(0, order_.size());
  }

  explicit KdTree3(const std::vector<Point>& points, std::size_t leaf_size = 8)
      : KdTree3(std::span<const Point>(points), leaf_size) {}

  std::size_t size() const { return points_.size(); }
  const Point& point(std::size_t i) const { return points_[i]; }

  /// The k nearest indexed points to `query`, ascending. Requires 1 <= k <= size().
  std::vector<Neighbor> knn(const Point& query, std::size_t k) const {
    if (k == 0 || k > points_.size()) {
      throw InvalidArgument("KdTree3::knn: k must be in [1, size()]");
    }
    std::priority_queue<Neighbor> heap;  // max-heap: top is the current worst
    search(0, query, k, heap);
    std::vector<Neighbor> out(heap.size());
    for (std::size_t i = out.size(); i-- > 0;) {
      out[i] = heap.top();
      heap.pop();
    }
    return out;
  }

 private:
  struct Node {
    std::size_t begin = 0, end = 0;
    int axis = -1;  // -1 marks a leaf
    Scalar split = Scalar(0);
    std::size_t left = 0, right = 0;
  };

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({begin, end});
    if (end - begin <= leaf_size_) return id;

    Point lo = points_[order_[begin]], hi = lo;
    for (std::size_t i = begin + 1; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    Eigen::Index axis;
    (hi - lo).maxCoeff(&axis);
    const std::size_t mid = begin + (end - begin) / 2;
    const auto by_axis = [&](std::size_t a, std::size_t b) {
      const Scalar ca = points_[a](axis), cb = points_[b](axis);
      return ca < cb || (ca == cb && a < b);
    };
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, by_axis);

    nodes_[id].axis = static_cast<int>(axis);
    nodes_[id].split = points_[order_[mid]](axis);
    const std::size_t left = build(begin, mid);
    const std::size_t right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  void search(std::size_t id, const Point& q, std::size_t k, std::priority_queue<Neighbor>& heap) const {
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        const Neighbor cand{idx, (points_[idx] - q).squaredNorm()};
        if (heap.size() < k) {
          heap.push(cand);
        } else if (cand < heap.top()) {
          heap.pop();
          heap.push(cand);
        }
      }
      return;
    }
    const Scalar diff = q(node.axis) - node.split;
    const std::size_t near = diff < Scalar(0) ? node.left : node.right;
    const std::size_t far = diff < Scalar(0) ? node.right : node.left;
    search(near, q, k, heap);
    // Points beyond the plane are at least |diff| away; equality must still be
    // visited because a tie may carry a lower index.
    if (heap.size() < k || diff * diff <= heap.top().squared_distance) search(far, q, k, heap);
  }

  std::vector<Point> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_;
};

using KdTree3d = KdTree3<double>;

}  // namespace cfreg
