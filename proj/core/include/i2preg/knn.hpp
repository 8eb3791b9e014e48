#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <queue>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace i2preg {

/// A neighbor returned by a k-NN query, ordered by (squared distance, index).
struct Neighbor {
  double dist2 = 0.0;
  int index = -1;

  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
  }
  friend bool operator==(const Neighbor& a, const Neighbor& b) = default;
};

/// Exact k-d tree over a fixed point set. Queries are deterministic: equal
/// distances are resolved in favor of the smaller point index.
template <int Dim>
class KdTree {
 public:
  using Point = Eigen::Matrix<double, Dim, 1>;

  KdTree() = default;
  explicit KdTree(std::span<const Point> points) : points_(points.begin(), points.end()) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    if (!points_.empty()) root_ = build(0, points_.size());
  }

  [[nodiscard]] std::size_t size() const { return points_.size(); }
  [[nodiscard]] const Point& point(int i) const { return points_[static_cast<std::size_t>(i)]; }

  /// The k nearest points to `query`, closest first. `exclude` (if >= 0) is
  /// skipped, which is how a point's own entry is left out of its neighborhood.
  [[nodiscard]] std::vector<Neighbor> knn(const Point& query, std::size_t k, int exclude = -1) const {
    std::vector<Neighbor> heap;
    if (k == 0 || root_ < 0) return heap;
    heap.reserve(k + 1);
    search(root_, query, k, exclude, heap);
    std::sort_heap(heap.begin(), heap.end());
    return heap;
  }

  /// Neighbors of the stored point `i`, excluding `i` itself.
  [[nodiscard]] std::vector<Neighbor> knn_of(int i, std::size_t k) const {
    return knn(points_[static_cast<std::size_t>(i)], k, i);
  }

 private:
  static constexpr std::size_t kLeafSize = 8;

  struct Node {
    std::size_t begin = 0;
    std::size_t end = 0;
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    int left = -1;
    int right = -1;
  };

  int build(std::size_t begin, std::size_t end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= kLeafSize) return id;

    Point lo = points_[static_cast<std::size_t>(order_[begin])];
    Point hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_[static_cast<std::size_t>(order_[i])]);
      hi = hi.cwiseMax(points_[static_cast<std::size_t>(order_[i])]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] == lo[axis]) return id;  // all coincident; keep as a leaf

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end), [&](int a, int b) {
                       return points_[static_cast<std::size_t>(a)][axis] < points_[static_cast<std::size_t>(b)][axis];
                     });
    const double split = points_[static_cast<std::size_t>(order_[mid])][axis];
    const int left = build(begin, mid);
    const int right = build(mid, end);
    Node& node = nodes_[static_cast<std::size_t>(id)];
    node.axis = axis;
    node.split = split;
    node.left = left;
    node.right = right;
    return id;
  }

  void offer(std::vector<Neighbor>& heap, std::size_t k, Neighbor candidate) const {
    if (heap.size() < k) {
      heap.push_back(candidate);
      std::push_heap(heap.begin(), heap.end());
    } else if (candidate < heap.front()) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = candidate;
      std::push_heap(heap.begin(), heap.end());
    }
  }

  void search(int node_id, const Point& q, std::size_t k, int exclude, std::vector<Neighbor>& heap) const {
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const int idx = order_[i];
        if (idx == exclude) continue;
        offer(heap, k, Neighbor{(points_[static_cast<std::size_t>(idx)] - q).squaredNorm(), idx});
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    search(near, q, k, exclude, heap);
    // Only prune on strict inequality so equal-distance points with a smaller
    // index on the far side still get a chance to win the tie.
    if (heap.size() < k || diff * diff <= heap.front().dist2) search(far, q, k, exclude, heap);
  }

  std::vector<Point> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

using KdTree2 = KdTree<2>;
using KdTree3 = KdTree<3>;

}  // namespace i2preg
