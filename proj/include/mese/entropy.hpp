// Copyright 2026 The MESE Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MESE_ENTROPY_HPP_
#define MESE_ENTROPY_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mese/error.hpp"
#include "mese/index_set.hpp"

namespace mese {

// N samples of dimension d, stored row-major.
class SampleBatch {
 public:
  SampleBatch() = default;
  SampleBatch(std::size_t rows, std::size_t dims)
      : rows_(rows), dims_(dims), data_(rows * dims, 0.0) {}
  SampleBatch(std::size_t rows, std::size_t dims, std::vector<double> data)
      : rows_(rows), dims_(dims), data_(std::move(data)) {
    if (data_.size() != rows_ * dims_) {
      throw ShapeError("sample data size does not match rows x dims");
    }
  }

  static SampleBatch from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    SampleBatch batch(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != batch.dims_) {
        throw ShapeError("row " + std::to_string(i) + " has inconsistent width");
      }
      std::copy(rows[i].begin(), rows[i].end(), batch.data_.begin() + i * batch.dims_);
    }
    return batch;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dims() const noexcept { return dims_; }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * dims_, dims_};
  }
  std::span<double> row(std::size_t i) { return {data_.data() + i * dims_, dims_}; }

  double at(std::size_t i, std::size_t j) const { return data_[i * dims_ + j]; }
  double& at(std::size_t i, std::size_t j) { return data_[i * dims_ + j]; }

  const std::vector<double>& data() const noexcept { return data_; }

  void append(std::span<const double> row) {
    if (rows_ == 0 && dims_ == 0) dims_ = row.size();
    if (row.size() != dims_) throw ShapeError("appended row has wrong width");
    data_.insert(data_.end(), row.begin(), row.end());
    ++rows_;
  }

  friend bool operator==(const SampleBatch&, const SampleBatch&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t dims_ = 0;
  std::vector<double> data_;
};

struct EntropyConfig {
  std::size_t k = 3;
  // Neighbor distances are floored here so duplicates stay finite under ln.
  double epsilon_floor = 1e-12;
};

// k nearest neighbors of every sample, excluding the sample itself. Rows are
// ordered by (distance, index); distances are raw Euclidean (not floored).
struct KnnResult {
  std::size_t rows = 0;
  std::size_t k = 0;
  std::vector<std::size_t> index;  // rows x k
  std::vector<double> distance;    // rows x k

  std::span<const std::size_t> neighbors(std::size_t i) const {
    return {index.data() + i * k, k};
  }
  std::span<const double> distances(std::size_t i) const {
    return {distance.data() + i * k, k};
  }
};

// Batches up to this size use the brute-force scan; larger ones the k-d tree.
inline constexpr std::size_t kBruteForceLimit = 512;

namespace detail {

// Accumulates dimensions in index order. Both k-NN backends and the k-d tree
// bounds use this same order, which keeps their results bit-identical.
inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double diff = a[j] - b[j];
    sum += diff * diff;
  }
  return sum;
}

struct Candidate {
  double d2;
  std::size_t index;
  friend bool operator<(const Candidate& a, const Candidate& b) {
    return a.d2 < b.d2 || (a.d2 == b.d2 && a.index < b.index);
  }
};

inline void check_knn_args(const SampleBatch& batch, std::size_t k) {
  if (k == 0) throw ArgumentError("k must be at least 1");
  if (batch.dims() == 0) throw ArgumentError("sample batch has zero dimensions");
  if (k >= batch.rows()) {
    throw ArgumentError("k = " + std::to_string(k) + " requires more than " +
                        std::to_string(k) + " samples, got " +
                        std::to_string(batch.rows()));
  }
}

inline void store_row(KnnResult& out, std::size_t i, std::span<const Candidate> sorted) {
  for (std::size_t m = 0; m < out.k; ++m) {
    out.index[i * out.k + m] = sorted[m].index;
    out.distance[i * out.k + m] = std::sqrt(sorted[m].d2);
  }
}

// Exact k-NN over a k-d tree with per-node bounding boxes. A node is pruned
// only when its box lower bound cannot beat the current k-th candidate under
// the (distance, index) order, so ties resolve exactly as in the brute scan.
class KdTree {
 public:
  explicit KdTree(const SampleBatch& batch, std::size_t leaf_size = 16)
      : batch_(batch), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
    order_.resize(batch.rows());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    if (!order_.empty()) build(0, order_.size());
  }

  void query(std::size_t self, std::size_t k, std::vector<Candidate>& heap) const {
    heap.clear();
    search(0, batch_.row(self), self, k, heap);
    std::sort_heap(heap.begin(), heap.end());
  }

 private:
  struct Node {
    std::size_t begin, end;
    std::size_t left = 0, right = 0;  // 0 means leaf (root is never a child)
    std::size_t min_index;
    std::size_t box;  // offset into lo_/hi_
  };

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t d = batch_.dims();
    const std::size_t id = nodes_.size();
    nodes_.push_back(Node{begin, end, 0, 0, 0, lo_.size()});
    lo_.resize(lo_.size() + d, std::numeric_limits<double>::infinity());
    hi_.resize(hi_.size() + d, -std::numeric_limits<double>::infinity());
    std::size_t min_index = std::numeric_limits<std::size_t>::max();
    for (std::size_t p = begin; p < end; ++p) {
      const auto row = batch_.row(order_[p]);
      for (std::size_t j = 0; j < d; ++j) {
        lo_[nodes_[id].box + j] = std::min(lo_[nodes_[id].box + j], row[j]);
        hi_[nodes_[id].box + j] = std::max(hi_[nodes_[id].box + j], row[j]);
      }
      min_index = std::min(min_index, order_[p]);
    }
    nodes_[id].min_index = min_index;
    if (end - begin <= leaf_size_) return id;

    std::size_t split_dim = 0;
    double widest = -1.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double spread = hi_[nodes_[id].box + j] - lo_[nodes_[id].box + j];
      if (spread > widest) {
        widest = spread;
        split_dim = j;
      }
    }
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) {
                       const double va = batch_.at(a, split_dim);
                       const double vb = batch_.at(b, split_dim);
                       return va < vb || (va == vb && a < b);
                     });
    const std::size_t left = build(begin, mid);
    const std::size_t right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  double box_lower_bound(const Node& node, std::span<const double> q) const {
    double sum = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) {
      const double lo = lo_[node.box + j];
      const double hi = hi_[node.box + j];
      double diff = 0.0;
      if (q[j] < lo) {
        diff = lo - q[j];
      } else if (q[j] > hi) {
        diff = q[j] - hi;
      }
      sum += diff * diff;
    }
    return sum;
  }

  static bool cannot_improve(double bound, std::size_t min_index,
                             const std::vector<Candidate>& heap, std::size_t k) {
    if (heap.size() < k) return false;
    const Candidate& worst = heap.front();
    return bound > worst.d2 || (bound == worst.d2 && min_index > worst.index);
  }

  void search(std::size_t id, std::span<const double> q, std::size_t self,
              std::size_t k, std::vector<Candidate>& heap) const {
    const Node& node = nodes_[id];
    if (cannot_improve(box_lower_bound(node, q), node.min_index, heap, k)) return;
    if (node.left == 0) {
      for (std::size_t p = node.begin; p < node.end; ++p) {
        const std::size_t j = order_[p];
        if (j == self) continue;
        const Candidate c{squared_distance(q, batch_.row(j)), j};
        if (heap.size() < k) {
          heap.push_back(c);
          std::push_heap(heap.begin(), heap.end());
        } else if (c < heap.front()) {
          std::pop_heap(heap.begin(), heap.end());
          heap.back() = c;
          std::push_heap(heap.begin(), heap.end());
        }
      }
      return;
    }
    const Node& l = nodes_[node.left];
    const Node& r = nodes_[node.right];
    const double bl = box_lower_bound(l, q);
    const double br = box_lower_bound(r, q);
    const bool left_first = bl < br || (bl == br && l.min_index < r.min_index);
    search(left_first ? node.left : node.right, q, self, k, heap);
    search(left_first ? node.right : node.left, q, self, k, heap);
  }

  const SampleBatch& batch_;
  std::size_t leaf_size_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  std::vector<double> lo_;
  std::vector<double> hi_;
};

}  // namespace detail

inline KnnResult knn_brute_force(const SampleBatch& batch, std::size_t k) {
  detail::check_knn_args(batch, k);
  const std::size_t n = batch.rows();
  KnnResult out{n, k, std::vector<std::size_t>(n * k), std::vector<double>(n * k)};
  std::vector<detail::Candidate> all;
  all.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    all.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) all.push_back({detail::squared_distance(batch.row(i), batch.row(j)), j});
    }
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
    detail::store_row(out, i, all);
  }
  return out;
}

inline KnnResult knn_kdtree(const SampleBatch& batch, std::size_t k) {
  detail::check_knn_args(batch, k);
  const std::size_t n = batch.rows();
  KnnResult out{n, k, std::vector<std::size_t>(n * k), std::vector<double>(n * k)};
  const detail::KdTree tree(batch);
  std::vector<detail::Candidate> heap;
  heap.reserve(k);
  for (std::size_t i = 0; i < n; ++i) {
    tree.query(i, k, heap);
    detail::store_row(out, i, heap);
  }
  return out;
}

inline KnnResult knn(const SampleBatch& batch, std::size_t k) {
  return batch.rows() <= kBruteForceLimit ? knn_brute_force(batch, k)
                                          : knn_kdtree(batch, k);
}

// Row i holds the k smallest distances from sample i to the others, ascending,
// each floored at cfg.epsilon_floor.
inline std::vector<double> knn_distances(const SampleBatch& batch,
                                         const EntropyConfig& cfg) {
  KnnResult result = knn(batch, cfg.k);
  for (double& d : result.distance) d = std::max(d, cfg.epsilon_floor);
  return std::move(result.distance);
}

namespace detail {

// Summing sorted terms makes the total independent of sample order.
inline double order_free_sum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double sum = 0.0;
  for (double t : terms) sum += t;
  return sum;
}

// Digamma at a positive integer: -gamma + sum_{j<n} 1/j.
inline double digamma_int(std::size_t n) {
  double h = 0.0;
  for (std::size_t j = n - 1; j >= 1; --j) h += 1.0 / static_cast<double>(j);
  return h - std::numbers::egamma;
}

inline void check_finite(const SampleBatch& batch) {
  for (double v : batch.data()) {
    if (!std::isfinite(v)) throw ArgumentError("sample batch contains a non-finite value");
  }
}

}  // namespace detail

// Log-volume of the unit ball in R^d.
inline double log_unit_ball_volume(std::size_t d) {
  const double half = 0.5 * static_cast<double>(d);
  return half * std::log(std::numbers::pi) - std::lgamma(half + 1.0);
}

// Kozachenko-Leonenko k-NN differential entropy estimate (nats):
//   psi(N) - psi(k) + ln V_d + (d/N) * sum_i ln rho_{i,k}
// with rho_{i,k} the (floored) distance from sample i to its k-th neighbor.
inline double entropy_kl(const SampleBatch& batch, const EntropyConfig& cfg) {
  detail::check_finite(batch);
  const std::vector<double> dist = knn_distances(batch, cfg);
  const std::size_t n = batch.rows();
  const std::size_t d = batch.dims();
  std::vector<double> terms(n);
  for (std::size_t i = 0; i < n; ++i) terms[i] = std::log(dist[i * cfg.k + cfg.k - 1]);
  const double sum_log = detail::order_free_sum(terms);
  return detail::digamma_int(n) - detail::digamma_int(cfg.k) + log_unit_ball_volume(d) +
         static_cast<double>(d) * sum_log / static_cast<double>(n);
}

// Surrogate diversity: sum_i ln( mean of the k nearest-neighbor distances ).
// Only meaningful for comparing batches with the same N; it is not an entropy
// in nats.
inline double entropy_mese(const SampleBatch& batch, const EntropyConfig& cfg) {
  detail::check_finite(batch);
  const std::vector<double> dist = knn_distances(batch, cfg);
  const std::size_t n = batch.rows();
  std::vector<double> terms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t m = 0; m < cfg.k; ++m) s += dist[i * cfg.k + m];
    terms[i] = std::log(s / static_cast<double>(cfg.k));
  }
  return detail::order_free_sum(terms);
}

// Column projection of the batch onto `dims` (ascending index order).
inline SampleBatch project(const SampleBatch& batch, const IndexSet& dims) {
  dims.validate(batch.dims());
  SampleBatch out(batch.rows(), dims.size());
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    for (std::size_t m = 0; m < dims.size(); ++m) out.at(i, m) = batch.at(i, dims[m]);
  }
  return out;
}

// Plug-in Shannon entropy (nats) of the empirical distribution of distinct
// rows. Grid-valued data repeats rows often enough that every k-NN distance
// hits the floor, which erases the surrogate's information; this count-based
// value still separates a constant column from an 8-valued one.
inline double discrete_entropy(const SampleBatch& batch) {
  const std::size_t n = batch.rows();
  if (n == 0) return 0.0;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  auto row_less = [&](std::size_t a, std::size_t b) {
    const auto ra = batch.row(a);
    const auto rb = batch.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  };
  std::sort(order.begin(), order.end(), row_less);
  std::vector<double> terms;
  std::size_t run = 1;
  const double total = static_cast<double>(n);
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && !row_less(order[i - 1], order[i])) {
      ++run;
      continue;
    }
    const double p = static_cast<double>(run) / total;
    terms.push_back(-p * std::log(p));
    run = 1;
  }
  return detail::order_free_sum(terms);
}

// Surrogate entropy of the batch restricted to `dims`.
inline double joint_entropy(const SampleBatch& batch, const IndexSet& dims,
                            const EntropyConfig& cfg) {
  return entropy_mese(project(batch, dims), cfg);
}

}  // namespace mese

#endif  // MESE_ENTROPY_HPP_
