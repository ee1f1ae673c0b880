#include "interpnn/neighbors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "interpnn/parallel.hpp"

namespace interpnn {

SearchBackend::SearchBackend(KdTree t) : kind_(t) {
  if (t.leaf_size < 1) {
    throw std::invalid_argument("KdTree: leaf_size must be at least 1");
  }
}

SearchBackend SearchBackend::parse(std::string_view text) {
  if (text == "brute") {
    return BruteForce{};
  }
  if (text == "kdtree") {
    return KdTree{};
  }
  constexpr std::string_view prefix = "kdtree:";
  if (text.starts_with(prefix)) {
    const auto arg = text.substr(prefix.size());
    std::size_t leaf = 0;
    auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), leaf);
    if (ec == std::errc{} && ptr == arg.data() + arg.size() && leaf >= 1) {
      return KdTree{leaf};
    }
  }
  throw std::invalid_argument("unknown search backend '" + std::string(text) +
                              "' (expected brute, kdtree or kdtree:<leaf_size>)");
}

std::string SearchBackend::label() const {
  if (const auto *tree = std::get_if<KdTree>(&kind_)) {
    return "kdtree:" + std::to_string(tree->leaf_size);
  }
  return "brute";
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double diff = a[j] - b[j];
    sum += diff * diff;
  }
  return sum;
}

namespace {

// Keeps the `count` smallest candidates as a max-heap on (distance, row).
template <class Candidate>
void offer(std::vector<Candidate> &heap, std::size_t count, Candidate candidate) {
  if (heap.size() < count) {
    heap.push_back(candidate);
    std::push_heap(heap.begin(), heap.end());
  } else if (candidate < heap.front()) {
    std::pop_heap(heap.begin(), heap.end());
    heap.back() = candidate;
    std::push_heap(heap.begin(), heap.end());
  }
}

} // namespace

FittedIndex::FittedIndex(const Matrix &features, SearchBackend backend)
    : backend_(std::move(backend)) {
  if (features.rows() < 2) {
    throw std::invalid_argument("build_index: need at least 2 training rows");
  }
  if (features.cols() < 1) {
    throw std::invalid_argument("build_index: need at least 1 feature");
  }
  rows_.resize(features.rows());
  std::iota(rows_.begin(), rows_.end(), std::size_t{0});

  if (const auto *tree = std::get_if<KdTree>(&backend_.kind())) {
    // Partition rows_ in place, then lay the points out in tree order.
    nodes_.push_back({0, rows_.size(), 0, 0.0, 0});
    std::vector<std::size_t> pending{0};
    const std::size_t d = features.cols();
    while (!pending.empty()) {
      const std::size_t id = pending.back();
      pending.pop_back();
      const std::size_t begin = nodes_[id].begin;
      const std::size_t end = nodes_[id].end;
      if (end - begin <= tree->leaf_size) {
        continue;
      }
      std::size_t dim = 0;
      double widest = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        double lo = features(rows_[begin], j);
        double hi = lo;
        for (std::size_t i = begin + 1; i < end; ++i) {
          lo = std::min(lo, features(rows_[i], j));
          hi = std::max(hi, features(rows_[i], j));
        }
        if (hi - lo > widest) {
          widest = hi - lo;
          dim = j;
        }
      }
      if (widest == 0.0) {
        continue; // all points coincide
      }
      const std::size_t mid = begin + (end - begin) / 2;
      std::nth_element(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                       rows_.begin() + static_cast<std::ptrdiff_t>(mid),
                       rows_.begin() + static_cast<std::ptrdiff_t>(end),
                       [&](std::size_t a, std::size_t b) {
                         const double fa = features(a, dim);
                         const double fb = features(b, dim);
                         return fa < fb || (fa == fb && a < b);
                       });
      const std::size_t left = nodes_.size();
      nodes_[id].split_dim = dim;
      nodes_[id].split_value = features(rows_[mid], dim);
      nodes_[id].left = left;
      nodes_.push_back({begin, mid, 0, 0.0, 0});
      nodes_.push_back({mid, end, 0, 0.0, 0});
      pending.push_back(left);
      pending.push_back(left + 1);
    }
  }

  points_ = Matrix(features.rows(), features.cols());
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto src = features.row(rows_[i]);
    std::copy(src.begin(), src.end(), points_.row(i).begin());
  }
}

void FittedIndex::search_brute(std::span<const double> x, std::size_t count,
                               std::vector<Candidate> &heap) const {
  std::vector<Candidate> all(points_.rows());
  for (std::size_t i = 0; i < points_.rows(); ++i) {
    all[i] = {squared_distance(x, points_.row(i)), rows_[i]};
  }
  std::nth_element(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count - 1), all.end());
  all.resize(count);
  heap = std::move(all);
  std::make_heap(heap.begin(), heap.end());
}

void FittedIndex::search_tree(std::size_t id, std::span<const double> x, std::size_t count,
                              std::vector<Candidate> &heap) const {
  const detail::KdNode &node = nodes_[id];
  if (node.left == 0) {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      offer(heap, count, Candidate{squared_distance(x, points_.row(i)), rows_[i]});
    }
    return;
  }
  // Left child holds coordinates <= split_value, right child >= split_value.
  const double diff = x[node.split_dim] - node.split_value;
  const std::size_t near = diff < 0.0 ? node.left : node.left + 1;
  const std::size_t far = diff < 0.0 ? node.left + 1 : node.left;
  search_tree(near, x, count, heap);
  // <= keeps equal-distance candidates with lower row indices reachable.
  if (heap.size() < count || diff * diff <= heap.front().first) {
    search_tree(far, x, count, heap);
  }
}

NeighborQuery FittedIndex::query(std::span<const double> x, std::size_t k) const {
  if (k < 1 || k >= n()) {
    throw std::invalid_argument("query_knn: k must satisfy 1 <= k <= n - 1 (k = " +
                                std::to_string(k) + ", n = " + std::to_string(n()) + ")");
  }
  if (x.size() != d()) {
    throw std::invalid_argument("query_knn: query dimension does not match the index");
  }
  for (double v : x) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("query_knn: query point must be finite");
    }
  }

  const std::size_t count = k + 1;
  std::vector<Candidate> heap;
  heap.reserve(count);
  if (nodes_.empty()) {
    search_brute(x, count, heap);
  } else {
    search_tree(0, x, count, heap);
  }
  std::sort_heap(heap.begin(), heap.end());

  NeighborQuery out;
  out.indices.resize(k);
  out.distances.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.indices[i] = heap[i].second;
    out.distances[i] = std::sqrt(heap[i].first);
  }
  out.boundary_distance = std::sqrt(heap[k].first);
  return out;
}

FittedIndex build_index(const Dataset &dataset, SearchBackend backend) {
  return FittedIndex(dataset.features(), std::move(backend));
}

NeighborQuery query_knn(const FittedIndex &index, std::span<const double> x, std::size_t k) {
  return index.query(x, k);
}

std::vector<NeighborQuery> query_batch(const FittedIndex &index, const Matrix &queries,
                                       std::size_t k, unsigned threads) {
  std::vector<NeighborQuery> out(queries.rows());
  if (queries.rows() > 0 && queries.cols() != index.d()) {
    throw std::invalid_argument("query_batch: query dimension does not match the index");
  }
  parallel_for(queries.rows(), threads,
               [&](std::size_t i) { out[i] = index.query(queries.row(i), k); });
  return out;
}

} // namespace interpnn
