#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "interpnn/core.hpp"
#include "interpnn/matrix.hpp"

namespace interpnn {

struct BruteForce {
  friend bool operator==(const BruteForce &, const BruteForce &) = default;
};

struct KdTree {
  std::size_t leaf_size = 16;
  friend bool operator==(const KdTree &, const KdTree &) = default;
};

class SearchBackend {
public:
  using Variant = std::variant<BruteForce, KdTree>;

  SearchBackend() = default;
  SearchBackend(BruteForce b) : kind_(b) {}
  SearchBackend(KdTree t);

  /// "brute", "kdtree" or "kdtree:<leaf_size>".
  static SearchBackend parse(std::string_view text);

  const Variant &kind() const { return kind_; }
  std::string label() const;

  friend bool operator==(const SearchBackend &, const SearchBackend &) = default;

private:
  Variant kind_ = KdTree{};
};

namespace detail {
struct KdNode {
  std::size_t begin;
  std::size_t end;
  std::size_t split_dim;
  double split_value;
  // Children are stored at left and left + 1; left == 0 marks a leaf.
  std::size_t left;
};
} // namespace detail

/// Exact Euclidean k-NN index over a copy of the training features.
///
/// Results are ordered by (distance, row index), so ties go to the lower row
/// index and both backends return identical queries. Immutable after
/// construction; concurrent queries are safe.
class FittedIndex {
public:
  FittedIndex(const Matrix &features, SearchBackend backend);

  std::size_t n() const { return points_.rows(); }
  std::size_t d() const { return points_.cols(); }
  const SearchBackend &backend() const { return backend_; }

  /// k nearest rows plus the (k+1)-th distance. Requires 1 <= k <= n - 1.
  NeighborQuery query(std::span<const double> x, std::size_t k) const;

private:
  using Candidate = std::pair<double, std::size_t>; // squared distance, row

  void build_tree();
  void search_brute(std::span<const double> x, std::size_t count, std::vector<Candidate> &heap) const;
  void search_tree(std::size_t node, std::span<const double> x, std::size_t count,
                   std::vector<Candidate> &heap) const;

  SearchBackend backend_;
  // Rows in tree order for the kd-tree, original order for brute force.
  Matrix points_;
  std::vector<std::size_t> rows_;
  std::vector<detail::KdNode> nodes_;
};

FittedIndex build_index(const Dataset &dataset, SearchBackend backend = {});

NeighborQuery query_knn(const FittedIndex &index, std::span<const double> x, std::size_t k);

/// Row-wise query_knn. Output order follows the rows of `queries` for any
/// thread count (0 = hardware concurrency).
std::vector<NeighborQuery> query_batch(const FittedIndex &index, const Matrix &queries,
                                       std::size_t k, unsigned threads = 1);

/// Squared Euclidean distance. Shared by both backends so their arithmetic is
/// identical.
double squared_distance(std::span<const double> a, std::span<const double> b);

} // namespace interpnn
