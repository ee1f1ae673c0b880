#include <doctest.h>

#include <cmath>
#include <random>

#include "interpnn/neighbors.hpp"
#include "oracles.hpp"

using namespace interpnn;

namespace {

Dataset line_points(std::vector<double> xs) {
  Matrix x(xs.size(), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    x(i, 0) = xs[i];
  }
  return Dataset(std::move(x), std::vector<double>(xs.size(), 0.0), Task::Regression);
}

Dataset random_dataset(std::mt19937_64 &rng, std::size_t n, std::size_t d, bool lattice) {
  Matrix x(n, d);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double &v : x.data()) {
    // Coarse lattice values create many exact distance ties.
    v = lattice ? std::floor(u(rng) * 4.0) : u(rng);
  }
  return Dataset(std::move(x), std::vector<double>(n, 0.0), Task::Regression);
}

} // namespace

TEST_CASE("query_knn worked example on a line") {
  const Dataset data = line_points({0.0, 1.0, 2.0, 3.0});
  for (const SearchBackend backend : {SearchBackend(BruteForce{}), SearchBackend(KdTree{1})}) {
    const FittedIndex index = build_index(data, backend);
    const std::vector<double> x{0.4};
    const NeighborQuery q = query_knn(index, x, 2);
    CHECK(q.indices == std::vector<std::size_t>{0, 1});
    CHECK(q.distances[0] == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(q.distances[1] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(q.boundary_distance == doctest::Approx(1.6).epsilon(1e-15));

    const std::vector<double> on_point{2.0};
    const NeighborQuery self = query_knn(index, on_point, 1);
    CHECK(self.indices == std::vector<std::size_t>{2});
    CHECK(self.distances[0] == 0.0);
    CHECK(self.boundary_distance == 1.0);
  }
}

TEST_CASE("distance ties go to the lower row index") {
  const Dataset data = line_points({5.0, 1.0, 1.0, 3.0, 1.0});
  for (const SearchBackend backend : {SearchBackend(BruteForce{}), SearchBackend(KdTree{1}), SearchBackend(KdTree{2})}) {
    const FittedIndex index = build_index(data, backend);
    const std::vector<double> x{1.0};
    const NeighborQuery q = query_knn(index, x, 3);
    CHECK(q.indices == std::vector<std::size_t>{1, 2, 4});
    CHECK(q.boundary_distance == 2.0);
    const std::vector<double> mid{2.0};
    // Rows 1, 2, 3, 4 are all at distance 1.
    CHECK(query_knn(index, mid, 2).indices == std::vector<std::size_t>{1, 2});
  }
}

TEST_CASE("index construction and query errors") {
  CHECK_THROWS_AS(FittedIndex(Matrix(1, 1), BruteForce{}), std::invalid_argument);
  CHECK_THROWS_AS(FittedIndex(Matrix(1, 1), KdTree{}), std::invalid_argument);
  CHECK_THROWS_AS(SearchBackend(KdTree{0}), std::invalid_argument);
  CHECK(SearchBackend::parse("brute") == SearchBackend(BruteForce{}));
  CHECK(SearchBackend::parse("kdtree:4") == SearchBackend(KdTree{4}));
  CHECK_THROWS_AS(SearchBackend::parse("kdtree:0"), std::invalid_argument);
  CHECK_THROWS_AS(SearchBackend::parse("annoy"), std::invalid_argument);

  const Dataset data = line_points({0.0, 1.0, 2.0, 3.0});
  const FittedIndex index = build_index(data, KdTree{});
  const std::vector<double> x{0.5};
  CHECK_THROWS_AS(query_knn(index, x, 0), std::invalid_argument);
  CHECK_THROWS_AS(query_knn(index, x, 4), std::invalid_argument);
  CHECK_NOTHROW(query_knn(index, x, 3));
  const std::vector<double> bad{std::nan("")};
  CHECK_THROWS_AS(query_knn(index, bad, 1), std::invalid_argument);
  const std::vector<double> wrong_dim{0.5, 0.5};
  CHECK_THROWS_AS(query_knn(index, wrong_dim, 1), std::invalid_argument);
}

TEST_CASE("identical points do not break the tree") {
  Matrix x(50, 3, 1.25);
  const Dataset data(x, std::vector<double>(50, 0.0), Task::Regression);
  const FittedIndex tree = build_index(data, KdTree{2});
  const FittedIndex brute = build_index(data, BruteForce{});
  const std::vector<double> q{1.0, 1.0, 1.0};
  CHECK(query_knn(tree, q, 10) == query_knn(brute, q, 10));
  CHECK(query_knn(tree, q, 10).indices.front() == 0);
}

TEST_CASE("property: kd-tree and brute force agree with the sort oracle") {
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> u(-0.2, 1.2);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + rng() % 400;
    const std::size_t d = 1 + rng() % 6;
    const bool lattice = trial % 3 == 0;
    const Dataset data = random_dataset(rng, n, d, lattice);
    const FittedIndex brute = build_index(data, BruteForce{});
    const FittedIndex tree = build_index(data, KdTree{1 + rng() % 20});
    for (int qi = 0; qi < 20; ++qi) {
      std::vector<double> x(d);
      for (double &v : x) {
        v = lattice ? std::floor(u(rng) * 4.0) : u(rng);
      }
      if (qi == 0) {
        const auto r = data.row(rng() % n);
        x.assign(r.begin(), r.end());
      }
      const std::size_t k = 1 + rng() % (n - 1);
      const NeighborQuery a = query_knn(brute, x, k);
      const NeighborQuery b = query_knn(tree, x, k);
      REQUIRE(a == b);
      a.validate(n);

      const auto sorted = oracle::sorted_neighbors(data.features(), x);
      for (std::size_t i = 0; i < k; ++i) {
        REQUIRE(a.indices[i] == sorted[i].row);
        const double truth = static_cast<double>(sorted[i].distance);
        REQUIRE(std::abs(a.distances[i] - truth) <= 1e-12 * std::max(1.0, truth));
      }
      REQUIRE(a.boundary_distance >= a.distances.back());
      REQUIRE(std::abs(a.boundary_distance - static_cast<double>(sorted[k].distance)) <=
              1e-12 * std::max(1.0, a.boundary_distance));
    }
  }
}

TEST_CASE("query_batch preserves input order and matches single queries") {
  std::mt19937_64 rng(5);
  const Dataset data = random_dataset(rng, 300, 3, false);
  const FittedIndex index = build_index(data, KdTree{8});

  CHECK(query_batch(index, Matrix(0, 3), 5).empty());

  Matrix queries(3, 3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double &v : queries.data()) {
    v = u(rng);
  }
  const auto batch = query_batch(index, queries, 5, 1);
  REQUIRE(batch.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(batch[i] == query_knn(index, queries.row(i), 5));
  }

  Matrix many(1000, 3);
  for (double &v : many.data()) {
    v = u(rng);
  }
  const auto one = query_batch(index, many, 7, 1);
  const auto four = query_batch(index, many, 7, 4);
  const auto brute = query_batch(build_index(data, BruteForce{}), many, 7, 3);
  CHECK(one == four);
  CHECK(one == brute);
  CHECK_THROWS_AS(query_batch(index, many, 300), std::invalid_argument);
}
