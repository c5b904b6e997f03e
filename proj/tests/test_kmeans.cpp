#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "ergq/kmeans.hpp"
#include "ergq/rng.hpp"

using namespace ergq;
using Catch::Approx;

TEST_CASE("two isolated points split perfectly", "[kmeans]") {
  std::vector<double> pts{0.0, 10.0};
  auto r = kmeans(pts, 2, 1, 2, 42);
  CHECK(r.inertia == Approx(0.0).margin(1e-12));
  std::vector<double> cents{r.centroids[0], r.centroids[1]};
  std::sort(cents.begin(), cents.end());
  CHECK(cents[0] == Approx(0.0).margin(1e-12));
  CHECK(cents[1] == Approx(10.0).margin(1e-12));
  CHECK(r.labels[0] != r.labels[1]);
}

TEST_CASE("a single cluster is the global mean", "[kmeans]") {
  Rng rng(5);
  const std::size_t n = 40;
  std::vector<double> pts(2 * n);
  for (auto& p : pts) p = rng.uniform(-1.0, 1.0);
  auto r = kmeans(pts, n, 2, 1, 0);

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += pts[2 * i];
    my += pts[2 * i + 1];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  CHECK(r.centroids[0] == Approx(mx).margin(1e-12));
  CHECK(r.centroids[1] == Approx(my).margin(1e-12));

  double scatter = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    scatter += (pts[2 * i] - mx) * (pts[2 * i] - mx) + (pts[2 * i + 1] - my) * (pts[2 * i + 1] - my);
  CHECK(r.inertia == Approx(scatter).epsilon(1e-12));
}

TEST_CASE("oracle agrees with hand enumeration", "[kmeans]") {
  std::vector<double> pts{0.0, 1.0, 10.0};
  CHECK(kmeans_oracle(pts, 3, 1, 2) == Approx(0.5).margin(1e-12));
  CHECK(kmeans_oracle(pts, 3, 1, 3) == Approx(0.0).margin(1e-12));
  std::vector<double> two{0.0, 10.0};
  CHECK(kmeans_oracle(two, 2, 1, 2) == Approx(0.0).margin(1e-12));
  CHECK_THROWS_AS(kmeans_oracle(pts, 3, 1, 0), std::invalid_argument);
  std::vector<double> big(30, 0.0);
  CHECK_THROWS_AS(kmeans_oracle(big, 30, 1, 10), std::invalid_argument);
}

TEST_CASE("best-of-restarts reaches the enumerated optimum on small instances", "[kmeans]") {
  Rng rng(7);
  for (int rep = 0; rep < 25; ++rep) {
    const std::size_t n = 4 + rng.index(5);  // 4..8
    const std::size_t k = 2 + rng.index(2);  // 2..3
    const std::size_t dims = 2;
    std::vector<double> pts(n * dims);
    for (auto& p : pts) p = rng.uniform(0.0, 1.0);
    auto r = kmeans(pts, n, dims, k, 1000 + static_cast<std::uint64_t>(rep), 20);
    const double opt = kmeans_oracle(pts, n, dims, k);
    CHECK(r.inertia == Approx(opt).margin(1e-9));
  }
}

TEST_CASE("same seed reproduces labels bitwise", "[kmeans]") {
  Rng rng(11);
  const std::size_t n = 60;
  std::vector<double> pts(2 * n);
  for (auto& p : pts) p = rng.uniform(0.0, 1.0);
  auto a = kmeans(pts, n, 2, 4, 99, 6);
  auto b = kmeans(pts, n, 2, 4, 99, 6);
  CHECK(a.labels == b.labels);
  CHECK(a.centroids == b.centroids);
  CHECK(a.inertia == b.inertia);
  CHECK(a.seed == b.seed);
}

TEST_CASE("permuting the points permutes the labels up to renaming", "[kmeans]") {
  Rng rng(13);
  const std::size_t n = 30;
  std::vector<double> pts(2 * n);
  for (auto& p : pts) p = rng.uniform(0.0, 1.0);
  auto base = kmeans(pts, n, 2, 3, 7, 12);

  // reverse the point order
  std::vector<double> rev(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    rev[2 * i] = pts[2 * (n - 1 - i)];
    rev[2 * i + 1] = pts[2 * (n - 1 - i) + 1];
  }
  auto perm = kmeans(rev, n, 2, 3, 7, 12);
  CHECK(base.inertia == Approx(perm.inertia).epsilon(1e-9));

  // relabel both by first occurrence along the same point order, then compare
  auto canon = [&](const std::vector<int>& labels) {
    std::vector<int> remap(8, -1);
    std::vector<int> out;
    int next = 0;
    for (int l : labels) {
      if (remap[static_cast<std::size_t>(l)] < 0) remap[static_cast<std::size_t>(l)] = next++;
      out.push_back(remap[static_cast<std::size_t>(l)]);
    }
    return out;
  };
  std::vector<int> perm_in_base_order(perm.labels.rbegin(), perm.labels.rend());
  CHECK(canon(base.labels) == canon(perm_in_base_order));
}

TEST_CASE("labels are canonicalized by first occurrence", "[kmeans]") {
  Rng rng(17);
  const std::size_t n = 25;
  std::vector<double> pts(n);
  for (auto& p : pts) p = rng.uniform(0.0, 1.0);
  auto r = kmeans(pts, n, 1, 4, 3, 8);
  int seen = 0;
  for (int l : r.labels) {
    CHECK(l <= seen);
    if (l == seen) ++seen;
  }
  CHECK(static_cast<std::size_t>(seen) == r.k);
}

TEST_CASE("at convergence each centroid is the mean of its members", "[kmeans]") {
  Rng rng(19);
  const std::size_t n = 50, dims = 3, k = 4;
  std::vector<double> pts(n * dims);
  for (auto& p : pts) p = rng.uniform(0.0, 1.0);
  auto r = kmeans(pts, n, dims, k, 23, 5, 200);

  std::vector<double> mean(r.k * dims, 0.0);
  std::vector<std::size_t> counts(r.k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(r.labels[i]);
    ++counts[c];
    for (std::size_t d = 0; d < dims; ++d) mean[c * dims + d] += pts[i * dims + d];
  }
  for (std::size_t c = 0; c < r.k; ++c) {
    REQUIRE(counts[c] > 0);
    for (std::size_t d = 0; d < dims; ++d)
      CHECK(r.centroids[c * dims + d] == Approx(mean[c * dims + d] / static_cast<double>(counts[c]))
                                             .margin(1e-9));
  }
}

TEST_CASE("input validation", "[kmeans]") {
  std::vector<double> pts{0.0, 1.0};
  CHECK_THROWS_AS(kmeans(pts, 2, 1, 3, 0), std::invalid_argument);
  CHECK_THROWS_AS(kmeans(pts, 2, 1, 0, 0), std::invalid_argument);
  std::vector<double> nan{0.0, std::numeric_limits<double>::quiet_NaN()};
  CHECK_THROWS_AS(kmeans(nan, 2, 1, 1, 0), std::invalid_argument);
}
