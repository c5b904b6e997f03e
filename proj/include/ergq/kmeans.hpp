#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ergq/common.hpp"
#include "ergq/parallel.hpp"
#include "ergq/rng.hpp"

namespace ergq {

struct ClusterResult {
  std::size_t k = 0;
  std::vector<int> labels;        // per sample, in [0, k)
  std::vector<double> centroids;  // k x dims
  double inertia = 0.0;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
};

namespace detail {

inline double sqdist(std::span<const double> coords, std::size_t dims, std::size_t i,
                     std::span<const double> c, std::size_t ci) {
  double s = 0.0;
  for (std::size_t d = 0; d < dims; ++d) {
    const double diff = coords[i * dims + d] - c[ci * dims + d];
    s += diff * diff;
  }
  return s;
}

inline void seed_plusplus(std::span<const double> coords, std::size_t n, std::size_t dims,
                          std::size_t k, Rng& rng, std::vector<double>& centroids) {
  centroids.assign(k * dims, 0.0);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());

  std::size_t first = static_cast<std::size_t>(rng.index(n));
  std::copy_n(coords.begin() + static_cast<std::ptrdiff_t>(first * dims), dims,
              centroids.begin());

  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      best[i] = std::min(best[i], sqdist(coords, dims, i, centroids, c - 1));
      total += best[i];
    }
    std::size_t pick;
    if (total <= 0.0) {
      pick = static_cast<std::size_t>(rng.index(n));
    } else {
      const double u = rng.uniform() * total;
      double cum = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        cum += best[i];
        if (u < cum) {
          pick = i;
          break;
        }
      }
    }
    std::copy_n(coords.begin() + static_cast<std::ptrdiff_t>(pick * dims), dims,
                centroids.begin() + static_cast<std::ptrdiff_t>(c * dims));
  }
}

inline ClusterResult lloyd_run(std::span<const double> coords, std::size_t n,
                               std::size_t dims, std::size_t k, std::uint64_t seed,
                               std::size_t max_iter, double tol) {
  Rng rng(seed);
  ClusterResult r;
  r.k = k;
  r.seed = seed;
  r.labels.assign(n, 0);
  seed_plusplus(coords, n, dims, k, rng, r.centroids);

  std::vector<double> next(k * dims);
  std::vector<std::size_t> counts(k);
  double prev_inertia = std::numeric_limits<double>::infinity();

  for (std::size_t iter = 1; iter <= max_iter; ++iter) {
    r.iterations = iter;

    // assignment
    for (std::size_t i = 0; i < n; ++i) {
      double bestd = std::numeric_limits<double>::infinity();
      int bestc = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const double d = sqdist(coords, dims, i, r.centroids, c);
        if (d < bestd) {
          bestd = d;
          bestc = static_cast<int>(c);
        }
      }
      r.labels[i] = bestc;
    }

    // empty-cluster repair: donate the farthest point of the largest cluster
    bool repaired = false;
    for (;;) {
      counts.assign(k, 0);
      for (int l : r.labels) ++counts[static_cast<std::size_t>(l)];
      std::size_t empty = k;
      for (std::size_t c = 0; c < k; ++c)
        if (counts[c] == 0) {
          empty = c;
          break;
        }
      if (empty == k) break;
      const std::size_t donor = static_cast<std::size_t>(
          std::max_element(counts.begin(), counts.end()) - counts.begin());
      std::size_t far_i = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (r.labels[i] != static_cast<int>(donor)) continue;
        const double d = sqdist(coords, dims, i, r.centroids, donor);
        if (d > far_d) {
          far_d = d;
          far_i = i;
        }
      }
      r.labels[far_i] = static_cast<int>(empty);
      repaired = true;
    }

    // means
    next.assign(k * dims, 0.0);
    counts.assign(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(r.labels[i]);
      ++counts[c];
      for (std::size_t d = 0; d < dims; ++d) next[c * dims + d] += coords[i * dims + d];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t d = 0; d < dims; ++d) {
        next[c * dims + d] /= static_cast<double>(counts[c]);
        shift = std::max(shift, std::abs(next[c * dims + d] - r.centroids[c * dims + d]));
      }
    }
    r.centroids.swap(next);

    r.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      r.inertia += sqdist(coords, dims, i, r.centroids, static_cast<std::size_t>(r.labels[i]));
    // Lloyd descent holds exactly except on iterations where an empty
    // cluster forced a point donation.
    if (!repaired && r.inertia > prev_inertia * (1.0 + 1e-12) + 1e-15)
      throw std::logic_error("kmeans: inertia increased across an iteration");
    const bool done = shift <= tol || r.inertia == prev_inertia;
    prev_inertia = r.inertia;
    if (done) break;
  }
  return r;
}

/// Relabels clusters in order of first occurrence so that label values do
/// not depend on seeding history.
inline void canonicalize_labels(ClusterResult& r, std::size_t dims) {
  std::vector<int> remap(r.k, -1);
  int next = 0;
  for (int& l : r.labels) {
    auto& m = remap[static_cast<std::size_t>(l)];
    if (m < 0) m = next++;
    l = m;
  }
  std::vector<double> cent(r.centroids.size());
  for (std::size_t c = 0; c < r.k; ++c) {
    if (remap[c] < 0) continue;  // empty cluster (k > n): drop
    std::copy_n(r.centroids.begin() + static_cast<std::ptrdiff_t>(c * dims), dims,
                cent.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(remap[c]) * dims));
  }
  cent.resize(static_cast<std::size_t>(next) * dims);
  r.centroids = std::move(cent);
  r.k = static_cast<std::size_t>(next);
}

}  // namespace detail

/// Lloyd iterations from k-means++ seeding, best of `restarts` runs by
/// (inertia, seed). Deterministic given the seed; restarts run concurrently
/// but the winner does not depend on scheduling.
inline ClusterResult kmeans(std::span<const double> coords, std::size_t n, std::size_t dims,
                            std::size_t k, std::uint64_t seed, std::size_t restarts = 10,
                            std::size_t max_iter = 100, double tol = 1e-10) {
  if (n == 0 || coords.size() != n * dims)
    throw std::invalid_argument("kmeans: bad coordinate array");
  if (k < 1 || k > n) throw std::invalid_argument("kmeans: need 1 <= k <= n");
  if (!all_finite(coords)) throw std::invalid_argument("kmeans: non-finite coordinates");
  if (restarts < 1) restarts = 1;

  std::vector<ClusterResult> runs(restarts);
  parallel_for(restarts, [&](std::size_t r) {
    runs[r] = detail::lloyd_run(coords, n, dims, k, seed + r, max_iter, tol);
  });

  std::size_t best = 0;
  for (std::size_t r = 1; r < restarts; ++r) {
    if (runs[r].inertia < runs[best].inertia ||
        (runs[r].inertia == runs[best].inertia && runs[r].seed < runs[best].seed))
      best = r;
  }
  ClusterResult winner = std::move(runs[best]);
  detail::canonicalize_labels(winner, dims);
  return winner;
}

/// Exact optimum by exhaustive enumeration of label assignments; the test
/// oracle for small instances.
inline double kmeans_oracle(std::span<const double> coords, std::size_t n, std::size_t dims,
                            std::size_t k) {
  if (n == 0 || coords.size() != n * dims)
    throw std::invalid_argument("kmeans_oracle: bad coordinate array");
  if (k < 1) throw std::invalid_argument("kmeans_oracle: k must be positive");
  double combos = std::pow(static_cast<double>(k), static_cast<double>(n));
  if (combos > 1e7) throw std::invalid_argument("kmeans_oracle: instance too large");

  std::vector<int> assign(n, 0);
  std::vector<double> mean(k * dims);
  std::vector<std::size_t> counts(k);
  double best = std::numeric_limits<double>::infinity();
  for (;;) {
    mean.assign(k * dims, 0.0);
    counts.assign(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(assign[i]);
      ++counts[c];
      for (std::size_t d = 0; d < dims; ++d) mean[c * dims + d] += coords[i * dims + d];
    }
    for (std::size_t c = 0; c < k; ++c)
      if (counts[c] > 0)
        for (std::size_t d = 0; d < dims; ++d) mean[c * dims + d] /= static_cast<double>(counts[c]);
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      inertia += detail::sqdist(coords, dims, i, mean, static_cast<std::size_t>(assign[i]));
    best = std::min(best, inertia);

    std::size_t pos = 0;
    while (pos < n) {
      if (static_cast<std::size_t>(++assign[pos]) < k) break;
      assign[pos] = 0;
      ++pos;
    }
    if (pos == n) break;
  }
  return best;
}

}  // namespace ergq
