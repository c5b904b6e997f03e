#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ergq/averaging.hpp"
#include "ergq/common.hpp"
#include "ergq/observables.hpp"
#include "ergq/parallel.hpp"

namespace ergq {

/// Weight of a wavevector in the negative-order Sobolev inner product.
inline double sobolev_weight(std::span<const int> k, double s) {
  double norm2 = 0.0;
  for (int kd : k) norm2 += static_cast<double>(kd) * static_cast<double>(kd);
  return std::pow(1.0 + two_pi * two_pi * norm2, -s);
}

/// Default Sobolev order for a D-dimensional state space.
inline double default_sobolev_order(int dim) { return 0.5 * (dim + 1); }

/// Precomputed per-wavevector weights for a lattice. On a half lattice the
/// weights of nonzero wavevectors are doubled, standing in for the dropped
/// conjugate partners (valid whenever coefficient magnitudes are conjugate
/// symmetric, i.e. for averages of real-state harmonics).
struct SobolevParams {
  double s = 0.0;
  std::vector<double> weights;
  std::uint64_t lattice_hash = 0;

  static SobolevParams make(const WaveLattice& lat, double s) {
    SobolevParams p;
    p.s = s;
    p.lattice_hash = lat.hash();
    p.weights.resize(lat.size());
    for (std::size_t i = 0; i < lat.size(); ++i) {
      const auto k = lat.wave(i);
      bool zero = true;
      for (int kd : k)
        if (kd != 0) zero = false;
      const double mult = (lat.half && !zero) ? 2.0 : 1.0;
      p.weights[i] = mult * sobolev_weight(k, s);
    }
    return p;
  }
};

/// Weighted euclidean distance between two averaged-coefficient vectors.
inline double distance(const QuotientSample& a, const QuotientSample& b,
                       const SobolevParams& params) {
  if (a.averages.size() != b.averages.size() || a.averages.size() != params.weights.size())
    throw std::invalid_argument("distance: basis mismatch");
  if (a.omega != b.omega) throw std::invalid_argument("distance: harmonic frequency mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    const complex d = a.averages[i] - b.averages[i];
    sum += params.weights[i] * std::norm(d);
  }
  return std::sqrt(sum);
}

/// Symmetric matrix of pairwise distances, stored dense.
struct DistanceMatrix {
  std::size_t n = 0;
  std::vector<double> d;  // row-major n*n
  std::vector<std::size_t> sample_ids;

  double operator()(std::size_t i, std::size_t j) const { return d[i * n + j]; }
};

inline DistanceMatrix pairwise_matrix(std::span<const QuotientSample> ensemble,
                                      const SobolevParams& params) {
  if (ensemble.empty()) throw std::invalid_argument("pairwise_matrix: empty ensemble");
  const std::size_t n = ensemble.size();
  for (const auto& s : ensemble)
    if (s.averages.size() != params.weights.size() || s.omega != ensemble[0].omega)
      throw std::invalid_argument("pairwise_matrix: inhomogeneous ensemble");

  DistanceMatrix dm;
  dm.n = n;
  dm.d.assign(n * n, 0.0);
  dm.sample_ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) dm.sample_ids[i] = i;

  // Upper triangle, mirrored; rows are independent work units.
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = distance(ensemble[i], ensemble[j], params);
      dm.d[i * n + j] = v;
      dm.d[j * n + i] = v;
    }
  });
  return dm;
}

/// Worst-case decay constant and tail bound for truncating the weighted
/// coefficient sum to the box |k_d| <= K: dropping the tail perturbs the
/// distance by at most E(D)/sqrt(K).
struct TruncationBound {
  double constant = 0.0;  // E(D)
  double bound = 0.0;     // E(D)/sqrt(K)
};

inline TruncationBound truncation_bound(int dim, int cutoff) {
  if (dim < 1) throw std::invalid_argument("truncation_bound: dimension must be positive");
  if (cutoff < 1) throw std::invalid_argument("truncation_bound: cutoff must be >= 1");
  TruncationBound tb;
  tb.constant = std::pow(2.0 / std::numbers::pi, 0.75) * std::pow(dim, 0.25) /
                std::pow(std::numbers::pi, dim);
  tb.bound = tb.constant / std::sqrt(static_cast<double>(cutoff));
  return tb;
}

}  // namespace ergq
