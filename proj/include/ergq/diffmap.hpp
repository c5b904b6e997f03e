#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ergq/common.hpp"
#include "ergq/eigensym.hpp"
#include "ergq/metric.hpp"

namespace ergq {

/// Neighborhood-size-stability bandwidth: the smallest squared-distance
/// scale h such that every sample has at least n_min neighbors (itself
/// excluded) within distance sqrt(2h).
inline double bandwidth_nss(const DistanceMatrix& dm, std::size_t n_min) {
  if (dm.n < 2) throw std::invalid_argument("bandwidth_nss: need at least two samples");
  if (n_min >= dm.n)
    throw std::invalid_argument("bandwidth_nss: n_min must be smaller than the sample count");
  double worst = 0.0;
  std::vector<double> row(dm.n - 1);
  for (std::size_t i = 0; i < dm.n; ++i) {
    std::size_t w = 0;
    for (std::size_t j = 0; j < dm.n; ++j)
      if (j != i) row[w++] = dm(i, j);
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(n_min - 1),
                     row.end());
    worst = std::max(worst, row[n_min - 1]);
  }
  return 0.5 * worst * worst;
}

/// Guarded bandwidth: never returns zero even for ensembles with duplicate
/// samples. The floor is a negligible fraction of the median squared
/// distance; if every distance is zero the scale is arbitrary and 1 is used.
inline double bandwidth_guarded(const DistanceMatrix& dm, std::size_t n_min) {
  const double h = bandwidth_nss(dm, n_min);
  std::vector<double> d2;
  d2.reserve(dm.n * (dm.n - 1) / 2);
  for (std::size_t i = 0; i < dm.n; ++i)
    for (std::size_t j = i + 1; j < dm.n; ++j) d2.push_back(dm(i, j) * dm(i, j));
  double median = 0.0;
  if (!d2.empty()) {
    auto mid = d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2);
    std::nth_element(d2.begin(), mid, d2.end());
    median = *mid;
  }
  const double floor = 1e-8 * median / 2.0;
  double out = std::max(h, floor);
  if (out <= 0.0) out = 1.0;
  return out;
}

/// Gaussian affinity matrix A_ij = exp(-d_ij^2 / (4h)).
inline std::vector<double> build_kernel(const DistanceMatrix& dm, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("build_kernel: bandwidth must be positive");
  const std::size_t n = dm.n;
  std::vector<double> a(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i * n + i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = dm(i, j);
      const double v = std::exp(-d * d / (4.0 * h));
      a[i * n + j] = v;
      a[j * n + i] = v;
    }
  }
  return a;
}

/// Divides each entry by the estimated sampling densities of its endpoints
/// (row sums), removing the bias a non-uniform sample distribution would
/// impose on the recovered geometry.
inline std::vector<double> density_normalize(std::span<const double> a, std::size_t n) {
  if (a.size() != n * n) throw std::invalid_argument("density_normalize: bad matrix size");
  std::vector<double> p(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) p[i] += a[i * n + j];
  std::vector<double> ahat(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) ahat[i * n + j] = a[i * n + j] / (p[i] * p[j]);
  return ahat;
}

struct SymmetrizedTransition {
  std::vector<double> s_hat;     // symmetric, same spectrum as the Markov matrix
  std::vector<double> row_sums;  // of the normalized kernel; reconstructs the Markov matrix
};

/// Markov transition matrix S_ij = ahat_ij / rowsum_i, represented through
/// its similar symmetric form S_hat_ij = ahat_ij / sqrt(rowsum_i rowsum_j)
/// so the eigenproblem stays real and orthogonal.
inline SymmetrizedTransition symmetrize_transition(std::span<const double> ahat,
                                                   std::size_t n) {
  if (ahat.size() != n * n) throw std::invalid_argument("symmetrize_transition: bad matrix size");
  SymmetrizedTransition st;
  st.row_sums.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) st.row_sums[i] += ahat[i * n + j];
  st.s_hat.resize(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      st.s_hat[i * n + j] = ahat[i * n + j] / std::sqrt(st.row_sums[i] * st.row_sums[j]);
  return st;
}

/// Eigenvalue-scaled diffusion eigenfunctions of an ensemble. Column k of
/// coords is lambda_k * chi_k with chi_k sup-normalized to 1; column 0 is
/// the trivial constant.
struct DiffusionEmbedding {
  double h = 0.0;
  std::size_t n_min = 0;
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<double> eigvals;   // descending, size m
  std::vector<double> eigfuncs;  // n x m, chi_k values
  std::vector<double> coords;    // n x m, lambda_k * chi_k
};

namespace detail {

inline void orient_and_normalize(std::vector<double>& chi, std::size_t n, std::size_t m,
                                 std::size_t k) {
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) peak = std::max(peak, std::abs(chi[i * m + k]));
  if (peak == 0.0) return;
  double sign = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = chi[i * m + k];
    if (std::abs(v) > 1e-12 * peak) {
      sign = v > 0.0 ? 1.0 : -1.0;
      break;
    }
  }
  const double scale = sign / peak;
  for (std::size_t i = 0; i < n; ++i) chi[i * m + k] *= scale;
}

}  // namespace detail

/// Recovers the Markov eigenfunctions from the top-m eigenpairs of the
/// symmetrized transition matrix (rescale by the trivial eigenvector, unit
/// sup norm, deterministic sign: first entry above 1e-12 of the peak is
/// positive) and scales each by its eigenvalue. Requires a simple leading
/// eigenvalue; a (numerically) multiple one means the affinity graph is
/// effectively disconnected at this bandwidth, which is reported rather
/// than guessed around.
inline DiffusionEmbedding diffusion_coordinates(const EigenPairs& pairs, std::size_t m) {
  const std::size_t n = pairs.n;
  if (m > pairs.values.size())
    throw std::invalid_argument("diffusion_coordinates: fewer eigenpairs than coordinates");
  if (m == 0) throw std::invalid_argument("diffusion_coordinates: need at least one coordinate");

  if (m > 1 && pairs.values[1] >= pairs.values[0] - 1e-10)
    throw StageError(
        "diffusion embedding: leading eigenvalue is not simple (lambda_1 = " +
        std::to_string(pairs.values[1]) +
        "); the affinity graph is disconnected at this bandwidth - increase h or n_min");

  DiffusionEmbedding emb;
  emb.n = n;
  emb.m = m;
  emb.eigvals.assign(pairs.values.begin(), pairs.values.begin() + static_cast<std::ptrdiff_t>(m));
  emb.eigfuncs.assign(n * m, 0.0);

  // Guard the trivial eigenvector before dividing by it.
  double v0max = 0.0, v0min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = std::abs(pairs.vectors[i * pairs.values.size() + 0]);
    v0max = std::max(v0max, v);
    v0min = std::min(v0min, v);
  }
  if (v0min <= 1e-13 * v0max)
    throw StageError(
        "diffusion embedding: trivial eigenvector has (near-)zero entries; "
        "the affinity graph is disconnected at this bandwidth");

  const std::size_t stride = pairs.values.size();
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t i = 0; i < n; ++i)
      emb.eigfuncs[i * m + k] =
          pairs.vectors[i * stride + k] / pairs.vectors[i * stride + 0];
    detail::orient_and_normalize(emb.eigfuncs, n, m, k);
  }

  emb.coords.assign(n * m, 0.0);
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t i = 0; i < n; ++i)
      emb.coords[i * m + k] = emb.eigvals[k] * emb.eigfuncs[i * m + k];
  return emb;
}

/// Full pipeline from a distance matrix to diffusion coordinates.
/// h_override > 0 bypasses the neighborhood-size-stability heuristic.
inline DiffusionEmbedding embed(const DistanceMatrix& dm, std::size_t n_min, std::size_t m,
                                double h_override = 0.0,
                                EigenMethod method = EigenMethod::Auto) {
  if (m > dm.n) throw std::invalid_argument("embed: more coordinates than samples");
  const double h = h_override > 0.0 ? h_override : bandwidth_guarded(dm, n_min);
  const auto kernel = build_kernel(dm, h);
  const auto ahat = density_normalize(kernel, dm.n);
  const auto st = symmetrize_transition(ahat, dm.n);
  const auto pairs = eigensolve_symmetric(st.s_hat, dm.n, m, method);

  // Residual check on the retained pairs.
  for (std::size_t k = 0; k < m; ++k) {
    double resid = 0.0;
    for (std::size_t i = 0; i < dm.n; ++i) {
      double sv = 0.0;
      for (std::size_t j = 0; j < dm.n; ++j)
        sv += st.s_hat[i * dm.n + j] * pairs.vectors[j * m + k];
      resid = std::max(resid, std::abs(sv - pairs.values[k] * pairs.vectors[i * m + k]));
    }
    if (resid >= 1e-9)
      throw StageError("diffusion embedding: eigenpair residual " + std::to_string(resid) +
                       " exceeds 1e-9");
  }

  DiffusionEmbedding emb = diffusion_coordinates(pairs, m);
  emb.h = h;
  emb.n_min = n_min;

  if (std::abs(emb.eigvals[0] - 1.0) > 1e-8)
    throw StageError("diffusion embedding: leading eigenvalue deviates from 1");
  for (double lam : emb.eigvals)
    if (std::abs(lam) > 1.0 + 1e-8)
      throw StageError("diffusion embedding: eigenvalue outside the unit interval");
  return emb;
}

}  // namespace ergq
