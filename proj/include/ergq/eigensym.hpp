#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ergq/common.hpp"

namespace ergq {

namespace detail {

inline double pythag(double a, double b) {
  const double absa = std::abs(a), absb = std::abs(b);
  if (absa > absb) {
    const double r = absb / absa;
    return absa * std::sqrt(1.0 + r * r);
  }
  if (absb == 0.0) return 0.0;
  const double r = absa / absb;
  return absb * std::sqrt(1.0 + r * r);
}

/// Cyclic Jacobi rotations on a dense symmetric matrix, accumulating the
/// eigenvector matrix in v (columns). a is destroyed. Classic threshold
/// scheme; converges quadratically once off-diagonals are small.
inline void jacobi_eigen(std::vector<double>& a, std::size_t n, std::vector<double>& d,
                         std::vector<double>& v) {
  auto A = [&](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };
  auto V = [&](std::size_t i, std::size_t j) -> double& { return v[i * n + j]; };

  v.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) V(i, i) = 1.0;
  d.resize(n);
  std::vector<double> b(n), z(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) b[i] = d[i] = A(i, i);

  auto rotate = [&](std::vector<double>& m, std::size_t i, std::size_t j, std::size_t k,
                    std::size_t l, double s, double tau) {
    const double g = m[i * n + j];
    const double h = m[k * n + l];
    m[i * n + j] = g - s * (h + g * tau);
    m[k * n + l] = h + s * (g - h * tau);
  };

  for (int sweep = 1; sweep <= 100; ++sweep) {
    double sm = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) sm += std::abs(A(p, q));
    if (sm == 0.0) return;

    const double tresh = sweep < 4 ? 0.2 * sm / static_cast<double>(n * n) : 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double g = 100.0 * std::abs(A(p, q));
        if (sweep > 4 && std::abs(d[p]) + g == std::abs(d[p]) &&
            std::abs(d[q]) + g == std::abs(d[q])) {
          A(p, q) = 0.0;
        } else if (std::abs(A(p, q)) > tresh) {
          double h = d[q] - d[p];
          double t;
          if (std::abs(h) + g == std::abs(h)) {
            t = A(p, q) / h;
          } else {
            const double theta = 0.5 * h / A(p, q);
            t = 1.0 / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
            if (theta < 0.0) t = -t;
          }
          const double c = 1.0 / std::sqrt(1.0 + t * t);
          const double s = t * c;
          const double tau = s / (1.0 + c);
          h = t * A(p, q);
          z[p] -= h;
          z[q] += h;
          d[p] -= h;
          d[q] += h;
          A(p, q) = 0.0;
          for (std::size_t j = 0; j < p; ++j) rotate(a, j, p, j, q, s, tau);
          for (std::size_t j = p + 1; j < q; ++j) rotate(a, p, j, j, q, s, tau);
          for (std::size_t j = q + 1; j < n; ++j) rotate(a, p, j, q, j, s, tau);
          for (std::size_t j = 0; j < n; ++j) rotate(v, j, p, j, q, s, tau);
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      b[i] += z[i];
      d[i] = b[i];
      z[i] = 0.0;
    }
  }
  throw std::runtime_error("jacobi_eigen: no convergence after 100 sweeps");
}

/// Householder reduction of a symmetric matrix to tridiagonal form,
/// accumulating the orthogonal transform in a.
inline void tridiagonalize(std::vector<double>& a, std::size_t n, std::vector<double>& d,
                           std::vector<double>& e) {
  auto A = [&](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };
  d.assign(n, 0.0);
  e.assign(n, 0.0);

  for (std::size_t i = n - 1; i >= 1; --i) {
    const std::size_t l = i - 1;
    double h = 0.0, scale = 0.0;
    if (l > 0) {
      for (std::size_t k = 0; k <= l; ++k) scale += std::abs(A(i, k));
      if (scale == 0.0) {
        e[i] = A(i, l);
      } else {
        for (std::size_t k = 0; k <= l; ++k) {
          A(i, k) /= scale;
          h += A(i, k) * A(i, k);
        }
        double f = A(i, l);
        double g = f >= 0.0 ? -std::sqrt(h) : std::sqrt(h);
        e[i] = scale * g;
        h -= f * g;
        A(i, l) = f - g;
        f = 0.0;
        for (std::size_t j = 0; j <= l; ++j) {
          A(j, i) = A(i, j) / h;
          g = 0.0;
          for (std::size_t k = 0; k <= j; ++k) g += A(j, k) * A(i, k);
          for (std::size_t k = j + 1; k <= l; ++k) g += A(k, j) * A(i, k);
          e[j] = g / h;
          f += e[j] * A(i, j);
        }
        const double hh = f / (h + h);
        for (std::size_t j = 0; j <= l; ++j) {
          f = A(i, j);
          e[j] = g = e[j] - hh * f;
          for (std::size_t k = 0; k <= j; ++k) A(j, k) -= f * e[k] + g * A(i, k);
        }
      }
    } else {
      e[i] = A(i, l);
    }
    d[i] = h;
  }
  d[0] = 0.0;
  e[0] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i] != 0.0) {
      for (std::size_t j = 0; j < i; ++j) {
        double g = 0.0;
        for (std::size_t k = 0; k < i; ++k) g += A(i, k) * A(k, j);
        for (std::size_t k = 0; k < i; ++k) A(k, j) -= g * A(k, i);
      }
    }
    d[i] = A(i, i);
    A(i, i) = 1.0;
    for (std::size_t j = 0; j < i; ++j) A(j, i) = A(i, j) = 0.0;
  }
}

/// Implicit-shift QL iteration on a symmetric tridiagonal matrix (d, e),
/// rotating the accumulated transform z into the eigenvector matrix.
inline void ql_implicit(std::vector<double>& d, std::vector<double>& e, std::size_t n,
                        std::vector<double>& z) {
  auto Z = [&](std::size_t i, std::size_t j) -> double& { return z[i * n + j]; };

  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  for (std::size_t l = 0; l < n; ++l) {
    int iter = 0;
    std::size_t m;
    do {
      for (m = l; m + 1 < n; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) + dd == dd) break;
      }
      if (m != l) {
        if (iter++ == 50) throw std::runtime_error("ql_implicit: no convergence");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = pythag(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::abs(r) : -std::abs(r)));
        double s = 1.0, c = 1.0, p = 0.0;
        bool underflow = false;
        for (std::size_t i = m; i-- > l;) {
          double f = s * e[i];
          const double b = c * e[i];
          e[i + 1] = r = pythag(f, g);
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            underflow = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          d[i + 1] = g + (p = s * r);
          g = c * r - b;
          for (std::size_t k = 0; k < n; ++k) {
            f = Z(k, i + 1);
            Z(k, i + 1) = s * Z(k, i) + c * f;
            Z(k, i) = c * Z(k, i) - s * f;
          }
        }
        if (underflow) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
}

}  // namespace detail

enum class EigenMethod { Auto, Jacobi, QL };

struct EigenPairs {
  std::size_t n = 0;
  std::vector<double> values;   // descending, size m
  std::vector<double> vectors;  // n x m row-major: vectors[i*m + j] = component i of pair j
};

/// Full eigendecomposition of a dense symmetric matrix, truncated to the
/// top m pairs by descending eigenvalue. Jacobi for modest sizes (most
/// ensembles), Householder + QL beyond 512 where Jacobi sweeps get costly.
inline EigenPairs eigensolve_symmetric(std::span<const double> mat, std::size_t n,
                                       std::size_t m, EigenMethod method = EigenMethod::Auto) {
  if (n == 0) throw std::invalid_argument("eigensolve_symmetric: empty matrix");
  if (mat.size() != n * n) throw std::invalid_argument("eigensolve_symmetric: bad matrix size");
  if (m > n) throw std::invalid_argument("eigensolve_symmetric: m exceeds matrix order");

  double amax = 0.0;
  for (double x : mat) amax = std::max(amax, std::abs(x));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(mat[i * n + j] - mat[j * n + i]) > 1e-12 * std::max(1.0, amax))
        throw std::invalid_argument("eigensolve_symmetric: matrix is not symmetric");

  if (method == EigenMethod::Auto) method = n <= 512 ? EigenMethod::Jacobi : EigenMethod::QL;

  std::vector<double> a(mat.begin(), mat.end());
  std::vector<double> d, v;
  if (method == EigenMethod::Jacobi) {
    detail::jacobi_eigen(a, n, d, v);
  } else {
    std::vector<double> e;
    detail::tridiagonalize(a, n, d, e);
    detail::ql_implicit(d, e, n, a);
    v = std::move(a);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return d[i] > d[j]; });

  EigenPairs out;
  out.n = n;
  out.values.resize(m);
  out.vectors.resize(n * m);
  for (std::size_t j = 0; j < m; ++j) {
    out.values[j] = d[order[j]];
    for (std::size_t i = 0; i < n; ++i) out.vectors[i * m + j] = v[i * n + order[j]];
  }
  return out;
}

}  // namespace ergq
