#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ergq/common.hpp"
#include "ergq/flow.hpp"

namespace ergq {

/// Truncated set of integer wavevectors k with |k_d| <= K_d per axis, in
/// lexicographic order. In half mode only one representative of each
/// conjugate pair {k, -k} is stored (the one whose first nonzero component
/// is positive) together with k = 0; for averages of real-state harmonics
/// the dropped half is recoverable by conjugation.
struct WaveLattice {
  int dim = 0;
  std::vector<int> bounds;       // per-axis K_d >= 0
  bool half = false;
  std::vector<int> waves;        // flattened, size() * dim entries, lex order

  std::size_t size() const { return dim == 0 ? 0 : waves.size() / static_cast<std::size_t>(dim); }

  std::span<const int> wave(std::size_t i) const {
    return {waves.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }

  /// Index of the zero wavevector: first entry of a half lattice, middle of
  /// a full one.
  std::size_t zero_index() const { return half ? 0 : (size() - 1) / 2; }

  std::uint64_t hash() const {
    std::uint64_t h = fnv1a64(&dim, sizeof(dim));
    h = fnv1a64(bounds.data(), bounds.size() * sizeof(int), h);
    const int hf = half ? 1 : 0;
    h = fnv1a64(&hf, sizeof(hf), h);
    h = fnv1a64(waves.data(), waves.size() * sizeof(int), h);
    return h;
  }
};

inline WaveLattice make_lattice(int dim, std::vector<int> bounds, bool half) {
  if (dim <= 0) throw std::invalid_argument("make_lattice: dimension must be positive");
  if (static_cast<int>(bounds.size()) == 1 && dim > 1) bounds.assign(static_cast<std::size_t>(dim), bounds[0]);
  if (static_cast<int>(bounds.size()) != dim)
    throw std::invalid_argument("make_lattice: need one bound per axis");
  for (int b : bounds)
    if (b < 0) throw std::invalid_argument("make_lattice: bounds must be nonnegative");

  WaveLattice lat;
  lat.dim = dim;
  lat.bounds = bounds;
  lat.half = half;

  std::vector<int> k(static_cast<std::size_t>(dim));
  for (auto d = 0u; d < k.size(); ++d) k[d] = -bounds[d];
  for (;;) {
    bool keep = true;
    if (half) {
      // keep k = 0 and the lexicographically positive member of each pair
      int first_nonzero = 0;
      for (int kd : k)
        if (kd != 0) {
          first_nonzero = kd;
          break;
        }
      keep = first_nonzero >= 0;
    }
    if (keep) lat.waves.insert(lat.waves.end(), k.begin(), k.end());

    // odometer, last axis fastest => lexicographic output order
    int d = dim - 1;
    while (d >= 0) {
      if (k[static_cast<std::size_t>(d)] < bounds[static_cast<std::size_t>(d)]) {
        ++k[static_cast<std::size_t>(d)];
        break;
      }
      k[static_cast<std::size_t>(d)] = -bounds[static_cast<std::size_t>(d)];
      --d;
    }
    if (d < 0) break;
  }
  return lat;
}

/// Affine map of a raw state onto unit-box coordinates, axis by axis.
/// Out-of-box states are allowed; harmonics extend periodically.
inline void rescale_state(std::span<const Interval> domain, std::span<const double> x,
                          std::span<double> y) {
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double len = domain[d].length();
    if (len == 0.0) throw std::invalid_argument("rescale_state: degenerate axis");
    y[d] = (x[d] - domain[d].lo) / len;
  }
}

/// Scratch space for separable basis evaluation; reusable across calls,
/// one per worker.
struct BasisWorkspace {
  std::vector<std::vector<complex>> phase;  // phase[d][k], k = 0..K_d
  std::vector<double> y;
};

/// Complex harmonics on the rescaled domain, constant modulus
/// (2*pi)^{-D/2}, indexed by a WaveLattice. Evaluation builds per-axis
/// phase tables exp(i*2*pi*k*y_d) and combines them by products, so the
/// transcendental cost per state is sum(K_d) rather than lattice size.
struct ObservableBasis {
  WaveLattice lattice;
  std::vector<Interval> domain;
  double norm_const = 0.0;

  static ObservableBasis make(WaveLattice lat, std::vector<Interval> dom) {
    if (static_cast<int>(dom.size()) != lat.dim)
      throw std::invalid_argument("ObservableBasis: domain/lattice dimension mismatch");
    ObservableBasis b;
    b.norm_const = std::pow(two_pi, -0.5 * lat.dim);
    b.lattice = std::move(lat);
    b.domain = std::move(dom);
    return b;
  }

  void prepare(BasisWorkspace& ws) const {
    const auto d = static_cast<std::size_t>(lattice.dim);
    ws.phase.resize(d);
    for (std::size_t a = 0; a < d; ++a)
      ws.phase[a].resize(static_cast<std::size_t>(lattice.bounds[a]) + 1);
    ws.y.resize(d);
  }

  /// out[i] = norm_const * exp(i*2*pi*omega*t) * prod_d exp(i*2*pi*k_d*y_d)
  void eval(std::span<const double> x, double t, double omega, std::span<complex> out,
            BasisWorkspace& ws) const {
    const auto d = static_cast<std::size_t>(lattice.dim);
    if (x.size() != d) throw std::invalid_argument("eval_basis: dimension mismatch");
    if (out.size() != lattice.size()) throw std::invalid_argument("eval_basis: bad output size");
    if (ws.phase.size() != d) prepare(ws);

    rescale_state(domain, x, ws.y);
    for (std::size_t a = 0; a < d; ++a) {
      const double base = two_pi * ws.y[a];
      auto& col = ws.phase[a];
      for (int k = 0; k <= lattice.bounds[a]; ++k)
        col[static_cast<std::size_t>(k)] = std::polar(1.0, base * k);
    }

    complex prefactor(norm_const, 0.0);
    if (omega != 0.0) prefactor *= std::polar(1.0, two_pi * omega * t);

    const std::size_t n = lattice.size();
    const int* kptr = lattice.waves.data();
    for (std::size_t i = 0; i < n; ++i, kptr += d) {
      complex v = prefactor;
      for (std::size_t a = 0; a < d; ++a) {
        const int k = kptr[a];
        const complex p = ws.phase[a][static_cast<std::size_t>(k < 0 ? -k : k)];
        v *= (k < 0) ? std::conj(p) : p;
      }
      out[i] = v;
    }
  }
};

}  // namespace ergq
