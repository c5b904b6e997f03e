#pragma once

#include <cstdint>
#include <vector>

#include "ergq/common.hpp"
#include "ergq/flow.hpp"
#include "ergq/rng.hpp"

namespace ergq {

/// How initial conditions are placed. `Plane` fixes one axis to a value and
/// draws the remaining coordinates uniformly from the box; useful when a
/// lower-dimensional section intersects all features of interest.
struct IcSpec {
  enum class Mode { Grid, Uniform, Plane };
  Mode mode = Mode::Uniform;
  std::size_t n = 0;                  // uniform / plane
  std::uint64_t seed = 0;
  std::vector<Interval> box;          // per-axis sampling window
  std::vector<std::size_t> shape;     // grid: per-axis counts
  int axis = -1;                      // plane: fixed axis
  double value = 0.0;                 // plane: fixed coordinate
};

/// Deterministic set of initial states, row-major n x dim.
inline std::vector<double> sample_initial_conditions(const IcSpec& spec, int dim) {
  if (static_cast<int>(spec.box.size()) != dim)
    throw ConfigError("ic: sampling box must list one interval per axis");
  for (const auto& iv : spec.box)
    if (iv.hi < iv.lo) throw ConfigError("ic: empty sampling region");

  std::vector<double> out;
  const auto d = static_cast<std::size_t>(dim);

  switch (spec.mode) {
    case IcSpec::Mode::Uniform: {
      if (spec.n == 0) throw ConfigError("ic: count must be positive");
      Rng rng(spec.seed);
      out.resize(spec.n * d);
      for (std::size_t i = 0; i < spec.n; ++i)
        for (std::size_t a = 0; a < d; ++a)
          out[i * d + a] = rng.uniform(spec.box[a].lo, spec.box[a].hi);
      break;
    }
    case IcSpec::Mode::Plane: {
      if (spec.n == 0) throw ConfigError("ic: count must be positive");
      if (spec.axis < 0 || spec.axis >= dim)
        throw ConfigError("ic: plane axis out of range");
      Rng rng(spec.seed);
      out.resize(spec.n * d);
      for (std::size_t i = 0; i < spec.n; ++i)
        for (std::size_t a = 0; a < d; ++a)
          out[i * d + a] = (static_cast<int>(a) == spec.axis)
                               ? spec.value
                               : rng.uniform(spec.box[a].lo, spec.box[a].hi);
      break;
    }
    case IcSpec::Mode::Grid: {
      if (spec.shape.size() != d) throw ConfigError("ic: grid shape must list one count per axis");
      std::size_t total = 1;
      for (std::size_t c : spec.shape) {
        if (c == 0) throw ConfigError("ic: grid counts must be positive");
        total *= c;
      }
      out.resize(total * d);
      std::vector<std::size_t> idx(d, 0);
      for (std::size_t i = 0; i < total; ++i) {
        for (std::size_t a = 0; a < d; ++a) {
          // cell centers, so periodic axes get no duplicated endpoint
          const double frac =
              (static_cast<double>(idx[a]) + 0.5) / static_cast<double>(spec.shape[a]);
          out[i * d + a] = spec.box[a].lo + frac * (spec.box[a].hi - spec.box[a].lo);
        }
        for (std::size_t a = d; a-- > 0;) {
          if (++idx[a] < spec.shape[a]) break;
          idx[a] = 0;
        }
      }
      break;
    }
  }
  if (out.empty()) throw ConfigError("ic: empty sampling region");
  return out;
}

}  // namespace ergq
