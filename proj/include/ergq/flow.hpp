#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ergq/common.hpp"

namespace ergq {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double length() const { return hi - lo; }
};

/// A continuous-time vector field on a box domain. The domain box is used
/// for rescaling states before evaluating observables; states are never
/// wrapped onto it during integration (periodic observables make wrapping
/// unnecessary and discontinuities undesirable).
struct FlowSystem {
  using Rhs = std::function<void(std::span<const double>, double, std::span<double>)>;
  /// Per-axis weights applied to partial derivatives when forming the
  /// divergence; identity when absent. Non-Cartesian coordinates (the
  /// swirling-vortex field below) supply state-dependent weights.
  using MetricWeights = std::function<void(std::span<const double>, std::span<double>)>;

  std::string name;
  int dim = 0;
  Rhs rhs;
  std::vector<Interval> domain;
  std::vector<bool> periodic_axes;
  bool time_dependent = false;
  MetricWeights metric_weights;  // optional
};

/// A periodically driven system made autonomous by adjoining a phase axis
/// tau with constant velocity c. One revolution of tau corresponds to one
/// forcing period: tau lives on [0, c*period).
struct ExtendedSystem {
  FlowSystem base;
  double period = 1.0;
  double c = 1.0;
  FlowSystem extended;
  std::vector<std::string> warnings;
};

/// Checked evaluation of a vector field: dimension match on input, finite
/// output. Singular points surface as SingularState rather than NaN.
inline std::vector<double> eval_rhs(const FlowSystem& sys, std::span<const double> x,
                                    double t) {
  if (static_cast<int>(x.size()) != sys.dim)
    throw std::invalid_argument("eval_rhs: state has length " +
                                std::to_string(x.size()) + ", system dimension is " +
                                std::to_string(sys.dim));
  std::vector<double> v(static_cast<std::size_t>(sys.dim));
  sys.rhs(x, t, v);
  if (!all_finite(v))
    throw SingularState("eval_rhs: non-finite velocity for system '" + sys.name + "'");
  return v;
}

/// Steady volume-preserving flow on the unit 3-torus with three circulation
/// strengths. All axes periodic on [0,1); the 1/(2*pi) prefactor keeps unit
/// period in the rescaled coordinates.
inline FlowSystem builtin_abc(double a, double b, double c) {
  FlowSystem sys;
  sys.name = "abc";
  sys.dim = 3;
  sys.domain = {{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}};
  sys.periodic_axes = {true, true, true};
  sys.time_dependent = false;
  sys.rhs = [a, b, c](std::span<const double> x, double, std::span<double> out) {
    const double sx = std::sin(two_pi * x[0]), cx = std::cos(two_pi * x[0]);
    const double sy = std::sin(two_pi * x[1]), cy = std::cos(two_pi * x[1]);
    const double sz = std::sin(two_pi * x[2]), cz = std::cos(two_pi * x[2]);
    out[0] = (a * sz + c * cy) / two_pi;
    out[1] = (b * sx + a * cz) / two_pi;
    out[2] = (c * sy + b * cx) / two_pi;
  };
  return sys;
}

/// Periodically forced swirling vortex in coordinates (R, z, theta), with
/// swirl strength c and forcing strength eps. The theta axis is an angle on
/// [0, 2*pi); R and z live in a bounded invariant region of [0, 0.5] x [-1, 1].
///
/// The swirl term c/(2R) is singular on the axis, which no legitimate
/// trajectory visits (seeds keep R >= 0.01); states with R < 1e-8 are
/// rejected as singular.
///
/// The field is divergence-free for every (c, eps, t) in the weighted sense
/// div = dA_R/dR + dA_z/dz + (2R)^{-1/2} dA_theta/dtheta, i.e. with the
/// theta derivative weighted by the reciprocal of the physical cylindrical
/// radius sqrt(2R).
inline FlowSystem builtin_hill(double c, double eps) {
  FlowSystem sys;
  sys.name = "hill";
  sys.dim = 3;
  sys.domain = {{0.0, 0.5}, {-1.0, 1.0}, {0.0, two_pi}};
  sys.periodic_axes = {false, false, true};
  sys.time_dependent = true;
  sys.rhs = [c, eps](std::span<const double> x, double t, std::span<double> out) {
    const double R = x[0], z = x[1], theta = x[2];
    if (R < 1e-8)
      throw SingularState("hill: state reached the singular axis (R = " +
                          std::to_string(R) + ")");
    const double root = std::sqrt(2.0 * R);
    const double forcing = std::sin(two_pi * t);
    const double st = std::sin(theta), ct = std::cos(theta);
    out[0] = 2.0 * R * z + eps * root * st * forcing;
    out[1] = 1.0 - 4.0 * R - z * z + eps * (z / root) * st * forcing;
    out[2] = c / (2.0 * R) + eps * 2.0 * ct * forcing;
  };
  sys.metric_weights = [](std::span<const double> x, std::span<double> w) {
    w[0] = 1.0;
    w[1] = 1.0;
    w[2] = 1.0 / std::sqrt(2.0 * x[0]);
  };
  return sys;
}

/// Conserved quantity of the unforced (c = eps = 0) vortex restricted to a
/// fixed-theta plane.
inline double hill_hamiltonian(double R, double z) {
  return R * z * z - R + 2.0 * R * R;
}

/// Unit-speed rotation on the circle, rescaled to [0,1).
inline FlowSystem builtin_oscillator() {
  FlowSystem sys;
  sys.name = "oscillator";
  sys.dim = 1;
  sys.domain = {{0.0, 1.0}};
  sys.periodic_axes = {true};
  sys.time_dependent = false;
  sys.rhs = [](std::span<const double>, double, std::span<double> out) { out[0] = 1.0; };
  return sys;
}

/// Adjoins the phase axis. The base components of the extended field are
/// evaluated by the base rhs at physical time t = tau / c, so they agree
/// exactly (same floating-point path) with the original system.
inline ExtendedSystem extend_periodic(const FlowSystem& sys, double period, double c) {
  if (period <= 0.0) throw std::invalid_argument("extend_periodic: period must be positive");
  if (c <= 0.0) throw std::invalid_argument("extend_periodic: c must be positive");
  ExtendedSystem ext;
  ext.base = sys;
  ext.period = period;
  ext.c = c;
  if (!sys.time_dependent)
    ext.warnings.push_back("extend_periodic: system '" + sys.name +
                           "' is autonomous; the extension adds a redundant phase axis");

  FlowSystem e;
  e.name = sys.name + "_extended";
  e.dim = sys.dim + 1;
  e.domain = sys.domain;
  e.domain.push_back({0.0, c * period});
  e.periodic_axes = sys.periodic_axes;
  e.periodic_axes.push_back(true);
  e.time_dependent = false;
  const auto base_rhs = sys.rhs;
  const int base_dim = sys.dim;
  e.rhs = [base_rhs, base_dim, c](std::span<const double> x, double, std::span<double> out) {
    const double tau = x[static_cast<std::size_t>(base_dim)];
    base_rhs(x.first(static_cast<std::size_t>(base_dim)), tau / c,
             out.first(static_cast<std::size_t>(base_dim)));
    out[static_cast<std::size_t>(base_dim)] = c;
  };
  if (sys.metric_weights) {
    const auto base_w = sys.metric_weights;
    e.metric_weights = [base_w, base_dim](std::span<const double> x, std::span<double> w) {
      base_w(x.first(static_cast<std::size_t>(base_dim)),
             w.first(static_cast<std::size_t>(base_dim)));
      w[static_cast<std::size_t>(base_dim)] = 1.0;
    };
  }
  ext.extended = std::move(e);
  return ext;
}

/// Central-difference divergence with the system's per-axis metric weights.
/// Requires the point to be at least h away from non-periodic domain faces;
/// periodic axes pose no restriction since the field extends smoothly.
inline double divergence(const FlowSystem& sys, std::span<const double> x, double t,
                         double h) {
  if (static_cast<int>(x.size()) != sys.dim)
    throw std::invalid_argument("divergence: dimension mismatch");
  if (!(h > 0.0)) throw std::invalid_argument("divergence: step must be positive");
  const auto d = static_cast<std::size_t>(sys.dim);
  for (std::size_t i = 0; i < d; ++i) {
    if (h < 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x[i])))
      throw std::invalid_argument("divergence: step underflows coordinate spacing");
    if (!sys.periodic_axes[i]) {
      if (x[i] - h < sys.domain[i].lo || x[i] + h > sys.domain[i].hi)
        throw std::invalid_argument("divergence: point closer than h to a domain face");
    }
  }
  std::vector<double> w(d, 1.0);
  if (sys.metric_weights) sys.metric_weights(x, w);
  std::vector<double> xp(x.begin(), x.end()), xm(x.begin(), x.end());
  std::vector<double> vp(d), vm(d);
  double div = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    sys.rhs(xp, t, vp);
    sys.rhs(xm, t, vm);
    div += w[i] * (vp[i] - vm[i]) / (2.0 * h);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return div;
}

}  // namespace ergq
