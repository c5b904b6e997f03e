#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ergq/common.hpp"
#include "ergq/flow.hpp"
#include "ergq/observables.hpp"
#include "ergq/ode.hpp"

namespace ergq {

/// Controls online trajectory averaging and its convergence-based stopping
/// rule. Integration pauses every t_e time units; once the elapsed time
/// reaches t_min, the run stops at the first pause where the averages moved
/// by less than atol_stop (sup norm) since the previous pause, or at t_max
/// without convergence.
struct AveragingConfig {
  double atol_stop = 1e-4;
  double t_min = 0.0;
  double t_e = 0.0;
  double t_max = 0.0;  // 0 = 5 * t_min
  double omega = 0.0;  // harmonic frequency; 0 = plain ergodic averaging
  OdeSettings ode;
  /// Cap on the observable phase advance per integration step, in radians.
  /// Keeps the left-endpoint quadrature resolved even where the solver
  /// alone would take much longer steps. 0 disables.
  double quad_cap = 0.5;

  double resolved_t_max() const { return t_max > 0.0 ? t_max : 5.0 * t_min; }

  void validate() const {
    if (!(t_e > 0.0)) throw ConfigError("averaging: t_e must be positive");
    if (!(atol_stop > 0.0)) throw ConfigError("averaging: atol_stop must be positive");
    if (t_min < 0.0) throw ConfigError("averaging: t_min must be nonnegative");
    if (resolved_t_max() < t_min) throw ConfigError("averaging: t_max must be >= t_min");
  }
};

/// One trajectory's image in the quotient: the vector of averaged
/// observables plus convergence metadata. `failed` marks trajectories that
/// hit a singularity or an integrator failure; they are kept in the
/// ensemble so downstream stages can account for them explicitly.
struct QuotientSample {
  std::vector<double> x0;
  double omega = 0.0;
  std::vector<complex> averages;
  double stop_time = 0.0;
  double final_adiff = std::numeric_limits<double>::infinity();
  bool converged = false;
  bool failed = false;
  std::string failure;
  std::size_t n_steps = 0;
};

/// Sup-norm distance between two average vectors.
inline double adiff(std::span<const complex> a, std::span<const complex> b) {
  if (a.size() != b.size()) throw std::invalid_argument("adiff: length mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Running weighted sums of observables along a trajectory, one term per
/// accepted integration step: sum += (t_n - t_{n-1}) * f(x_{n-1}) with the
/// harmonic modulation exp(i*2*pi*omega*t_{n-1}) folded in. Finalization
/// divides by the elapsed time; an empty accumulator finalizes to the
/// pointwise observable values at the start state.
class RunningAverage {
 public:
  RunningAverage(const ObservableBasis& basis, double omega)
      : basis_(&basis), omega_(omega), sum_(basis.lattice.size(), complex{0.0, 0.0}),
        buf_(basis.lattice.size()) {
    basis.prepare(ws_);
  }

  void add_step(double t_prev, std::span<const double> x_prev, double t_now) {
    const double dt = t_now - t_prev;
    if (dt < 0.0) throw std::invalid_argument("accumulate: steps must arrive in time order");
    basis_->eval(x_prev, t_prev, omega_, buf_, ws_);
    for (std::size_t i = 0; i < sum_.size(); ++i) sum_[i] += dt * buf_[i];
    elapsed_ += dt;
    ++n_steps_;
  }

  /// Combines two accumulators over consecutive step sequences.
  void merge(const RunningAverage& other) {
    if (other.sum_.size() != sum_.size())
      throw std::invalid_argument("accumulate: merge with mismatched basis");
    for (std::size_t i = 0; i < sum_.size(); ++i) sum_[i] += other.sum_[i];
    elapsed_ += other.elapsed_;
    n_steps_ += other.n_steps_;
  }

  double elapsed() const { return elapsed_; }
  std::size_t n_steps() const { return n_steps_; }

  /// Current averages; start/start_time give the degenerate zero-length
  /// value (observables evaluated at the start point).
  std::vector<complex> finalize(std::span<const double> start, double start_time) const {
    std::vector<complex> out(sum_.size());
    if (elapsed_ <= 0.0) {
      basis_->eval(start, start_time, omega_, out, ws_);
      return out;
    }
    for (std::size_t i = 0; i < sum_.size(); ++i) out[i] = sum_[i] / elapsed_;
    return out;
  }

 private:
  const ObservableBasis* basis_;
  double omega_;
  std::vector<complex> sum_;
  double elapsed_ = 0.0;
  std::size_t n_steps_ = 0;
  mutable BasisWorkspace ws_;
  std::vector<complex> buf_;
};

namespace detail {

/// Step cap keeping the per-step phase advance of the fastest observable
/// below cfg.quad_cap radians; uses the velocity at the step start.
inline Dopri5::StepCap make_quad_cap(const ObservableBasis& basis, double omega,
                                     double cap_radians) {
  if (cap_radians <= 0.0) return {};
  std::vector<double> scale(basis.domain.size());
  for (std::size_t d = 0; d < scale.size(); ++d)
    scale[d] = static_cast<double>(basis.lattice.bounds[d]) / basis.domain[d].length();
  const double omega_term = std::abs(omega);
  return [scale, omega_term, cap_radians](double, std::span<const double>,
                                          std::span<const double> dxdt) {
    double rate = omega_term;
    for (std::size_t d = 0; d < scale.size(); ++d) rate += scale[d] * std::abs(dxdt[d]);
    rate *= two_pi;
    if (rate <= 0.0) return std::numeric_limits<double>::infinity();
    return cap_radians / rate;
  };
}

}  // namespace detail

/// Integrates from x0 (t = 0) in pause intervals of cfg.t_e, accumulating
/// observable averages online, and stops by the sup-norm stopping rule.
inline QuotientSample run_until_converged(const FlowSystem& sys, std::span<const double> x0,
                                          const ObservableBasis& basis,
                                          const AveragingConfig& cfg) {
  cfg.validate();
  if (static_cast<int>(x0.size()) != sys.dim)
    throw std::invalid_argument("run_until_converged: state dimension mismatch");

  QuotientSample sample;
  sample.x0.assign(x0.begin(), x0.end());
  sample.omega = cfg.omega;

  RunningAverage acc(basis, cfg.omega);
  std::vector<complex> prev = acc.finalize(x0, 0.0);  // zero-length baseline

  OdeSettings ode = cfg.ode;
  ode.hmax = std::min(ode.hmax, cfg.t_e);
  Dopri5 stepper(sys.rhs, sys.dim, ode);
  const auto cap = detail::make_quad_cap(basis, cfg.omega, cfg.quad_cap);
  const auto observer = [&acc](double tp, std::span<const double> xp, double tn,
                               std::span<const double>) { acc.add_step(tp, xp, tn); };

  std::vector<double> y(x0.begin(), x0.end());
  const double t_max = cfg.resolved_t_max();
  double t = 0.0;
  try {
    for (std::size_t j = 1; t < t_max; ++j) {
      const double t_target = std::min(static_cast<double>(j) * cfg.t_e, t_max);
      auto stats = stepper.integrate(y, t, t_target, observer, cap);
      sample.n_steps += stats.n_accepted;
      t = t_target;

      std::vector<complex> cur = acc.finalize(x0, 0.0);
      sample.final_adiff = adiff(cur, prev);
      prev = std::move(cur);
      sample.stop_time = t;
      if (t >= cfg.t_min && sample.final_adiff < cfg.atol_stop) {
        sample.converged = true;
        break;
      }
    }
  } catch (const std::runtime_error& err) {
    sample.failed = true;
    sample.failure = err.what();
    sample.converged = false;
  }
  sample.averages = std::move(prev);
  return sample;
}

/// Records the stopping statistic at each requested pause time without
/// terminating early; used to study convergence rates offline.
inline std::vector<std::pair<double, double>> convergence_probe(
    const FlowSystem& sys, std::span<const double> x0, const ObservableBasis& basis,
    std::span<const double> pause_grid, const AveragingConfig& cfg) {
  if (static_cast<int>(x0.size()) != sys.dim)
    throw std::invalid_argument("convergence_probe: state dimension mismatch");
  for (std::size_t i = 0; i < pause_grid.size(); ++i) {
    if (!(pause_grid[i] > 0.0) || (i > 0 && pause_grid[i] <= pause_grid[i - 1]))
      throw std::invalid_argument("convergence_probe: pause grid must be positive increasing");
  }

  RunningAverage acc(basis, cfg.omega);
  std::vector<complex> prev = acc.finalize(x0, 0.0);

  OdeSettings ode = cfg.ode;
  Dopri5 stepper(sys.rhs, sys.dim, ode);
  const auto cap = detail::make_quad_cap(basis, cfg.omega, cfg.quad_cap);
  const auto observer = [&acc](double tp, std::span<const double> xp, double tn,
                               std::span<const double>) { acc.add_step(tp, xp, tn); };

  std::vector<std::pair<double, double>> record;
  std::vector<double> y(x0.begin(), x0.end());
  double t = 0.0;
  for (double t_target : pause_grid) {
    stepper.integrate(y, t, t_target, observer, cap);
    t = t_target;
    std::vector<complex> cur = acc.finalize(x0, 0.0);
    record.emplace_back(t, adiff(cur, prev));
    prev = std::move(cur);
  }
  return record;
}

}  // namespace ergq
