#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "ergq/common.hpp"
#include "ergq/flow.hpp"

namespace ergq {

struct OdeSettings {
  double rtol = 1e-8;
  double atol = 1e-10;
  double h0 = 0.0;    // 0 = choose automatically
  double hmax = std::numeric_limits<double>::infinity();
  std::size_t max_steps = 100'000'000;
};

struct OdeStats {
  std::size_t n_accepted = 0;
  std::size_t n_rejected = 0;
};

/// Embedded Runge-Kutta 5(4) pair (Dormand-Prince) with PI step-size
/// control and first-same-as-last reuse. Steps land exactly on the interval
/// endpoint. The observer is called once per accepted step with
/// (t_prev, y_prev, t_new); an optional step_cap(t, y, dydt) bounds the next
/// step length (used to keep quadrature of oscillatory observables honest).
class Dopri5 {
 public:
  using Observer =
      std::function<void(double, std::span<const double>, double, std::span<const double>)>;
  using StepCap = std::function<double(double, std::span<const double>, std::span<const double>)>;

  Dopri5(FlowSystem::Rhs rhs, int dim, OdeSettings settings)
      : rhs_(std::move(rhs)), dim_(static_cast<std::size_t>(dim)), s_(settings) {
    for (auto* v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &ytmp_, &ynew_, &yerr_})
      v->resize(dim_);
  }

  /// Integrates y in place from t0 to t1 (t1 > t0).
  OdeStats integrate(std::span<double> y, double t0, double t1,
                     const Observer& observer = {}, const StepCap& step_cap = {}) {
    if (!(t1 > t0)) throw std::invalid_argument("integrate: need t1 > t0");
    if (y.size() != dim_) throw std::invalid_argument("integrate: state dimension mismatch");
    if (!all_finite(y)) throw SingularState("integrate: non-finite initial state");

    OdeStats stats;
    double t = t0;
    rhs_(y, t, k1_);
    check_finite(k1_, t);

    double h = s_.h0 > 0.0 ? s_.h0 : initial_step(y, t, t1);
    double facold = 1e-4;
    yprev_.assign(y.begin(), y.end());

    while (t < t1) {
      if (stats.n_accepted + stats.n_rejected > s_.max_steps)
        throw OdeFailure("integrate: step budget exhausted");

      h = std::min(h, s_.hmax);
      if (step_cap) h = std::min(h, std::max(step_cap(t, y, k1_), min_step(t) * 4.0));
      bool last = false;
      if (t + h >= t1) {
        h = t1 - t;
        last = true;
      }
      if (h < min_step(t)) throw OdeFailure("integrate: step size underflow at t = " + std::to_string(t));

      attempt_step(y, t, h);
      const double err = error_norm(y);

      // PI controller (order-5 exponent softened by the previous error)
      static constexpr double beta = 0.04, expo1 = 0.2 - beta * 0.75, safe = 0.9;
      const double fac11 = std::pow(std::max(err, 1e-32), expo1);
      if (err <= 1.0) {
        // accept
        const double t_new = last ? t1 : t + h;
        if (!all_finite(ynew_))
          throw SingularState("integrate: non-finite state at t = " + std::to_string(t_new));
        if (observer) observer(t, yprev_, t_new, ynew_);
        std::copy(ynew_.begin(), ynew_.end(), y.begin());
        std::copy(ynew_.begin(), ynew_.end(), yprev_.begin());
        std::swap(k1_, k7_);  // FSAL
        t = t_new;
        ++stats.n_accepted;
        double fac = fac11 / std::pow(facold, beta);
        fac = std::max(0.1, std::min(5.0, fac / safe));
        h = h / fac;
        facold = std::max(err, 1e-4);
      } else {
        ++stats.n_rejected;
        h = h / std::min(5.0, fac11 / safe);
      }
    }
    return stats;
  }

 private:
  FlowSystem::Rhs rhs_;
  std::size_t dim_;
  OdeSettings s_;
  std::vector<double> k1_, k2_, k3_, k4_, k5_, k6_, k7_, ytmp_, ynew_, yerr_, yprev_;

  static double min_step(double t) {
    return 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
  }

  void check_finite(std::span<const double> v, double t) const {
    if (!all_finite(v))
      throw SingularState("integrate: non-finite velocity at t = " + std::to_string(t));
  }

  double initial_step(std::span<const double> y, double t, double t1) {
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
      const double sc = s_.atol + s_.rtol * std::abs(y[i]);
      d0 += (y[i] / sc) * (y[i] / sc);
      d1 += (k1_[i] / sc) * (k1_[i] / sc);
    }
    d0 = std::sqrt(d0 / static_cast<double>(dim_));
    d1 = std::sqrt(d1 / static_cast<double>(dim_));
    double h = (d0 < 1e-10 || d1 < 1e-10) ? 1e-6 : 0.01 * d0 / d1;
    h = std::min({h, t1 - t, s_.hmax});

    // one Euler probe to estimate the second derivative scale
    for (std::size_t i = 0; i < dim_; ++i) ytmp_[i] = y[i] + h * k1_[i];
    rhs_(ytmp_, t + h, k2_);
    check_finite(k2_, t + h);
    double d2 = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
      const double sc = s_.atol + s_.rtol * std::abs(y[i]);
      const double dk = (k2_[i] - k1_[i]) / sc;
      d2 += dk * dk;
    }
    d2 = std::sqrt(d2 / static_cast<double>(dim_)) / h;
    const double dmax = std::max(d1, d2);
    const double h1 = dmax > 1e-15 ? std::pow(0.01 / dmax, 0.2) : std::max(1e-6, h * 1e-3);
    return std::min({100.0 * h, h1, t1 - t, s_.hmax});
  }

  void attempt_step(std::span<const double> y, double t, double h) {
    const auto n = dim_;
    for (std::size_t i = 0; i < n; ++i) ytmp_[i] = y[i] + h * (a21 * k1_[i]);
    rhs_(ytmp_, t + c2 * h, k2_);
    for (std::size_t i = 0; i < n; ++i) ytmp_[i] = y[i] + h * (a31 * k1_[i] + a32 * k2_[i]);
    rhs_(ytmp_, t + c3 * h, k3_);
    for (std::size_t i = 0; i < n; ++i)
      ytmp_[i] = y[i] + h * (a41 * k1_[i] + a42 * k2_[i] + a43 * k3_[i]);
    rhs_(ytmp_, t + c4 * h, k4_);
    for (std::size_t i = 0; i < n; ++i)
      ytmp_[i] = y[i] + h * (a51 * k1_[i] + a52 * k2_[i] + a53 * k3_[i] + a54 * k4_[i]);
    rhs_(ytmp_, t + c5 * h, k5_);
    for (std::size_t i = 0; i < n; ++i)
      ytmp_[i] =
          y[i] + h * (a61 * k1_[i] + a62 * k2_[i] + a63 * k3_[i] + a64 * k4_[i] + a65 * k5_[i]);
    rhs_(ytmp_, t + h, k6_);
    for (std::size_t i = 0; i < n; ++i)
      ynew_[i] =
          y[i] + h * (b1 * k1_[i] + b3 * k3_[i] + b4 * k4_[i] + b5 * k5_[i] + b6 * k6_[i]);
    rhs_(ynew_, t + h, k7_);
    for (std::size_t i = 0; i < n; ++i)
      yerr_[i] = h * (e1 * k1_[i] + e3 * k3_[i] + e4 * k4_[i] + e5 * k5_[i] + e6 * k6_[i] +
                      e7 * k7_[i]);
  }

  double error_norm(std::span<const double> y) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
      const double sc = s_.atol + s_.rtol * std::max(std::abs(y[i]), std::abs(ynew_[i]));
      const double e = yerr_[i] / sc;
      sum += e * e;
    }
    if (!std::isfinite(sum)) return 1e10;  // reject and shrink
    return std::sqrt(sum / static_cast<double>(dim_));
  }

  // Dormand-Prince 5(4) tableau
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
};

/// Integrates and records every accepted step endpoint: (t_0, x_0) ... (t_N, x_N)
/// with t_0 = t0 and t_N = t1.
inline std::vector<std::pair<double, std::vector<double>>> integrate_adaptive(
    const FlowSystem& sys, std::span<const double> x0, double t0, double t1,
    const OdeSettings& settings = {}) {
  if (static_cast<int>(x0.size()) != sys.dim)
    throw std::invalid_argument("integrate_adaptive: state dimension mismatch");
  std::vector<std::pair<double, std::vector<double>>> out;
  out.emplace_back(t0, std::vector<double>(x0.begin(), x0.end()));
  std::vector<double> y(x0.begin(), x0.end());
  Dopri5 stepper(sys.rhs, sys.dim, settings);
  stepper.integrate(y, t0, t1,
                    [&out](double, std::span<const double>, double tn,
                           std::span<const double> xn) {
                      out.emplace_back(tn, std::vector<double>(xn.begin(), xn.end()));
                    });
  return out;
}

}  // namespace ergq
