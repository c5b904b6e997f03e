#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "ergq/observables.hpp"
#include "ergq/rng.hpp"

using namespace ergq;
using Catch::Approx;

TEST_CASE("lattice sizes and ordering", "[observables]") {
  auto l1 = make_lattice(1, {1}, false);
  REQUIRE(l1.size() == 3);
  CHECK(l1.wave(0)[0] == -1);
  CHECK(l1.wave(1)[0] == 0);
  CHECK(l1.wave(2)[0] == 1);
  CHECK(l1.zero_index() == 1);

  auto l3 = make_lattice(3, {10, 10, 10}, false);
  CHECK(l3.size() == 9261);  // 21^3

  auto lh = make_lattice(3, {8, 8, 4}, false);
  CHECK(lh.size() == 17 * 17 * 9);
}

TEST_CASE("half lattice keeps one of each conjugate pair plus zero", "[observables]") {
  for (auto [dim, bound] : {std::pair{1, 3}, {2, 2}, {3, 2}}) {
    auto full = make_lattice(dim, std::vector<int>(static_cast<std::size_t>(dim), bound), false);
    auto half = make_lattice(dim, std::vector<int>(static_cast<std::size_t>(dim), bound), true);
    CHECK(half.size() == (full.size() + 1) / 2);
    CHECK(half.zero_index() == 0);
    for (int kd : half.wave(0)) CHECK(kd == 0);
    // stored representatives are lexicographically positive and unique
    for (std::size_t i = 1; i < half.size(); ++i) {
      auto k = half.wave(i);
      int first = 0;
      for (int kd : k)
        if (kd != 0) {
          first = kd;
          break;
        }
      CHECK(first > 0);
    }
    // lexicographic order is strictly increasing
    for (std::size_t i = 1; i < half.size(); ++i) {
      auto a = half.wave(i - 1), b = half.wave(i);
      CHECK(std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end()));
    }
  }
}

TEST_CASE("rescale maps domain corners and centers", "[observables]") {
  std::vector<Interval> unit{{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}};
  std::vector<double> x{0.3, 0.7, 0.1}, y(3);
  rescale_state(unit, x, y);
  CHECK(y[0] == 0.3);
  CHECK(y[1] == 0.7);
  CHECK(y[2] == 0.1);

  std::vector<Interval> hill{{0.0, 0.5}, {-1.0, 1.0}, {0.0, two_pi}};
  std::vector<double> p{0.25, 0.0, std::numbers::pi};
  rescale_state(hill, p, y);
  CHECK(y[0] == Approx(0.5));
  CHECK(y[1] == Approx(0.5));
  CHECK(y[2] == Approx(0.5));

  std::vector<double> corner{0.0, -1.0, 0.0};
  rescale_state(hill, corner, y);
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 0.0);
  CHECK(y[2] == 0.0);

  std::vector<Interval> degenerate{{1.0, 1.0}};
  std::vector<double> q{1.0}, r(1);
  CHECK_THROWS_AS(rescale_state(degenerate, q, r), std::invalid_argument);
}

TEST_CASE("basis evaluation has constant modulus and unit zero mode", "[observables]") {
  auto basis = ObservableBasis::make(make_lattice(3, {3, 3, 3}, false),
                                     {{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}});
  const double norm = std::pow(two_pi, -1.5);
  CHECK(basis.norm_const == Approx(0.0634936).margin(1e-7));

  BasisWorkspace ws;
  std::vector<complex> out(basis.lattice.size());

  std::vector<double> zero{0.0, 0.0, 0.0};
  basis.eval(zero, 0.0, 0.0, out, ws);
  for (const auto& v : out) {
    CHECK(v.real() == Approx(norm).epsilon(1e-14));
    CHECK(v.imag() == Approx(0.0).margin(1e-16));
  }

  Rng rng(17);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> x{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0),
                          rng.uniform(-2.0, 2.0)};
    basis.eval(x, 0.0, 0.0, out, ws);
    for (const auto& v : out) CHECK(std::abs(v) == Approx(norm).epsilon(1e-14));
    CHECK(out[basis.lattice.zero_index()].real() == Approx(norm).epsilon(1e-14));
  }
}

TEST_CASE("separable evaluation matches the per-wavevector formula", "[observables]") {
  auto basis = ObservableBasis::make(make_lattice(3, {4, 3, 2}, false),
                                     {{0.0, 0.5}, {-1.0, 1.0}, {0.0, two_pi}});
  BasisWorkspace ws;
  std::vector<complex> out(basis.lattice.size());
  Rng rng(23);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<double> x{rng.uniform(0.0, 0.5), rng.uniform(-1.0, 1.0),
                          rng.uniform(0.0, two_pi)};
    const double t = rng.uniform(0.0, 10.0);
    const double omega = rep % 2 == 0 ? 0.0 : -1.0;
    basis.eval(x, t, omega, out, ws);

    std::vector<double> y(3);
    rescale_state(basis.domain, x, y);
    for (std::size_t i = 0; i < basis.lattice.size(); ++i) {
      auto k = basis.lattice.wave(i);
      double phase = omega * t;
      for (int d = 0; d < 3; ++d) phase += k[static_cast<std::size_t>(d)] * y[static_cast<std::size_t>(d)];
      const complex want = basis.norm_const * std::polar(1.0, two_pi * phase);
      CHECK(std::abs(out[i] - want) < 1e-12);
    }
  }
}

TEST_CASE("conjugate symmetry and periodicity", "[observables]") {
  auto full = make_lattice(2, {3, 3}, false);
  auto basis = ObservableBasis::make(full, {{0.0, 2.0}, {-1.0, 3.0}});
  BasisWorkspace ws;
  std::vector<complex> out(full.size()), out2(full.size());
  Rng rng(29);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<double> x{rng.uniform(0.0, 2.0), rng.uniform(-1.0, 3.0)};
    basis.eval(x, 0.0, 0.0, out, ws);
    // entry at -k is the conjugate of the entry at k
    for (std::size_t i = 0; i < full.size(); ++i) {
      const std::size_t j = full.size() - 1 - i;  // lex order maps k <-> -k by reversal
      CHECK(std::abs(out[j] - std::conj(out[i])) < 1e-14);
    }
    // shifting by one domain length along an axis changes nothing
    std::vector<double> shifted{x[0] + 2.0, x[1]};
    basis.eval(shifted, 0.0, 0.0, out2, ws);
    for (std::size_t i = 0; i < full.size(); ++i) CHECK(std::abs(out2[i] - out[i]) < 1e-12);
  }
}
