#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "ergq/metric.hpp"
#include "ergq/observables.hpp"
#include "ergq/rng.hpp"

using namespace ergq;
using Catch::Approx;

namespace {

QuotientSample sample_with(std::vector<complex> avg, double omega = 0.0) {
  QuotientSample s;
  s.averages = std::move(avg);
  s.omega = omega;
  s.converged = true;
  return s;
}

std::size_t full_index(const WaveLattice& lat, std::span<const int> k) {
  std::size_t idx = 0;
  for (int d = 0; d < lat.dim; ++d) {
    const auto dd = static_cast<std::size_t>(d);
    idx = idx * static_cast<std::size_t>(2 * lat.bounds[dd] + 1) +
          static_cast<std::size_t>(k[dd] + lat.bounds[dd]);
  }
  return idx;
}

}  // namespace

TEST_CASE("sobolev weights", "[metric]") {
  std::vector<int> k0{0, 0, 0};
  CHECK(sobolev_weight(k0, 2.0) == 1.0);
  CHECK(sobolev_weight(k0, 0.5) == 1.0);

  std::vector<int> k1{1, 0, 0};
  const double expect = std::pow(1.0 + two_pi * two_pi, -2.0);
  CHECK(sobolev_weight(k1, 2.0) == Approx(expect).epsilon(1e-14));
  CHECK(sobolev_weight(k1, 2.0) == Approx(6.1031e-4).margin(1e-7));

  // monotone decrease when any component grows
  std::vector<int> a{1, 2, 0}, b{1, 3, 0}, c{2, 2, 0};
  CHECK(sobolev_weight(b, 2.0) < sobolev_weight(a, 2.0));
  CHECK(sobolev_weight(c, 2.0) < sobolev_weight(a, 2.0));

  CHECK(default_sobolev_order(3) == 2.0);
  CHECK(default_sobolev_order(1) == 1.0);
}

TEST_CASE("weight table doubles the stored half-pair representatives", "[metric]") {
  auto half = make_lattice(2, {2, 2}, true);
  auto params = SobolevParams::make(half, 1.5);
  CHECK(params.weights[half.zero_index()] == 1.0);
  for (std::size_t i = 0; i < half.size(); ++i) {
    if (i == half.zero_index()) continue;
    CHECK(params.weights[i] == Approx(2.0 * sobolev_weight(half.wave(i), 1.5)).epsilon(1e-15));
  }
}

TEST_CASE("distance of identical samples is zero and single-mode bumps pass through",
          "[metric]") {
  auto lat = make_lattice(3, {2, 2, 2}, false);
  auto params = SobolevParams::make(lat, 2.0);
  Rng rng(5);
  std::vector<complex> v(lat.size());
  for (auto& z : v) z = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  auto a = sample_with(v);
  CHECK(distance(a, a, params) == 0.0);

  auto w = v;
  const double delta = 0.123;
  w[lat.zero_index()] += complex{0.0, delta};
  auto b = sample_with(w);
  CHECK(distance(a, b, params) == Approx(delta).epsilon(1e-14));
}

TEST_CASE("distance preconditions", "[metric]") {
  auto lat = make_lattice(1, {2}, false);
  auto params = SobolevParams::make(lat, 1.0);
  auto a = sample_with(std::vector<complex>(lat.size()));
  auto b = sample_with(std::vector<complex>(lat.size() + 1));
  CHECK_THROWS_AS(distance(a, b, params), std::invalid_argument);
  auto c = sample_with(std::vector<complex>(lat.size()), -1.0);
  CHECK_THROWS_AS(distance(a, c, params), std::invalid_argument);
}

TEST_CASE("half-lattice distance equals the full-lattice distance", "[metric]") {
  auto full = make_lattice(3, {3, 3, 3}, false);
  auto half = make_lattice(3, {3, 3, 3}, true);
  auto pfull = SobolevParams::make(full, 2.0);
  auto phalf = SobolevParams::make(half, 2.0);

  Rng rng(9);
  auto conj_symmetric = [&]() {
    std::vector<complex> v(full.size());
    for (std::size_t i = 0; i < full.size(); ++i) {
      const std::size_t j = full.size() - 1 - i;  // the -k partner
      if (i < j) {
        v[i] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
        v[j] = std::conj(v[i]);
      } else if (i == j) {
        v[i] = {rng.uniform(-1, 1), 0.0};
      }
    }
    return v;
  };

  for (int rep = 0; rep < 10; ++rep) {
    auto va = conj_symmetric();
    auto vb = conj_symmetric();
    auto restrict_half = [&](const std::vector<complex>& v) {
      std::vector<complex> h(half.size());
      for (std::size_t i = 0; i < half.size(); ++i) h[i] = v[full_index(full, half.wave(i))];
      return h;
    };
    const double dfull = distance(sample_with(va), sample_with(vb), pfull);
    const double dhalf = distance(sample_with(restrict_half(va)), sample_with(restrict_half(vb)),
                                  phalf);
    CHECK(dhalf == Approx(dfull).epsilon(1e-12));
  }
}

TEST_CASE("pairwise matrix matches per-pair distances and is exactly symmetric", "[metric]") {
  auto lat = make_lattice(2, {2, 2}, false);
  auto params = SobolevParams::make(lat, 1.5);
  Rng rng(13);
  std::vector<QuotientSample> ensemble;
  for (int i = 0; i < 3; ++i) {
    std::vector<complex> v(lat.size());
    for (auto& z : v) z = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    ensemble.push_back(sample_with(std::move(v)));
  }
  auto dm = pairwise_matrix(ensemble, params);
  REQUIRE(dm.n == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(dm(i, i) == 0.0);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(dm(i, j) == dm(j, i));
      CHECK(dm(i, j) == distance(ensemble[i], ensemble[j], params));
    }
  }

  std::vector<QuotientSample> single{ensemble[0]};
  auto one = pairwise_matrix(single, params);
  CHECK(one.n == 1);
  CHECK(one(0, 0) == 0.0);

  std::vector<QuotientSample> dup{ensemble[0], ensemble[0]};
  auto two = pairwise_matrix(dup, params);
  CHECK(two(0, 1) == 0.0);

  std::vector<QuotientSample> empty;
  CHECK_THROWS_AS(pairwise_matrix(empty, params), std::invalid_argument);
}

TEST_CASE("metric axioms hold on random triples", "[metric]") {
  auto lat = make_lattice(2, {3, 3}, false);
  auto params = SobolevParams::make(lat, 1.5);
  Rng rng(17);
  auto random_sample = [&]() {
    std::vector<complex> v(lat.size());
    for (auto& z : v) z = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    return sample_with(std::move(v));
  };
  for (int rep = 0; rep < 1000; ++rep) {
    auto a = random_sample(), b = random_sample(), c = random_sample();
    const double ab = distance(a, b, params);
    const double ba = distance(b, a, params);
    const double ac = distance(a, c, params);
    const double bc = distance(b, c, params);
    CHECK(ab >= 0.0);
    CHECK(ab == ba);  // exact symmetry
    CHECK(ac <= ab + bc + 1e-12);
  }
  // zero distance iff equal coefficient vectors
  auto a = random_sample();
  auto b = a;
  CHECK(distance(a, b, params) == 0.0);
  b.averages[3] += complex{1e-9, 0.0};
  CHECK(distance(a, b, params) > 0.0);
}

TEST_CASE("truncation bound evaluates the closed form", "[metric]") {
  auto tb3 = truncation_bound(3, 10);
  CHECK(tb3.constant == Approx(0.03025).margin(1e-4));
  CHECK(tb3.bound == Approx(9.57e-3).margin(1e-4));

  auto k1 = truncation_bound(3, 4);
  auto k4 = truncation_bound(3, 16);
  CHECK(k4.bound == Approx(0.5 * k1.bound).epsilon(1e-12));

  CHECK_THROWS_AS(truncation_bound(3, 0), std::invalid_argument);
  CHECK_THROWS_AS(truncation_bound(0, 4), std::invalid_argument);
}

TEST_CASE("tail of admissible coefficients stays under the truncation bound", "[metric]") {
  Rng rng(21);
  for (int dim = 1; dim <= 3; ++dim) {
    const double cap = std::pow(two_pi, -0.5 * dim);
    const double s = default_sobolev_order(dim);
    for (int cutoff : {2, 4, 8}) {
      const auto support = make_lattice(dim, std::vector<int>(static_cast<std::size_t>(dim), 4 * cutoff), false);
      std::vector<double> w(support.size());
      std::vector<bool> outside(support.size());
      for (std::size_t i = 0; i < support.size(); ++i) {
        auto k = support.wave(i);
        w[i] = sobolev_weight(k, s);
        bool out = false;
        for (int kd : k)
          if (kd > cutoff || kd < -cutoff) out = true;
        outside[i] = out;
      }
      const double bound = truncation_bound(dim, cutoff).bound;
      for (int draw = 0; draw < 20; ++draw) {
        double tail = 0.0;
        for (std::size_t i = 0; i < support.size(); ++i) {
          if (!outside[i]) continue;
          const double c = rng.uniform(0.0, cap);
          tail += w[i] * c * c;
        }
        CHECK(std::sqrt(tail) <= bound);
      }
    }
  }
}

TEST_CASE("high-wavenumber perturbations are downweighted", "[metric]") {
  auto lat = make_lattice(3, {4, 4, 4}, false);
  auto params = SobolevParams::make(lat, 2.0);
  std::vector<complex> v(lat.size(), complex{0.01, -0.02});
  auto base = sample_with(v);

  const double delta = 5e-3;
  // bump at the cutoff shell
  std::size_t shell = lat.size();
  for (std::size_t i = 0; i < lat.size(); ++i) {
    auto k = lat.wave(i);
    if (k[0] == 4 && k[1] == 0 && k[2] == 0) shell = i;
  }
  REQUIRE(shell < lat.size());
  auto bumped = v;
  bumped[shell] += complex{delta, 0.0};
  const double d_shell = distance(base, sample_with(bumped), params);
  CHECK(d_shell <= std::sqrt(params.weights[shell]) * delta + 1e-15);

  auto bumped0 = v;
  bumped0[lat.zero_index()] += complex{delta, 0.0};
  const double d_zero = distance(base, sample_with(bumped0), params);
  CHECK(d_shell < d_zero);
  CHECK(d_zero == Approx(delta).epsilon(1e-12));
}
