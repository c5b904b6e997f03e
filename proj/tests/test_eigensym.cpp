#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ergq/eigensym.hpp"
#include "ergq/rng.hpp"

using namespace ergq;
using Catch::Approx;

namespace {

std::vector<double> random_symmetric(std::size_t n, Rng& rng) {
  std::vector<double> a(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double v = rng.uniform(-1.0, 1.0);
      a[i * n + j] = v;
      a[j * n + i] = v;
    }
  return a;
}

/// Roots of the characteristic polynomial of a symmetric 3x3 matrix via the
/// trigonometric closed form; independent route for checking the solver.
std::vector<double> eig3_closed_form(std::span<const double> a) {
  const double p1 = a[1] * a[1] + a[2] * a[2] + a[5] * a[5];
  const double q = (a[0] + a[4] + a[8]) / 3.0;
  const double p2 = (a[0] - q) * (a[0] - q) + (a[4] - q) * (a[4] - q) +
                    (a[8] - q) * (a[8] - q) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  std::vector<double> out(3, q);
  if (p < 1e-300) return out;  // scalar matrix
  // B = (A - qI)/p, r = det(B)/2 in [-1, 1]
  double b[9];
  for (int i = 0; i < 9; ++i) b[i] = a[static_cast<std::size_t>(i)] / p;
  b[0] -= q / p;
  b[4] -= q / p;
  b[8] -= q / p;
  double r = (b[0] * (b[4] * b[8] - b[5] * b[7]) - b[1] * (b[3] * b[8] - b[5] * b[6]) +
              b[2] * (b[3] * b[7] - b[4] * b[6])) /
             2.0;
  r = std::clamp(r, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  out[0] = q + 2.0 * p * std::cos(phi);
  out[2] = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  out[1] = 3.0 * q - out[0] - out[2];
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

void check_reconstruction(std::span<const double> a, std::size_t n, const EigenPairs& e,
                          double tol) {
  const std::size_t m = e.values.size();
  REQUIRE(m == n);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double sum = 0.0;
      for (std::size_t k = 0; k < m; ++k)
        sum += e.values[k] * e.vectors[i * m + k] * e.vectors[j * m + k];
      worst = std::max(worst, std::abs(sum - a[i * n + j]));
    }
  CHECK(worst < tol);
}

}  // namespace

TEST_CASE("two-by-two swap matrix", "[eigensym]") {
  std::vector<double> a{0.0, 1.0, 1.0, 0.0};
  auto e = eigensolve_symmetric(a, 2, 2);
  CHECK(e.values[0] == Approx(1.0).margin(1e-14));
  CHECK(e.values[1] == Approx(-1.0).margin(1e-14));
}

TEST_CASE("identity matrix has a flat unit spectrum", "[eigensym]") {
  const std::size_t n = 5;
  std::vector<double> a(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) a[i * n + i] = 1.0;
  auto e = eigensolve_symmetric(a, n, n);
  for (double v : e.values) CHECK(v == Approx(1.0).margin(1e-14));
}

TEST_CASE("random matrices reconstruct and match the 3x3 closed form", "[eigensym]") {
  Rng rng(31);
  for (int rep = 0; rep < 20; ++rep) {
    auto a3 = random_symmetric(3, rng);
    auto e = eigensolve_symmetric(a3, 3, 3);
    auto oracle = eig3_closed_form(a3);
    for (int i = 0; i < 3; ++i)
      CHECK(e.values[static_cast<std::size_t>(i)] ==
            Approx(oracle[static_cast<std::size_t>(i)]).margin(1e-10));
  }
  for (int rep = 0; rep < 5; ++rep) {
    auto a6 = random_symmetric(6, rng);
    auto e = eigensolve_symmetric(a6, 6, 6);
    check_reconstruction(a6, 6, e, 1e-10);
    for (std::size_t i = 1; i < 6; ++i) CHECK(e.values[i] <= e.values[i - 1]);
  }
}

TEST_CASE("both factorization paths agree", "[eigensym]") {
  Rng rng(37);
  const std::size_t n = 40;
  auto a = random_symmetric(n, rng);
  auto ej = eigensolve_symmetric(a, n, n, EigenMethod::Jacobi);
  auto eq = eigensolve_symmetric(a, n, n, EigenMethod::QL);
  for (std::size_t i = 0; i < n; ++i) CHECK(ej.values[i] == Approx(eq.values[i]).margin(1e-10));
  check_reconstruction(a, n, ej, 1e-10);
  check_reconstruction(a, n, eq, 1e-9);

  // eigenvectors orthonormal on both paths
  for (const auto& e : {ej, eq}) {
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p; q < n; ++q) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += e.vectors[i * n + p] * e.vectors[i * n + q];
        CHECK(dot == Approx(p == q ? 1.0 : 0.0).margin(1e-10));
      }
  }
}

TEST_CASE("large problems take the tridiagonal path automatically", "[eigensym]") {
  Rng rng(43);
  const std::size_t n = 600;
  // well-conditioned test matrix: diagonally dominant
  auto a = random_symmetric(n, rng);
  for (std::size_t i = 0; i < n; ++i) a[i * n + i] += 10.0;
  auto e = eigensolve_symmetric(a, n, 5);  // top five pairs
  REQUIRE(e.values.size() == 5);
  for (std::size_t k = 0; k < 5; ++k) {
    double resid = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double sv = 0.0;
      for (std::size_t j = 0; j < n; ++j) sv += a[i * n + j] * e.vectors[j * 5 + k];
      resid = std::max(resid, std::abs(sv - e.values[k] * e.vectors[i * 5 + k]));
    }
    CHECK(resid < 1e-9);
  }
}

TEST_CASE("input validation", "[eigensym]") {
  std::vector<double> bad{0.0, 1.0, 2.0, 0.0};  // not symmetric
  CHECK_THROWS_AS(eigensolve_symmetric(bad, 2, 2), std::invalid_argument);
  std::vector<double> a{1.0};
  CHECK_THROWS_AS(eigensolve_symmetric(a, 1, 2), std::invalid_argument);
  CHECK_THROWS_AS(eigensolve_symmetric(a, 0, 0), std::invalid_argument);
}
