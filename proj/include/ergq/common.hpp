#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ergq {

using complex = std::complex<double>;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Raised when a run configuration is malformed or inconsistent.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when an on-disk archive is missing, truncated, or inconsistent.
struct ArchiveError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when a pipeline stage cannot produce its output.
struct StageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A vector field was evaluated at a point where it is not defined
/// (e.g. the axis of a swirling flow), or produced a non-finite value.
struct SingularState : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The adaptive integrator could not continue (step-size underflow,
/// non-finite state).
struct OdeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

/// FNV-1a over raw bytes; used to fingerprint wave lattices in archives.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

}  // namespace ergq
