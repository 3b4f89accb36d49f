#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace btpnn {

/// Input or configuration rejected before any computation ran.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure while computing (degenerate numerics, I/O after validation).
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Family { gaussian, bernoulli, poisson };

inline std::string to_string(Family f) {
  switch (f) {
    case Family::gaussian: return "gaussian";
    case Family::bernoulli: return "bernoulli";
    case Family::poisson: return "poisson";
  }
  return "gaussian";
}

inline Family family_from_string(const std::string& s) {
  if (s == "gaussian") return Family::gaussian;
  if (s == "bernoulli") return Family::bernoulli;
  if (s == "poisson") return Family::poisson;
  throw ValidationError("unknown family '" + s + "' (expected gaussian, bernoulli or poisson)");
}

inline constexpr double kPi = 3.14159265358979323846;

inline double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// log(1 + e^z) without overflow.
inline double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

/// Seedable generator used by every sampler. The engine is mt19937_64; the
/// name is recorded next to the seed in sample metadata.
class Rng {
 public:
  static constexpr const char* kName = "mt19937_64";

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
  }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  double gamma(double shape, double scale) {
    return std::gamma_distribution<double>(shape, scale)(engine_);
  }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  std::size_t categorical(std::span<const double> weights) {
    return std::discrete_distribution<std::size_t>(weights.begin(), weights.end())(engine_);
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// log(sum(exp(v))) for a non-empty vector.
inline double log_sum_exp(std::span<const double> v) {
  double hi = -INFINITY;
  for (double x : v) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double x : v) s += std::exp(x - hi);
  return hi + std::log(s);
}

/// FNV-1a over raw bytes; used for dataset fingerprints.
inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 1469598103934665603ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace btpnn
