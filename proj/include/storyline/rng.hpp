#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string_view>
#include <vector>

namespace storyline {

using Rng = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Derives an independent stream seed from a root seed, a stage name and up
/// to two integer coordinates (e.g. sweep and sequence index). All randomness
/// in the library flows through this so a single root seed fixes every stream.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view stage,
                                    std::uint64_t a = 0, std::uint64_t b = 0) noexcept {
  std::uint64_t h = detail::splitmix64(root ^ detail::fnv1a(stage));
  h = detail::splitmix64(h ^ detail::splitmix64(a + 0x632be59bd9b4e019ULL));
  h = detail::splitmix64(h ^ detail::splitmix64(b + 0x85157af5ULL));
  return h;
}

inline Rng make_stream(std::uint64_t root, std::string_view stage, std::uint64_t a = 0,
                       std::uint64_t b = 0) {
  return Rng{derive_seed(root, stage, a, b)};
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double sample_gamma(Rng& rng, double shape, double scale = 1.0) {
  return std::gamma_distribution<double>(shape, scale)(rng);
}

inline double sample_beta(Rng& rng, double a, double b) {
  const double x = sample_gamma(rng, a);
  const double y = sample_gamma(rng, b);
  if (x + y <= 0.0) return a / (a + b);
  return x / (x + y);
}

inline std::vector<double> sample_dirichlet(Rng& rng, const std::vector<double>& alpha) {
  std::vector<double> out(alpha.size());
  double total = 0.0;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    out[k] = sample_gamma(rng, alpha[k]);
    total += out[k];
  }
  if (total <= 0.0) {
    // every gamma underflowed; fall back to the mean
    double s = 0.0;
    for (double a : alpha) s += a;
    for (std::size_t k = 0; k < alpha.size(); ++k) out[k] = alpha[k] / s;
    return out;
  }
  for (double& v : out) v /= total;
  return out;
}

inline int sample_poisson(Rng& rng, double mean) {
  if (mean <= 0.0) return 0;
  return std::poisson_distribution<int>(mean)(rng);
}

/// Draws an index proportional to non-negative weights. Weights must not all
/// be zero.
inline std::size_t sample_discrete(Rng& rng, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = uniform01(rng) * total;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (u < weights[k]) return k;
    u -= weights[k];
  }
  // rounding left u just above the last bucket
  for (std::size_t k = weights.size(); k-- > 0;)
    if (weights[k] > 0.0) return k;
  return weights.size() - 1;
}

inline double log_sum_exp(const double* v, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, v[i]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

inline double log_beta_density(double x, double a, double b) {
  return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) + std::lgamma(a + b) -
         std::lgamma(a) - std::lgamma(b);
}

}  // namespace storyline
