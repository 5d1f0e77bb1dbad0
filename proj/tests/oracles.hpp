#pragma once

// Independent reference computations used by the unit tests and the
// acceptance binary. Kept deliberately naive.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "storyline/model.hpp"
#include "storyline/rng.hpp"

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double bernoulli_prob(const std::vector<std::uint8_t>& y, const std::vector<double>& theta) {
  double p = 1.0;
  for (std::size_t n = 0; n < y.size(); ++n) p *= y[n] ? theta[n] : 1.0 - theta[n];
  return p;
}

/// log p(y) summed over every state path with a uniform start, in long double.
inline double brute_force_log_marginal(const std::vector<std::vector<std::uint8_t>>& y,
                                       const std::vector<std::vector<double>>& theta, const MatrixXd& pi) {
  const std::size_t k = theta.size();
  const std::size_t t_len = y.size();
  std::vector<std::size_t> path(t_len, 0);
  long double total = 0.0L;
  while (true) {
    long double p = 1.0L / static_cast<long double>(k);
    for (std::size_t t = 0; t < t_len; ++t) {
      if (t > 0) p *= pi(static_cast<Eigen::Index>(path[t - 1]), static_cast<Eigen::Index>(path[t]));
      p *= bernoulli_prob(y[t], theta[path[t]]);
    }
    total += p;
    std::size_t pos = 0;
    while (pos < t_len && ++path[pos] == k) path[pos++] = 0;
    if (pos == t_len) break;
  }
  return static_cast<double>(std::log(total));
}

/// Largest Rayleigh quotient over all nonzero binary indicators.
inline double brute_force_scgp(const MatrixXd& a, VectorXd* best_x = nullptr) {
  const auto n = a.rows();
  double best = -std::numeric_limits<double>::infinity();
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(mask >> i & 1)) continue;
      den += 1.0;
      for (Eigen::Index j = 0; j < n; ++j)
        if (mask >> j & 1) num += a(i, j);
    }
    if (num / den > best) {
      best = num / den;
      if (best_x) {
        best_x->setZero(n);
        for (Eigen::Index i = 0; i < n; ++i) (*best_x)(i) = (mask >> i & 1) ? 1.0 : 0.0;
      }
    }
  }
  return best;
}

/// Central differences of f along every coordinate of x.
inline VectorXd central_difference(const std::function<double(const VectorXd&)>& f, const VectorXd& x,
                                   double h = 1e-6) {
  VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    VectorXd up = x, dn = x;
    up(i) += h;
    dn(i) -= h;
    g(i) = (f(up) - f(dn)) / (2.0 * h);
  }
  return g;
}

/// Plain tf-idf: freq * ln(1 + N / n_w).
inline double direct_tfidf(long freq, long n_total, long n_containing) {
  return static_cast<double>(freq) * std::log(1.0 + static_cast<double>(n_total) / static_cast<double>(n_containing));
}

/// Fixed activity matrix for the recovery study: sequence i uses 2 + (i % 3)
/// consecutive activities (mod 6) starting at i % 6.
inline storyline::ActivityMatrix recovery_features(std::size_t n_sequences, std::size_t n_activities) {
  storyline::ActivityMatrix f(n_sequences, n_activities);
  for (std::size_t i = 0; i < n_sequences; ++i) {
    const std::size_t count = 2 + i % 3;
    for (std::size_t c = 0; c < count; ++c) f.set(i, (i + c) % n_activities, true);
  }
  return f;
}

/// Activity k fires the atoms in its own block at `high`, the rest at `low`.
inline storyline::ActivityParams block_theta(std::size_t n_activities, std::size_t m_atoms, double high,
                                             double low) {
  storyline::ActivityParams theta(n_activities, std::vector<double>(m_atoms, low));
  for (std::size_t m = 0; m < m_atoms; ++m) theta[m * n_activities / m_atoms][m] = high;
  return theta;
}

}  // namespace oracle
