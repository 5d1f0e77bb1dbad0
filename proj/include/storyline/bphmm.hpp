#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "storyline/corpus.hpp"
#include "storyline/model.hpp"
#include "storyline/rng.hpp"
#include "storyline/synth.hpp"

namespace storyline {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Frame vectors stored as the indices of their set bits.
struct SparseFrames {
  std::size_t atoms = 0;
  std::vector<std::vector<std::uint32_t>> on;

  std::size_t length() const noexcept { return on.size(); }
};

inline SparseFrames to_sparse(const SequenceFrames& frames) {
  SparseFrames s;
  s.atoms = frames.empty() ? 0 : frames.front().size();
  s.on.resize(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].size() != s.atoms) throw DimensionMismatch("frame vectors differ in length");
    for (std::size_t n = 0; n < frames[t].size(); ++n)
      if (frames[t][n]) s.on[t].push_back(static_cast<std::uint32_t>(n));
  }
  return s;
}

// ---------------------------------------------------------------------------
// HMM primitives
// ---------------------------------------------------------------------------

/// Per-frame Bernoulli log-likelihood under one emission vector.
inline VectorXd log_emission_column(const SparseFrames& y, const std::vector<double>& theta) {
  if (theta.size() != y.atoms) throw DimensionMismatch("theta length differs from atom count");
  double base = 0.0;
  std::vector<double> delta(theta.size());
  for (std::size_t n = 0; n < theta.size(); ++n) {
    const double lo = std::log1p(-theta[n]);
    base += lo;
    delta[n] = std::log(theta[n]) - lo;
  }
  VectorXd out(static_cast<Index>(y.length()));
  for (std::size_t t = 0; t < y.length(); ++t) {
    double v = base;
    for (auto n : y.on[t]) v += delta[n];
    out(static_cast<Index>(t)) = v;
  }
  return out;
}

inline MatrixXd log_emission_matrix(const SparseFrames& y, const ActivityParams& thetas) {
  MatrixXd out(static_cast<Index>(y.length()), static_cast<Index>(thetas.size()));
  for (std::size_t k = 0; k < thetas.size(); ++k) out.col(static_cast<Index>(k)) = log_emission_column(y, thetas[k]);
  return out;
}

namespace detail {

/// Scaled forward pass. Fills `alpha` (T x K, each row normalised) when given
/// and returns the log marginal likelihood.
inline double forward_pass(const MatrixXd& log_emit, const MatrixXd& trans, const VectorXd& init,
                           MatrixXd* alpha) {
  const Index t_len = log_emit.rows();
  const Index k = log_emit.cols();
  if (trans.rows() != k || trans.cols() != k || init.size() != k)
    throw DimensionMismatch("forward pass: transition/initial dimensions differ from state count");
  if (alpha) alpha->resize(t_len, k);
  double ll = 0.0;
  VectorXd a(k);
  for (Index t = 0; t < t_len; ++t) {
    const double m = log_emit.row(t).maxCoeff();
    const VectorXd e = (log_emit.row(t).array() - m).exp().transpose();
    if (t == 0)
      a = init.cwiseProduct(e);
    else
      a = (trans.transpose() * a).cwiseProduct(e);
    const double s = a.sum();
    a /= s;
    ll += std::log(s) + m;
    if (alpha) alpha->row(t) = a.transpose();
  }
  return ll;
}

inline VectorXd uniform_initial(Index k) { return VectorXd::Constant(k, 1.0 / static_cast<double>(k)); }

inline void check_hmm_inputs(const SparseFrames& y, const ActivityParams& thetas, const MatrixXd& pi) {
  if (y.length() == 0) throw ValidationError("sequence has no frames");
  if (thetas.empty()) throw ValidationError("no active states");
  if (pi.rows() != static_cast<Index>(thetas.size()) || pi.cols() != pi.rows())
    throw DimensionMismatch("transition matrix does not match the active state count");
}

/// Backward sampling over normalised forward messages.
inline StateAssignment backward_sample(const MatrixXd& alpha, const MatrixXd& trans, Rng& rng) {
  const Index t_len = alpha.rows();
  const Index k = alpha.cols();
  StateAssignment z(static_cast<std::size_t>(t_len));
  std::vector<double> w(static_cast<std::size_t>(k));
  for (Index j = 0; j < k; ++j) w[static_cast<std::size_t>(j)] = alpha(t_len - 1, j);
  z.back() = static_cast<int>(sample_discrete(rng, w));
  for (Index t = t_len - 2; t >= 0; --t) {
    const int next = z[static_cast<std::size_t>(t + 1)];
    for (Index j = 0; j < k; ++j) w[static_cast<std::size_t>(j)] = alpha(t, j) * trans(j, next);
    z[static_cast<std::size_t>(t)] = static_cast<int>(sample_discrete(rng, w));
  }
  return z;
}

}  // namespace detail

/// log p(y) summed over all state paths, by the forward recursion.
/// `pi_active` is indexed like `active_thetas`.
inline double log_marginal_sequence(const SequenceFrames& y, const ActivityParams& active_thetas,
                                    const MatrixXd& pi_active, std::optional<VectorXd> initial = std::nullopt) {
  const auto sy = to_sparse(y);
  detail::check_hmm_inputs(sy, active_thetas, pi_active);
  const VectorXd init = initial ? *initial : detail::uniform_initial(pi_active.rows());
  return detail::forward_pass(log_emission_matrix(sy, active_thetas), pi_active, init, nullptr);
}

/// Exact posterior draw of the state path (forward filter, backward sample).
/// Returned states index `active_thetas`.
inline StateAssignment sample_states(const SequenceFrames& y, const ActivityParams& active_thetas,
                                     const MatrixXd& pi_active, Rng& rng) {
  const auto sy = to_sparse(y);
  detail::check_hmm_inputs(sy, active_thetas, pi_active);
  MatrixXd alpha;
  detail::forward_pass(log_emission_matrix(sy, active_thetas), pi_active,
                       detail::uniform_initial(pi_active.rows()), &alpha);
  return detail::backward_sample(alpha, pi_active, rng);
}

// ---------------------------------------------------------------------------
// Model state
// ---------------------------------------------------------------------------

/// Posterior state of the sampler. Columns carry stable labels that survive
/// pruning; z holds column indices.
struct ActivityModel {
  Hyperparams hyper;
  std::size_t n_atoms = 0;
  ActivityMatrix f;
  ActivityParams theta;
  std::vector<int> labels;
  int next_label = 0;
  std::vector<MatrixXd> eta;
  std::vector<MatrixXd> pi;
  std::vector<StateAssignment> z;

  std::size_t n_sequences() const noexcept { return f.rows(); }
  std::size_t n_activities() const noexcept { return f.cols(); }

  void refresh_pi(std::size_t i) { pi[i] = normalize_transitions(eta[i], f.active(i), f.cols()); }

  std::optional<std::size_t> column_of(int label) const {
    for (std::size_t k = 0; k < labels.size(); ++k)
      if (labels[k] == label) return k;
    return std::nullopt;
  }

  void remove_column(std::size_t k) {
    f.remove_column(k);
    theta.erase(theta.begin() + static_cast<std::ptrdiff_t>(k));
    labels.erase(labels.begin() + static_cast<std::ptrdiff_t>(k));
    const auto kk = static_cast<Index>(k);
    for (auto* mats : {&eta, &pi}) {
      for (auto& m : *mats) {
        const Index n = m.rows();
        MatrixXd r(n - 1, n - 1);
        r.topLeftCorner(kk, kk) = m.topLeftCorner(kk, kk);
        r.topRightCorner(kk, n - 1 - kk) = m.topRightCorner(kk, n - 1 - kk);
        r.bottomLeftCorner(n - 1 - kk, kk) = m.bottomLeftCorner(n - 1 - kk, kk);
        r.bottomRightCorner(n - 1 - kk, n - 1 - kk) = m.bottomRightCorner(n - 1 - kk, n - 1 - kk);
        m = std::move(r);
      }
    }
    for (auto& zi : z)
      for (int& v : zi) {
        if (v == static_cast<int>(k))
          v = -1;  // stale until the next state resampling
        else if (v > static_cast<int>(k))
          --v;
      }
  }

  /// Drops every column no sequence uses.
  void prune() {
    for (std::size_t k = f.cols(); k-- > 0;)
      if (f.column_count(k) == 0) remove_column(k);
  }

  /// Throws if any cross-type invariant fails.
  void validate(const std::vector<SparseFrames>& data) const {
    f.validate();
    const std::size_t k_total = f.cols();
    if (theta.size() != k_total || labels.size() != k_total) throw ValidationError("theta/labels size mismatch");
    for (const auto& row : theta) {
      if (row.size() != n_atoms) throw ValidationError("theta row length mismatch");
      for (double v : row)
        if (!(v > 0.0 && v < 1.0)) throw ValidationError("theta entry outside (0,1)");
    }
    if (eta.size() != f.rows() || pi.size() != f.rows() || z.size() != f.rows() || data.size() != f.rows())
      throw ValidationError("per-sequence state count mismatch");
    for (std::size_t i = 0; i < f.rows(); ++i) {
      if (eta[i].rows() != static_cast<Index>(k_total) || pi[i].rows() != static_cast<Index>(k_total))
        throw ValidationError("transition matrix dimension mismatch");
      const auto act = f.active(i);
      for (std::size_t j : act) {
        double s = 0.0;
        for (std::size_t k = 0; k < k_total; ++k) {
          const double p = pi[i](static_cast<Index>(j), static_cast<Index>(k));
          if (!f(i, k) && p != 0.0) throw ValidationError("pi nonzero on an inactive column");
          s += p;
        }
        if (std::abs(s - 1.0) > 1e-9) throw ValidationError("pi row does not sum to 1");
      }
      if (z[i].size() != data[i].length()) throw ValidationError("state path length mismatch");
      for (int v : z[i])
        if (v < 0 || static_cast<std::size_t>(v) >= k_total || !f(i, static_cast<std::size_t>(v)))
          throw ValidationError("state assignment uses an inactive activity");
    }
  }
};

// ---------------------------------------------------------------------------
// Sampler
// ---------------------------------------------------------------------------

/// Beta parameters of the data-driven proposal for a new activity from the
/// window [start, start + length): (count + a0, length - count + b0) per atom.
inline std::vector<std::pair<double, double>> window_beta_params(const SparseFrames& y, std::size_t start,
                                                                 std::size_t length, const Hyperparams& h) {
  if (length == 0 || start + length > y.length()) throw ValidationError("window outside the sequence");
  std::vector<double> count(y.atoms, 0.0);
  for (std::size_t t = start; t < start + length; ++t)
    for (auto n : y.on[t]) count[n] += 1.0;
  std::vector<std::pair<double, double>> out(y.atoms);
  for (std::size_t n = 0; n < y.atoms; ++n)
    out[n] = {count[n] + h.emit_a0, static_cast<double>(length) - count[n] + h.emit_b0};
  return out;
}

/// Counters for the birth/death moves, for diagnostics and tests.
struct MoveStats {
  std::size_t births_proposed = 0, births_accepted = 0;
  std::size_t deaths_proposed = 0, deaths_accepted = 0;
  std::size_t flips_proposed = 0, flips_accepted = 0;
};

class GibbsSampler {
 public:
  GibbsSampler(ActivityModel model, std::vector<SparseFrames> data)
      : model_(std::move(model)), data_(std::move(data)), cache_(data_.size()) {
    if (data_.size() != model_.n_sequences()) throw DimensionMismatch("data and model sequence counts differ");
  }

  const ActivityModel& model() const noexcept { return model_; }
  ActivityModel& mutable_model() noexcept {
    invalidate_cache();
    return model_;
  }
  const std::vector<SparseFrames>& data() const noexcept { return data_; }
  const MoveStats& stats() const noexcept { return stats_; }

  /// Log marginal likelihood of sequence i when its active set is `cols`.
  double sequence_log_likelihood(std::size_t i, const std::vector<std::size_t>& cols) {
    return sequence_log_likelihood(i, cols, model_.eta[i]);
  }

  /// Log MH ratio for flipping f(i,k), or nullopt when the flip is never
  /// proposed (k not shared with another sequence, or it would empty row i).
  std::optional<double> shared_flip_log_ratio(std::size_t i, std::size_t k) {
    const auto& f = model_.f;
    const bool on = f(i, k);
    const double m = static_cast<double>(f.column_count(k)) - (on ? 1.0 : 0.0);
    if (m <= 0.0) return std::nullopt;
    if (on && f.row_count(i) == 1) return std::nullopt;
    auto cur = f.active(i);
    auto next = toggled(cur, k);
    const double n = static_cast<double>(model_.n_sequences());
    double log_prior = std::log(m) - std::log(n - 1.0 + model_.hyper.beta_c - m);
    if (on) log_prior = -log_prior;
    return log_prior + sequence_log_likelihood(i, next) - sequence_log_likelihood(i, cur);
  }

  /// MH flips of every activity sequence i shares with another sequence.
  void resample_shared_features(std::size_t i, Rng& rng) {
    for (std::size_t k = 0; k < model_.f.cols(); ++k) {
      const auto ratio = shared_flip_log_ratio(i, k);
      if (!ratio) continue;
      ++stats_.flips_proposed;
      if (std::log(uniform01(rng)) < *ratio) {
        model_.f.set(i, k, !model_.f(i, k));
        ++stats_.flips_accepted;
      }
    }
    model_.refresh_pi(i);
    model_.prune();
  }

  /// One reversible-jump move on the activities unique to sequence i: birth of
  /// a data-driven activity, or death of a uniformly chosen unique one.
  /// Returns true if the move was accepted.
  bool propose_birth_death(std::size_t i, Rng& rng) {
    const auto& y = data_[i];
    if (y.length() == 0) return false;
    const auto uniq = unique_activities(i);
    const std::size_t row = model_.f.row_count(i);
    const double p_birth = birth_probability(uniq.size(), row);
    const double mu = model_.hyper.unique_mass(model_.n_sequences());

    // window drawn in both directions so its density enters symmetrically
    const std::size_t start = std::uniform_int_distribution<std::size_t>(0, y.length() - 1)(rng);
    const std::size_t len = std::uniform_int_distribution<std::size_t>(1, y.length() - start)(rng);
    const auto beta = window_beta_params(y, start, len, model_.hyper);
    auto log_prior_over_proposal = [&](const std::vector<double>& th) {
      double v = 0.0;
      for (std::size_t n = 0; n < th.size(); ++n)
        v += log_beta_density(th[n], model_.hyper.emit_a0, model_.hyper.emit_b0) -
             log_beta_density(th[n], beta[n].first, beta[n].second);
      return v;
    };

    const auto cur = model_.f.active(i);
    const double ll_cur = sequence_log_likelihood(i, cur);

    if (uniform01(rng) < p_birth) {
      ++stats_.births_proposed;
      std::vector<double> th(y.atoms);
      for (std::size_t n = 0; n < y.atoms; ++n) th[n] = clamp_theta(sample_beta(rng, beta[n].first, beta[n].second));

      const std::size_t k_old = model_.f.cols();
      MatrixXd eta_i = grow(model_.eta[i], rng);
      const VectorXd col = log_emission_column(y, th);
      auto next = cur;
      next.push_back(k_old);
      const double ll_new = likelihood_with(i, next, eta_i, &col, k_old);
      const double p_death_back = 1.0 - birth_probability(uniq.size() + 1, row + 1);
      const double log_ratio = ll_new - ll_cur + std::log(mu) - std::log(static_cast<double>(uniq.size() + 1)) +
                               log_prior_over_proposal(th) + std::log(p_death_back) - std::log(p_birth);
      if (std::log(uniform01(rng)) >= log_ratio) return false;

      ++stats_.births_accepted;
      model_.f.add_column();
      model_.f.set(i, k_old, true);
      model_.theta.push_back(th);
      model_.labels.push_back(model_.next_label++);
      for (std::size_t s = 0; s < model_.n_sequences(); ++s) {
        if (s == i)
          model_.eta[s] = std::move(eta_i);
        else
          model_.eta[s] = grow(model_.eta[s], rng);
        model_.pi[s].conservativeResize(static_cast<Index>(k_old + 1), static_cast<Index>(k_old + 1));
        model_.pi[s].row(static_cast<Index>(k_old)).setZero();
        model_.pi[s].col(static_cast<Index>(k_old)).setZero();
      }
      model_.refresh_pi(i);
      cache_[i][model_.labels.back()] = col;
      return true;
    }

    ++stats_.deaths_proposed;
    const std::size_t pick = std::uniform_int_distribution<std::size_t>(0, uniq.size() - 1)(rng);
    const std::size_t k = uniq[pick];
    const auto next = toggled(cur, k);
    const double ll_new = sequence_log_likelihood(i, next);
    const double p_birth_back = birth_probability(uniq.size() - 1, row - 1);
    const double log_ratio = ll_new - ll_cur - std::log(mu) + std::log(static_cast<double>(uniq.size())) -
                             log_prior_over_proposal(model_.theta[k]) + std::log(p_birth_back) -
                             std::log(1.0 - p_birth);
    if (std::log(uniform01(rng)) >= log_ratio) return false;
    ++stats_.deaths_accepted;
    model_.f.set(i, k, false);
    model_.refresh_pi(i);
    model_.prune();
    return true;
  }

  void resample_states(std::size_t i, Rng& rng) {
    const auto cols = model_.f.active(i);
    const MatrixXd trans = restricted_transitions(model_.eta[i], cols);
    MatrixXd alpha;
    detail::forward_pass(emissions(i, cols, nullptr, 0), trans, detail::uniform_initial(trans.rows()), &alpha);
    const auto local = detail::backward_sample(alpha, trans, rng);
    auto& z = model_.z[i];
    z.resize(local.size());
    for (std::size_t t = 0; t < local.size(); ++t) z[t] = static_cast<int>(cols[static_cast<std::size_t>(local[t])]);
  }

  /// Conjugate Beta update of every emission parameter from the current z.
  void resample_theta(Rng& rng) {
    const std::size_t k_total = model_.f.cols();
    std::vector<std::vector<double>> ones(k_total, std::vector<double>(model_.n_atoms, 0.0));
    std::vector<double> frames(k_total, 0.0);
    for (std::size_t i = 0; i < data_.size(); ++i)
      for (std::size_t t = 0; t < data_[i].length(); ++t) {
        const int k = model_.z[i][t];
        if (k < 0) continue;
        frames[static_cast<std::size_t>(k)] += 1.0;
        for (auto n : data_[i].on[t]) ones[static_cast<std::size_t>(k)][n] += 1.0;
      }
    for (std::size_t k = 0; k < k_total; ++k)
      for (std::size_t n = 0; n < model_.n_atoms; ++n)
        model_.theta[k][n] = clamp_theta(sample_beta(rng, model_.hyper.emit_a0 + ones[k][n],
                                                     model_.hyper.emit_b0 + frames[k] - ones[k][n]));
    invalidate_cache();
  }

  /// Transition weights of sequence i: on the active block a sticky Dirichlet
  /// posterior row scaled by a Gamma draw; elsewhere a prior draw.
  void resample_transitions(std::size_t i, Rng& rng) {
    const auto& h = model_.hyper;
    const auto cols = model_.f.active(i);
    const std::size_t k_total = model_.f.cols();
    std::vector<char> is_active(k_total, 0);
    for (auto k : cols) is_active[k] = 1;

    MatrixXd counts = MatrixXd::Zero(static_cast<Index>(k_total), static_cast<Index>(k_total));
    const auto& z = model_.z[i];
    for (std::size_t t = 1; t < z.size(); ++t)
      if (z[t - 1] >= 0 && z[t] >= 0) counts(z[t - 1], z[t]) += 1.0;

    MatrixXd& eta = model_.eta[i];
    eta.resize(static_cast<Index>(k_total), static_cast<Index>(k_total));
    const double k_plus = static_cast<double>(cols.size());
    for (std::size_t j = 0; j < k_total; ++j) {
      const auto jj = static_cast<Index>(j);
      if (is_active[j]) {
        std::vector<double> conc;
        for (auto k : cols)
          conc.push_back(counts(jj, static_cast<Index>(k)) + h.alpha + (k == j ? h.kappa : 0.0));
        const auto row = cols.size() == 1 ? std::vector<double>{1.0} : sample_dirichlet(rng, conc);
        const double scale = sample_gamma(rng, k_plus * h.lambda + h.kappa);
        for (std::size_t c = 0; c < cols.size(); ++c) eta(jj, static_cast<Index>(cols[c])) = row[c] * scale;
      }
      for (std::size_t k = 0; k < k_total; ++k)
        if (!is_active[j] || !is_active[k])
          eta(jj, static_cast<Index>(k)) = sample_gamma(rng, h.alpha + (j == k ? h.kappa : 0.0));
    }
    model_.refresh_pi(i);
  }

  /// One full sweep: per sequence (ascending index) shared flips then a
  /// birth/death move; then all state paths, theta, and transitions. Every
  /// stage draws from streams derived from (root_seed, sweep).
  void sweep(std::uint64_t root_seed, std::uint64_t sweep_index) {
    const std::size_t n = model_.n_sequences();
    for (std::size_t i = 0; i < n; ++i) {
      Rng flip_rng = make_stream(root_seed, "shared-features", sweep_index, i);
      resample_shared_features(i, flip_rng);
      Rng bd_rng = make_stream(root_seed, "birth-death", sweep_index, i);
      propose_birth_death(i, bd_rng);
    }
    for (std::size_t i = 0; i < n; ++i) {
      Rng z_rng = make_stream(root_seed, "states", sweep_index, i);
      resample_states(i, z_rng);
    }
    Rng theta_rng = make_stream(root_seed, "theta", sweep_index);
    resample_theta(theta_rng);
    for (std::size_t i = 0; i < n; ++i) {
      Rng tr_rng = make_stream(root_seed, "transitions", sweep_index, i);
      resample_transitions(i, tr_rng);
    }
    model_.prune();
  }

 private:
  static std::vector<std::size_t> toggled(std::vector<std::size_t> cols, std::size_t k) {
    auto it = std::find(cols.begin(), cols.end(), k);
    if (it != cols.end())
      cols.erase(it);
    else
      cols.insert(std::upper_bound(cols.begin(), cols.end(), k), k);
    return cols;
  }

  static double birth_probability(std::size_t n_unique, std::size_t row_size) {
    return (n_unique == 0 || row_size <= 1) ? 1.0 : 0.5;
  }

  std::vector<std::size_t> unique_activities(std::size_t i) const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < model_.f.cols(); ++k)
      if (model_.f(i, k) && model_.f.column_count(k) == 1) out.push_back(k);
    return out;
  }

  /// eta with one extra row and column drawn from the Gamma prior.
  MatrixXd grow(const MatrixXd& eta, Rng& rng) const {
    const Index k = eta.rows();
    MatrixXd out(k + 1, k + 1);
    out.topLeftCorner(k, k) = eta;
    for (Index j = 0; j <= k; ++j) {
      out(k, j) = sample_gamma(rng, model_.hyper.alpha + (j == k ? model_.hyper.kappa : 0.0));
      if (j < k) out(j, k) = sample_gamma(rng, model_.hyper.alpha);
    }
    return out;
  }

  static MatrixXd restricted_transitions(const MatrixXd& eta, const std::vector<std::size_t>& cols) {
    const auto k = static_cast<Index>(cols.size());
    MatrixXd out(k, k);
    for (Index a = 0; a < k; ++a) {
      double s = 0.0;
      for (Index b = 0; b < k; ++b) s += out(a, b) = eta(static_cast<Index>(cols[static_cast<std::size_t>(a)]),
                                                      static_cast<Index>(cols[static_cast<std::size_t>(b)]));
      out.row(a) /= s;
    }
    return out;
  }

  const VectorXd& cached_emission(std::size_t i, std::size_t k) {
    auto& slot = cache_[i];
    const int label = model_.labels[k];
    auto it = slot.find(label);
    if (it == slot.end()) it = slot.emplace(label, log_emission_column(data_[i], model_.theta[k])).first;
    return it->second;
  }

  /// T x |cols| log-emission matrix; a column index equal to `extra_index`
  /// takes its values from `extra` instead of the model.
  MatrixXd emissions(std::size_t i, const std::vector<std::size_t>& cols, const VectorXd* extra,
                     std::size_t extra_index) {
    MatrixXd out(static_cast<Index>(data_[i].length()), static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c)
      out.col(static_cast<Index>(c)) = (extra && cols[c] == extra_index) ? *extra : cached_emission(i, cols[c]);
    return out;
  }

  double likelihood_with(std::size_t i, const std::vector<std::size_t>& cols, const MatrixXd& eta,
                         const VectorXd* extra, std::size_t extra_index) {
    const MatrixXd trans = restricted_transitions(eta, cols);
    return detail::forward_pass(emissions(i, cols, extra, extra_index), trans,
                                detail::uniform_initial(trans.rows()), nullptr);
  }

  double sequence_log_likelihood(std::size_t i, const std::vector<std::size_t>& cols, const MatrixXd& eta) {
    return likelihood_with(i, cols, eta, nullptr, std::numeric_limits<std::size_t>::max());
  }

  void invalidate_cache() {
    for (auto& c : cache_) c.clear();
  }

  ActivityModel model_;
  std::vector<SparseFrames> data_;
  std::vector<std::unordered_map<int, VectorXd>> cache_;
  MoveStats stats_;
};

/// Prior initialisation: F from an IBP draw (empty rows redrawn), theta and
/// eta from their priors, z uniform over each row's active set.
inline ActivityModel initialize_model(const std::vector<SparseFrames>& data, const Hyperparams& hyper, Rng& rng) {
  hyper.validate();
  if (data.empty()) throw ValidationError("cannot initialise a model without sequences");
  ActivityModel m;
  m.hyper = hyper;
  m.n_atoms = data.front().atoms;
  for (const auto& d : data)
    if (d.atoms != m.n_atoms) throw DimensionMismatch("sequences disagree on atom count");
  m.f = sample_ibp(data.size(), hyper.gamma, rng, true);
  const std::size_t k_total = m.f.cols();
  m.theta.assign(k_total, std::vector<double>(m.n_atoms));
  for (auto& row : m.theta)
    for (double& v : row) v = clamp_theta(sample_beta(rng, hyper.emit_a0, hyper.emit_b0));
  for (std::size_t k = 0; k < k_total; ++k) m.labels.push_back(m.next_label++);
  for (std::size_t i = 0; i < data.size(); ++i) {
    MatrixXd eta(static_cast<Index>(k_total), static_cast<Index>(k_total));
    for (std::size_t j = 0; j < k_total; ++j)
      for (std::size_t k = 0; k < k_total; ++k)
        eta(static_cast<Index>(j), static_cast<Index>(k)) = sample_gamma(rng, hyper.alpha + (j == k ? hyper.kappa : 0.0));
    m.eta.push_back(std::move(eta));
    m.pi.push_back(normalize_transitions(m.eta.back(), m.f.active(i), k_total));
    const auto act = m.f.active(i);
    StateAssignment z(data[i].length());
    std::uniform_int_distribution<std::size_t> pick(0, act.size() - 1);
    for (int& v : z) v = static_cast<int>(act[pick(rng)]);
    m.z.push_back(std::move(z));
  }
  return m;
}

/// Runs one sweep on a model (see GibbsSampler::sweep) and returns the result.
inline ActivityModel gibbs_sweep(ActivityModel model, const std::vector<SparseFrames>& data,
                                 std::uint64_t root_seed, std::uint64_t sweep_index) {
  GibbsSampler s(std::move(model), data);
  s.sweep(root_seed, sweep_index);
  return s.model();
}

struct GibbsOptions {
  std::size_t n_sweeps = 2000;
  std::size_t burn_in = 1000;
  std::uint64_t seed = 0;
};

struct GibbsResult {
  std::vector<std::string> ids;  // ascending; every per-sequence vector follows this order
  ActivityModel model;
  std::vector<std::vector<int>> labels;                     // modal stable label per frame
  std::vector<std::map<int, std::vector<double>>> posterior;  // label -> per-frame frequency
  std::size_t retained = 0;
  MoveStats stats;
};

/// Modal label per frame from per-label counts; ties prefer the previous
/// frame's label, then the smallest label.
inline std::vector<int> modal_labels(const std::map<int, std::vector<std::uint32_t>>& counts, std::size_t t_len) {
  std::vector<int> out(t_len, -1);
  for (std::size_t t = 0; t < t_len; ++t) {
    std::uint32_t best = 0;
    for (const auto& [label, c] : counts) best = std::max(best, c[t]);
    int choice = -1;
    if (t > 0 && out[t - 1] >= 0) {
      auto it = counts.find(out[t - 1]);
      if (it != counts.end() && it->second[t] == best) choice = out[t - 1];
    }
    if (choice < 0)
      for (const auto& [label, c] : counts)
        if (c[t] == best) {
          choice = label;
          break;
        }
    out[t] = choice;
  }
  return out;
}

/// Initialises from the prior and runs n_sweeps sweeps; the parse is the
/// modal label over sweeps after burn_in. Sequences are processed in
/// ascending id order.
inline GibbsResult run_gibbs(const std::vector<std::string>& ids, const std::vector<SequenceFrames>& frames,
                             const Hyperparams& hyper, const GibbsOptions& opt) {
  if (ids.size() != frames.size()) throw DimensionMismatch("ids and frame lists differ in length");
  if (ids.empty()) throw ValidationError("run_gibbs: empty corpus");
  if (opt.n_sweeps <= opt.burn_in) throw ValidationError("run_gibbs: sweeps must exceed burn-in");
  hyper.validate();
  for (std::size_t i = 0; i < frames.size(); ++i)
    if (frames[i].empty()) throw ValidationError("sequence '" + ids[i] + "' has no frames");

  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });

  GibbsResult res;
  std::vector<SparseFrames> data;
  for (auto o : order) {
    res.ids.push_back(ids[o]);
    data.push_back(to_sparse(frames[o]));
  }

  Rng init_rng = make_stream(opt.seed, "init");
  GibbsSampler sampler(initialize_model(data, hyper, init_rng), data);

  std::vector<std::map<int, std::vector<std::uint32_t>>> counts(data.size());
  for (std::size_t s = 1; s <= opt.n_sweeps; ++s) {
    sampler.sweep(opt.seed, s);
    if (s <= opt.burn_in) continue;
    ++res.retained;
    const auto& m = sampler.model();
    for (std::size_t i = 0; i < data.size(); ++i)
      for (std::size_t t = 0; t < data[i].length(); ++t) {
        auto& c = counts[i][m.labels[static_cast<std::size_t>(m.z[i][t])]];
        if (c.empty()) c.assign(data[i].length(), 0);
        ++c[t];
      }
  }

  res.model = sampler.model();
  res.stats = sampler.stats();
  for (std::size_t i = 0; i < data.size(); ++i) {
    res.labels.push_back(modal_labels(counts[i], data[i].length()));
    std::map<int, std::vector<double>> post;
    for (const auto& [label, c] : counts[i]) {
      auto& v = post[label];
      v.resize(c.size());
      for (std::size_t t = 0; t < c.size(); ++t) v[t] = static_cast<double>(c[t]) / static_cast<double>(res.retained);
    }
    res.posterior.push_back(std::move(post));
  }
  return res;
}

}  // namespace storyline
