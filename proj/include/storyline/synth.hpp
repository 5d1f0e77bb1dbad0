#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "storyline/corpus.hpp"
#include "storyline/model.hpp"
#include "storyline/rng.hpp"

namespace storyline {

/// Indian buffet draw: customer 1 takes Poisson(gamma) dishes, customer i
/// takes dish k with probability m_k / i and Poisson(gamma / i) new ones.
/// With `guard` set, a customer left without dishes redraws; after 100 empty
/// redraws it is given one new dish outright.
inline ActivityMatrix sample_ibp(std::size_t n_sequences, double gamma, Rng& rng, bool guard = true) {
  if (n_sequences < 1) throw ValidationError("sample_ibp needs at least one sequence");
  if (!(gamma > 0.0)) throw ValidationError("sample_ibp: gamma must be positive");
  ActivityMatrix f(n_sequences, 0);
  std::vector<std::size_t> m;  // dish popularity over customers seen so far
  for (std::size_t i = 0; i < n_sequences; ++i) {
    const double customer = static_cast<double>(i + 1);
    for (int attempt = 0;; ++attempt) {
      std::vector<std::size_t> taken;
      for (std::size_t k = 0; k < m.size(); ++k)
        if (uniform01(rng) < static_cast<double>(m[k]) / customer) taken.push_back(k);
      const int fresh = sample_poisson(rng, gamma / customer);
      if (!guard || !taken.empty() || fresh > 0 || attempt >= 100) {
        for (std::size_t k : taken) {
          f.set(i, k, true);
          ++m[k];
        }
        int add = fresh;
        if (guard && taken.empty() && fresh == 0) add = 1;
        for (int d = 0; d < add; ++d) {
          const std::size_t k = f.add_column();
          f.set(i, k, true);
          m.push_back(1);
        }
        break;
      }
    }
  }
  return f;
}

struct SyntheticTruth {
  ActivityMatrix f_true;
  ActivityParams theta_true;
  std::vector<Eigen::MatrixXd> pi_true;  // per sequence, zero off the active set
  std::vector<StateAssignment> z_true;
  std::vector<SequenceFrames> frames;
};

/// Samples transitions, state paths and frames for a fixed activity matrix
/// and emission parameters. Each sequence uses its own stream derived from
/// one draw of `rng`.
inline SyntheticTruth generate_corpus_with_theta(const ActivityMatrix& f, const ActivityParams& theta,
                                                 const std::vector<std::size_t>& t_frames,
                                                 const Hyperparams& hyper, Rng& rng) {
  hyper.validate();
  if (t_frames.size() != f.rows()) throw DimensionMismatch("t_frames must have one entry per sequence");
  if (theta.size() != f.cols()) throw DimensionMismatch("theta must have one row per activity");
  const std::size_t m_atoms = theta.empty() ? 0 : theta.front().size();
  for (const auto& row : theta)
    if (row.size() != m_atoms) throw DimensionMismatch("theta rows differ in length");

  SyntheticTruth out;
  out.f_true = f;
  out.theta_true = theta;
  const std::uint64_t root = rng();
  for (std::size_t i = 0; i < f.rows(); ++i) {
    Rng seq_rng = make_stream(root, "synth-sequence", i);
    const auto act = f.active(i);
    if (act.empty()) throw ValidationError("sequence " + std::to_string(i) + " has no activity");
    const auto k_total = static_cast<Eigen::Index>(f.cols());
    Eigen::MatrixXd eta = Eigen::MatrixXd::Zero(k_total, k_total);
    for (std::size_t j : act)
      for (std::size_t k : act)
        eta(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
            sample_gamma(seq_rng, hyper.alpha + (j == k ? hyper.kappa : 0.0));
    Eigen::MatrixXd pi = normalize_transitions(eta, act, f.cols());

    StateAssignment z(t_frames[i]);
    SequenceFrames frames(t_frames[i], FrameVector{std::vector<std::uint8_t>(m_atoms, 0)});
    for (std::size_t t = 0; t < t_frames[i]; ++t) {
      if (t == 0) {
        z[t] = static_cast<int>(act[std::uniform_int_distribution<std::size_t>(0, act.size() - 1)(seq_rng)]);
      } else {
        std::vector<double> w;
        for (std::size_t k : act) w.push_back(pi(z[t - 1], static_cast<Eigen::Index>(k)));
        z[t] = static_cast<int>(act[sample_discrete(seq_rng, w)]);
      }
      for (std::size_t n = 0; n < m_atoms; ++n)
        frames[t].bits[n] = uniform01(seq_rng) < theta[static_cast<std::size_t>(z[t])][n] ? 1 : 0;
    }
    out.pi_true.push_back(std::move(pi));
    out.z_true.push_back(std::move(z));
    out.frames.push_back(std::move(frames));
  }
  return out;
}

/// Full generative draw given F: theta rows from the Beta emission prior,
/// then transitions, paths and frames.
inline SyntheticTruth generate_corpus(const ActivityMatrix& f, std::size_t m_atoms,
                                      const std::vector<std::size_t>& t_frames, const Hyperparams& hyper,
                                      Rng& rng) {
  hyper.validate();
  ActivityParams theta(f.cols(), std::vector<double>(m_atoms));
  for (auto& row : theta)
    for (double& v : row) v = clamp_theta(sample_beta(rng, hyper.emit_a0, hyper.emit_b0));
  return generate_corpus_with_theta(f, theta, t_frames, hyper, rng);
}

inline std::string synthetic_atom_label(std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "atom_%03zu", n);
  return buf;
}

inline std::string synthetic_sequence_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "seq_%04zu", i);
  return buf;
}

/// Writes synthetic frames as a corpus: atom n becomes subtitle token
/// atom_NNN, frame t sits at t seconds, and every sequence shares one
/// description so outlier filtering keeps them all.
inline Corpus synthetic_to_corpus(const SyntheticTruth& truth, const std::string& category = "synthetic") {
  Corpus c;
  c.category = category;
  for (std::size_t i = 0; i < truth.frames.size(); ++i) {
    SequenceRecord rec;
    rec.id = synthetic_sequence_id(i);
    rec.description_tokens = {"synthetic", "activity", "sequence"};
    for (std::size_t t = 0; t < truth.frames[i].size(); ++t) {
      Frame fr;
      fr.t = static_cast<double>(t);
      for (std::size_t n = 0; n < truth.frames[i][t].size(); ++n)
        if (truth.frames[i][t][n]) fr.subtitle_tokens.push_back(synthetic_atom_label(n));
      rec.frames.push_back(std::move(fr));
    }
    c.sequences.push_back(std::move(rec));
  }
  return c;
}

}  // namespace storyline
