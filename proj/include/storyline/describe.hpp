#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "storyline/errors.hpp"
#include "storyline/rng.hpp"

namespace storyline {

inline const std::string kStartToken = "<s>";
inline const std::string kEndToken = "</s>";

using TokenStream = std::vector<std::string>;

/// Order-R word chain. A context is the previous R tokens, start-padded.
struct MarkovLm {
  std::size_t order = 3;
  std::map<std::vector<std::string>, std::map<std::string, long>> transitions;

  long count(const std::vector<std::string>& context, const std::string& next) const {
    auto it = transitions.find(context);
    if (it == transitions.end()) return 0;
    auto jt = it->second.find(next);
    return jt == it->second.end() ? 0 : jt->second;
  }
};

inline MarkovLm train_markov_lm(const std::vector<TokenStream>& streams, std::size_t order = 3) {
  if (order < 1) throw ValidationError("Markov order must be at least 1");
  MarkovLm lm;
  lm.order = order;
  bool any = false;
  for (const auto& s : streams) {
    if (s.empty()) continue;
    any = true;
    std::vector<std::string> ctx(order, kStartToken);
    auto step = [&](const std::string& next) {
      ++lm.transitions[ctx][next];
      ctx.erase(ctx.begin());
      ctx.push_back(next);
    };
    for (const auto& tok : s) step(tok);
    step(kEndToken);
  }
  if (!any) throw ValidationError("cannot train a language model on empty streams");
  return lm;
}

/// Ancestral sampling from the empirical next-token counts.
inline TokenStream sample_description(const MarkovLm& lm, Rng& rng, std::size_t max_len = 30) {
  TokenStream out;
  std::vector<std::string> ctx(lm.order, kStartToken);
  std::vector<double> w;
  std::vector<const std::string*> tok;
  while (out.size() < max_len) {
    auto it = lm.transitions.find(ctx);
    if (it == lm.transitions.end()) break;
    w.clear();
    tok.clear();
    for (const auto& [next, c] : it->second) {
      tok.push_back(&next);
      w.push_back(static_cast<double>(c));
    }
    const std::string& next = *tok[sample_discrete(rng, w)];
    if (next == kEndToken) break;
    out.push_back(next);
    ctx.erase(ctx.begin());
    ctx.push_back(next);
  }
  return out;
}

/// Mean theta over positions whose token is a language atom; 0 when none is.
inline double rank_description(const TokenStream& tokens, const std::vector<double>& theta_l,
                               const std::vector<std::string>& atom_labels) {
  if (theta_l.size() != atom_labels.size()) throw DimensionMismatch("theta and atom labels differ in length");
  std::map<std::string, double> lookup;
  for (std::size_t j = 0; j < atom_labels.size(); ++j) {
    if (!(theta_l[j] >= 0.0 && theta_l[j] <= 1.0)) throw DomainError("theta entries must lie in [0,1]");
    lookup.emplace(atom_labels[j], theta_l[j]);
  }
  double num = 0.0;
  double den = 0.0;
  for (const auto& t : tokens) {
    auto it = lookup.find(t);
    if (it == lookup.end()) continue;
    num += it->second;
    den += 1.0;
  }
  return den > 0.0 ? num / den : 0.0;
}

struct RankedDescription {
  TokenStream tokens;
  double rank = 0.0;
};

/// Best of n_samples sampled descriptions; ties go to the shorter, then the
/// lexicographically smaller one.
inline RankedDescription describe_activity(const MarkovLm& lm, const std::vector<double>& theta_l,
                                           const std::vector<std::string>& atom_labels, std::size_t n_samples,
                                           Rng& rng, std::size_t max_len = 30) {
  if (n_samples < 1) throw ValidationError("describe needs at least one sample");
  RankedDescription best;
  for (std::size_t s = 0; s < n_samples; ++s) {
    RankedDescription cand{sample_description(lm, rng, max_len), 0.0};
    cand.rank = rank_description(cand.tokens, theta_l, atom_labels);
    const bool better = s == 0 || cand.rank > best.rank ||
                        (cand.rank == best.rank && (cand.tokens.size() < best.tokens.size() ||
                                                    (cand.tokens.size() == best.tokens.size() &&
                                                     cand.tokens < best.tokens)));
    if (better) best = std::move(cand);
  }
  return best;
}

}  // namespace storyline
