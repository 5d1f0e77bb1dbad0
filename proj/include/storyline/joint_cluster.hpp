#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "storyline/corpus.hpp"
#include "storyline/errors.hpp"

namespace storyline {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Distances and sequence-level graph
// ---------------------------------------------------------------------------

/// Chi-squared histogram distance, 1/2 sum (a-b)^2/(a+b); coordinates where
/// both entries are zero are skipped.
inline double chi2_distance(std::span<const double> h1, std::span<const double> h2) {
  if (h1.size() != h2.size()) throw DimensionMismatch("chi2_distance: histogram lengths differ");
  double d = 0.0;
  for (std::size_t m = 0; m < h1.size(); ++m) {
    if (h1[m] < 0.0 || h2[m] < 0.0) throw DomainError("chi2_distance: negative histogram entry");
    const double s = h1[m] + h2[m];
    if (s == 0.0) continue;
    const double diff = h1[m] - h2[m];
    d += diff * diff / s;
  }
  return 0.5 * d;
}

/// L1-normalised description bag-of-words over the union vocabulary, one
/// histogram per sequence in corpus order.
inline std::vector<std::vector<double>> description_histograms(const Corpus& corpus) {
  std::map<std::string, std::size_t> index;
  for (const auto& s : corpus.sequences)
    for (const auto& w : s.description_tokens) index.emplace(w, 0);
  std::size_t next = 0;
  for (auto& [w, i] : index) i = next++;

  std::vector<std::vector<double>> hist(corpus.sequences.size(), std::vector<double>(index.size(), 0.0));
  for (std::size_t s = 0; s < corpus.sequences.size(); ++s) {
    const auto& toks = corpus.sequences[s].description_tokens;
    for (const auto& w : toks) hist[s][index.at(w)] += 1.0;
    if (!toks.empty())
      for (double& v : hist[s]) v /= static_cast<double>(toks.size());
  }
  return hist;
}

inline MatrixXd pairwise_chi2(const std::vector<std::vector<double>>& hist) {
  const auto n = static_cast<Eigen::Index>(hist.size());
  MatrixXd d = MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = chi2_distance(hist[i], hist[j]);
  return d;
}

struct SequenceKnnGraph {
  std::map<std::string, std::vector<std::string>> neighbors;
  std::size_t k = 0;

  /// Neighbour lists as indices into `ids`.
  std::vector<std::vector<std::size_t>> as_indices(const std::vector<std::string>& ids) const {
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < ids.size(); ++i) pos[ids[i]] = i;
    std::vector<std::vector<std::size_t>> out(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto it = neighbors.find(ids[i]);
      if (it == neighbors.end()) continue;
      for (const auto& nb : it->second) {
        auto p = pos.find(nb);
        if (p != pos.end()) out[i].push_back(p->second);
      }
    }
    return out;
  }
};

/// kNN graph of sequences by chi-squared distance of description
/// bag-of-words; ties broken by sequence id.
inline SequenceKnnGraph build_sequence_knn(const Corpus& corpus, std::size_t k) {
  const std::size_t n = corpus.sequences.size();
  if (n < 2) throw ValidationError("build_sequence_knn needs at least 2 sequences");
  if (k < 1) throw ValidationError("build_sequence_knn: k must be at least 1");
  const MatrixXd d = pairwise_chi2(description_histograms(corpus));

  SequenceKnnGraph g;
  g.k = k;
  const std::size_t take = std::min(k, n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) others.push_back(j);
    std::sort(others.begin(), others.end(), [&](std::size_t a, std::size_t b) {
      const double da = d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a));
      const double db = d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b));
      if (da != db) return da < db;
      return corpus.sequences[a].id < corpus.sequences[b].id;
    });
    auto& list = g.neighbors[corpus.sequences[i].id];
    for (std::size_t r = 0; r < take; ++r) list.push_back(corpus.sequences[others[r]].id);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Single-cluster graph partitioning
// ---------------------------------------------------------------------------

inline void validate_affinity(const MatrixXd& a, bool symmetric) {
  if ((a.array() < 0.0).any()) throw DomainError("affinity matrix has negative entries");
  if (symmetric) {
    if (a.rows() != a.cols()) throw DimensionMismatch("affinity matrix must be square");
    if (((a - a.transpose()).array().abs() > 1e-9).any())
      throw DomainError("affinity matrix is not symmetric");
  }
}

struct PowerIterationResult {
  VectorXd vector;
  bool converged = false;
  int iterations = 0;
};

/// Dominant (Perron) eigenvector of a symmetric non-negative matrix by
/// shifted power iteration, normalised to unit length with non-negative sum.
/// The shift of half the largest row sum separates the Perron root from a
/// possible -lambda_max of bipartite components.
inline PowerIterationResult dominant_eigenvector(const MatrixXd& a, int max_iter = 1000,
                                                 double tol = 1e-9) {
  const Eigen::Index n = a.rows();
  PowerIterationResult res;
  res.vector = VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  const double shift = 0.5 * a.cwiseAbs().rowwise().sum().maxCoeff();
  for (int it = 1; it <= max_iter; ++it) {
    VectorXd y = a * res.vector + shift * res.vector;
    const double norm = y.norm();
    res.iterations = it;
    if (norm == 0.0) {
      res.converged = true;  // zero matrix: every vector is an eigenvector
      return res;
    }
    y /= norm;
    if (y.sum() < 0.0) y = -y;
    const double delta = (y - res.vector).norm();
    res.vector = std::move(y);
    if (delta < tol) {
      res.converged = true;
      return res;
    }
  }
  return res;
}

inline double rayleigh_quotient(const MatrixXd& a, const VectorXd& x) {
  const double denom = x.squaredNorm();
  if (denom == 0.0) throw DomainError("rayleigh_quotient of a zero vector");
  return x.dot(a * x) / denom;
}

/// Rounds a relaxed indicator: sort entries descending (index order on ties)
/// and keep the prefix whose binary indicator has the largest Rayleigh
/// quotient; the shortest such prefix wins ties.
inline VectorXd round_rayleigh_prefix(const MatrixXd& a, const VectorXd& relaxed) {
  const Eigen::Index n = relaxed.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index p, Eigen::Index q) { return relaxed(p) > relaxed(q); });

  double numer = 0.0;
  double best = -std::numeric_limits<double>::infinity();
  std::size_t best_len = 1;
  for (std::size_t len = 1; len <= order.size(); ++len) {
    const Eigen::Index v = order[len - 1];
    double cross = 0.0;
    for (std::size_t u = 0; u + 1 < len; ++u) cross += a(order[u], v) + a(v, order[u]);
    numer += cross + a(v, v);
    const double q = numer / static_cast<double>(len);
    if (len == 1 || q > best + 1e-12 * std::max(1.0, std::abs(best))) {
      best = q;
      best_len = len;
    }
  }
  VectorXd x = VectorXd::Zero(n);
  for (std::size_t i = 0; i < best_len; ++i) x(order[i]) = 1.0;
  return x;
}

/// Single dominant cluster of an affinity graph as a binary indicator.
inline VectorXd scgp_dominant_cluster(const MatrixXd& a) {
  if (a.size() == 0) throw ValidationError("scgp_dominant_cluster: empty matrix");
  validate_affinity(a, true);
  const auto eig = dominant_eigenvector(a);
  if (!eig.converged)
    throw ConvergenceError("power iteration did not converge after " + std::to_string(eig.iterations) +
                           " iterations");
  return round_rayleigh_prefix(a, eig.vector);
}

// ---------------------------------------------------------------------------
// Joint objective over several sequences
// ---------------------------------------------------------------------------

/// Intra-sequence affinities, directed inter-sequence affinities for every
/// (i, j) with j a neighbour of i, and the neighbour lists.
struct JointProblem {
  std::vector<MatrixXd> intra;
  std::map<std::pair<std::size_t, std::size_t>, MatrixXd> inter;
  std::vector<std::vector<std::size_t>> neighbors;

  std::size_t size() const noexcept { return intra.size(); }

  const MatrixXd& inter_matrix(std::size_t i, std::size_t j) const {
    auto it = inter.find({i, j});
    if (it == inter.end())
      throw ValidationError("missing inter matrix for pair (" + std::to_string(i) + ", " +
                            std::to_string(j) + ")");
    return it->second;
  }
};

namespace detail {

inline void check_joint_point(const std::vector<VectorXd>& x, const JointProblem& p) {
  if (x.size() != p.size()) throw DimensionMismatch("indicator count differs from sequence count");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].size() != p.intra[i].rows())
      throw DimensionMismatch("indicator " + std::to_string(i) + " has wrong length");
    if (x[i].squaredNorm() == 0.0)
      throw DomainError("indicator " + std::to_string(i) + " is all zero");
  }
}

}  // namespace detail

inline double joint_objective(const std::vector<VectorXd>& x, const JointProblem& p) {
  detail::check_joint_point(x, p);
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += rayleigh_quotient(p.intra[i], x[i]);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j : p.neighbors[i]) {
      const double denom = x[i].sum() * x[j].sum();
      if (denom == 0.0) throw DomainError("inter term with zero cluster mass");
      total += x[i].dot(p.inter_matrix(i, j) * x[j]) / denom;
    }
  }
  return total;
}

/// Analytic gradient of joint_objective with respect to every indicator. The
/// inter term for (i, j) contributes to both x_i and x_j.
inline std::vector<VectorXd> joint_gradient(const std::vector<VectorXd>& x, const JointProblem& p) {
  detail::check_joint_point(x, p);
  std::vector<VectorXd> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const VectorXd ax = p.intra[i] * x[i];
    const double xx = x[i].squaredNorm();
    const double r = x[i].dot(ax) / xx;
    grad[i] = (2.0 * ax - 2.0 * r * x[i]) / xx;
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j : p.neighbors[i]) {
      const MatrixXd& a = p.inter_matrix(i, j);
      const double si = x[i].sum();
      const double sj = x[j].sum();
      const double denom = si * sj;
      const VectorXd axj = a * x[j];
      const VectorXd atxi = a.transpose() * x[i];
      const double r = x[i].dot(axj) / denom;
      grad[i] += (axj - VectorXd::Constant(x[i].size(), sj * r)) / denom;
      grad[j] += (atxi - VectorXd::Constant(x[j].size(), si * r)) / denom;
    }
  }
  return grad;
}

struct AscentConfig {
  double initial_step = 0.1;
  int max_iter = 500;
  double rel_tol = 1e-6;
  double min_step = 1e-12;
};

struct AscentResult {
  std::vector<VectorXd> x;
  std::vector<double> objective_trace;  // accepted objective values, starting point first
  int iterations = 0;
};

/// Full-gradient projected ascent on [0,1]^n. A step that lowers the
/// objective (or empties an indicator) is rejected and the step halved, so
/// the accepted objective sequence never decreases.
inline AscentResult projected_ascent(const JointProblem& p, std::vector<VectorXd> x,
                                     const AscentConfig& cfg = {}) {
  AscentResult res;
  double f = joint_objective(x, p);
  res.objective_trace.push_back(f);
  double step = cfg.initial_step;
  for (int it = 0; it < cfg.max_iter && step >= cfg.min_step; ++it) {
    res.iterations = it + 1;
    const auto g = joint_gradient(x, p);
    std::vector<VectorXd> cand(x.size());
    bool degenerate = false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      cand[i] = (x[i] + step * g[i]).cwiseMax(0.0).cwiseMin(1.0);
      if (cand[i].sum() == 0.0) degenerate = true;
    }
    if (degenerate) {
      step *= 0.5;
      continue;
    }
    const double f_new = joint_objective(cand, p);
    if (f_new < f) {
      step *= 0.5;
      continue;
    }
    const double gain = f_new - f;
    x = std::move(cand);
    f = f_new;
    res.objective_trace.push_back(f);
    if (gain <= cfg.rel_tol * std::max(std::abs(f), 1e-300)) break;
  }
  res.x = std::move(x);
  return res;
}

// ---------------------------------------------------------------------------
// Proposal graphs and iterative extraction
// ---------------------------------------------------------------------------

struct SequenceProposals {
  std::string id;
  std::vector<ProposalRef> refs;
  MatrixXd features;  // one row per proposal
};

/// Gathers the proposals of every sequence (corpus order).
inline std::vector<SequenceProposals> collect_proposals(const Corpus& corpus) {
  const std::size_t dim = corpus.feature_dim();
  std::vector<SequenceProposals> out;
  for (const auto& seq : corpus.sequences) {
    SequenceProposals sp;
    sp.id = seq.id;
    std::vector<const std::vector<double>*> rows;
    for (std::size_t t = 0; t < seq.frames.size(); ++t)
      for (std::size_t k = 0; k < seq.frames[t].proposal_features.size(); ++k) {
        sp.refs.push_back({seq.id, t, k});
        rows.push_back(&seq.frames[t].proposal_features[k]);
      }
    sp.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < dim; ++c)
        sp.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = (*rows[r])[c];
    out.push_back(std::move(sp));
  }
  return out;
}

inline MatrixXd euclidean_distances(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd d(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) d(i, j) = (a.row(i) - b.row(j)).norm();
  return d;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    m = 0.5 * (m + lo);
  }
  return m;
}

/// exp(-d / sigma), with a non-positive sigma treated as 1.
inline double distance_affinity(double d, double sigma) {
  return std::exp(-d / (sigma > 0.0 ? sigma : 1.0));
}

/// Affinity restricted to each row's `nn` nearest columns and each column's
/// `nn` nearest rows (union, i.e. max-symmetrised). When `same_set` is true
/// the diagonal is excluded and stays zero.
inline MatrixXd knn_affinity(const MatrixXd& dist, std::size_t nn, double sigma, bool same_set) {
  MatrixXd a = MatrixXd::Zero(dist.rows(), dist.cols());
  auto link = [&](Eigen::Index r, Eigen::Index c) { a(r, c) = distance_affinity(dist(r, c), sigma); };
  auto nearest = [&](auto get, Eigen::Index count, Eigen::Index self) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index c = 0; c < count; ++c)
      if (c != self) idx.push_back(c);
    const std::size_t take = std::min(nn, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(),
                      [&](Eigen::Index p, Eigen::Index q) {
                        const double dp = get(p), dq = get(q);
                        return dp != dq ? dp < dq : p < q;
                      });
    idx.resize(take);
    return idx;
  };
  for (Eigen::Index r = 0; r < dist.rows(); ++r)
    for (Eigen::Index c : nearest([&](Eigen::Index c2) { return dist(r, c2); }, dist.cols(),
                                  same_set ? r : Eigen::Index{-1}))
      link(r, c);
  for (Eigen::Index c = 0; c < dist.cols(); ++c)
    for (Eigen::Index r : nearest([&](Eigen::Index r2) { return dist(r2, c); }, dist.rows(),
                                  same_set ? c : Eigen::Index{-1}))
      link(r, c);
  return a;
}

struct ExtractConfig {
  std::size_t k_clusters = 20;
  std::size_t intra_nn = 2;
  std::size_t inter_nn = 2;
  AscentConfig ascent;
};

using ProposalCluster = std::vector<ProposalRef>;

/// Repeatedly extracts the dominant joint cluster of proposals across
/// sequences and removes its members. `neighbors[i]` lists the sequence
/// neighbours of proposals[i] by index. Returns at most k_clusters disjoint
/// clusters, in extraction order.
inline std::vector<ProposalCluster> joint_cluster_extract(
    const std::vector<SequenceProposals>& proposals,
    const std::vector<std::vector<std::size_t>>& neighbors, const ExtractConfig& cfg = {}) {
  const std::size_t n = proposals.size();
  if (neighbors.size() != n) throw DimensionMismatch("neighbour lists do not match sequences");

  // scale parameters from all intra and all neighbour-pair distances
  std::vector<MatrixXd> intra_dist(n);
  std::map<std::pair<std::size_t, std::size_t>, MatrixXd> inter_dist;
  std::vector<double> intra_all, inter_all;
  for (std::size_t i = 0; i < n; ++i) {
    intra_dist[i] = euclidean_distances(proposals[i].features, proposals[i].features);
    for (Eigen::Index r = 0; r < intra_dist[i].rows(); ++r)
      for (Eigen::Index c = r + 1; c < intra_dist[i].cols(); ++c) intra_all.push_back(intra_dist[i](r, c));
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j : neighbors[i]) {
      if (inter_dist.contains({i, j})) continue;
      MatrixXd d = euclidean_distances(proposals[i].features, proposals[j].features);
      for (double v : d.reshaped()) inter_all.push_back(v);
      inter_dist[{j, i}] = d.transpose();
      inter_dist[{i, j}] = std::move(d);
    }
  const double sigma_intra = median(intra_all);
  const double sigma_inter = median(inter_all);

  std::vector<std::vector<Eigen::Index>> remaining(n);
  for (std::size_t i = 0; i < n; ++i) {
    remaining[i].resize(static_cast<std::size_t>(proposals[i].features.rows()));
    std::iota(remaining[i].begin(), remaining[i].end(), Eigen::Index{0});
  }

  std::vector<ProposalCluster> clusters;
  while (clusters.size() < cfg.k_clusters) {
    std::vector<std::size_t> active;
    std::vector<std::ptrdiff_t> local(n, -1);
    for (std::size_t i = 0; i < n; ++i)
      if (!remaining[i].empty()) {
        local[i] = static_cast<std::ptrdiff_t>(active.size());
        active.push_back(i);
      }
    if (active.empty()) break;

    JointProblem prob;
    prob.neighbors.resize(active.size());
    for (std::size_t li = 0; li < active.size(); ++li) {
      const std::size_t i = active[li];
      const auto& rem = remaining[i];
      prob.intra.push_back(knn_affinity(intra_dist[i](rem, rem), cfg.intra_nn, sigma_intra, true));
      for (std::size_t j : neighbors[i]) {
        if (local[j] < 0 || j == i) continue;
        const auto lj = static_cast<std::size_t>(local[j]);
        prob.neighbors[li].push_back(lj);
        prob.inter[{li, lj}] =
            knn_affinity(inter_dist.at({i, j})(rem, remaining[j]), cfg.inter_nn, sigma_inter, false);
      }
    }

    std::vector<VectorXd> x0;
    for (const auto& a : prob.intra) {
      VectorXd v = dominant_eigenvector(a).vector.cwiseMax(0.0);
      const double mx = v.maxCoeff();
      x0.push_back(mx > 0.0 ? VectorXd(v / mx) : VectorXd::Ones(a.rows()));
    }
    const auto relaxed = projected_ascent(prob, std::move(x0), cfg.ascent).x;

    ProposalCluster cluster;
    for (std::size_t li = 0; li < active.size(); ++li) {
      const std::size_t i = active[li];
      const VectorXd ind = round_rayleigh_prefix(prob.intra[li], relaxed[li]);
      std::vector<Eigen::Index> keep;
      for (std::size_t r = 0; r < remaining[i].size(); ++r) {
        if (ind(static_cast<Eigen::Index>(r)) > 0.5)
          cluster.push_back(proposals[i].refs[static_cast<std::size_t>(remaining[i][r])]);
        else
          keep.push_back(remaining[i][r]);
      }
      remaining[i] = std::move(keep);
    }
    std::sort(cluster.begin(), cluster.end());
    clusters.push_back(std::move(cluster));
  }
  return clusters;
}

struct VisualAtoms {
  AtomVocabulary vocabulary;
  VisualAssignments assignments;
};

/// Appends one visual atom per cluster to the language vocabulary and maps
/// each clustered proposal to its atom.
inline VisualAtoms visual_atoms_from_clusters(const AtomVocabulary& language_vocab,
                                              const std::vector<ProposalCluster>& clusters) {
  std::vector<Atom> atoms;
  for (std::size_t m = 0; m < language_vocab.language_count(); ++m) atoms.push_back(language_vocab[m]);
  VisualAtoms out;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const int id = static_cast<int>(atoms.size());
    char label[32];
    std::snprintf(label, sizeof label, "visual_%02zu", c);
    atoms.push_back({id, Modality::visual, label});
    for (const auto& ref : clusters[c]) out.assignments[ref] = id;
  }
  out.vocabulary = AtomVocabulary(std::move(atoms));
  return out;
}

/// Extracts visual atoms for a corpus: sequence kNN graph from descriptions,
/// then joint proposal clustering.
inline std::vector<ProposalCluster> cluster_corpus_proposals(const Corpus& corpus, std::size_t knn,
                                                             const ExtractConfig& cfg = {}) {
  const auto proposals = collect_proposals(corpus);
  std::vector<std::vector<std::size_t>> nbrs(proposals.size());
  if (corpus.sequences.size() >= 2) {
    std::vector<std::string> ids;
    for (const auto& s : corpus.sequences) ids.push_back(s.id);
    nbrs = build_sequence_knn(corpus, knn).as_indices(ids);
  }
  return joint_cluster_extract(proposals, nbrs, cfg);
}

// ---------------------------------------------------------------------------
// Outlier sequence removal
// ---------------------------------------------------------------------------

/// Sequence affinity from description bag-of-words: exp(-chi2 / sigma) with
/// sigma the median pairwise distance; pairs sharing no word get 0 and the
/// diagonal is 1.
inline MatrixXd description_affinity(const Corpus& corpus) {
  const auto hist = description_histograms(corpus);
  const MatrixXd d = pairwise_chi2(hist);
  const auto n = d.rows();
  std::vector<double> pairs, positive;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      pairs.push_back(d(i, j));
      if (d(i, j) > 0.0) positive.push_back(d(i, j));
    }
  double sigma = median(pairs);
  if (sigma <= 0.0)
    sigma = positive.empty() ? 1.0
                             : std::accumulate(positive.begin(), positive.end(), 0.0) /
                                   static_cast<double>(positive.size());

  MatrixXd a = MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      bool shared = false;
      for (std::size_t m = 0; m < hist[static_cast<std::size_t>(i)].size() && !shared; ++m)
        shared = hist[static_cast<std::size_t>(i)][m] > 0.0 && hist[static_cast<std::size_t>(j)][m] > 0.0;
      a(i, j) = a(j, i) = shared ? distance_affinity(d(i, j), sigma) : 0.0;
    }
  return a;
}

struct OutlierSplit {
  Corpus kept;
  std::vector<std::string> discarded;
};

inline OutlierSplit remove_outliers(const Corpus& corpus) {
  if (corpus.sequences.size() < 2) throw ValidationError("remove_outliers needs at least 2 sequences");
  const VectorXd keep = scgp_dominant_cluster(description_affinity(corpus));
  OutlierSplit out;
  out.kept.category = corpus.category;
  for (std::size_t i = 0; i < corpus.sequences.size(); ++i) {
    if (keep(static_cast<Eigen::Index>(i)) > 0.5)
      out.kept.sequences.push_back(corpus.sequences[i]);
    else
      out.discarded.push_back(corpus.sequences[i].id);
  }
  return out;
}

}  // namespace storyline
