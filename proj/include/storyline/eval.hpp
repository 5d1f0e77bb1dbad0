#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "storyline/errors.hpp"

namespace storyline {

struct Interval {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  std::string label;

  bool operator==(const Interval&) const = default;
};

struct SequenceTrack {
  std::size_t length = 0;
  std::vector<Interval> intervals;

  bool operator==(const SequenceTrack&) const = default;
};

/// Sequence id -> track. Iteration order (sorted ids) fixes the global frame order.
using Segmentation = std::map<std::string, SequenceTrack>;

using FrameLabels = std::vector<std::optional<std::string>>;

inline void validate_track(const SequenceTrack& track) {
  std::size_t prev_end = 0;
  for (const auto& iv : track.intervals) {
    if (iv.start >= iv.end) throw ValidationError("interval with start >= end");
    if (iv.end > track.length) throw ValidationError("interval extends past the sequence end");
    if (iv.start < prev_end) throw ValidationError("intervals overlap or are unsorted");
    prev_end = iv.end;
  }
}

inline FrameLabels frame_labels(const std::vector<Interval>& intervals, std::size_t t) {
  validate_track({t, intervals});
  FrameLabels out(t);
  for (const auto& iv : intervals)
    for (std::size_t f = iv.start; f < iv.end; ++f) out[f] = iv.label;
  return out;
}

/// Collapses per-frame labels into maximal runs.
inline std::vector<Interval> intervals_from_labels(const FrameLabels& labels) {
  std::vector<Interval> out;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (!labels[t]) continue;
    if (!out.empty() && out.back().end == t && out.back().label == *labels[t])
      ++out.back().end;
    else
      out.push_back({t, t + 1, *labels[t]});
  }
  return out;
}

/// Optimal assignment maximising total weight on an n x m matrix; returns
/// the column matched to each row, or -1.
inline std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& w) {
  const std::size_t rows = w.size();
  const std::size_t cols = rows ? w.front().size() : 0;
  const std::size_t n = std::max(rows, cols);
  if (n == 0) return {};
  // shortest augmenting path with potentials, on the padded square cost -w
  const double inf = std::numeric_limits<double>::infinity();
  auto cost = [&](std::size_t i, std::size_t j) { return (i < rows && j < cols) ? -w[i][j] : 0.0; };
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> out(rows, -1);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] >= 1 && p[j] - 1 < rows && j - 1 < cols) out[p[j] - 1] = static_cast<int>(j - 1);
  return out;
}

enum class MatchScore { iou, ap, overlap };

/// Injective map from predicted to ground-truth labels.
struct LabelMatching {
  std::map<std::string, std::string> pred_to_gt;
  std::map<std::string, double> gt_score;  // score of each gt label under the matching, 0 if unmatched
  double total = 0.0;
};

using LabelConfidences = std::map<std::string, std::vector<double>>;

/// Average precision of `confidence` for retrieving `positive` frames, ties
/// broken by frame order.
inline double average_precision(const std::vector<char>& positive, const std::vector<double>& confidence) {
  if (positive.size() != confidence.size()) throw DimensionMismatch("confidence length mismatch");
  std::vector<std::size_t> order(positive.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return confidence[a] > confidence[b]; });
  double hits = 0.0, sum = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r)
    if (positive[order[r]]) {
      hits += 1.0;
      sum += hits / static_cast<double>(r + 1);
    }
  return hits > 0.0 ? sum / hits : 0.0;
}

/// Frames with no ground-truth label are left out of iou and overlap scores;
/// for ap they stay in the ranking as negatives. `conf` is required for
/// MatchScore::ap and must be aligned with the frame lists.
inline LabelMatching best_matching(const FrameLabels& gt, const FrameLabels& pred, MatchScore score,
                                   const LabelConfidences* conf = nullptr) {
  if (gt.size() != pred.size()) throw DimensionMismatch("ground truth and prediction lengths differ");
  std::vector<std::size_t> universe;
  for (std::size_t t = 0; t < gt.size(); ++t)
    if (gt[t] || score == MatchScore::ap) universe.push_back(t);

  std::set<std::string> gt_set, pred_set;
  for (auto t : universe) {
    if (!gt[t]) continue;
    gt_set.insert(*gt[t]);
    if (pred[t]) pred_set.insert(*pred[t]);
  }
  if (score == MatchScore::ap) {
    if (!conf) throw ValidationError("average-precision matching needs confidences");
    for (const auto& [label, v] : *conf) {
      if (v.size() != gt.size()) throw DimensionMismatch("confidences for '" + label + "' have the wrong length");
      pred_set.insert(label);
    }
    for (const auto& t : pred)
      if (t && !conf->contains(*t)) throw ValidationError("missing confidences for label '" + *t + "'");
  }
  const std::vector<std::string> gl(gt_set.begin(), gt_set.end());
  const std::vector<std::string> pl(pred_set.begin(), pred_set.end());

  std::vector<std::vector<double>> w(gl.size(), std::vector<double>(pl.size(), 0.0));
  for (std::size_t a = 0; a < gl.size(); ++a) {
    std::vector<char> pos(universe.size());
    for (std::size_t u = 0; u < universe.size(); ++u) pos[u] = gt[universe[u]] && *gt[universe[u]] == gl[a];
    for (std::size_t b = 0; b < pl.size(); ++b) {
      if (score == MatchScore::ap) {
        std::vector<double> c(universe.size());
        const auto& src = conf->at(pl[b]);
        for (std::size_t u = 0; u < universe.size(); ++u) c[u] = src[universe[u]];
        w[a][b] = average_precision(pos, c);
        continue;
      }
      double inter = 0.0, uni = 0.0;
      for (std::size_t u = 0; u < universe.size(); ++u) {
        const bool in_p = pred[universe[u]] && *pred[universe[u]] == pl[b];
        inter += (pos[u] && in_p) ? 1.0 : 0.0;
        uni += (pos[u] || in_p) ? 1.0 : 0.0;
      }
      w[a][b] = score == MatchScore::iou ? (uni > 0.0 ? inter / uni : 0.0) : inter;
    }
  }

  LabelMatching m;
  const auto assign = max_weight_assignment(w);
  for (std::size_t a = 0; a < gl.size(); ++a) {
    double s = 0.0;
    if (assign[a] >= 0 && w[a][static_cast<std::size_t>(assign[a])] > 0.0) {
      s = w[a][static_cast<std::size_t>(assign[a])];
      m.pred_to_gt[pl[static_cast<std::size_t>(assign[a])]] = gl[a];
    }
    m.gt_score[gl[a]] = s;
    m.total += s;
  }
  return m;
}

/// Concatenates per-sequence frame labels in sequence-id order. Both
/// segmentations must cover the same sequences with equal lengths.
inline std::pair<FrameLabels, FrameLabels> flatten_pair(const Segmentation& gt, const Segmentation& pred) {
  if (gt.empty()) throw ValidationError("empty ground truth");
  FrameLabels g, p;
  for (const auto& [id, track] : gt) {
    auto it = pred.find(id);
    if (it == pred.end()) throw ValidationError("prediction lacks sequence '" + id + "'");
    if (it->second.length != track.length) throw DimensionMismatch("length mismatch for sequence '" + id + "'");
    const auto a = frame_labels(track.intervals, track.length);
    const auto b = frame_labels(it->second.intervals, it->second.length);
    g.insert(g.end(), a.begin(), a.end());
    p.insert(p.end(), b.begin(), b.end());
  }
  if (pred.size() != gt.size()) throw ValidationError("prediction has sequences absent from ground truth");
  return {g, p};
}

inline double mean_gt_score(const LabelMatching& m) {
  if (m.gt_score.empty()) throw ValidationError("ground truth has no labelled frames");
  return m.total / static_cast<double>(m.gt_score.size());
}

inline double matched_iou(const Segmentation& gt, const Segmentation& pred) {
  const auto [g, p] = flatten_pair(gt, pred);
  return mean_gt_score(best_matching(g, p, MatchScore::iou));
}

/// Sequence id -> label -> per-frame confidence.
using Confidences = std::map<std::string, LabelConfidences>;

inline LabelConfidences flatten_confidences(const Segmentation& gt, const Segmentation& pred,
                                            const Confidences& scores) {
  std::set<std::string> labels;
  for (const auto& [id, track] : pred)
    for (const auto& iv : track.intervals) labels.insert(iv.label);
  for (const auto& [id, per] : scores)
    for (const auto& [label, v] : per) labels.insert(label);
  LabelConfidences out;
  for (const auto& label : labels) {
    auto& v = out[label];
    for (const auto& [id, track] : gt) {
      auto it = scores.find(id);
      if (it == scores.end()) throw ValidationError("missing confidences for sequence '" + id + "'");
      auto jt = it->second.find(label);
      if (jt == it->second.end()) {
        // a label never active in this sequence has zero posterior mass here
        bool used = false;
        for (const auto& iv : pred.at(id).intervals) used = used || iv.label == label;
        if (used) throw ValidationError("missing confidences for label '" + label + "' in '" + id + "'");
        v.insert(v.end(), track.length, 0.0);
        continue;
      }
      if (jt->second.size() != track.length)
        throw DimensionMismatch("confidence length mismatch in sequence '" + id + "'");
      v.insert(v.end(), jt->second.begin(), jt->second.end());
    }
  }
  return out;
}

inline double matched_map(const Segmentation& gt, const Segmentation& pred, const Confidences& scores) {
  const auto [g, p] = flatten_pair(gt, pred);
  const auto conf = flatten_confidences(gt, pred, scores);
  return mean_gt_score(best_matching(g, p, MatchScore::ap, &conf));
}

/// Fraction of labelled frames whose predicted label maps to the true one
/// under the overlap-maximising matching.
inline double matched_frame_accuracy(const FrameLabels& gt, const FrameLabels& pred) {
  const auto m = best_matching(gt, pred, MatchScore::overlap);
  std::size_t n = 0;
  for (const auto& g : gt) n += g ? 1 : 0;
  if (n == 0) throw ValidationError("ground truth has no labelled frames");
  return m.total / static_cast<double>(n);
}

struct LabelReport {
  std::string gt_label;
  std::optional<std::string> iou_match, ap_match;
  double iou = 0.0, ap = 0.0;
};

struct EvalReport {
  double iou_csm = 0.0;
  double map_csm = 0.0;
  std::vector<LabelReport> per_label;
};

inline EvalReport evaluate(const Segmentation& gt, const Segmentation& pred, const Confidences& scores) {
  const auto [g, p] = flatten_pair(gt, pred);
  const auto conf = flatten_confidences(gt, pred, scores);
  const auto mi = best_matching(g, p, MatchScore::iou);
  const auto ma = best_matching(g, p, MatchScore::ap, &conf);
  EvalReport r;
  r.iou_csm = mean_gt_score(mi);
  r.map_csm = mean_gt_score(ma);
  auto reverse = [](const LabelMatching& m, const std::string& g_label) -> std::optional<std::string> {
    for (const auto& [pl, gl] : m.pred_to_gt)
      if (gl == g_label) return pl;
    return std::nullopt;
  };
  for (const auto& [label, s] : mi.gt_score)
    r.per_label.push_back({label, reverse(mi, label), reverse(ma, label), s, ma.gt_score.at(label)});
  return r;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& l : r.per_label) {
    nlohmann::json j = {{"gt_label", l.gt_label}, {"iou", l.iou}, {"ap", l.ap}};
    j["iou_match"] = l.iou_match ? nlohmann::json(*l.iou_match) : nlohmann::json(nullptr);
    j["ap_match"] = l.ap_match ? nlohmann::json(*l.ap_match) : nlohmann::json(nullptr);
    per.push_back(j);
  }
  return {{"iou_csm", r.iou_csm}, {"map_csm", r.map_csm}, {"per_label", per}};
}

/// {"sequences": {id: {"length": T, "intervals": [{start, end, label}]}}}
inline nlohmann::json segmentation_to_json(const Segmentation& seg) {
  nlohmann::json seqs = nlohmann::json::object();
  for (const auto& [id, track] : seg) {
    nlohmann::json ivs = nlohmann::json::array();
    for (const auto& iv : track.intervals) ivs.push_back({{"start", iv.start}, {"end", iv.end}, {"label", iv.label}});
    seqs[id] = {{"length", track.length}, {"intervals", ivs}};
  }
  return {{"sequences", seqs}};
}

inline Segmentation segmentation_from_json(const nlohmann::json& j) {
  try {
    Segmentation seg;
    for (const auto& [id, t] : j.at("sequences").items()) {
      SequenceTrack track;
      track.length = t.at("length").get<std::size_t>();
      for (const auto& iv : t.at("intervals")) {
        const auto& lab = iv.at("label");
        track.intervals.push_back({iv.at("start").get<std::size_t>(), iv.at("end").get<std::size_t>(),
                                   lab.is_string() ? lab.get<std::string>() : lab.dump()});
      }
      validate_track(track);
      seg.emplace(id, std::move(track));
    }
    return seg;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed segmentation: ") + e.what());
  }
}

}  // namespace storyline
