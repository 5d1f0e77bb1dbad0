#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "storyline/bphmm.hpp"
#include "storyline/corpus.hpp"
#include "storyline/describe.hpp"
#include "storyline/eval.hpp"

namespace storyline {

struct Segment {
  std::size_t start = 0;
  std::size_t end = 0;
  int activity = 0;

  bool operator==(const Segment&) const = default;
};

struct SequenceParse {
  std::string id;
  std::size_t length = 0;
  std::vector<Segment> segments;
  std::map<int, std::vector<double>> confidences;  // activity -> per-frame posterior frequency

  bool operator==(const SequenceParse&) const = default;
};

struct ExemplarRef {
  std::string sequence;
  std::size_t frame = 0;

  bool operator==(const ExemplarRef&) const = default;
};

struct ActivityRecord {
  int id = 0;
  std::vector<double> theta_language;
  std::vector<double> theta_visual;
  std::vector<std::string> description;
  double rank = 0.0;
  std::vector<ExemplarRef> exemplars;

  bool operator==(const ActivityRecord&) const = default;
};

struct StorylineParse {
  std::string category;
  std::vector<std::string> language_atoms;
  std::vector<std::string> visual_atoms;
  std::vector<SequenceParse> sequences;
  std::vector<ActivityRecord> activities;

  bool operator==(const StorylineParse&) const = default;

  const ActivityRecord* activity(int id) const {
    for (const auto& a : activities)
      if (a.id == id) return &a;
    return nullptr;
  }
};

inline void validate_parse(const StorylineParse& p) {
  std::set<int> ids;
  for (const auto& a : p.activities) {
    if (!ids.insert(a.id).second) throw ValidationError("duplicate activity id " + std::to_string(a.id));
    if (a.theta_language.size() != p.language_atoms.size() || a.theta_visual.size() != p.visual_atoms.size())
      throw DimensionMismatch("activity " + std::to_string(a.id) + " theta does not match the atom lists");
    if (a.exemplars.size() > 4) throw ValidationError("more than 4 exemplars for an activity");
  }
  std::set<std::string> seqs;
  for (const auto& s : p.sequences) {
    if (!seqs.insert(s.id).second) throw ValidationError("duplicate sequence id '" + s.id + "'");
    SequenceTrack track{s.length, {}};
    for (const auto& seg : s.segments) {
      if (!ids.contains(seg.activity))
        throw ValidationError("segment references unknown activity " + std::to_string(seg.activity));
      track.intervals.push_back({seg.start, seg.end, std::to_string(seg.activity)});
    }
    validate_track(track);
    for (const auto& [k, v] : s.confidences)
      if (v.size() != s.length) throw DimensionMismatch("confidence length mismatch in '" + s.id + "'");
  }
}

inline nlohmann::json parse_to_json(const StorylineParse& p) {
  using nlohmann::json;
  json seqs = json::array();
  for (const auto& s : p.sequences) {
    json segs = json::array();
    for (const auto& g : s.segments) segs.push_back({{"start", g.start}, {"end", g.end}, {"activity", g.activity}});
    json conf = json::object();
    for (const auto& [k, v] : s.confidences) conf[std::to_string(k)] = v;
    seqs.push_back({{"id", s.id}, {"length", s.length}, {"segments", segs}, {"confidences", conf}});
  }
  json acts = json::array();
  for (const auto& a : p.activities) {
    json ex = json::array();
    for (const auto& e : a.exemplars) ex.push_back({{"sequence", e.sequence}, {"frame", e.frame}});
    acts.push_back({{"id", a.id},
                    {"theta_language", a.theta_language},
                    {"theta_visual", a.theta_visual},
                    {"description", a.description},
                    {"rank", a.rank},
                    {"exemplars", ex}});
  }
  return {{"category", p.category},
          {"language_atoms", p.language_atoms},
          {"visual_atoms", p.visual_atoms},
          {"sequences", seqs},
          {"activities", acts}};
}

inline StorylineParse parse_from_json(const nlohmann::json& j) {
  StorylineParse p;
  try {
    p.category = j.at("category").get<std::string>();
    p.language_atoms = j.at("language_atoms").get<std::vector<std::string>>();
    p.visual_atoms = j.at("visual_atoms").get<std::vector<std::string>>();
    for (const auto& s : j.at("sequences")) {
      SequenceParse sp;
      sp.id = s.at("id").get<std::string>();
      sp.length = s.at("length").get<std::size_t>();
      for (const auto& g : s.at("segments"))
        sp.segments.push_back({g.at("start").get<std::size_t>(), g.at("end").get<std::size_t>(),
                               g.at("activity").get<int>()});
      for (const auto& [k, v] : s.at("confidences").items())
        sp.confidences[std::stoi(k)] = v.get<std::vector<double>>();
      p.sequences.push_back(std::move(sp));
    }
    for (const auto& a : j.at("activities")) {
      ActivityRecord r;
      r.id = a.at("id").get<int>();
      r.theta_language = a.at("theta_language").get<std::vector<double>>();
      r.theta_visual = a.at("theta_visual").get<std::vector<double>>();
      r.description = a.at("description").get<std::vector<std::string>>();
      r.rank = a.at("rank").get<double>();
      for (const auto& e : a.at("exemplars"))
        r.exemplars.push_back({e.at("sequence").get<std::string>(), e.at("frame").get<std::size_t>()});
      p.activities.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed storyline: ") + e.what());
  } catch (const std::logic_error& e) {
    throw ValidationError(std::string("malformed storyline: ") + e.what());
  }
  validate_parse(p);
  return p;
}

inline StorylineParse load_parse(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open storyline file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return parse_from_json(j);
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failed for " + path.string());
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

inline void save_parse(const std::filesystem::path& path, const StorylineParse& p) { write_json(path, parse_to_json(p)); }

inline Segmentation parse_segmentation(const StorylineParse& p) {
  Segmentation seg;
  for (const auto& s : p.sequences) {
    SequenceTrack t{s.length, {}};
    for (const auto& g : s.segments) t.intervals.push_back({g.start, g.end, std::to_string(g.activity)});
    seg.emplace(s.id, std::move(t));
  }
  return seg;
}

inline Confidences parse_confidences(const StorylineParse& p) {
  Confidences c;
  for (const auto& s : p.sequences)
    for (const auto& [k, v] : s.confidences) c[s.id][std::to_string(k)] = v;
  return c;
}

/// Best frame per sequence among frames labelled k, ranked by emission
/// log-likelihood; the top 4 sequences are kept.
inline std::vector<ExemplarRef> select_exemplars(int k, const std::vector<double>& theta,
                                                 const std::vector<std::string>& ids,
                                                 const std::vector<std::vector<int>>& labels,
                                                 const std::vector<SparseFrames>& data, std::size_t limit = 4) {
  std::vector<std::tuple<double, std::string, std::size_t>> best;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const VectorXd ll = log_emission_column(data[i], theta);
    std::optional<std::size_t> arg;
    for (std::size_t t = 0; t < labels[i].size(); ++t)
      if (labels[i][t] == k && (!arg || ll(static_cast<Index>(t)) > ll(static_cast<Index>(*arg)))) arg = t;
    if (arg) best.emplace_back(-ll(static_cast<Index>(*arg)), ids[i], *arg);
  }
  std::sort(best.begin(), best.end());
  std::vector<ExemplarRef> out;
  for (std::size_t r = 0; r < std::min(limit, best.size()); ++r)
    out.push_back({std::get<1>(best[r]), std::get<2>(best[r])});
  return out;
}

/// Turns sampler output into a storyline. Activity emission parameters are
/// Beta posterior means given the modal labelling. `frames` follows
/// `result.ids`.
inline StorylineParse build_parse(const GibbsResult& result, const std::vector<SequenceFrames>& frames,
                                  const AtomVocabulary& vocab, const std::string& category = {}) {
  if (frames.size() != result.ids.size()) throw DimensionMismatch("frames do not follow the sampler's sequences");
  StorylineParse p;
  p.category = category;
  for (std::size_t m = 0; m < vocab.size(); ++m)
    (vocab[m].modality == Modality::language ? p.language_atoms : p.visual_atoms).push_back(vocab[m].label);

  std::vector<SparseFrames> data;
  for (const auto& f : frames) data.push_back(to_sparse(f));
  const std::size_t m_atoms = vocab.size();
  for (const auto& d : data)
    if (d.atoms != m_atoms) throw DimensionMismatch("frame vectors do not match the vocabulary");

  std::map<int, std::pair<std::vector<double>, double>> counts;
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t t = 0; t < data[i].length(); ++t) {
      auto& [ones, n] = counts[result.labels[i][t]];
      if (ones.empty()) ones.assign(m_atoms, 0.0);
      n += 1.0;
      for (auto a : data[i].on[t]) ones[a] += 1.0;
    }
  const auto& h = result.model.hyper;
  for (const auto& [k, c] : counts) {
    ActivityRecord r;
    r.id = k;
    std::vector<double> theta(m_atoms);
    for (std::size_t a = 0; a < m_atoms; ++a) theta[a] = (c.first[a] + h.emit_a0) / (c.second + h.emit_a0 + h.emit_b0);
    for (std::size_t a = 0; a < m_atoms; ++a)
      (vocab[a].modality == Modality::language ? r.theta_language : r.theta_visual).push_back(theta[a]);
    r.exemplars = select_exemplars(k, theta, result.ids, result.labels, data);
    p.activities.push_back(std::move(r));
  }

  for (std::size_t i = 0; i < data.size(); ++i) {
    SequenceParse s;
    s.id = result.ids[i];
    s.length = data[i].length();
    FrameLabels fl(s.length);
    for (std::size_t t = 0; t < s.length; ++t) fl[t] = std::to_string(result.labels[i][t]);
    for (const auto& iv : intervals_from_labels(fl)) s.segments.push_back({iv.start, iv.end, std::stoi(iv.label)});
    s.confidences = result.posterior[i];
    p.sequences.push_back(std::move(s));
  }
  validate_parse(p);
  return p;
}

/// Subtitle tokens of every frame, one stream per frame.
inline std::vector<TokenStream> subtitle_streams(const Corpus& corpus) {
  std::vector<TokenStream> out;
  for (const auto& s : corpus.sequences)
    for (const auto& f : s.frames)
      if (!f.subtitle_tokens.empty()) out.push_back(f.subtitle_tokens);
  return out;
}

struct DescribeOptions {
  std::size_t order = 3;
  std::size_t samples = 1000;
  std::size_t max_len = 30;
  std::uint64_t seed = 0;
};

/// Fills in a description for every activity, each from its own stream.
inline void describe_parse(StorylineParse& p, const Corpus& corpus, const DescribeOptions& opt) {
  const auto lm = train_markov_lm(subtitle_streams(corpus), opt.order);
  for (auto& a : p.activities) {
    Rng rng = make_stream(opt.seed, "describe", static_cast<std::uint64_t>(a.id));
    auto best = describe_activity(lm, a.theta_language, p.language_atoms, opt.samples, rng, opt.max_len);
    a.description = std::move(best.tokens);
    a.rank = best.rank;
  }
}

// ---------------------------------------------------------------------------
// SVG timeline
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& palette() {
  static const std::vector<std::string> colors = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors;
}

struct RenderLayout {
  double left = 160.0;
  double track_width = 800.0;
  double band_height = 18.0;
  double gap = 10.0;
  double top = 20.0;
  double legend_row = 18.0;
};

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

/// One band per sequence, optionally a ground-truth band beneath it, and a
/// legend. Segment widths are proportional to frame counts on a shared scale.
inline std::string render_storyline_svg(const StorylineParse& p, const Segmentation* ground_truth = nullptr,
                                        const RenderLayout& lay = {}) {
  validate_parse(p);
  std::size_t max_len = 1;
  for (const auto& s : p.sequences) max_len = std::max(max_len, s.length);
  const double scale = lay.track_width / static_cast<double>(max_len);
  const auto& colors = palette();

  std::map<int, std::size_t> color_of;
  for (std::size_t a = 0; a < p.activities.size(); ++a) color_of[p.activities[a].id] = a % colors.size();
  std::map<std::string, std::size_t> gt_color;
  if (ground_truth)
    for (const auto& [id, tr] : *ground_truth)
      for (const auto& iv : tr.intervals) gt_color.emplace(iv.label, 0);
  {
    std::size_t c = 0;
    for (auto& [label, idx] : gt_color) idx = c++ % colors.size();
  }

  const double per_seq = lay.band_height * (ground_truth ? 2.0 : 1.0) + lay.gap;
  const double legend_top = lay.top + per_seq * static_cast<double>(p.sequences.size()) + lay.gap;
  const double height = legend_top + lay.legend_row * static_cast<double>(p.activities.size() + 1);
  const double width = lay.left + lay.track_width + 20.0;

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + format_number(width) + "\" height=\"" +
         format_number(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  double y = lay.top;
  for (const auto& s : p.sequences) {
    svg += "<text x=\"4\" y=\"" + format_number(y + lay.band_height - 5.0) + "\">" + xml_escape(s.id) + "</text>\n";
    for (const auto& g : s.segments) {
      svg += "<rect class=\"segment\" data-sequence=\"" + xml_escape(s.id) + "\" data-activity=\"" +
             std::to_string(g.activity) + "\" x=\"" + format_number(lay.left + scale * static_cast<double>(g.start)) +
             "\" y=\"" + format_number(y) + "\" width=\"" + format_number(scale * static_cast<double>(g.end - g.start)) +
             "\" height=\"" + format_number(lay.band_height) + "\" fill=\"" + colors[color_of.at(g.activity)] +
             "\"/>\n";
    }
    if (ground_truth) {
      const double gy = y + lay.band_height;
      auto it = ground_truth->find(s.id);
      if (it != ground_truth->end())
        for (const auto& iv : it->second.intervals)
          svg += "<rect class=\"truth\" data-sequence=\"" + xml_escape(s.id) + "\" data-label=\"" +
                 xml_escape(iv.label) + "\" x=\"" + format_number(lay.left + scale * static_cast<double>(iv.start)) +
                 "\" y=\"" + format_number(gy) + "\" width=\"" +
                 format_number(scale * static_cast<double>(iv.end - iv.start)) + "\" height=\"" +
                 format_number(lay.band_height) + "\" fill=\"" + colors[gt_color.at(iv.label)] +
                 "\" fill-opacity=\"0.5\"/>\n";
    }
    y += per_seq;
  }
  double ly = legend_top;
  for (const auto& a : p.activities) {
    std::string desc;
    for (const auto& t : a.description) desc += (desc.empty() ? "" : " ") + t;
    svg += "<rect class=\"legend\" x=\"4\" y=\"" + format_number(ly) + "\" width=\"12\" height=\"12\" fill=\"" +
           colors[color_of.at(a.id)] + "\"/>\n";
    svg += "<text x=\"22\" y=\"" + format_number(ly + 10.0) + "\">" + std::to_string(a.id) + ": " +
           xml_escape(desc) + "</text>\n";
    ly += lay.legend_row;
  }
  svg += "</svg>\n";
  return svg;
}

inline void render_storyline(const StorylineParse& p, const std::filesystem::path& out,
                             const Segmentation* ground_truth = nullptr) {
  const auto svg = render_storyline_svg(p, ground_truth);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  std::ofstream f(out);
  if (!f) throw Error("cannot write " + out.string());
  f << svg;
  if (!f) throw Error("write failed for " + out.string());
}

}  // namespace storyline
