#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "storyline/errors.hpp"

namespace storyline {

using json = nlohmann::json;

enum class Modality { language, visual };

inline std::string to_string(Modality m) { return m == Modality::language ? "language" : "visual"; }

inline Modality modality_from_string(const std::string& s) {
  if (s == "language") return Modality::language;
  if (s == "visual") return Modality::visual;
  throw ValidationError("unknown atom modality '" + s + "'");
}

struct Atom {
  int id = 0;
  Modality modality = Modality::language;
  std::string label;

  bool operator==(const Atom&) const = default;
};

/// Ordered atom set indexing every frame vector. Language atoms come first,
/// visual atoms occupy the tail; ids are dense 0..M-1.
class AtomVocabulary {
 public:
  AtomVocabulary() = default;

  AtomVocabulary(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
    bool in_visual = false;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      if (atoms_[i].id != static_cast<int>(i))
        throw ValidationError("atom ids must be dense and ordered; expected " +
                              std::to_string(i) + ", got " + std::to_string(atoms_[i].id));
      if (atoms_[i].modality == Modality::visual) {
        in_visual = true;
        ++visual_count_;
      } else {
        if (in_visual)
          throw ValidationError("language atom '" + atoms_[i].label + "' follows a visual atom");
        ++language_count_;
      }
    }
  }

  static AtomVocabulary from_labels(const std::vector<std::string>& language,
                                    const std::vector<std::string>& visual = {}) {
    std::vector<Atom> atoms;
    atoms.reserve(language.size() + visual.size());
    for (const auto& w : language)
      atoms.push_back({static_cast<int>(atoms.size()), Modality::language, w});
    for (const auto& v : visual)
      atoms.push_back({static_cast<int>(atoms.size()), Modality::visual, v});
    return AtomVocabulary(std::move(atoms));
  }

  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  std::size_t size() const noexcept { return atoms_.size(); }
  bool empty() const noexcept { return atoms_.empty(); }
  std::size_t language_count() const noexcept { return language_count_; }
  std::size_t visual_count() const noexcept { return visual_count_; }
  const Atom& operator[](std::size_t i) const { return atoms_.at(i); }

  std::vector<std::string> language_labels() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < language_count_; ++i) out.push_back(atoms_[i].label);
    return out;
  }

  bool operator==(const AtomVocabulary&) const = default;

 private:
  std::vector<Atom> atoms_;
  std::size_t language_count_ = 0;
  std::size_t visual_count_ = 0;
};

/// Binary occurrence vector over the vocabulary (language part, then visual).
struct FrameVector {
  std::vector<std::uint8_t> bits;

  std::size_t size() const noexcept { return bits.size(); }
  bool operator[](std::size_t m) const { return bits[m] != 0; }
  bool operator==(const FrameVector&) const = default;
};

using SequenceFrames = std::vector<FrameVector>;

struct Frame {
  double t = 0.0;
  std::vector<std::string> subtitle_tokens;
  std::vector<std::vector<double>> proposal_features;
};

struct SequenceRecord {
  std::string id;
  std::vector<Frame> frames;
  std::vector<std::string> description_tokens;
};

struct Corpus {
  std::string category;
  std::vector<SequenceRecord> sequences;

  /// Dimension shared by all proposal features, or 0 if there are none.
  std::size_t feature_dim() const {
    for (const auto& s : sequences)
      for (const auto& f : s.frames)
        if (!f.proposal_features.empty()) return f.proposal_features.front().size();
    return 0;
  }

  const SequenceRecord* find(const std::string& id) const {
    for (const auto& s : sequences)
      if (s.id == id) return &s;
    return nullptr;
  }
};

/// Checks every Corpus / SequenceRecord invariant; throws on the first
/// violation.
inline void validate_corpus(const Corpus& corpus) {
  std::set<std::string> ids;
  std::optional<std::size_t> dim;
  for (const auto& seq : corpus.sequences) {
    if (!ids.insert(seq.id).second)
      throw ValidationError("duplicate sequence id '" + seq.id + "'");
    for (std::size_t t = 0; t < seq.frames.size(); ++t) {
      if (t > 0 && !(seq.frames[t].t > seq.frames[t - 1].t))
        throw ValidationError("sequence '" + seq.id + "': timestamps not strictly increasing at frame " +
                              std::to_string(t));
      for (const auto& feat : seq.frames[t].proposal_features) {
        if (!dim) dim = feat.size();
        if (feat.size() != *dim)
          throw DimensionMismatch("sequence '" + seq.id + "': proposal feature dimension " +
                                  std::to_string(feat.size()) + " at frame " + std::to_string(t) +
                                  ", expected " + std::to_string(*dim));
      }
    }
  }
}

namespace detail {

inline std::vector<std::string> token_list(const json& j, const char* key, std::size_t line) {
  std::vector<std::string> out;
  if (!j.contains(key)) return out;
  const auto& arr = j.at(key);
  if (!arr.is_array()) throw ParseError(line, std::string("'") + key + "' must be an array");
  for (const auto& tok : arr) {
    if (!tok.is_string()) throw ParseError(line, std::string("'") + key + "' must hold strings");
    out.push_back(tok.get<std::string>());
  }
  return out;
}

inline SequenceRecord parse_sequence_record(const json& j, std::size_t line) {
  if (!j.is_object()) throw ParseError(line, "record is not an object");
  if (!j.contains("id") || !j.at("id").is_string()) throw ParseError(line, "missing string 'id'");
  if (!j.contains("frames") || !j.at("frames").is_array())
    throw ParseError(line, "missing array 'frames'");
  SequenceRecord rec;
  rec.id = j.at("id").get<std::string>();
  rec.description_tokens = token_list(j, "description_tokens", line);
  for (const auto& jf : j.at("frames")) {
    if (!jf.is_object() || !jf.contains("t") || !jf.at("t").is_number())
      throw ParseError(line, "frame without numeric 't'");
    Frame f;
    f.t = jf.at("t").get<double>();
    f.subtitle_tokens = token_list(jf, "subtitle_tokens", line);
    if (jf.contains("proposal_features")) {
      const auto& props = jf.at("proposal_features");
      if (!props.is_array()) throw ParseError(line, "'proposal_features' must be an array");
      for (const auto& p : props) {
        if (!p.is_array()) throw ParseError(line, "proposal feature must be an array");
        std::vector<double> v;
        for (const auto& x : p) {
          if (!x.is_number()) throw ParseError(line, "proposal feature entries must be numbers");
          v.push_back(x.get<double>());
        }
        f.proposal_features.push_back(std::move(v));
      }
    }
    rec.frames.push_back(std::move(f));
  }
  return rec;
}

}  // namespace detail

inline Corpus parse_corpus(std::istream& in, std::string category = {}) {
  Corpus corpus;
  corpus.category = std::move(category);
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, e.what());
    }
    corpus.sequences.push_back(detail::parse_sequence_record(j, line_no));
  }
  validate_corpus(corpus);
  return corpus;
}

/// Reads a line-delimited corpus file. The category defaults to the file stem.
inline Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus file " + path.string());
  return parse_corpus(in, path.stem().string());
}

inline json sequence_to_json(const SequenceRecord& seq) {
  json frames = json::array();
  for (const auto& f : seq.frames) {
    frames.push_back({{"t", f.t},
                      {"subtitle_tokens", f.subtitle_tokens},
                      {"proposal_features", f.proposal_features}});
  }
  return {{"id", seq.id}, {"description_tokens", seq.description_tokens}, {"frames", frames}};
}

inline void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& seq : corpus.sequences) out << sequence_to_json(seq).dump() << '\n';
}

inline void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_corpus(out, corpus);
}

inline json vocabulary_to_json(const AtomVocabulary& vocab) {
  json atoms = json::array();
  for (const auto& a : vocab.atoms())
    atoms.push_back({{"id", a.id}, {"modality", to_string(a.modality)}, {"label", a.label}});
  return {{"atoms", atoms}};
}

inline AtomVocabulary vocabulary_from_json(const json& j) {
  if (!j.is_object() || !j.contains("atoms") || !j.at("atoms").is_array())
    throw ValidationError("vocabulary must be an object with an 'atoms' array");
  std::vector<Atom> atoms;
  for (const auto& ja : j.at("atoms")) {
    try {
      atoms.push_back({ja.at("id").get<int>(), modality_from_string(ja.at("modality").get<std::string>()),
                       ja.at("label").get<std::string>()});
    } catch (const json::exception& e) {
      throw ValidationError(std::string("malformed atom: ") + e.what());
    }
  }
  return AtomVocabulary(std::move(atoms));
}

inline AtomVocabulary load_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open vocabulary file " + path.string());
  try {
    return vocabulary_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

inline void save_vocabulary(const std::filesystem::path& path, const AtomVocabulary& vocab) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << vocabulary_to_json(vocab).dump(2) << '\n';
}

/// Identifies one object proposal inside a corpus.
struct ProposalRef {
  std::string sequence;
  std::size_t frame = 0;
  std::size_t proposal = 0;

  auto operator<=>(const ProposalRef&) const = default;
};

using VisualAssignments = std::map<ProposalRef, std::optional<int>>;

inline json assignments_to_json(const VisualAssignments& assign) {
  json out = json::array();
  for (const auto& [ref, atom] : assign) {
    if (!atom) continue;
    out.push_back({{"sequence", ref.sequence}, {"frame", ref.frame}, {"proposal", ref.proposal},
                   {"atom", *atom}});
  }
  return out;
}

inline VisualAssignments assignments_from_json(const json& j) {
  if (!j.is_array()) throw ValidationError("visual assignments must be an array");
  VisualAssignments out;
  for (const auto& e : j) {
    try {
      out[{e.at("sequence").get<std::string>(), e.at("frame").get<std::size_t>(),
           e.at("proposal").get<std::size_t>()}] = e.at("atom").get<int>();
    } catch (const json::exception& ex) {
      throw ValidationError(std::string("malformed visual assignment: ") + ex.what());
    }
  }
  return out;
}

/// Converts every frame of every sequence into its binary atom-occurrence
/// vector. Output is in corpus order.
inline std::vector<SequenceFrames> represent_frames(const Corpus& corpus, const AtomVocabulary& vocab,
                                                    const VisualAssignments& visual = {}) {
  if (vocab.empty()) throw ValidationError("vocabulary is empty");
  for (const auto& [ref, atom] : visual) {
    if (!atom) continue;
    if (*atom < 0 || static_cast<std::size_t>(*atom) >= vocab.size() ||
        vocab[*atom].modality != Modality::visual)
      throw ValidationError("visual assignment references unknown visual atom " + std::to_string(*atom));
  }

  std::unordered_map<std::string, std::size_t> lang_index;
  for (std::size_t m = 0; m < vocab.language_count(); ++m) lang_index.emplace(vocab[m].label, m);

  std::vector<SequenceFrames> out;
  out.reserve(corpus.sequences.size());
  for (const auto& seq : corpus.sequences) {
    SequenceFrames frames(seq.frames.size(), FrameVector{std::vector<std::uint8_t>(vocab.size(), 0)});
    for (std::size_t t = 0; t < seq.frames.size(); ++t) {
      for (const auto& tok : seq.frames[t].subtitle_tokens) {
        auto it = lang_index.find(tok);
        if (it != lang_index.end()) frames[t].bits[it->second] = 1;
      }
    }
    // visual assignments are keyed by sequence, so walk the matching range
    auto it = visual.lower_bound(ProposalRef{seq.id, 0, 0});
    for (; it != visual.end() && it->first.sequence == seq.id; ++it) {
      if (!it->second) continue;
      if (it->first.frame >= frames.size())
        throw ValidationError("visual assignment frame out of range in sequence '" + seq.id + "'");
      frames[it->first.frame].bits[static_cast<std::size_t>(*it->second)] = 1;
    }
    out.push_back(std::move(frames));
  }
  return out;
}

}  // namespace storyline
