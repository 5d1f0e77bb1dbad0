#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "storyline/bphmm.hpp"
#include "storyline/corpus.hpp"
#include "storyline/eval.hpp"
#include "storyline/joint_cluster.hpp"
#include "storyline/lang_atoms.hpp"
#include "storyline/model.hpp"
#include "storyline/storyline.hpp"
#include "storyline/synth.hpp"

namespace storyline {

struct PipelineConfig {
  std::vector<std::filesystem::path> corpora;  // first one is segmented, the rest only feed tf-idf
  std::optional<std::filesystem::path> ground_truth;
  std::optional<std::filesystem::path> stopwords;
  std::size_t k_lang = 100;
  std::size_t k_visual = 20;
  std::size_t knn = 5;
  Hyperparams hyper;
  std::size_t sweeps = 2000;
  std::size_t burn_in = 1000;
  std::uint64_t seed = 0;
  std::size_t order = 3;
  std::size_t samples = 1000;
  std::filesystem::path out = "out";

  void validate() const {
    if (corpora.empty()) throw ValidationError("config: no corpus files");
    if (k_lang < 1 || k_visual < 1 || knn < 1 || order < 1 || samples < 1 || sweeps < 1)
      throw ValidationError("config: counts must be positive");
    if (sweeps <= burn_in) throw ValidationError("config: sweeps must exceed burn_in");
    hyper.validate();
  }
};

/// Keys missing from `j` keep their current values in `cfg`.
inline void apply_config_json(const nlohmann::json& j, PipelineConfig& cfg) {
  if (!j.is_object()) throw ValidationError("config must be an object");
  static const std::set<std::string> known = {"corpora", "ground_truth", "stopwords", "k_lang",  "k_visual",
                                              "knn",     "hyper",        "sweeps",    "burn_in", "seed",
                                              "order",   "samples",      "out"};
  for (const auto& [key, v] : j.items())
    if (!known.contains(key)) throw ValidationError("unknown config key '" + key + "'");
  try {
    if (j.contains("corpora")) {
      cfg.corpora.clear();
      for (const auto& p : j.at("corpora")) cfg.corpora.emplace_back(p.get<std::string>());
    }
    if (j.contains("ground_truth")) cfg.ground_truth = j.at("ground_truth").get<std::string>();
    if (j.contains("stopwords")) cfg.stopwords = j.at("stopwords").get<std::string>();
    auto count = [&](const char* key, std::size_t& dst) {
      if (j.contains(key)) dst = j.at(key).get<std::size_t>();
    };
    count("k_lang", cfg.k_lang);
    count("k_visual", cfg.k_visual);
    count("knn", cfg.knn);
    count("sweeps", cfg.sweeps);
    count("burn_in", cfg.burn_in);
    count("order", cfg.order);
    count("samples", cfg.samples);
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("hyper")) cfg.hyper = j.at("hyper").get<Hyperparams>();
    if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

/// Runs `fn`, prefixing any error with the stage name while keeping its kind.
template <class F>
auto run_stage(const std::string& name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ValidationError& e) {
    throw ValidationError("stage " + name + ": " + e.what());
  } catch (const Error& e) {
    throw Error("stage " + name + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Synthetic ground truth files
// ---------------------------------------------------------------------------

inline Segmentation truth_segmentation(const SyntheticTruth& truth) {
  Segmentation seg;
  for (std::size_t i = 0; i < truth.z_true.size(); ++i) {
    FrameLabels fl(truth.z_true[i].size());
    for (std::size_t t = 0; t < fl.size(); ++t) fl[t] = std::to_string(truth.z_true[i][t]);
    seg[synthetic_sequence_id(i)] = {fl.size(), intervals_from_labels(fl)};
  }
  return seg;
}

/// Segmentation plus the raw label lists and the planted theta matrix.
inline nlohmann::json truth_to_json(const SyntheticTruth& truth) {
  auto j = segmentation_to_json(truth_segmentation(truth));
  nlohmann::json labels = nlohmann::json::object();
  for (std::size_t i = 0; i < truth.z_true.size(); ++i) labels[synthetic_sequence_id(i)] = truth.z_true[i];
  j["labels"] = labels;
  j["theta"] = truth.theta_true;
  return j;
}

inline Segmentation load_segmentation(const std::filesystem::path& path) {
  return segmentation_from_json(read_json(path));
}

// ---------------------------------------------------------------------------
// Stage helpers shared by the CLI and run_pipeline
// ---------------------------------------------------------------------------

inline nlohmann::json filter_to_json(const OutlierSplit& split) {
  std::vector<std::string> kept;
  for (const auto& s : split.kept.sequences) kept.push_back(s.id);
  return {{"kept", kept}, {"discarded", split.discarded}};
}

/// Corpora with fewer than two sequences pass through unchanged.
inline OutlierSplit filter_stage(const Corpus& corpus) {
  if (corpus.sequences.size() < 2) return {corpus, {}};
  return remove_outliers(corpus);
}

inline AtomVocabulary atoms_stage(const std::vector<Corpus>& corpora, std::size_t k_lang,
                                  const StopWords& stopwords) {
  auto atoms = select_language_atoms(corpora, 0, k_lang, stopwords);
  if (atoms.empty()) throw ValidationError("no language atoms: the corpus has no usable subtitle words");
  return AtomVocabulary(std::move(atoms));
}

/// Language vocabulary extended by visual atoms; a corpus without proposal
/// features gets none.
inline VisualAtoms cluster_stage(const Corpus& corpus, const AtomVocabulary& language, std::size_t k_visual,
                                 std::size_t knn) {
  if (corpus.feature_dim() == 0) return {language, {}};
  ExtractConfig cfg;
  cfg.k_clusters = k_visual;
  return visual_atoms_from_clusters(language, cluster_corpus_proposals(corpus, knn, cfg));
}

inline nlohmann::json frames_to_json(const Corpus& corpus, const std::vector<SequenceFrames>& frames) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    std::vector<std::string> rows;
    for (const auto& f : frames[i]) {
      std::string r(f.size(), '0');
      for (std::size_t m = 0; m < f.size(); ++m)
        if (f[m]) r[m] = '1';
      rows.push_back(std::move(r));
    }
    j[corpus.sequences[i].id] = rows;
  }
  return j;
}

/// Sampler plus storyline assembly. Sequences come out in ascending id order.
inline StorylineParse parse_stage(const Corpus& corpus, const AtomVocabulary& vocab,
                                  const VisualAssignments& visual, const Hyperparams& hyper,
                                  const GibbsOptions& opt) {
  const auto frames = represent_frames(corpus, vocab, visual);
  std::vector<std::string> ids;
  for (const auto& s : corpus.sequences) ids.push_back(s.id);
  const auto result = run_gibbs(ids, frames, hyper, opt);
  std::vector<SequenceFrames> ordered;
  for (const auto& id : result.ids)
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (ids[i] == id) ordered.push_back(frames[i]);
  return build_parse(result, ordered, vocab, corpus.category);
}

struct PipelineResult {
  StorylineParse parse;
  std::optional<EvalReport> report;
};

/// filter -> atoms -> cluster -> represent -> parse -> describe, with every
/// intermediate written under cfg.out.
inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out);

  std::vector<Corpus> corpora = run_stage("load", [&] {
    std::vector<Corpus> cs;
    for (const auto& p : cfg.corpora) cs.push_back(load_corpus(p));
    return cs;
  });
  const StopWords stop = cfg.stopwords ? load_stopwords(*cfg.stopwords) : default_stopwords();

  const auto split = run_stage("filter", [&] {
    auto s = filter_stage(corpora.front());
    write_json(cfg.out / "filter.json", filter_to_json(s));
    save_corpus(cfg.out / "filtered.jsonl", s.kept);
    return s;
  });
  corpora.front() = split.kept;

  const auto language = run_stage("atoms", [&] {
    auto v = atoms_stage(corpora, cfg.k_lang, stop);
    save_vocabulary(cfg.out / "atoms.json", v);
    return v;
  });

  const auto visual = run_stage("cluster", [&] {
    auto va = cluster_stage(split.kept, language, cfg.k_visual, cfg.knn);
    save_vocabulary(cfg.out / "vocabulary.json", va.vocabulary);
    write_json(cfg.out / "assignments.json", assignments_to_json(va.assignments));
    return va;
  });

  run_stage("represent", [&] {
    write_json(cfg.out / "frames.json",
               frames_to_json(split.kept, represent_frames(split.kept, visual.vocabulary, visual.assignments)));
  });

  PipelineResult res;
  res.parse = run_stage("parse", [&] {
    auto p = parse_stage(split.kept, visual.vocabulary, visual.assignments, cfg.hyper,
                         {cfg.sweeps, cfg.burn_in, cfg.seed});
    save_parse(cfg.out / "parse.json", p);
    return p;
  });

  run_stage("describe", [&] {
    describe_parse(res.parse, split.kept, {cfg.order, cfg.samples, 30, cfg.seed});
    save_parse(cfg.out / "storyline.json", res.parse);
  });

  std::optional<Segmentation> gt;
  if (cfg.ground_truth) {
    res.report = run_stage("eval", [&] {
      gt = load_segmentation(*cfg.ground_truth);
      // discarded sequences are not scored
      for (const auto& id : split.discarded) gt->erase(id);
      auto r = evaluate(*gt, parse_segmentation(res.parse), parse_confidences(res.parse));
      write_json(cfg.out / "eval.json", report_to_json(r));
      return r;
    });
  }

  run_stage("render", [&] { render_storyline(res.parse, cfg.out / "storyline.svg", gt ? &*gt : nullptr); });
  return res;
}

}  // namespace storyline
