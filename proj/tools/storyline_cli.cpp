#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "storyline/pipeline.hpp"

namespace fs = std::filesystem;
using namespace storyline;

namespace {

bool verbose = false;

void note(const std::string& msg) {
  if (verbose) std::cerr << "[storyline] " << msg << '\n';
}

struct Args {
  std::optional<std::string> config;
  std::uint64_t seed = 0;
  std::string out;
  std::vector<std::string> corpora;
  std::string corpus;
  std::string vocab;
  std::string assignments;
  std::string parse_file;
  std::string truth;
  std::string hyper;
  std::string stopwords;
  std::string svg;
  std::size_t k_lang = 100, k_visual = 20, knn = 5;
  std::size_t sweeps = 2000, burn_in = 1000;
  std::size_t order = 3, samples = 1000;
  std::size_t n = 30, m_atoms = 40, t = 200;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised storyline extraction from sequences of subtitle and proposal observations"};
  app.require_subcommand(1);
  app.fallthrough();
  Args a;
  auto* o_config = app.add_option("--config", a.config, "JSON pipeline config; explicit flags win");
  auto* o_seed = app.add_option("--seed", a.seed, "Root seed");
  auto* o_out = app.add_option("--out", a.out, "Output directory");
  app.add_flag("--verbose", verbose, "Progress on stderr");

  auto* atoms = app.add_subcommand("atoms", "Select language atoms by tf-idf");
  atoms->add_option("corpora", a.corpora, "Corpus files; the first is the target")->required();
  auto* o_klang = atoms->add_option("--k-lang", a.k_lang, "Number of language atoms");
  atoms->add_option("--stopwords", a.stopwords, "Stop-word file (default: built-in English list)");

  auto* cluster = app.add_subcommand("cluster", "Visual atoms by joint proposal clustering");
  cluster->add_option("corpus", a.corpus, "Corpus file")->required();
  cluster->add_option("--vocab", a.vocab, "Language vocabulary to extend");
  auto* o_kvis = cluster->add_option("--k-visual", a.k_visual, "Number of visual atoms");
  auto* o_knn = cluster->add_option("--knn", a.knn, "Sequence neighbours");

  auto* filter = app.add_subcommand("filter", "Drop sequences with off-topic descriptions");
  filter->add_option("corpus", a.corpus, "Corpus file")->required();

  auto* parse = app.add_subcommand("parse", "Segment sequences into shared activities");
  parse->add_option("corpus", a.corpus, "Corpus file")->required();
  parse->add_option("--vocab", a.vocab, "Vocabulary file")->required();
  parse->add_option("--assignments", a.assignments, "Visual assignments file");
  auto* o_sweeps = parse->add_option("--sweeps", a.sweeps, "Gibbs sweeps");
  auto* o_burn = parse->add_option("--burn-in", a.burn_in, "Sweeps discarded before collecting labels");
  parse->add_option("--hyper", a.hyper, "Hyperparameter file");

  auto* synth = app.add_subcommand("synth", "Sample a synthetic corpus with ground truth");
  synth->add_option("--n", a.n, "Sequences");
  synth->add_option("--m-atoms", a.m_atoms, "Atoms");
  synth->add_option("--t", a.t, "Frames per sequence");
  synth->add_option("--hyper", a.hyper, "Hyperparameter file");

  auto* describe = app.add_subcommand("describe", "Attach generated descriptions to a storyline");
  describe->add_option("parse", a.parse_file, "Storyline file, rewritten in place")->required();
  describe->add_option("corpus", a.corpus, "Corpus whose subtitles train the language model")->required();
  auto* o_order = describe->add_option("--order", a.order, "Markov order");
  auto* o_samples = describe->add_option("--samples", a.samples, "Candidate descriptions per activity");

  auto* eval = app.add_subcommand("eval", "Score a storyline against ground truth");
  eval->add_option("truth", a.truth, "Ground-truth segmentation file")->required();
  eval->add_option("parse", a.parse_file, "Storyline file")->required();

  auto* run = app.add_subcommand("run", "Whole pipeline");
  run->add_option("corpora", a.corpora, "Corpus files; the first is segmented");
  run->add_option("--truth", a.truth, "Ground-truth segmentation file");
  run->add_option("--hyper", a.hyper, "Hyperparameter file");
  run->add_option("--stopwords", a.stopwords, "Stop-word file");
  auto* r_klang = run->add_option("--k-lang", a.k_lang, "Number of language atoms");
  auto* r_kvis = run->add_option("--k-visual", a.k_visual, "Number of visual atoms");
  auto* r_knn = run->add_option("--knn", a.knn, "Sequence neighbours");
  auto* r_sweeps = run->add_option("--sweeps", a.sweeps, "Gibbs sweeps");
  auto* r_burn = run->add_option("--burn-in", a.burn_in, "Burn-in sweeps");
  auto* r_order = run->add_option("--order", a.order, "Markov order");
  auto* r_samples = run->add_option("--samples", a.samples, "Candidate descriptions per activity");

  auto* render = app.add_subcommand("render", "Draw a storyline as an SVG timeline");
  render->add_option("parse", a.parse_file, "Storyline file")->required();
  render->add_option("--truth", a.truth, "Ground truth drawn under each band");
  render->add_option("--svg", a.svg, "Output path (default <out>/storyline.svg)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    PipelineConfig cfg;
    if (o_config->count()) apply_config_json(read_json(*a.config), cfg);
    if (o_seed->count()) cfg.seed = a.seed;
    if (o_out->count()) cfg.out = a.out;
    auto pick = [](CLI::Option* opt, std::size_t v, std::size_t& dst) {
      if (opt->count()) dst = v;
    };
    pick(o_klang, a.k_lang, cfg.k_lang);
    pick(r_klang, a.k_lang, cfg.k_lang);
    pick(o_kvis, a.k_visual, cfg.k_visual);
    pick(r_kvis, a.k_visual, cfg.k_visual);
    pick(o_knn, a.knn, cfg.knn);
    pick(r_knn, a.knn, cfg.knn);
    pick(o_sweeps, a.sweeps, cfg.sweeps);
    pick(r_sweeps, a.sweeps, cfg.sweeps);
    pick(o_burn, a.burn_in, cfg.burn_in);
    pick(r_burn, a.burn_in, cfg.burn_in);
    pick(o_order, a.order, cfg.order);
    pick(r_order, a.order, cfg.order);
    pick(o_samples, a.samples, cfg.samples);
    pick(r_samples, a.samples, cfg.samples);
    if (!a.hyper.empty()) cfg.hyper = load_hyperparams(a.hyper);
    if (!a.stopwords.empty()) cfg.stopwords = fs::path(a.stopwords);
    if (!a.truth.empty()) cfg.ground_truth = fs::path(a.truth);
    if (!a.corpora.empty()) cfg.corpora.assign(a.corpora.begin(), a.corpora.end());
    const fs::path out = cfg.out;

    if (*atoms) {
      std::vector<Corpus> cs;
      for (const auto& p : a.corpora) cs.push_back(load_corpus(p));
      const StopWords stop = cfg.stopwords ? load_stopwords(*cfg.stopwords) : default_stopwords();
      const auto vocab = atoms_stage(cs, cfg.k_lang, stop);
      fs::create_directories(out);
      save_vocabulary(out / "atoms.json", vocab);
      note("wrote " + std::to_string(vocab.size()) + " language atoms to " + (out / "atoms.json").string());
    } else if (*cluster) {
      const auto corpus = load_corpus(a.corpus);
      const AtomVocabulary lang = a.vocab.empty() ? AtomVocabulary{} : load_vocabulary(a.vocab);
      const auto va = cluster_stage(corpus, lang, cfg.k_visual, cfg.knn);
      fs::create_directories(out);
      save_vocabulary(out / "vocabulary.json", va.vocabulary);
      write_json(out / "assignments.json", assignments_to_json(va.assignments));
      note(std::to_string(va.vocabulary.visual_count()) + " visual atoms");
    } else if (*filter) {
      const auto split = filter_stage(load_corpus(a.corpus));
      fs::create_directories(out);
      write_json(out / "filter.json", filter_to_json(split));
      save_corpus(out / "filtered.jsonl", split.kept);
      note(std::to_string(split.discarded.size()) + " sequences discarded");
    } else if (*parse) {
      if (cfg.sweeps <= cfg.burn_in) throw ValidationError("sweeps must exceed burn-in");
      const auto corpus = load_corpus(a.corpus);
      const auto vocab = load_vocabulary(a.vocab);
      const VisualAssignments visual =
          a.assignments.empty() ? VisualAssignments{} : assignments_from_json(read_json(a.assignments));
      const auto p = parse_stage(corpus, vocab, visual, cfg.hyper, {cfg.sweeps, cfg.burn_in, cfg.seed});
      save_parse(out / "parse.json", p);
      note(std::to_string(p.activities.size()) + " activities");
    } else if (*synth) {
      if (a.n < 1 || a.m_atoms < 1 || a.t < 1) throw ValidationError("--n, --m-atoms and --t must be positive");
      cfg.hyper.validate();
      Rng rng = make_stream(cfg.seed, "synth");
      const auto f = sample_ibp(a.n, cfg.hyper.gamma, rng, true);
      const auto truth = generate_corpus(f, a.m_atoms, std::vector<std::size_t>(a.n, a.t), cfg.hyper, rng);
      fs::create_directories(out);
      save_corpus(out / "corpus.jsonl", synthetic_to_corpus(truth, "corpus"));
      write_json(out / "truth.json", truth_to_json(truth));
      note(std::to_string(f.cols()) + " planted activities");
    } else if (*describe) {
      auto p = load_parse(a.parse_file);
      describe_parse(p, load_corpus(a.corpus), {cfg.order, cfg.samples, 30, cfg.seed});
      save_parse(a.parse_file, p);
    } else if (*eval) {
      const auto gt = load_segmentation(a.truth);
      const auto p = load_parse(a.parse_file);
      const auto report = evaluate(gt, parse_segmentation(p), parse_confidences(p));
      std::cout << report_to_json(report).dump(2) << '\n';
      if (o_out->count()) write_json(out / "eval.json", report_to_json(report));
    } else if (*run) {
      const auto res = run_pipeline(cfg);
      note("storyline written to " + (cfg.out / "storyline.json").string());
      if (res.report) std::cout << report_to_json(*res.report).dump(2) << '\n';
    } else if (*render) {
      const auto p = load_parse(a.parse_file);
      std::optional<Segmentation> gt;
      if (!a.truth.empty()) gt = load_segmentation(a.truth);
      const fs::path target = a.svg.empty() ? out / "storyline.svg" : fs::path(a.svg);
      render_storyline(p, target, gt ? &*gt : nullptr);
      note("wrote " + target.string());
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
