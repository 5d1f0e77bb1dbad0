#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "storyline/pipeline.hpp"

using namespace storyline;
namespace fs = std::filesystem;

namespace {

const fs::path kData = STORYLINE_EXAMPLES;

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PipelineConfig fixture_config(const fs::path& out) {
  PipelineConfig cfg;
  cfg.corpora = {kData / "omelette.jsonl", kData / "tire.jsonl"};
  cfg.sweeps = 60;
  cfg.burn_in = 30;
  cfg.samples = 50;
  cfg.seed = 17;
  cfg.out = out;
  return cfg;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("storyline_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Config, SweepsMustExceedBurnIn) {
  auto cfg = fixture_config(scratch("reject"));
  cfg.sweeps = 10;
  cfg.burn_in = 10;
  EXPECT_THROW(run_pipeline(cfg), ValidationError);
  EXPECT_FALSE(fs::exists(cfg.out));  // nothing done
}

TEST(Config, JsonOverridesAndUnknownKeys) {
  PipelineConfig cfg;
  apply_config_json({{"k_lang", 7}, {"hyper", {{"kappa", 3.0}}}, {"corpora", {"x.jsonl"}}}, cfg);
  EXPECT_EQ(cfg.k_lang, 7u);
  EXPECT_EQ(cfg.hyper.kappa, 3.0);
  EXPECT_EQ(cfg.knn, 5u);
  ASSERT_EQ(cfg.corpora.size(), 1u);
  EXPECT_THROW(apply_config_json({{"sweep", 3}}, cfg), ValidationError);
  EXPECT_THROW(apply_config_json({{"k_lang", "many"}}, cfg), ValidationError);
  EXPECT_THROW(apply_config_json(nlohmann::json::array(), cfg), ValidationError);
}

TEST(Stage, ErrorsNameTheStage) {
  try {
    run_stage("atoms", []() -> int { throw DomainError("bad"); });
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(std::string(e.what()), "stage atoms: bad");
  }
  EXPECT_THROW(run_stage("x", []() -> int { throw ConvergenceError("slow"); }), Error);
}

TEST(Pipeline, MissingCorpusIsValidationError) {
  auto cfg = fixture_config(scratch("missing"));
  cfg.corpora = {"/nonexistent/corpus.jsonl"};
  try {
    run_pipeline(cfg);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("stage load"), std::string::npos);
  }
}

TEST(Pipeline, FixtureEndToEndAndDeterministic) {
  const auto out1 = scratch("fixture1");
  const auto out2 = scratch("fixture2");
  const auto r1 = run_pipeline(fixture_config(out1));
  run_pipeline(fixture_config(out2));
  for (const char* f : {"filter.json", "filtered.jsonl", "atoms.json", "vocabulary.json", "assignments.json",
                        "frames.json", "parse.json", "storyline.json", "storyline.svg"})
    EXPECT_TRUE(fs::exists(out1 / f)) << f;
  EXPECT_FALSE(fs::exists(out1 / "eval.json"));
  EXPECT_EQ(slurp(out1 / "storyline.json"), slurp(out2 / "storyline.json"));

  const auto filt = read_json(out1 / "filter.json");
  EXPECT_EQ(filt["discarded"], nlohmann::json::array({"omelette_99"}));
  EXPECT_FALSE(r1.parse.language_atoms.empty());
  EXPECT_FALSE(r1.parse.activities.empty());
  for (const auto& a : r1.parse.activities) EXPECT_LE(a.exemplars.size(), 4u);
  EXPECT_EQ(load_parse(out1 / "storyline.json"), r1.parse);
  fs::remove_all(out1);
  fs::remove_all(out2);
}

TEST(Pipeline, SyntheticWithTruthEmitsReport) {
  const auto dir = scratch("synth");
  fs::create_directories(dir);
  ActivityMatrix f(4, 2);
  f.set(0, 0, true);
  f.set(1, 0, true);
  f.set(1, 1, true);
  f.set(2, 1, true);
  f.set(3, 0, true);
  f.set(3, 1, true);
  ActivityParams theta(2, std::vector<double>(6, 0.05));
  for (int m = 0; m < 3; ++m) theta[0][m] = 0.9;
  for (int m = 3; m < 6; ++m) theta[1][m] = 0.9;
  Hyperparams h;
  Rng rng = make_stream(3, "test");
  const auto truth = generate_corpus_with_theta(f, theta, std::vector<std::size_t>(4, 40), h, rng);
  save_corpus(dir / "corpus.jsonl", synthetic_to_corpus(truth, "corpus"));
  write_json(dir / "truth.json", truth_to_json(truth));

  PipelineConfig cfg;
  cfg.corpora = {dir / "corpus.jsonl"};
  cfg.ground_truth = dir / "truth.json";
  cfg.sweeps = 150;
  cfg.burn_in = 75;
  cfg.samples = 20;
  cfg.out = dir / "out";
  const auto res = run_pipeline(cfg);
  ASSERT_TRUE(res.report.has_value());
  EXPECT_TRUE(fs::exists(cfg.out / "eval.json"));
  EXPECT_GT(res.report->iou_csm, 0.5);
  EXPECT_LE(res.report->iou_csm, 1.0);
  EXPECT_LE(res.report->map_csm, 1.0);
  fs::remove_all(dir);
}
