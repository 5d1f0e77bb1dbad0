#include <cmath>

#include <gtest/gtest.h>

#include "storyline/synth.hpp"

using namespace storyline;

TEST(Ibp, TinyMassTriggersGuard) {
  Rng rng = make_stream(4, "test");
  const auto f = sample_ibp(5, 1e-12, rng, true);
  for (std::size_t i = 0; i < f.rows(); ++i) EXPECT_GE(f.row_count(i), 1u);
  std::size_t total = 0;
  for (int r = 0; r < 1000; ++r) total += sample_ibp(5, 1e-12, rng, false).cols();
  EXPECT_EQ(total, 0u);
}

TEST(Ibp, SingleCustomerPoissonMean) {
  Rng rng = make_stream(5, "test");
  const int draws = 100000;
  double s = 0.0;
  for (int r = 0; r < draws; ++r) s += static_cast<double>(sample_ibp(1, 3.0, rng, false).cols());
  const double mean = s / draws;
  EXPECT_NEAR(mean, 3.0, 3.0 * std::sqrt(3.0 / draws));
}

TEST(Ibp, RejectsBadArguments) {
  Rng rng;
  EXPECT_THROW(sample_ibp(0, 1.0, rng), ValidationError);
  EXPECT_THROW(sample_ibp(3, 0.0, rng), ValidationError);
}

TEST(Generate, SingleActivityMatchesTheta) {
  ActivityMatrix f(1, 1);
  f.set(0, 0, true);
  const ActivityParams theta{{0.1, 0.5, 0.9}};
  Rng rng = make_stream(6, "test");
  const std::size_t t = 10000;
  const auto truth = generate_corpus_with_theta(f, theta, {t}, Hyperparams{}, rng);
  for (int z : truth.z_true[0]) ASSERT_EQ(z, 0);
  for (std::size_t n = 0; n < 3; ++n) {
    double c = 0.0;
    for (const auto& fr : truth.frames[0]) c += fr.bits[n];
    const double p = theta[0][n];
    EXPECT_NEAR(c / t, p, 3.0 * std::sqrt(p * (1 - p) / t)) << "atom " << n;
  }
}

TEST(Generate, HugeStickinessRarelySwitches) {
  ActivityMatrix f(4, 3);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t k = 0; k < 3; ++k) f.set(i, k, true);
  Hyperparams h;
  h.kappa = 1e6;
  Rng rng = make_stream(7, "test");
  const ActivityParams theta(3, std::vector<double>(2, 0.5));
  const auto truth = generate_corpus_with_theta(f, theta, std::vector<std::size_t>(4, 2000), h, rng);
  std::size_t switches = 0, steps = 0;
  for (const auto& z : truth.z_true)
    for (std::size_t t = 1; t < z.size(); ++t, ++steps) switches += z[t] != z[t - 1];
  EXPECT_LT(static_cast<double>(switches) / static_cast<double>(steps), 1e-3);
}

TEST(Generate, SingleFrame) {
  ActivityMatrix f(1, 2);
  f.set(0, 0, true);
  f.set(0, 1, true);
  Rng rng = make_stream(8, "test");
  const auto truth = generate_corpus(f, 4, {1}, Hyperparams{}, rng);
  EXPECT_EQ(truth.z_true[0].size(), 1u);
  EXPECT_EQ(truth.frames[0].size(), 1u);
  EXPECT_EQ(truth.frames[0][0].size(), 4u);
}

TEST(Generate, TransitionsLiveOnActiveSet) {
  ActivityMatrix f(2, 3);
  f.set(0, 0, true);
  f.set(0, 2, true);
  f.set(1, 1, true);
  Rng rng = make_stream(9, "test");
  const auto truth = generate_corpus(f, 3, {50, 50}, Hyperparams{}, rng);
  EXPECT_EQ(truth.pi_true[0](0, 1), 0.0);
  EXPECT_NEAR(truth.pi_true[0].row(0).sum(), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(truth.pi_true[1](1, 1), 1.0);
  for (int z : truth.z_true[0]) EXPECT_NE(z, 1);
  for (int z : truth.z_true[1]) EXPECT_EQ(z, 1);
}

TEST(Generate, DimensionChecks) {
  ActivityMatrix f(1, 1);
  f.set(0, 0, true);
  Rng rng;
  EXPECT_THROW(generate_corpus_with_theta(f, {{0.5}, {0.5}}, {3}, Hyperparams{}, rng), DimensionMismatch);
  EXPECT_THROW(generate_corpus_with_theta(f, {{0.5}}, {3, 3}, Hyperparams{}, rng), DimensionMismatch);
}

TEST(Generate, ToCorpusUsesAtomLabels) {
  ActivityMatrix f(2, 1);
  f.set(0, 0, true);
  f.set(1, 0, true);
  Rng rng = make_stream(10, "test");
  const auto truth = generate_corpus_with_theta(f, {{0.999, 0.001}}, {3, 2}, Hyperparams{}, rng);
  const auto c = synthetic_to_corpus(truth);
  ASSERT_EQ(c.sequences.size(), 2u);
  EXPECT_EQ(c.sequences[0].id, synthetic_sequence_id(0));
  EXPECT_EQ(c.sequences[1].frames.size(), 2u);
  for (const auto& fr : c.sequences[0].frames)
    for (const auto& tok : fr.subtitle_tokens) EXPECT_EQ(tok, synthetic_atom_label(0));
}
