#include <gtest/gtest.h>

#include "storyline/model.hpp"
#include "storyline/rng.hpp"

using namespace storyline;

TEST(Hyperparams, DefaultsValidate) {
  Hyperparams h;
  EXPECT_NO_THROW(h.validate());
  h.kappa = 0.0;
  EXPECT_NO_THROW(h.validate());
  h.gamma = 0.0;
  EXPECT_THROW(h.validate(), ValidationError);
  h = {};
  h.kappa = -1.0;
  EXPECT_THROW(h.validate(), ValidationError);
  h = {};
  h.emit_b0 = std::numeric_limits<double>::infinity();
  EXPECT_THROW(h.validate(), ValidationError);
}

TEST(Hyperparams, UniqueMass) {
  Hyperparams h;
  h.gamma = 3.0;
  h.beta_c = 2.0;
  EXPECT_DOUBLE_EQ(h.unique_mass(1), 3.0);
  EXPECT_DOUBLE_EQ(h.unique_mass(5), 3.0 * 2.0 / 6.0);
}

TEST(Hyperparams, JsonRoundTripAndUnknownKeys) {
  Hyperparams h;
  h.kappa = 7.5;
  const nlohmann::json j = h;
  EXPECT_EQ(j.get<Hyperparams>().kappa, 7.5);
  EXPECT_THROW(nlohmann::json({{"gama", 1.0}}).get<Hyperparams>(), ValidationError);
  EXPECT_THROW(nlohmann::json({{"gamma", "x"}}).get<Hyperparams>(), ValidationError);
  EXPECT_EQ(nlohmann::json::object().get<Hyperparams>().gamma, Hyperparams{}.gamma);
}

TEST(ActivityMatrix, ColumnOps) {
  ActivityMatrix f(3, 2);
  f.set(0, 0, true);
  f.set(1, 1, true);
  EXPECT_THROW(f.validate(), ValidationError);  // row 2 empty
  f.set(2, 0, true);
  EXPECT_NO_THROW(f.validate());
  EXPECT_EQ(f.column_count(0), 2u);
  const auto k = f.add_column();
  EXPECT_EQ(k, 2u);
  EXPECT_THROW(f.validate(), ValidationError);  // unused column
  f.set(0, k, true);
  EXPECT_EQ(f.active(0), (std::vector<std::size_t>{0, 2}));
  f.remove_column(1);
  EXPECT_EQ(f.cols(), 2u);
  EXPECT_EQ(f.row_count(1), 0u);
  EXPECT_TRUE(f(0, 1));
}

TEST(Theta, ClampKeepsOpenInterval) {
  EXPECT_GT(clamp_theta(0.0), 0.0);
  EXPECT_LT(clamp_theta(1.0), 1.0);
  EXPECT_EQ(clamp_theta(0.25), 0.25);
}

TEST(Transitions, NormalizeOverActiveSet) {
  Eigen::MatrixXd eta = Eigen::MatrixXd::Constant(3, 3, 9.0);
  eta(0, 0) = 3.0;
  eta(0, 2) = 1.0;
  const auto pi = normalize_transitions(eta, {0, 2}, 3);
  EXPECT_DOUBLE_EQ(pi(0, 0), 0.75);
  EXPECT_DOUBLE_EQ(pi(0, 2), 0.25);
  EXPECT_EQ(pi(0, 1), 0.0);
  EXPECT_EQ(pi.row(1).sum(), 0.0);
  EXPECT_DOUBLE_EQ(pi.row(2).sum(), 1.0);
}

TEST(Rng, StreamsAreStableAndDistinct) {
  Rng a = make_stream(7, "states", 1, 2);
  Rng b = make_stream(7, "states", 1, 2);
  Rng c = make_stream(7, "states", 2, 1);
  Rng d = make_stream(7, "theta", 1, 2);
  const auto va = a();
  EXPECT_EQ(va, b());
  EXPECT_NE(va, c());
  EXPECT_NE(va, d());
}

TEST(Rng, BetaAndDirichletMeans) {
  Rng rng = make_stream(1, "test");
  double sb = 0.0;
  std::vector<double> sd(3, 0.0);
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    sb += sample_beta(rng, 2.0, 6.0);
    const auto d = sample_dirichlet(rng, {1.0, 2.0, 5.0});
    for (int k = 0; k < 3; ++k) sd[k] += d[k];
  }
  EXPECT_NEAR(sb / n, 0.25, 0.005);
  EXPECT_NEAR(sd[0] / n, 0.125, 0.005);
  EXPECT_NEAR(sd[2] / n, 0.625, 0.006);
}
