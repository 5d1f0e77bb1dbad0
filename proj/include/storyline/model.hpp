#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "storyline/errors.hpp"

namespace storyline {

struct Hyperparams {
  double gamma = 2.0;    // IBP mass
  double beta_c = 1.0;   // sharing concentration
  double alpha = 1.0;    // transition Gamma shape
  double kappa = 25.0;   // sticky self-transition bonus
  double lambda = 1.0;   // transition scale shape
  double emit_a0 = 1.0;  // Beta prior on emissions
  double emit_b0 = 1.0;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw ValidationError(std::string("hyperparameter ") + name + " must be positive");
    };
    positive(gamma, "gamma");
    positive(beta_c, "beta_c");
    positive(alpha, "alpha");
    positive(lambda, "lambda");
    positive(emit_a0, "emit_a0");
    positive(emit_b0, "emit_b0");
    if (!(kappa >= 0.0) || !std::isfinite(kappa))
      throw ValidationError("hyperparameter kappa must be non-negative");
  }

  /// Poisson mean of the number of activities unique to one sequence among n.
  double unique_mass(std::size_t n_sequences) const {
    return gamma * beta_c / (beta_c + static_cast<double>(n_sequences) - 1.0);
  }
};

inline void to_json(nlohmann::json& j, const Hyperparams& h) {
  j = {{"gamma", h.gamma},     {"beta_c", h.beta_c},   {"alpha", h.alpha},   {"kappa", h.kappa},
       {"lambda", h.lambda},   {"emit_a0", h.emit_a0}, {"emit_b0", h.emit_b0}};
}

inline void from_json(const nlohmann::json& j, Hyperparams& h) {
  if (!j.is_object()) throw ValidationError("hyperparameters must be an object");
  static const char* known[] = {"gamma", "beta_c", "alpha", "kappa", "lambda", "emit_a0", "emit_b0"};
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ValidationError("unknown hyperparameter '" + key + "'");
    if (!value.is_number()) throw ValidationError("hyperparameter '" + key + "' must be a number");
  }
  h.gamma = j.value("gamma", h.gamma);
  h.beta_c = j.value("beta_c", h.beta_c);
  h.alpha = j.value("alpha", h.alpha);
  h.kappa = j.value("kappa", h.kappa);
  h.lambda = j.value("lambda", h.lambda);
  h.emit_a0 = j.value("emit_a0", h.emit_a0);
  h.emit_b0 = j.value("emit_b0", h.emit_b0);
  h.validate();
}

inline Hyperparams load_hyperparams(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open hyperparameter file " + path.string());
  try {
    return nlohmann::json::parse(in).get<Hyperparams>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

/// Binary sequences x activities matrix. The row/column non-emptiness
/// invariants are checked by `validate`, not enforced on every mutation, so
/// samplers can pass through transient states.
class ActivityMatrix {
 public:
  ActivityMatrix() = default;
  ActivityMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows, std::vector<std::uint8_t>(cols, 0)), cols_(cols) {}

  std::size_t rows() const noexcept { return rows_.size(); }
  std::size_t cols() const noexcept { return cols_; }

  bool operator()(std::size_t i, std::size_t k) const { return rows_[i][k] != 0; }
  void set(std::size_t i, std::size_t k, bool v) { rows_[i][k] = v ? 1 : 0; }

  std::size_t add_column() {
    for (auto& r : rows_) r.push_back(0);
    return cols_++;
  }

  void remove_column(std::size_t k) {
    for (auto& r : rows_) r.erase(r.begin() + static_cast<std::ptrdiff_t>(k));
    --cols_;
  }

  std::size_t row_count(std::size_t i) const {
    std::size_t c = 0;
    for (auto v : rows_[i]) c += v;
    return c;
  }

  std::size_t column_count(std::size_t k) const {
    std::size_t c = 0;
    for (const auto& r : rows_) c += r[k];
    return c;
  }

  std::vector<std::size_t> active(std::size_t i) const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < cols_; ++k)
      if (rows_[i][k]) out.push_back(k);
    return out;
  }

  void validate() const {
    for (std::size_t i = 0; i < rows(); ++i)
      if (row_count(i) == 0) throw ValidationError("activity matrix row " + std::to_string(i) + " is empty");
    for (std::size_t k = 0; k < cols_; ++k)
      if (column_count(k) == 0)
        throw ValidationError("activity matrix column " + std::to_string(k) + " is unused");
  }

  bool operator==(const ActivityMatrix&) const = default;

 private:
  std::vector<std::vector<std::uint8_t>> rows_;
  std::size_t cols_ = 0;
};

/// K x M Bernoulli emission parameters, entries kept inside (0, 1).
using ActivityParams = std::vector<std::vector<double>>;

inline constexpr double kThetaFloor = 1e-9;

inline double clamp_theta(double v) { return std::min(std::max(v, kThetaFloor), 1.0 - kThetaFloor); }

using StateAssignment = std::vector<int>;

/// Row-normalised transition matrix restricted to the active columns of f.
inline Eigen::MatrixXd normalize_transitions(const Eigen::MatrixXd& eta, const std::vector<std::size_t>& active,
                                             std::size_t k_total) {
  Eigen::MatrixXd pi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k_total),
                                             static_cast<Eigen::Index>(k_total));
  for (std::size_t j : active) {
    double s = 0.0;
    for (std::size_t k : active) s += eta(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
    for (std::size_t k : active)
      pi(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
          eta(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) / s;
  }
  return pi;
}

}  // namespace storyline
