#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctmsm/panel.hpp"

namespace ctmsm {

// Two-treatment generator with recurrent initiations. Vector defaults are the
// published values; gamma[5] and eta[5] are placeholders that no term uses.
struct SimConfig {
  std::size_t n = 1000;
  int M = 100;
  double lambda0 = 0.005;
  std::vector<double> beta = {std::log(3.0 / 7.0), -0.5, -std::log(0.5), std::log(1.5)};
  std::vector<double> zeta = {std::log(2.0 / 7.0), -std::log(0.5), -0.5, std::log(1.5), std::log(2.0 / 3.0)};
  std::vector<double> gamma = {std::log(2.0 / 7.0), 0.5, -0.5, -std::log(0.6), 0.8, 0.5,
                               0.8, -0.5, 0.5, 1.2, -0.6, -0.3};
  std::vector<double> eta = {std::log(3.0 / 7.0), 1.0 / 3.0, -1.0 / 3.0, -std::log(0.4), 0.9, 0.6,
                             0.8, -0.5, 1.0 / 3.0, 0.9, -0.6, -0.4};
  double psi1 = -0.5;
  double psi2 = -0.3;
  double duration_rate_1 = 10.0;
  double duration_rate_2 = 9.0;
  int max_initiations = 4;
  double ragged_subject_fraction = 0.5;
  double ragged_drop_prob = 0.3;
  // Drops the 1/log T0 term so covariates carry no outcome information.
  bool confounding = true;
  // Static statuses overriding the treatment models (counterfactual runs).
  std::optional<std::vector<std::uint8_t>> forced_regimen;
  std::uint64_t seed = 1;

  void validate() const;
  std::string to_json() const;
  // Fields missing from the text keep their defaults; unknown fields are errors.
  static SimConfig from_json(const std::string& text);
  static SimConfig from_json(const std::string& text, const SimConfig& defaults);
};

CountingProcessPanel simulate_rectangular(const SimConfig& config);

// For a random subset of subjects, drops each measurement after the first
// independently with drop_prob and merges the dropped row into the row before
// it. Rows where a treatment status changes are kept, and the follow-up end
// with its event flags always survives.
CountingProcessPanel make_ragged(const CountingProcessPanel& panel, double subject_fraction, double drop_prob,
                                 std::uint64_t seed);

// Synthetic censoring used to exercise censoring weights: per-row censoring
// hazard base_rate * exp(treatment_coef . A + covariate_coef . L), with the
// subject's history truncated at the first censoring time.
struct CensoringMechanism {
  double base_rate = 0.002;
  std::vector<double> treatment_coef;
  std::vector<double> covariate_coef;
  std::uint64_t seed = 1;
};

CountingProcessPanel apply_censoring(const CountingProcessPanel& panel, const CensoringMechanism& mechanism);

}  // namespace ctmsm
