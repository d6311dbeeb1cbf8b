#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ctmsm/baseline.hpp"
#include "ctmsm/cox_intensity.hpp"
#include "ctmsm/panel.hpp"
#include "ctmsm/weights.hpp"

namespace ctmsm {

// Terms of the structural hazard: A_1..A_W followed by one product term per
// interaction set (0-based treatment indices).
struct StructuralModelSpec {
  std::size_t W = 0;
  std::vector<std::vector<std::size_t>> interactions;

  static StructuralModelSpec main_effects(std::size_t W);
  // "1:2,1:3" style list of 1-based interaction sets; empty text means none.
  static StructuralModelSpec parse(std::size_t W, const std::string& interactions);

  void validate() const;
  std::size_t num_terms() const { return W + interactions.size(); }
  std::vector<std::string> term_names(const std::vector<std::string>& treatment_names) const;
  void design(const std::vector<std::uint8_t>& status, double* z) const;
  std::string interactions_text() const;
};

// Outcome rows (start, stop] with the structural design as features.
EventRecords outcome_records(const CountingProcessPanel& panel, const StructuralModelSpec& spec);

// Total weight of each record's subject, matched by subject id.
Vector record_weights(const CountingProcessPanel& panel, const WeightTable& weights, const EventRecords& records);

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
};

struct PsiEstimate {
  StructuralModelSpec spec;
  std::vector<std::string> term_names;
  Vector psi;
  Matrix covariance;  // robust sandwich
  Vector se;
  std::vector<ConfidenceInterval> ci;
  BaselineIntensity baseline;  // weighted Breslow increments
  double log_likelihood = 0.0;
  double score_max_norm = 0.0;
  int iterations = 0;
  std::size_t subjects = 0;
  std::size_t events = 0;

  std::string to_json() const;
  static PsiEstimate from_json(const std::string& text);
  void save(const std::string& path) const;
  static PsiEstimate load(const std::string& path);
};

PsiEstimate fit_weighted_cox(const CountingProcessPanel& panel, const WeightTable& weights,
                             const StructuralModelSpec& spec, const CoxOptions& options = {});

struct SandwichComponents {
  Matrix sigma0;  // weighted information
  Matrix sigma1;  // sum of squared per-subject score residuals
  Matrix score_residuals;  // subjects x terms
};

SandwichComponents sandwich_components(const EventRecords& records, const Vector& record_weight, const Vector& psi,
                                       std::size_t subjects);
Matrix robust_sandwich(const PsiEstimate& fit, const CountingProcessPanel& panel, const WeightTable& weights);

// Subject indices of one bootstrap draw.
using Resampler = std::function<std::vector<std::size_t>(std::size_t subjects, std::size_t replicate)>;

struct BootstrapConfig {
  std::size_t replicates = 100;
  std::size_t min_replicates = 50;
  std::uint64_t seed = 1;
  int threads = 1;
  Resampler resampler;  // default: uniform draws with replacement from CounterRng(seed, replicate)
  // Extra scalar statistics (estimands) evaluated on every replicate fit.
  std::function<std::vector<double>(const PsiEstimate&)> statistics;
};

struct BootstrapResult {
  std::vector<ConfidenceInterval> psi;
  std::vector<ConfidenceInterval> statistics;
  Matrix psi_draws;  // successful replicates x terms
  std::size_t failures = 0;
  std::vector<std::string> failure_messages;
};

BootstrapResult bootstrap_ci(const CountingProcessPanel& panel, const WeightConfig& weight_config,
                             const StructuralModelSpec& spec, const BootstrapConfig& config);

}  // namespace ctmsm
