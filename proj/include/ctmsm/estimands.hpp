#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ctmsm/msm_fit.hpp"

namespace ctmsm {

// Static regimen: per treatment an initial status and the times at which it
// flips. Status on (s_k, s_{k+1}] is constant, so a flip at s takes effect
// just after s.
struct Regimen {
  struct Path {
    std::uint8_t initial = 0;
    std::vector<double> switches;  // increasing
  };
  std::string label;
  std::vector<Path> treatments;

  static Regimen constant(std::string label, std::vector<std::uint8_t> status);
  std::uint8_t status(std::size_t w, double t) const;
  std::vector<std::uint8_t> status(double t) const;
  void validate() const;
};

// Reads {"regimens": [{"label": ..., "static": [1, 0]} or
// {"label": ..., "treatments": [{"initial": 0, "switches": [..]}, ...]}]}.
std::vector<Regimen> parse_regimens(const std::string& json_text);
std::vector<Regimen> read_regimens_file(const std::string& path);

// Right-continuous step curve: S = values[k] on [times[k], times[k+1]).
struct CounterfactualCurve {
  std::string label;
  std::vector<double> times;  // starts at 0
  std::vector<double> values;
  double horizon = 0.0;
};

CounterfactualCurve counterfactual_survival(const PsiEstimate& fit, const Regimen& regimen,
                                            std::optional<double> horizon = std::nullopt);
double survival_at(const CounterfactualCurve& curve, double t);
double rmst(const CounterfactualCurve& curve, double tau);

void write_curve(std::ostream& out, const CounterfactualCurve& curve, const std::vector<double>& grid = {});
void write_curve_file(const std::string& path, const CounterfactualCurve& curve, const std::vector<double>& grid = {});

struct EstimandRow {
  std::string label;
  double survival = 0.0;
  double rmst = 0.0;
  std::optional<ConfidenceInterval> survival_ci;
  std::optional<ConfidenceInterval> rmst_ci;
};

// CSV regimen_label,S_at_tau,rmst_tau,ci_lo,ci_hi,rmst_ci_lo,rmst_ci_hi; the
// ci columns bound S_at_tau and are empty without a bootstrap.
void write_estimands(std::ostream& out, const std::vector<EstimandRow>& rows);

}  // namespace ctmsm
