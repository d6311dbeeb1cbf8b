#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ctmsm/baseline.hpp"
#include "ctmsm/cox_intensity.hpp"
#include "ctmsm/forest.hpp"
#include "ctmsm/risk_index.hpp"

namespace ctmsm {

enum class IntensityBackend { Cox, Forest };

struct IntensitySpec {
  IntensityBackend backend = IntensityBackend::Cox;
  BaselineForm baseline = BaselineForm::Step;
  Kernel kernel = Kernel::Gaussian;
  std::optional<double> bandwidth;      // fixed bandwidth, skips selection
  std::vector<double> bandwidth_grid;   // empty uses default_bandwidth_grid
  int cv_folds = 5;
  CoxOptions cox;
  ForestParams forest;
};

// alpha(t) = rho0(t) IR(x) on the at-risk set.
class IntensityModel {
 public:
  IntensityModel() = default;

  IntensityBackend backend() const { return backend_; }
  const std::vector<std::string>& feature_names() const { return features_; }
  const Vector& theta() const { return theta_; }
  const LtrcForest& forest() const { return forest_; }
  const BaselineIntensity& baseline() const { return baseline_; }
  const std::string& warning() const { return warning_; }
  // Relative risk of each training record, out-of-bag for forests; used for
  // the baseline and for in-sample weights. Empty for a loaded model.
  const std::vector<double>& training_ratio() const { return training_ratio_; }

  double ratio(const double* x) const;
  // Integrated intensity over one span with constant covariates x.
  double cumulative_hazard(const double* x, double a, double b, bool closed_left, bool closed_right) const;
  // Intensity mass at t: dP0(t) IR for a step baseline, rho0(t) IR when smoothed.
  double point_intensity(const double* x, double t) const;
  // Same two quantities with a given relative risk.
  double cumulative_hazard_rr(double rr, double a, double b, bool closed_left, bool closed_right) const;
  double point_intensity_rr(double rr, double t) const;

  std::string to_json() const;
  static IntensityModel from_json(const std::string& text);
  void save(const std::string& path) const;
  static IntensityModel load(const std::string& path);

  bool operator==(const IntensityModel& other) const { return to_json() == other.to_json(); }

 private:
  friend IntensityModel fit_intensity_model(const EventRecords&, const IntensitySpec&);
  friend IntensityModel make_cox_model(std::vector<std::string>, Vector, BaselineIntensity);

  IntensityBackend backend_ = IntensityBackend::Cox;
  std::vector<std::string> features_;
  Vector theta_;
  LtrcForest forest_;
  BaselineIntensity baseline_;
  std::string warning_;
  std::vector<double> training_ratio_;
};

IntensityModel fit_intensity_model(const EventRecords& records, const IntensitySpec& spec);

// Model with given coefficients and baseline (tests and hand-built scenarios).
IntensityModel make_cox_model(std::vector<std::string> feature_names, Vector theta, BaselineIntensity baseline);

// Piece of a covariate path: x holds on the span from start to stop.
struct PathPiece {
  double start = 0.0;
  double stop = 0.0;
  bool closed_left = true;
  bool closed_right = false;
  std::vector<double> x;
  double ratio = -1.0;  // relative risk to use instead of predicting from x when >= 0
};

struct SurvivalDensity {
  double S = 1.0;  // S(to- | from)
  double f = 0.0;  // intensity at `to` times S, when x_at_to is given
};

// Survival exp(-integral of the intensity) along the path from `from` to
// `to`, restarting at `from`, plus the density at `to`.
SurvivalDensity conditional_survival_density(const IntensityModel& model, const std::vector<PathPiece>& path,
                                             double from, double to,
                                             const std::vector<double>* x_at_to = nullptr,
                                             double ratio_at_to = -1.0);

}  // namespace ctmsm
