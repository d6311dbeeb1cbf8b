#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ctmsm/intensity_model.hpp"
#include "ctmsm/panel.hpp"
#include "ctmsm/process_records.hpp"

namespace ctmsm {

// (i) Cox + step baseline, (ii) Cox + smoothed, (iii) forest + step,
// (iv) forest + smoothed.
enum class Estimator { I, II, III, IV };

Estimator parse_estimator(const std::string& name);
std::string estimator_name(Estimator e);
IntensitySpec intensity_spec_for(Estimator e, const IntensitySpec& base);

inline constexpr double kPositivityFloor = 1e-300;

struct WeightFactor {
  std::string subject_id;
  int process = 0;  // treatment index, or -1 for censoring
  double numerator = 1.0;
  double denominator = 1.0;
  double value = 1.0;
};

struct WeightSummary {
  double min = 0.0, q1 = 0.0, mean = 0.0, q3 = 0.0, max = 0.0;
};

WeightSummary summarize_weights(const Vector& values);

struct WeightTable {
  std::vector<std::string> subject_ids;
  std::vector<std::string> treatment_names;
  Matrix treatment;  // subjects x W factors
  Vector censoring;
  Vector total;
  WeightSummary summary;
  bool truncated = false;
  std::vector<std::string> warnings;

  std::size_t size() const { return subject_ids.size(); }
};

// Recomputes total = prod_w treatment * censoring and the summary.
void finalize_weights(WeightTable& table);
// Caps total weights at the given percentiles of their distribution.
void truncate_weights(WeightTable& table, double lower = 0.01, double upper = 0.99);

void write_weights(std::ostream& out, const WeightTable& table);
void write_weights_file(const std::string& path, const WeightTable& table);
WeightTable read_weights_file(const std::string& path);

struct TreatmentPath {
  std::vector<PathPiece> numerator;
  std::vector<PathPiece> denominator;
  // Features at each initiation time, in schedule order.
  std::vector<std::vector<double>> numerator_at_initiation;
  std::vector<std::vector<double>> denominator_at_initiation;
  // Optional fixed relative risks at each initiation (see PathPiece::ratio).
  std::vector<double> numerator_initiation_ratio;
  std::vector<double> denominator_initiation_ratio;
};

struct WeightOptions {
  // Use 1 - S over the unterminated last interval instead of S (the
  // survival-difference reading of the Q = J - 1 case).
  bool survival_difference_terminal = false;
};

// Product over eligibility intervals of density ratios at initiations and the
// survival ratio over an unterminated last interval, with the intensity
// integral restarting at each V_j.
WeightFactor treatment_weight(const EligibilitySchedule& schedule, const IntensityModel& num,
                              const IntensityModel& den, const TreatmentPath& path,
                              const WeightOptions& options = {});

// Builds the covariate paths used by treatment_weight from panel rows.
TreatmentPath treatment_path(std::span<const ObservationRow> rows, std::size_t w, const OrderingSpec& ordering);

// Ratio of censoring survivals over (0, G].
WeightFactor censoring_weight(const FollowupAnchor& anchor, const IntensityModel& num, const IntensityModel& den,
                              const std::vector<PathPiece>& num_path, const std::vector<PathPiece>& den_path);

struct WeightConfig {
  Estimator estimator = Estimator::IV;
  OrderingSpec ordering;  // empty means identity
  IntensitySpec intensity;  // backend and baseline form are set from the estimator
  bool censoring = true;
  bool truncate = false;
  WeightOptions options;
  int threads = 1;
};

struct FittedWeightModels {
  std::vector<IntensityModel> numerator;  // per treatment
  std::vector<IntensityModel> denominator;
  IntensityModel censor_numerator;
  IntensityModel censor_denominator;
};

WeightTable estimate_weights(const CountingProcessPanel& panel, const WeightConfig& config,
                             FittedWeightModels* models = nullptr);

// Weights from already fitted models (models must match the panel's features).
WeightTable apply_weight_models(const CountingProcessPanel& panel, const FittedWeightModels& models,
                                const WeightConfig& config);

// Discrete-time comparator.
struct BinProbability {
  bool treated = false;  // outcome in this eligible bin
  double p_num = 0.5;
  double p_den = 0.5;
};

// prod over eligible bins of p_num/p_den (treated) or (1-p_num)/(1-p_den).
double discrete_weight_product(const std::vector<BinProbability>& bins);

enum class DtModel { Forest, Logistic };

struct DtConfig {
  DtModel model = DtModel::Forest;
  ForestParams forest;
  OrderingSpec ordering;
  bool censoring = true;
  int threads = 1;
};

// Per-bin treatment probability models fit on eligible person-bins of an
// aligned panel (bins where the treatment was off in the previous bin).
WeightTable discrete_time_weights(const CountingProcessPanel& aligned, const DtConfig& config);

}  // namespace ctmsm
