#pragma once

#include <cstdint>
#include <vector>

#include "ctmsm/common.hpp"

namespace ctmsm {

struct ForestParams {
  int n_trees = 200;
  int mtry = 0;  // 0 picks ceil(sqrt(p))
  int min_node = 0;  // 0 picks max(ceil(sqrt(N)), 15) for N training rows
  double subsample = 0.632;
  int max_bins = 64;
  // Training rows are scored with out-of-bag trees only (baseline refit and
  // in-sample weights); false uses the full ensemble.
  bool out_of_bag = true;
  std::uint64_t seed = 20240101;
  int threads = 1;
};

// Poisson splits relative-risk trees on (events, expected mass); Bernoulli
// splits the binary classifier used for per-bin treatment probabilities.
enum class SplitRule { Poisson, Bernoulli };

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x <= threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf relative risk or probability
  double reduction = 0.0;  // deviance reduction of the split
};

struct RelativeRiskTree {
  std::vector<TreeNode> nodes;
  double predict(const double* x) const;
};

class LtrcForest {
 public:
  LtrcForest() = default;
  LtrcForest(std::vector<RelativeRiskTree> trees, SplitRule rule, std::size_t num_features, double scale)
      : trees_(std::move(trees)), rule_(rule), num_features_(num_features), scale_(scale) {}

  // Mean of per-tree leaf values, before normalization.
  double raw_predict(const double* x) const;
  double predict(const double* x) const { return scale_ * raw_predict(x); }

  const std::vector<RelativeRiskTree>& trees() const { return trees_; }
  SplitRule rule() const { return rule_; }
  std::size_t num_features() const { return num_features_; }
  double scale() const { return scale_; }
  void set_scale(double s) { scale_ = s; }

  // Raw out-of-bag predictions for the training rows (not serialized).
  const std::vector<double>& oob_raw() const { return oob_raw_; }
  double oob_predict(std::size_t row) const { return scale_ * oob_raw_[row]; }
  void set_oob_raw(std::vector<double> v) { oob_raw_ = std::move(v); }

 private:
  std::vector<RelativeRiskTree> trees_;
  SplitRule rule_ = SplitRule::Poisson;
  std::size_t num_features_ = 0;
  double scale_ = 1.0;
  std::vector<double> oob_raw_;
};

// Poisson deviance 2 sum {delta log(delta/mu) - (delta - mu)} with 0 log 0 = 0.
double node_deviance(const std::vector<double>& delta, const std::vector<double>& mu);

// Relative-risk forest on pseudo-subject rows of X with event indicators and
// baseline exposures (P0 mass over each record). Predictions are normalized
// so the exposure-weighted mean out-of-bag relative risk over all rows is 1.
LtrcForest fit_ltrc_forest(const RowMatrix& X, const std::vector<std::uint8_t>& events,
                           const std::vector<double>& exposure, const ForestParams& params);

// Probability forest for a binary outcome (no normalization).
LtrcForest fit_forest_classifier(const RowMatrix& X, const std::vector<std::uint8_t>& outcome,
                                 const ForestParams& params);

}  // namespace ctmsm
