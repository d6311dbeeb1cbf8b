#pragma once

#include <string>
#include <vector>

#include "ctmsm/panel.hpp"
#include "ctmsm/risk_index.hpp"

namespace ctmsm {

// Conditioning order of the treatments: the k-th treatment's intensity sees
// the current status of treatments before it and the lagged status of the
// ones after it.
struct OrderingSpec {
  std::vector<std::size_t> order;

  static OrderingSpec identity(std::size_t W);
  // Parses "2,1" style 1-based lists.
  static OrderingSpec parse(const std::string& text, std::size_t W);
  void validate(std::size_t W) const;
  std::size_t position(std::size_t w) const;
};

enum class FeatureSet { Numerator, Denominator };

// Initiation process of treatment w. Off-treatment rows are at risk on
// [start, stop), or on (start, stop) when the row starts where a course
// ended; an initiation at u is the event record [u, u] with that row's
// features. Features: prior initiation count, statuses of the other
// treatments per the ordering, and for the denominator the row covariates
// and their lagged values.
EventRecords treatment_records(const CountingProcessPanel& panel, std::size_t w, const OrderingSpec& ordering,
                               FeatureSet set);

// Censoring process on the outcome rows (start, stop]. The numerator has no
// features; the denominator uses the row treatments and covariates.
EventRecords censoring_records(const CountingProcessPanel& panel, FeatureSet set);

// Feature vector of treatment w at row r of one subject.
std::vector<double> treatment_features(std::span<const ObservationRow> rows, std::size_t r, std::size_t w,
                                       const OrderingSpec& ordering, FeatureSet set, int prior_initiations);
std::vector<std::string> treatment_feature_names(const CountingProcessPanel& panel, std::size_t w,
                                                 const OrderingSpec& ordering, FeatureSet set);

}  // namespace ctmsm
