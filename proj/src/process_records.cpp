#include "ctmsm/process_records.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "ctmsm/common.hpp"

namespace ctmsm {

OrderingSpec OrderingSpec::identity(std::size_t W) {
  OrderingSpec o;
  o.order.resize(W);
  std::iota(o.order.begin(), o.order.end(), 0);
  return o;
}

OrderingSpec OrderingSpec::parse(const std::string& text, std::size_t W) {
  if (text.empty()) return identity(W);
  OrderingSpec o;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const double v = parse_double(item);
    if (v < 1.0 || v != static_cast<double>(static_cast<long>(v)))
      fail(ErrorKind::Config, "ordering entries are 1-based treatment indices");
    o.order.push_back(static_cast<std::size_t>(v) - 1);
  }
  o.validate(W);
  return o;
}

void OrderingSpec::validate(std::size_t W) const {
  if (order.size() != W) fail(ErrorKind::Config, "ordering must list each of the " + std::to_string(W) + " treatments");
  std::vector<bool> seen(W, false);
  for (auto w : order) {
    if (w >= W || seen[w]) fail(ErrorKind::Config, "ordering is not a permutation of the treatments");
    seen[w] = true;
  }
}

std::size_t OrderingSpec::position(std::size_t w) const {
  return static_cast<std::size_t>(std::find(order.begin(), order.end(), w) - order.begin());
}

std::vector<std::string> treatment_feature_names(const CountingProcessPanel& panel, std::size_t w,
                                                 const OrderingSpec& ordering, FeatureSet set) {
  const auto& tn = panel.treatment_names();
  std::vector<std::string> names{"n_" + tn[w]};
  const std::size_t k = ordering.position(w);
  for (std::size_t pos = 0; pos < ordering.order.size(); ++pos) {
    const auto u = ordering.order[pos];
    if (u == w) continue;
    if (pos < k) names.push_back(tn[u]);
    names.push_back(tn[u] + "_lag");
  }
  if (set == FeatureSet::Denominator) {
    for (const auto& c : panel.covariate_names()) names.push_back(c);
    for (const auto& c : panel.covariate_names()) names.push_back(c + "_lag");
  }
  return names;
}

std::vector<double> treatment_features(std::span<const ObservationRow> rows, std::size_t r, std::size_t w,
                                       const OrderingSpec& ordering, FeatureSet set, int prior_initiations) {
  const auto& row = rows[r];
  const ObservationRow* prev = r > 0 ? &rows[r - 1] : nullptr;
  std::vector<double> x{static_cast<double>(prior_initiations)};
  const std::size_t k = ordering.position(w);
  for (std::size_t pos = 0; pos < ordering.order.size(); ++pos) {
    const auto u = ordering.order[pos];
    if (u == w) continue;
    if (pos < k) x.push_back(row.treatment[u]);
    x.push_back(prev ? prev->treatment[u] : 0.0);
  }
  if (set == FeatureSet::Denominator) {
    x.insert(x.end(), row.covariates.begin(), row.covariates.end());
    for (std::size_t c = 0; c < row.covariates.size(); ++c) x.push_back(prev ? prev->covariates[c] : 0.0);
  }
  return x;
}

EventRecords treatment_records(const CountingProcessPanel& panel, std::size_t w, const OrderingSpec& ordering,
                               FeatureSet set) {
  if (w >= panel.num_treatments()) fail(ErrorKind::Config, "treatment index out of range");
  ordering.validate(panel.num_treatments());
  EventRecords rec;
  rec.feature_names = treatment_feature_names(panel, w, ordering, set);
  std::vector<double> flat;
  for (std::size_t s = 0; s < panel.num_subjects(); ++s) {
    const auto rows = panel.subject_rows(s);
    int q = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const bool on = rows[r].treatment[w];
      const bool prev_on = r > 0 && rows[r - 1].treatment[w];
      if (on && prev_on) continue;
      const auto x = treatment_features(rows, r, w, ordering, set, q);
      flat.insert(flat.end(), x.begin(), x.end());
      rec.subject.push_back(static_cast<std::uint32_t>(s));
      rec.entry.push_back(rows[r].t_start);
      if (on) {
        rec.exit.push_back(rows[r].t_start);
        rec.event.push_back(1);
        rec.closed_left.push_back(1);
        rec.closed_right.push_back(1);
        ++q;
      } else {
        rec.exit.push_back(rows[r].t_stop);
        rec.event.push_back(0);
        rec.closed_left.push_back(prev_on ? 0 : 1);
        rec.closed_right.push_back(0);
      }
    }
  }
  const auto p = static_cast<Eigen::Index>(rec.feature_names.size());
  rec.X = Eigen::Map<const RowMatrix>(flat.data(), static_cast<Eigen::Index>(rec.size()), p);
  return rec;
}

EventRecords censoring_records(const CountingProcessPanel& panel, FeatureSet set) {
  EventRecords rec;
  if (set == FeatureSet::Denominator) {
    rec.feature_names = panel.treatment_names();
    rec.feature_names.insert(rec.feature_names.end(), panel.covariate_names().begin(), panel.covariate_names().end());
  }
  const auto p = static_cast<Eigen::Index>(rec.feature_names.size());
  const auto n = static_cast<Eigen::Index>(panel.rows().size());
  rec.X.resize(n, p);
  Eigen::Index i = 0;
  for (std::size_t s = 0; s < panel.num_subjects(); ++s) {
    for (const auto& row : panel.subject_rows(s)) {
      rec.subject.push_back(static_cast<std::uint32_t>(s));
      rec.entry.push_back(row.t_start);
      rec.exit.push_back(row.t_stop);
      rec.event.push_back(row.censor_event ? 1 : 0);
      rec.closed_left.push_back(0);
      rec.closed_right.push_back(1);
      if (set == FeatureSet::Denominator) {
        Eigen::Index j = 0;
        for (auto a : row.treatment) rec.X(i, j++) = a;
        for (double c : row.covariates) rec.X(i, j++) = c;
      }
      ++i;
    }
  }
  return rec;
}

}  // namespace ctmsm
