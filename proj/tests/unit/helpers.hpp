#pragma once

#include <initializer_list>
#include <string>
#include <vector>

#include "ctmsm/panel.hpp"

namespace testing {

inline ctmsm::ObservationRow row(std::string id, double a, double b, std::vector<std::uint8_t> treatment,
                                 std::vector<double> covariates = {}, bool event = false, bool censor = false) {
  ctmsm::ObservationRow r;
  r.subject_id = std::move(id);
  r.t_start = a;
  r.t_stop = b;
  r.treatment = std::move(treatment);
  r.covariates = std::move(covariates);
  r.outcome_event = event;
  r.censor_event = censor;
  return r;
}

// Single-treatment, no-covariate subject from status breakpoints: times
// {0, t1, ..., tK} and the status on each row.
inline std::vector<ctmsm::ObservationRow> status_rows(const std::string& id, std::vector<double> times,
                                                     std::vector<std::uint8_t> status, bool event = false) {
  std::vector<ctmsm::ObservationRow> out;
  for (std::size_t k = 0; k + 1 < times.size(); ++k)
    out.push_back(row(id, times[k], times[k + 1], {status[k]}, {}, event && k + 2 == times.size()));
  return out;
}

inline ctmsm::CountingProcessPanel panel_of(std::vector<ctmsm::ObservationRow> rows, std::size_t W = 1,
                                            std::vector<std::string> covariates = {}) {
  std::vector<std::string> names;
  for (std::size_t w = 0; w < W; ++w) names.push_back("A" + std::to_string(w + 1));
  return ctmsm::CountingProcessPanel::build(std::move(rows), std::move(covariates), std::move(names));
}

}  // namespace testing
