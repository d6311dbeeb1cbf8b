#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ctmsm {

// One (t_start, t_stop] row of a subject's counting-process history.
// Covariates are measured at t_start and hold on the row; treatment flags
// give A_w on the row; the two event flags refer to t_stop.
struct ObservationRow {
  std::string subject_id;
  double t_start = 0.0;
  double t_stop = 0.0;
  std::vector<double> covariates;
  std::vector<std::uint8_t> treatment;
  bool outcome_event = false;
  bool censor_event = false;

  bool operator==(const ObservationRow&) const = default;
};

struct SubjectSpan {
  std::string id;
  std::size_t first = 0;
  std::size_t count = 0;

  bool operator==(const SubjectSpan&) const = default;
};

// Validated long-format panel. Rows are grouped by subject (natural order of
// ids) and ordered by t_start; each subject's rows partition (0, t_K].
class CountingProcessPanel {
 public:
  CountingProcessPanel() = default;

  // Sorts and validates. `source_lines`, when given, is parallel to `rows`
  // and is used to point error messages at input lines.
  static CountingProcessPanel build(std::vector<ObservationRow> rows,
                                    std::vector<std::string> covariate_names,
                                    std::vector<std::string> treatment_names,
                                    std::optional<double> max_followup = std::nullopt,
                                    const std::vector<std::size_t>& source_lines = {});

  const std::vector<ObservationRow>& rows() const { return rows_; }
  const std::vector<SubjectSpan>& subjects() const { return subjects_; }
  std::span<const ObservationRow> subject_rows(std::size_t s) const {
    return {rows_.data() + subjects_[s].first, subjects_[s].count};
  }
  std::size_t num_subjects() const { return subjects_.size(); }
  std::size_t num_treatments() const { return treatment_names_.size(); }
  std::size_t num_covariates() const { return covariate_names_.size(); }
  const std::vector<std::string>& covariate_names() const { return covariate_names_; }
  const std::vector<std::string>& treatment_names() const { return treatment_names_; }
  double max_followup() const { return max_followup_; }

  // Subset by subject index, with optional renaming (bootstrap draws repeat
  // subjects, so each copy needs its own id).
  CountingProcessPanel select(std::span<const std::size_t> subject_indices, bool relabel) const;

  bool operator==(const CountingProcessPanel&) const = default;

 private:
  std::vector<ObservationRow> rows_;
  std::vector<SubjectSpan> subjects_;
  std::vector<std::string> covariate_names_;
  std::vector<std::string> treatment_names_;
  double max_followup_ = 0.0;
};

// Column mapping for delimited text input.
struct PanelSchema {
  std::string id = "id";
  std::string start = "tstart";
  std::string stop = "tstop";
  std::string event = "event";
  std::string censor = "censor";
  std::vector<std::string> treatments;
  std::vector<std::string> covariates;
  char delimiter = ',';

  // Default mapping: the five fixed names, treatments named A<k>, every other
  // column a covariate (in header order).
  static PanelSchema infer(const std::vector<std::string>& header, char delimiter = ',');
};

CountingProcessPanel ingest_panel(std::istream& source, const PanelSchema& schema);
CountingProcessPanel ingest_panel(std::istream& source);  // inferred schema
CountingProcessPanel read_panel_file(const std::string& path);
void write_panel(std::ostream& out, const CountingProcessPanel& panel);
void write_panel_file(const std::string& path, const CountingProcessPanel& panel);

struct EligibilityInterval {
  double V = 0.0;
  double U = 0.0;
  bool initiated = false;  // true when U is an initiation time
};

// Off-treatment spans (V_j, U_j] for one subject and treatment.
struct EligibilitySchedule {
  std::string subject_id;
  std::size_t treatment = 0;
  std::vector<EligibilityInterval> intervals;
  std::vector<double> initiation_times;

  std::size_t J() const { return intervals.size(); }
  std::size_t Q() const { return initiation_times.size(); }
};

std::vector<EligibilitySchedule> derive_eligibility(const CountingProcessPanel& panel, std::size_t w);
EligibilitySchedule derive_eligibility(std::span<const ObservationRow> subject_rows, std::size_t w);
void write_eligibility(std::ostream& out, const std::vector<EligibilitySchedule>& schedules);

enum class AnchorKind { Event, AdministrativeEnd, Censored };

struct FollowupAnchor {
  std::string subject_id;
  double G = 0.0;
  AnchorKind kind = AnchorKind::AdministrativeEnd;
};

// G = T if the outcome was observed, t_K if censoring falls after the last
// follow-up, C otherwise.
FollowupAnchor followup_anchor(std::string subject_id, bool outcome_observed, double event_time,
                               double last_followup,
                               double censor_time = std::numeric_limits<double>::infinity());
FollowupAnchor followup_anchor(std::span<const ObservationRow> subject_rows);

// LTRC record of the outcome process: covariates hold on [t_left, t_right).
struct PseudoSubject {
  double t_left = 0.0;
  double t_right = 0.0;
  bool delta = false;
  std::vector<double> covariates;
};

std::vector<PseudoSubject> to_pseudosubjects(const CountingProcessPanel& panel);

// Re-bins every subject onto {0, dt, 2dt, ...}: covariates carried forward
// from the row in effect at the bin start, treatment flagged if on at any
// point of the bin, events placed in the bin containing the event time.
CountingProcessPanel discretize(const CountingProcessPanel& panel, double dt);

}  // namespace ctmsm
