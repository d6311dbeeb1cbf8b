#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctmsm/common.hpp"
#include "ctmsm/panel.hpp"

namespace ctmsm {

// At-risk records of one counting process. Each end of the span is open or
// closed: outcome rows are (entry, exit], off-treatment rows [entry, exit) or
// (entry, exit) right after a course ends, and an initiation at u is the
// degenerate closed record [u, u].
struct EventRecords {
  std::vector<double> entry;
  std::vector<double> exit;
  std::vector<std::uint8_t> event;
  std::vector<std::uint8_t> closed_left;
  std::vector<std::uint8_t> closed_right;
  std::vector<std::uint32_t> subject;
  RowMatrix X;  // one row per record
  std::vector<std::string> feature_names;

  std::size_t size() const { return entry.size(); }
  std::size_t num_features() const { return static_cast<std::size_t>(X.cols()); }
  std::size_t num_events() const;
};

EventRecords records_from_pseudosubjects(const std::vector<PseudoSubject>& pseudo,
                                         std::vector<std::string> feature_names = {});

// Distinct event times and, for every record, the half-open range [lo, hi)
// of atoms at which it is at risk.
struct AtomIndex {
  std::vector<double> atoms;
  std::vector<std::uint32_t> lo;
  std::vector<std::uint32_t> hi;
  std::vector<std::int32_t> event_atom;  // -1 without an event

  static AtomIndex build(const EventRecords& records);
  std::size_t num_atoms() const { return atoms.size(); }
};

// Atoms of `atoms` inside the span, as an index range.
std::pair<std::size_t, std::size_t> atom_range(const std::vector<double>& atoms, double entry, double exit,
                                               bool closed_left, bool closed_right);

}  // namespace ctmsm
