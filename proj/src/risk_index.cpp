#include "ctmsm/risk_index.hpp"

#include <algorithm>

namespace ctmsm {

std::size_t EventRecords::num_events() const {
  return static_cast<std::size_t>(std::count(event.begin(), event.end(), std::uint8_t{1}));
}

EventRecords records_from_pseudosubjects(const std::vector<PseudoSubject>& pseudo,
                                         std::vector<std::string> feature_names) {
  EventRecords r;
  const std::size_t n = pseudo.size();
  const std::size_t p = n == 0 ? feature_names.size() : pseudo.front().covariates.size();
  if (feature_names.empty())
    for (std::size_t j = 0; j < p; ++j) feature_names.push_back("x" + std::to_string(j + 1));
  if (feature_names.size() != p) fail(ErrorKind::Config, "feature name count does not match covariates");
  r.feature_names = std::move(feature_names);
  r.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ps = pseudo[i];
    if (ps.covariates.size() != p) fail(ErrorKind::Data, "pseudo-subjects disagree on covariate count");
    r.entry.push_back(ps.t_left);
    r.exit.push_back(ps.t_right);
    r.event.push_back(ps.delta ? 1 : 0);
    r.closed_left.push_back(0);
    r.closed_right.push_back(1);
    r.subject.push_back(static_cast<std::uint32_t>(i));
    for (std::size_t j = 0; j < p; ++j) r.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = ps.covariates[j];
  }
  return r;
}

std::pair<std::size_t, std::size_t> atom_range(const std::vector<double>& atoms, double entry, double exit,
                                               bool closed_left, bool closed_right) {
  const auto lo = closed_left ? std::lower_bound(atoms.begin(), atoms.end(), entry)
                              : std::upper_bound(atoms.begin(), atoms.end(), entry);
  const auto hi = closed_right ? std::upper_bound(atoms.begin(), atoms.end(), exit)
                               : std::lower_bound(atoms.begin(), atoms.end(), exit);
  const auto a = static_cast<std::size_t>(lo - atoms.begin());
  const auto b = static_cast<std::size_t>(hi - atoms.begin());
  return {a, std::max(a, b)};
}

AtomIndex AtomIndex::build(const EventRecords& records) {
  AtomIndex idx;
  const std::size_t n = records.size();
  for (std::size_t i = 0; i < n; ++i)
    if (records.event[i]) idx.atoms.push_back(records.exit[i]);
  std::sort(idx.atoms.begin(), idx.atoms.end());
  idx.atoms.erase(std::unique(idx.atoms.begin(), idx.atoms.end()), idx.atoms.end());
  idx.lo.resize(n);
  idx.hi.resize(n);
  idx.event_atom.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [a, b] =
        atom_range(idx.atoms, records.entry[i], records.exit[i], records.closed_left[i], records.closed_right[i]);
    idx.lo[i] = static_cast<std::uint32_t>(a);
    idx.hi[i] = static_cast<std::uint32_t>(b);
    if (records.event[i]) {
      const auto it = std::lower_bound(idx.atoms.begin(), idx.atoms.end(), records.exit[i]);
      idx.event_atom[i] = static_cast<std::int32_t>(it - idx.atoms.begin());
    }
  }
  return idx;
}

}  // namespace ctmsm
