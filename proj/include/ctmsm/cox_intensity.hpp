#pragma once

#include <vector>

#include "ctmsm/baseline.hpp"
#include "ctmsm/common.hpp"
#include "ctmsm/risk_index.hpp"

namespace ctmsm {

struct CoxOptions {
  double tolerance = 1e-8;  // max-norm of the score, times the mean event weight when above 1
  int max_iterations = 50;
};

struct CoxFit {
  Vector theta;
  Vector score;
  Matrix information;
  double log_likelihood = 0.0;
  int iterations = 0;
  std::vector<bool> pinned;  // columns held at 0 because they never vary
};

// Breslow partial likelihood over at-risk records. Optional per-record
// weights multiply both the risk sets and the event contributions.
class CoxProblem {
 public:
  CoxProblem(const EventRecords& records, const Vector* weights = nullptr);

  std::size_t num_features() const { return static_cast<std::size_t>(X_.cols()); }
  const AtomIndex& index() const { return index_; }
  const Matrix& centered_X() const { return X_; }
  const Vector& weights() const { return w_; }

  // Log partial likelihood; fills the score and information when requested.
  double evaluate(const Vector& theta, Vector* score, Matrix* information) const;

  // Weighted risk-set sums at every atom: S0 (length K), S1 (K x p, on the
  // centered scale), and the weighted event count per atom. Record risks are
  // w_i exp(centered_X_i theta).
  struct AtomSums {
    Vector S0;
    Matrix S1;
    Vector events;
  };
  AtomSums atom_sums(const Vector& theta) const;

  // exp(x_i theta) for every record, on the original covariate scale.
  Vector relative_risk(const Vector& theta) const;

 private:
  Matrix X_;  // centered
  Vector center_;
  Vector w_;
  AtomIndex index_;
  std::vector<std::uint32_t> add_start_, add_list_, rem_start_, rem_list_;
  std::vector<std::uint32_t> event_list_;
};

CoxFit fit_cox(const EventRecords& records, const CoxOptions& options = {}, const Vector* weights = nullptr);

double cox_log_partial_likelihood(const EventRecords& records, const Vector& theta, const Vector* weights = nullptr);
Vector cox_score(const EventRecords& records, const Vector& theta, const Vector* weights = nullptr);

// Breslow / Nelson-Aalen increments dP0(s) = sum w dN(s) / sum w IR Y(s),
// with IR given per record.
BaselineIntensity nelson_aalen(const EventRecords& records, const Vector& relative_risk,
                               const Vector* weights = nullptr);

}  // namespace ctmsm
