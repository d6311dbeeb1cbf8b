#include "ctmsm/cox_intensity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ctmsm {

namespace {

void bucket(const std::vector<std::uint32_t>& key, std::size_t K, const std::vector<bool>& keep,
            std::vector<std::uint32_t>& start, std::vector<std::uint32_t>& list) {
  start.assign(K + 2, 0);
  for (std::size_t i = 0; i < key.size(); ++i)
    if (keep[i] && key[i] <= K) ++start[key[i] + 1];
  for (std::size_t k = 0; k + 1 < start.size(); ++k) start[k + 1] += start[k];
  list.assign(start.back(), 0);
  auto fill = start;
  for (std::size_t i = 0; i < key.size(); ++i)
    if (keep[i] && key[i] <= K) list[fill[key[i]]++] = static_cast<std::uint32_t>(i);
}

// Largest covariate value among the records at risk at every atom, by
// painting atoms from the largest value down.
std::vector<double> risk_set_max(const CoxProblem& problem, const Vector& x) {
  const auto& idx = problem.index();
  const std::size_t K = idx.num_atoms();
  std::vector<std::uint32_t> order;
  for (std::size_t i = 0; i < idx.lo.size(); ++i)
    if (idx.lo[i] < idx.hi[i] && problem.weights()[static_cast<Eigen::Index>(i)] > 0.0)
      order.push_back(static_cast<std::uint32_t>(i));
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] > x[b]; });
  std::vector<double> out(K, -INFINITY);
  std::vector<std::uint32_t> next(K + 1);
  std::iota(next.begin(), next.end(), 0u);
  const auto find = [&](std::uint32_t k) {
    while (next[k] != k) k = next[k] = next[next[k]];
    return k;
  };
  for (auto i : order)
    for (auto k = find(idx.lo[i]); k < idx.hi[i]; k = find(k)) {
      out[k] = x[i];
      next[k] = k + 1;
    }
  return out;
}

// True when every event sits at the extreme of its risk set in covariate j
// and some risk set is not constant: the likelihood then increases without
// bound along that coordinate.
bool monotone_along(const CoxProblem& problem, Eigen::Index j) {
  const auto& idx = problem.index();
  for (double sign : {1.0, -1.0}) {
    const Vector x = sign * problem.centered_X().col(j);
    const auto hi = risk_set_max(problem, x);
    const Vector neg = -x;
    const auto lo = risk_set_max(problem, neg);
    bool all_top = true, strict = false;
    for (std::size_t i = 0; i < idx.event_atom.size() && all_top; ++i) {
      const auto k = idx.event_atom[i];
      if (k < 0 || !(problem.weights()[static_cast<Eigen::Index>(i)] > 0.0)) continue;
      all_top = x[static_cast<Eigen::Index>(i)] >= hi[static_cast<std::size_t>(k)];
      strict = strict || x[static_cast<Eigen::Index>(i)] > -lo[static_cast<std::size_t>(k)];
    }
    if (all_top && strict) return true;
  }
  return false;
}

std::string feature_label(const EventRecords& records, Eigen::Index j) {
  const auto u = static_cast<std::size_t>(j);
  return u < records.feature_names.size() ? records.feature_names[u] : "x" + std::to_string(j + 1);
}

}  // namespace

CoxProblem::CoxProblem(const EventRecords& records, const Vector* weights) : index_(AtomIndex::build(records)) {
  const auto n = static_cast<Eigen::Index>(records.size());
  if (weights && weights->size() != n) fail(ErrorKind::Config, "weight vector does not match the records");
  w_ = weights ? *weights : Vector::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(w_[i] >= 0.0) || !std::isfinite(w_[i])) fail(ErrorKind::Numerical, "record weights must be finite and >= 0");
  center_ = n > 0 ? Vector(records.X.colwise().mean().transpose()) : Vector::Zero(records.X.cols());
  X_ = records.X.rowwise() - center_.transpose();
  const std::size_t K = index_.num_atoms();
  std::vector<bool> at_risk(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) at_risk[i] = index_.lo[i] < index_.hi[i];
  bucket(index_.lo, K, at_risk, add_start_, add_list_);
  bucket(index_.hi, K, at_risk, rem_start_, rem_list_);
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records.event[i]) event_list_.push_back(static_cast<std::uint32_t>(i));
}

Vector CoxProblem::relative_risk(const Vector& theta) const {
  return ((X_ * theta).array() + center_.dot(theta)).exp().matrix();
}

double CoxProblem::evaluate(const Vector& theta, Vector* score, Matrix* information) const {
  const std::size_t K = index_.num_atoms();
  const auto p = X_.cols();
  const Vector eta = X_ * theta;
  const double shift = eta.size() ? eta.maxCoeff() : 0.0;
  const Vector r = (w_.array() * (eta.array() - shift).exp()).matrix();

  // Event totals per atom.
  Vector d = Vector::Zero(static_cast<Eigen::Index>(K));
  Matrix dx = Matrix::Zero(static_cast<Eigen::Index>(K), p);
  double ll = 0.0;
  for (auto i : event_list_) {
    const auto k = index_.event_atom[i];
    d[k] += w_[i];
    dx.row(k) += w_[i] * X_.row(i);
    ll += w_[i] * eta[i];
  }

  double S0 = 0.0;
  std::size_t at_risk = 0;
  Vector S1 = Vector::Zero(p);
  Matrix S2 = Matrix::Zero(p, p);
  if (score) *score = Vector::Zero(p);
  if (information) *information = Matrix::Zero(p, p);
  for (std::size_t k = 0; k < K; ++k) {
    for (auto a = add_start_[k]; a < add_start_[k + 1]; ++a) {
      const auto i = add_list_[a];
      ++at_risk;
      S0 += r[i];
      S1 += r[i] * X_.row(i).transpose();
      if (information) S2.selfadjointView<Eigen::Lower>().rankUpdate(X_.row(i).transpose(), r[i]);
    }
    for (auto a = rem_start_[k]; a < rem_start_[k + 1]; ++a) {
      const auto i = rem_list_[a];
      --at_risk;
      S0 -= r[i];
      S1 -= r[i] * X_.row(i).transpose();
      if (information) S2.selfadjointView<Eigen::Lower>().rankUpdate(X_.row(i).transpose(), -r[i]);
    }
    const double dk = d[static_cast<Eigen::Index>(k)];
    if (dk <= 0.0) continue;
    if (at_risk == 0) fail(ErrorKind::Numerical, "empty risk set at an event time");
    // Risks underflowed relative to the largest: far from any maximum.
    if (!(S0 > 0.0)) return -INFINITY;
    ll -= dk * (std::log(S0) + shift);
    const Vector xbar = S1 / S0;
    if (score) *score += dx.row(static_cast<Eigen::Index>(k)).transpose() - dk * xbar;
    if (information) {
      Matrix S2full = S2.selfadjointView<Eigen::Lower>();
      *information += dk * (S2full / S0 - xbar * xbar.transpose());
    }
  }
  return ll;
}

CoxProblem::AtomSums CoxProblem::atom_sums(const Vector& theta) const {
  const auto K = static_cast<Eigen::Index>(index_.num_atoms());
  const auto p = X_.cols();
  const Vector r = (w_.array() * (X_ * theta).array().exp()).matrix();
  AtomSums out{Vector::Zero(K), Matrix::Zero(K, p), Vector::Zero(K)};
  for (auto i : event_list_) out.events[index_.event_atom[i]] += w_[i];
  double S0 = 0.0;
  Vector S1 = Vector::Zero(p);
  for (Eigen::Index k = 0; k < K; ++k) {
    for (auto a = add_start_[k]; a < add_start_[k + 1]; ++a) {
      S0 += r[add_list_[a]];
      S1 += r[add_list_[a]] * X_.row(add_list_[a]).transpose();
    }
    for (auto a = rem_start_[k]; a < rem_start_[k + 1]; ++a) {
      S0 -= r[rem_list_[a]];
      S1 -= r[rem_list_[a]] * X_.row(rem_list_[a]).transpose();
    }
    out.S0[k] = S0;
    out.S1.row(k) = S1.transpose();
  }
  return out;
}

CoxFit fit_cox(const EventRecords& records, const CoxOptions& options, const Vector* weights) {
  if (records.num_events() == 0) fail(ErrorKind::Numerical, "no events to fit the intensity model");
  const CoxProblem problem(records, weights);
  const auto p = static_cast<Eigen::Index>(problem.num_features());
  CoxFit fit;
  fit.theta = Vector::Zero(p);
  fit.pinned.assign(static_cast<std::size_t>(p), false);
  std::vector<Eigen::Index> free;
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto col = records.X.col(j);
    if (records.size() == 0 || col.maxCoeff() == col.minCoeff())
      fit.pinned[static_cast<std::size_t>(j)] = true;
    else
      free.push_back(j);
  }
  const auto q = static_cast<Eigen::Index>(free.size());
  Vector score;
  Matrix info;
  double ll = problem.evaluate(fit.theta, &score, &info);
  const auto sub_score = [&](const Vector& s) {
    Vector out(q);
    for (Eigen::Index a = 0; a < q; ++a) out[a] = s[free[a]];
    return out;
  };
  const auto sub_info = [&](const Matrix& m) {
    Matrix out(q, q);
    for (Eigen::Index a = 0; a < q; ++a)
      for (Eigen::Index b = 0; b < q; ++b) out(a, b) = m(free[a], free[b]);
    return out;
  };

  if (q > 0) {
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(sub_info(info), Eigen::EigenvaluesOnly);
    const double top = eig.eigenvalues().maxCoeff();
    if (!(eig.eigenvalues().minCoeff() > 1e-10 * std::max(top, 1e-300)))
      fail(ErrorKind::Numerical, "non-identifiable covariates: singular information matrix");
  }

  // The score scales with the weights, so the tolerance does too.
  double event_weight = 0.0;
  std::size_t events = 0;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records.event[i]) {
      event_weight += problem.weights()[static_cast<Eigen::Index>(i)];
      ++events;
    }
  const double tolerance = options.tolerance * std::max(1.0, event_weight / static_cast<double>(events));
  int it = 0;
  bool converged = q == 0 || sub_score(score).cwiseAbs().maxCoeff() < tolerance;
  while (!converged && it < options.max_iterations) {
    ++it;
    const Matrix Iq = sub_info(info);
    const Eigen::LDLT<Matrix> ldlt(Iq);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      fail(ErrorKind::Numerical, "non-identifiable covariates: information matrix not positive definite");
    const Vector delta = ldlt.solve(sub_score(score));
    double step = 1.0;
    bool accepted = false;
    Vector theta_new = fit.theta;
    for (int half = 0; half < 40; ++half) {
      for (Eigen::Index a = 0; a < q; ++a) theta_new[free[a]] = fit.theta[free[a]] + step * delta[a];
      Vector s_new;
      Matrix i_new;
      const double ll_new = problem.evaluate(theta_new, &s_new, &i_new);
      if (std::isfinite(ll_new) && ll_new >= ll - 1e-12 * (1.0 + std::abs(ll))) {
        fit.theta = theta_new;
        ll = ll_new;
        score = std::move(s_new);
        info = std::move(i_new);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) fail(ErrorKind::Numerical, "separation detected: step-halving failed to improve the likelihood");
    if (fit.theta.cwiseAbs().maxCoeff() > 30.0)
      fail(ErrorKind::Numerical, "separation detected: coefficients diverging (monotone likelihood)");
    converged = sub_score(score).cwiseAbs().maxCoeff() < tolerance;
  }
  if (!converged) {
    if (fit.theta.cwiseAbs().maxCoeff() > 10.0)
      fail(ErrorKind::Numerical, "separation detected: no convergence with large coefficients");
    fail(ErrorKind::Numerical, "intensity model did not converge in " + std::to_string(options.max_iterations) +
                                   " Newton iterations");
  }
  for (Eigen::Index j : free)
    if (monotone_along(problem, j))
      fail(ErrorKind::Numerical, "separation detected: coefficient of '" + feature_label(records, j) +
                                     "' diverging (monotone likelihood)");
  fit.score = score;
  fit.information = info;
  fit.log_likelihood = ll;
  fit.iterations = it;
  return fit;
}

double cox_log_partial_likelihood(const EventRecords& records, const Vector& theta, const Vector* weights) {
  return CoxProblem(records, weights).evaluate(theta, nullptr, nullptr);
}

Vector cox_score(const EventRecords& records, const Vector& theta, const Vector* weights) {
  Vector s;
  CoxProblem(records, weights).evaluate(theta, &s, nullptr);
  return s;
}

BaselineIntensity nelson_aalen(const EventRecords& records, const Vector& relative_risk, const Vector* weights) {
  const auto idx = AtomIndex::build(records);
  const std::size_t K = idx.num_atoms();
  const auto n = records.size();
  if (static_cast<std::size_t>(relative_risk.size()) != n) fail(ErrorKind::Config, "relative risk length mismatch");
  std::vector<double> diff(K + 1, 0.0), events(K, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weights ? (*weights)[static_cast<Eigen::Index>(i)] : 1.0;
    if (idx.lo[i] < idx.hi[i]) {
      diff[idx.lo[i]] += w * relative_risk[static_cast<Eigen::Index>(i)];
      diff[idx.hi[i]] -= w * relative_risk[static_cast<Eigen::Index>(i)];
    }
    if (records.event[i]) events[static_cast<std::size_t>(idx.event_atom[i])] += w;
  }
  std::vector<double> times, incs;
  double S0 = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    S0 += diff[k];
    if (events[k] <= 0.0) continue;
    if (!(S0 > 0.0)) fail(ErrorKind::Numerical, "empty risk set at t=" + format_double(idx.atoms[k]));
    times.push_back(idx.atoms[k]);
    incs.push_back(events[k] / S0);
  }
  return BaselineIntensity::step(std::move(times), std::move(incs));
}

}  // namespace ctmsm
