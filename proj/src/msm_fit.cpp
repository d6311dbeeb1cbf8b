#include "ctmsm/msm_fit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace ctmsm {

using nlohmann::json;

StructuralModelSpec StructuralModelSpec::main_effects(std::size_t W) {
  StructuralModelSpec s;
  s.W = W;
  return s;
}

StructuralModelSpec StructuralModelSpec::parse(std::size_t W, const std::string& text) {
  StructuralModelSpec s = main_effects(W);
  std::stringstream ss(text);
  std::string set;
  while (std::getline(ss, set, ',')) {
    if (set.empty()) continue;
    std::vector<std::size_t> idx;
    std::stringstream ts(set);
    std::string tok;
    while (std::getline(ts, tok, ':')) {
      double v = 0.0;
      try {
        v = parse_double(tok);
      } catch (const Error&) {
        fail(ErrorKind::Config, "bad interaction term '" + set + "'");
      }
      if (v < 1 || v != std::floor(v)) fail(ErrorKind::Config, "bad interaction term '" + set + "'");
      idx.push_back(static_cast<std::size_t>(v) - 1);
    }
    s.interactions.push_back(std::move(idx));
  }
  s.validate();
  return s;
}

void StructuralModelSpec::validate() const {
  if (W == 0) fail(ErrorKind::Config, "structural model needs at least one treatment");
  for (const auto& set : interactions) {
    if (set.size() < 2) fail(ErrorKind::Config, "interaction sets need at least two treatments");
    auto sorted = set;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      fail(ErrorKind::Config, "interaction set repeats a treatment");
    if (sorted.back() >= W) fail(ErrorKind::Config, "interaction references treatment " + std::to_string(sorted.back() + 1) +
                                                        " but only " + std::to_string(W) + " exist");
  }
}

std::vector<std::string> StructuralModelSpec::term_names(const std::vector<std::string>& treatment_names) const {
  std::vector<std::string> names(treatment_names.begin(), treatment_names.begin() + static_cast<std::ptrdiff_t>(W));
  for (const auto& set : interactions) {
    std::string n;
    for (auto w : set) n += (n.empty() ? "" : ":") + treatment_names[w];
    names.push_back(n);
  }
  return names;
}

void StructuralModelSpec::design(const std::vector<std::uint8_t>& status, double* z) const {
  for (std::size_t w = 0; w < W; ++w) z[w] = status[w];
  for (std::size_t k = 0; k < interactions.size(); ++k) {
    double v = 1.0;
    for (auto w : interactions[k]) v *= status[w];
    z[W + k] = v;
  }
}

std::string StructuralModelSpec::interactions_text() const {
  std::string out;
  for (const auto& set : interactions) {
    if (!out.empty()) out += ',';
    for (std::size_t i = 0; i < set.size(); ++i) out += (i ? ":" : "") + std::to_string(set[i] + 1);
  }
  return out;
}

EventRecords outcome_records(const CountingProcessPanel& panel, const StructuralModelSpec& spec) {
  spec.validate();
  if (spec.W != panel.num_treatments())
    fail(ErrorKind::Config, "structural model has " + std::to_string(spec.W) + " treatments, panel has " +
                                std::to_string(panel.num_treatments()));
  EventRecords rec;
  rec.feature_names = spec.term_names(panel.treatment_names());
  const auto n = panel.rows().size();
  const auto p = static_cast<Eigen::Index>(spec.num_terms());
  rec.X.resize(static_cast<Eigen::Index>(n), p);
  std::size_t i = 0;
  for (std::size_t s = 0; s < panel.num_subjects(); ++s)
    for (const auto& row : panel.subject_rows(s)) {
      rec.entry.push_back(row.t_start);
      rec.exit.push_back(row.t_stop);
      rec.event.push_back(row.outcome_event);
      rec.closed_left.push_back(0);
      rec.closed_right.push_back(1);
      rec.subject.push_back(static_cast<std::uint32_t>(s));
      spec.design(row.treatment, rec.X.row(static_cast<Eigen::Index>(i)).data());
      ++i;
    }
  return rec;
}

Vector record_weights(const CountingProcessPanel& panel, const WeightTable& weights, const EventRecords& records) {
  std::unordered_map<std::string, double> by_id;
  for (std::size_t i = 0; i < weights.size(); ++i) by_id[weights.subject_ids[i]] = weights.total[static_cast<Eigen::Index>(i)];
  std::vector<double> subject_weight(panel.num_subjects());
  for (std::size_t s = 0; s < panel.num_subjects(); ++s) {
    const auto& id = panel.subjects()[s].id;
    const auto it = by_id.find(id);
    if (it == by_id.end()) fail(ErrorKind::Data, "no weight for subject '" + id + "'");
    if (!(it->second > 0.0) || !std::isfinite(it->second))
      fail(ErrorKind::Data, "weight for subject '" + id + "' is not strictly positive");
    subject_weight[s] = it->second;
  }
  Vector w(static_cast<Eigen::Index>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i) w[static_cast<Eigen::Index>(i)] = subject_weight[records.subject[i]];
  return w;
}

SandwichComponents sandwich_components(const EventRecords& records, const Vector& record_weight, const Vector& psi,
                                       std::size_t subjects) {
  const CoxProblem problem(records, &record_weight);
  const auto p = static_cast<Eigen::Index>(problem.num_features());
  SandwichComponents out;
  problem.evaluate(psi, nullptr, &out.sigma0);

  const auto sums = problem.atom_sums(psi);
  const auto K = sums.S0.size();
  // Prefix sums of dL0 and zbar dL0 over atoms.
  Vector C = Vector::Zero(K + 1);
  Matrix D = Matrix::Zero(K + 1, p);
  Matrix zbar = Matrix::Zero(K, p);
  for (Eigen::Index k = 0; k < K; ++k) {
    double dl = 0.0;
    if (sums.events[k] > 0.0) {
      if (!(sums.S0[k] > 0.0)) fail(ErrorKind::Numerical, "empty weighted risk set at an event time");
      dl = sums.events[k] / sums.S0[k];
      zbar.row(k) = sums.S1.row(k) / sums.S0[k];
    }
    C[k + 1] = C[k] + dl;
    D.row(k + 1) = D.row(k) + dl * zbar.row(k);
  }
  const auto& X = problem.centered_X();
  const auto& idx = problem.index();
  out.score_residuals = Matrix::Zero(static_cast<Eigen::Index>(subjects), p);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double w = record_weight[r];
    Vector u = Vector::Zero(p);
    if (records.event[i]) u += X.row(r).transpose() - zbar.row(idx.event_atom[i]).transpose();
    const auto lo = idx.lo[i], hi = idx.hi[i];
    if (lo < hi) {
      const double risk = std::exp(X.row(r).dot(psi));
      u -= risk * ((C[hi] - C[lo]) * X.row(r).transpose() - (D.row(hi) - D.row(lo)).transpose());
    }
    out.score_residuals.row(records.subject[i]) += w * u.transpose();
  }
  out.sigma1 = out.score_residuals.transpose() * out.score_residuals;
  return out;
}

namespace {

Matrix sandwich_from(const SandwichComponents& c) {
  const Eigen::LDLT<Matrix> ldlt(c.sigma0);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || c.sigma0.size() == 0)
    fail(ErrorKind::Numerical, "singular weighted information matrix");
  const Eigen::FullPivLU<Matrix> lu(c.sigma0);
  if (!lu.isInvertible()) fail(ErrorKind::Numerical, "singular weighted information matrix");
  const Matrix inv = lu.inverse();
  Matrix cov = inv * c.sigma1 * inv;
  return (cov + cov.transpose()) / 2.0;
}

}  // namespace

PsiEstimate fit_weighted_cox(const CountingProcessPanel& panel, const WeightTable& weights,
                             const StructuralModelSpec& spec, const CoxOptions& options) {
  const auto records = outcome_records(panel, spec);
  if (records.num_events() == 0) fail(ErrorKind::Data, "no outcome events to fit the structural model");
  const Vector w = record_weights(panel, weights, records);
  const auto fit = fit_cox(records, options, &w);
  for (std::size_t j = 0; j < fit.pinned.size(); ++j)
    if (fit.pinned[j])
      fail(ErrorKind::Numerical, "singular weighted information matrix: term '" + records.feature_names[j] +
                                     "' never varies");
  PsiEstimate est;
  est.spec = spec;
  est.term_names = records.feature_names;
  est.psi = fit.theta;
  est.log_likelihood = fit.log_likelihood;
  est.score_max_norm = fit.score.size() ? fit.score.cwiseAbs().maxCoeff() : 0.0;
  est.iterations = fit.iterations;
  est.subjects = panel.num_subjects();
  est.events = records.num_events();
  est.covariance = sandwich_from(sandwich_components(records, w, fit.theta, panel.num_subjects()));
  est.se = est.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  for (Eigen::Index j = 0; j < est.psi.size(); ++j)
    est.ci.push_back({est.psi[j] - 1.959963984540054 * est.se[j], est.psi[j] + 1.959963984540054 * est.se[j]});
  est.baseline = nelson_aalen(records, CoxProblem(records).relative_risk(fit.theta), &w);
  return est;
}

Matrix robust_sandwich(const PsiEstimate& fit, const CountingProcessPanel& panel, const WeightTable& weights) {
  const auto records = outcome_records(panel, fit.spec);
  const Vector w = record_weights(panel, weights, records);
  return sandwich_from(sandwich_components(records, w, fit.psi, panel.num_subjects()));
}

namespace {

std::vector<double> to_vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

std::string PsiEstimate::to_json() const {
  json j;
  j["format"] = "ctmsm-fit";
  j["version"] = 1;
  j["treatments"] = spec.W;
  j["interactions"] = spec.interactions;
  j["terms"] = term_names;
  j["psi_hat"] = to_vec(psi);
  j["robust_se"] = to_vec(se);
  json lo = json::array(), hi = json::array();
  for (const auto& c : ci) {
    lo.push_back(c.lo);
    hi.push_back(c.hi);
  }
  j["ci_lo"] = lo;
  j["ci_hi"] = hi;
  json cov = json::array();
  for (Eigen::Index r = 0; r < covariance.rows(); ++r) cov.push_back(to_vec(covariance.row(r).transpose()));
  j["covariance"] = cov;
  j["convergence"] = {{"iterations", iterations},
                      {"score_max_norm", score_max_norm},
                      {"log_partial_likelihood", log_likelihood}};
  j["subjects"] = subjects;
  j["events"] = events;
  j["baseline"] = {{"jump_times", baseline.jump_times()}, {"increments", baseline.increments()}};
  return j.dump(1);
}

PsiEstimate PsiEstimate::from_json(const std::string& text) {
  PsiEstimate e;
  try {
    const json j = json::parse(text);
    if (j.at("format") != "ctmsm-fit") fail(ErrorKind::Data, "not a fit report");
    if (j.at("version").get<int>() != 1) fail(ErrorKind::Data, "unsupported fit report version");
    e.spec.W = j.at("treatments").get<std::size_t>();
    e.spec.interactions = j.at("interactions").get<std::vector<std::vector<std::size_t>>>();
    e.spec.validate();
    e.term_names = j.at("terms").get<std::vector<std::string>>();
    const auto psi = j.at("psi_hat").get<std::vector<double>>();
    const auto se = j.at("robust_se").get<std::vector<double>>();
    const auto lo = j.at("ci_lo").get<std::vector<double>>();
    const auto hi = j.at("ci_hi").get<std::vector<double>>();
    const auto cov = j.at("covariance").get<std::vector<std::vector<double>>>();
    const auto p = psi.size();
    if (p != e.spec.num_terms() || se.size() != p || lo.size() != p || hi.size() != p || cov.size() != p ||
        e.term_names.size() != p)
      fail(ErrorKind::Data, "fit report fields have inconsistent lengths");
    e.psi = Eigen::Map<const Vector>(psi.data(), static_cast<Eigen::Index>(p));
    e.se = Eigen::Map<const Vector>(se.data(), static_cast<Eigen::Index>(p));
    e.covariance.resize(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    for (std::size_t r = 0; r < p; ++r) {
      if (cov[r].size() != p) fail(ErrorKind::Data, "fit report covariance is not square");
      for (std::size_t c = 0; c < p; ++c) e.covariance(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = cov[r][c];
      e.ci.push_back({lo[r], hi[r]});
    }
    const auto& conv = j.at("convergence");
    e.iterations = conv.at("iterations").get<int>();
    e.score_max_norm = conv.at("score_max_norm").get<double>();
    e.log_likelihood = conv.at("log_partial_likelihood").get<double>();
    e.subjects = j.at("subjects").get<std::size_t>();
    e.events = j.at("events").get<std::size_t>();
    e.baseline = BaselineIntensity::step(j.at("baseline").at("jump_times").get<std::vector<double>>(),
                                         j.at("baseline").at("increments").get<std::vector<double>>());
  } catch (const json::exception& ex) {
    fail(ErrorKind::Data, std::string("malformed fit report: ") + ex.what());
  }
  return e;
}

void PsiEstimate::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write fit report '" + path + "'");
  out << to_json() << '\n';
}

PsiEstimate PsiEstimate::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open fit report '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

BootstrapResult bootstrap_ci(const CountingProcessPanel& panel, const WeightConfig& weight_config,
                             const StructuralModelSpec& spec, const BootstrapConfig& config) {
  if (config.replicates < config.min_replicates)
    fail(ErrorKind::Config, "bootstrap needs at least " + std::to_string(config.min_replicates) + " replicates");
  if (config.replicates == 0) fail(ErrorKind::Config, "bootstrap needs at least one replicate");
  const std::size_t B = config.replicates, n = panel.num_subjects();
  const std::size_t p = spec.num_terms();
  std::vector<std::vector<double>> psi(B), stats(B);
  std::vector<std::string> errors(B);
  std::vector<std::uint8_t> ok(B, 0);
  parallel_for(B, config.threads, [&](std::size_t b) {
    std::vector<std::size_t> draw;
    if (config.resampler) {
      draw = config.resampler(n, b);
    } else {
      CounterRng rng(config.seed, b, 0xb007);
      draw.resize(n);
      for (auto& d : draw) d = static_cast<std::size_t>(rng.below(n));
    }
    try {
      const auto sample = panel.select(draw, true);
      auto wc = weight_config;
      wc.threads = 1;
      wc.intensity.forest.seed = hash_combine(weight_config.intensity.forest.seed, b);
      const auto weights = estimate_weights(sample, wc);
      const auto fit = fit_weighted_cox(sample, weights, spec);
      psi[b] = to_vec(fit.psi);
      if (config.statistics) stats[b] = config.statistics(fit);
      ok[b] = 1;
    } catch (const Error& e) {
      errors[b] = e.what();
    }
  });
  BootstrapResult out;
  for (std::size_t b = 0; b < B; ++b)
    if (!ok[b]) {
      ++out.failures;
      out.failure_messages.push_back("replicate " + std::to_string(b) + ": " + errors[b]);
    }
  if (static_cast<double>(out.failures) > 0.1 * static_cast<double>(B))
    fail(ErrorKind::Numerical, std::to_string(out.failures) + " of " + std::to_string(B) +
                                   " bootstrap replicates failed (first: " + out.failure_messages.front() + ")");
  const std::size_t good = B - out.failures;
  out.psi_draws.resize(static_cast<Eigen::Index>(good), static_cast<Eigen::Index>(p));
  std::size_t row = 0;
  for (std::size_t b = 0; b < B; ++b)
    if (ok[b]) {
      for (std::size_t j = 0; j < p; ++j)
        out.psi_draws(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(j)) = psi[b][j];
      ++row;
    }
  const auto percentile = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return ConfidenceInterval{quantile_sorted(v, 0.025), quantile_sorted(v, 0.975)};
  };
  for (std::size_t j = 0; j < p; ++j) {
    std::vector<double> v;
    for (std::size_t b = 0; b < B; ++b)
      if (ok[b]) v.push_back(psi[b][j]);
    out.psi.push_back(percentile(std::move(v)));
  }
  if (config.statistics) {
    std::size_t m = 0;
    for (std::size_t b = 0; b < B; ++b)
      if (ok[b]) m = stats[b].size();
    for (std::size_t k = 0; k < m; ++k) {
      std::vector<double> v;
      for (std::size_t b = 0; b < B; ++b)
        if (ok[b]) v.push_back(stats[b][k]);
      out.statistics.push_back(percentile(std::move(v)));
    }
  }
  return out;
}

}  // namespace ctmsm
