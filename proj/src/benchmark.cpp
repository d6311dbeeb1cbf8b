#include "ctmsm/benchmark.hpp"

#include <cmath>
#include <ostream>

#include "ctmsm/msm_fit.hpp"

namespace ctmsm {

namespace {

std::string dt_label(double dt) { return "JMSM-DT(" + format_double(dt) + ")"; }

ReplicateEstimate summarize_fit(std::string method, std::string estimator, const PsiEstimate& fit,
                                const std::vector<double>& truth) {
  ReplicateEstimate r{std::move(method), std::move(estimator), {}, {}, true, {}};
  for (std::size_t j = 0; j < truth.size(); ++j) {
    r.psi.push_back(fit.psi[static_cast<Eigen::Index>(j)]);
    r.covered.push_back(fit.ci[j].lo <= truth[j] && truth[j] <= fit.ci[j].hi);
  }
  return r;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> benchmark_methods(const BenchmarkConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (auto e : config.estimators) out.emplace_back("JMSSM-CT", estimator_name(e));
  for (double dt : config.dt)
    out.emplace_back(dt_label(dt), config.dt_model == DtModel::Forest ? "forest" : "logistic");
  return out;
}

std::vector<ReplicateEstimate> run_replicate(const BenchmarkConfig& config, std::size_t rep) {
  SimConfig sim = config.sim;
  sim.seed = hash_combine(config.seed, rep);
  auto panel = simulate_rectangular(sim);
  if (config.ragged) panel = make_ragged(panel, sim.ragged_subject_fraction, sim.ragged_drop_prob, sim.seed);
  const std::vector<double> truth = {sim.psi1, sim.psi2};
  const auto spec = StructuralModelSpec::main_effects(2);
  const auto methods = benchmark_methods(config);
  std::vector<ReplicateEstimate> out;
  for (std::size_t k = 0; k < methods.size(); ++k) {
    const auto& [method, estimator] = methods[k];
    try {
      if (k < config.estimators.size()) {
        WeightConfig wc;
        wc.estimator = config.estimators[k];
        wc.intensity = config.intensity;
        wc.intensity.forest.seed = hash_combine(sim.seed, 0xf0);
        wc.truncate = config.truncate;
        const auto weights = estimate_weights(panel, wc);
        out.push_back(summarize_fit(method, estimator, fit_weighted_cox(panel, weights, spec), truth));
      } else {
        const double dt = config.dt[k - config.estimators.size()];
        const auto aligned = discretize(panel, dt);
        DtConfig dc;
        dc.model = config.dt_model;
        dc.forest = config.intensity.forest;
        dc.forest.seed = hash_combine(sim.seed, 0xd7);
        auto weights = discrete_time_weights(aligned, dc);
        if (config.truncate) truncate_weights(weights);
        out.push_back(summarize_fit(method, estimator, fit_weighted_cox(aligned, weights, spec), truth));
      }
    } catch (const Error& e) {
      out.push_back({method, estimator, {}, {}, false, e.what()});
    }
  }
  return out;
}

BenchmarkResult run_benchmark(const BenchmarkConfig& config) {
  if (config.reps < 2) fail(ErrorKind::Config, "benchmark needs at least 2 replications");
  if (config.estimators.empty() && config.dt.empty()) fail(ErrorKind::Config, "benchmark has no methods");
  for (double dt : config.dt)
    if (!(dt > 0.0)) fail(ErrorKind::Config, "discrete-time grid widths must be positive");
  config.sim.validate();
  BenchmarkResult result;
  result.replicates.resize(config.reps);
  parallel_for(config.reps, config.threads, [&](std::size_t r) { result.replicates[r] = run_replicate(config, r); });

  const auto methods = benchmark_methods(config);
  std::size_t failed = 0;
  for (std::size_t r = 0; r < config.reps; ++r)
    for (const auto& est : result.replicates[r])
      if (!est.ok) {
        ++failed;
        result.failures.push_back("rep " + std::to_string(r) + " " + est.method + " " + est.estimator + ": " +
                                  est.error);
      }
  const double total = static_cast<double>(config.reps * methods.size());
  if (static_cast<double>(failed) > config.max_failure_rate * total)
    fail(ErrorKind::Numerical, std::to_string(failed) + " of " + format_double(total) +
                                   " benchmark fits failed (first: " + result.failures.front() + ")");

  const std::vector<double> truth = {config.sim.psi1, config.sim.psi2};
  for (std::size_t k = 0; k < methods.size(); ++k)
    for (std::size_t j = 0; j < truth.size(); ++j) {
      MetricRow row{methods[k].first, methods[k].second, "psi" + std::to_string(j + 1), 0, 0, 0, 0, config.sim.n};
      for (std::size_t r = 0; r < config.reps; ++r) {
        const auto& est = result.replicates[r][k];
        if (!est.ok) continue;
        const double err = est.psi[j] - truth[j];
        row.mab += std::abs(err);
        row.rmse += err * err;
        row.cp += est.covered[j];
        ++row.reps;
      }
      if (row.reps > 0) {
        const double m = static_cast<double>(row.reps);
        row.mab /= m;
        row.rmse = std::sqrt(row.rmse / m);
        row.cp /= m;
      }
      result.metrics.push_back(row);
    }
  return result;
}

void write_metrics(std::ostream& out, const std::vector<MetricRow>& rows, const std::string& data_label) {
  if (!data_label.empty()) out << "data,";
  out << "method,estimator,param,MAB,RMSE,CP,reps,n\n";
  for (const auto& r : rows) {
    if (!data_label.empty()) out << data_label << ',';
    out << r.method << ',' << r.estimator << ',' << r.param << ',' << format_double(r.mab) << ','
        << format_double(r.rmse) << ',' << format_double(r.cp) << ',' << r.reps << ',' << r.n << '\n';
  }
}

}  // namespace ctmsm
