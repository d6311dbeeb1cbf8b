#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cli_config.hpp"
#include "ctmsm/benchmark.hpp"
#include "ctmsm/estimands.hpp"
#include "ctmsm/msm_fit.hpp"
#include "ctmsm/panel.hpp"
#include "ctmsm/simulation.hpp"
#include "ctmsm/weights.hpp"

namespace fs = std::filesystem;
using namespace ctmsm;
using ctmsm::cli::RunConfig;

namespace {

fs::path temp_dir() {
  if (const char* env = std::getenv("CTMSM_TMPDIR"); env && *env) return env;
  return fs::temp_directory_path();
}

// Stages the artifact in the temp dir so a failed command never leaves a
// partial file at the destination.
void write_output(const std::string& path, const std::function<void(std::ostream&)>& body) {
  const fs::path dest(path);
  if (dest.has_parent_path() && !fs::is_directory(dest.parent_path()))
    fail(ErrorKind::Io, "output directory '" + dest.parent_path().string() + "' does not exist");
  const fs::path staged = temp_dir() / ("ctmsm-" + std::to_string(::getpid()) + "-" + dest.filename().string());
  {
    std::ofstream out(staged, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write temporary file '" + staged.string() + "'");
    body(out);
    if (!out) fail(ErrorKind::Io, "write failed for '" + staged.string() + "'");
  }
  std::error_code ec;
  fs::copy_file(staged, dest, fs::copy_options::overwrite_existing, ec);
  fs::remove(staged);
  if (ec) fail(ErrorKind::Io, "cannot write '" + path + "': " + ec.message());
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) fail(ErrorKind::Io, std::string(what) + " '" + path + "' does not exist");
}

struct Flags {
  std::string config;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n;
  std::optional<std::size_t> reps;
  std::optional<std::string> estimator;
  std::optional<std::string> estimators;
  std::optional<std::string> ordering;
  std::optional<std::string> interactions;
  std::optional<std::string> dt;
  std::optional<std::string> dt_model;
  std::optional<std::size_t> bootstrap;
  std::optional<double> tau;
  std::optional<double> censoring_rate;
  bool ragged = false;
  bool rectangular = false;
  bool no_censoring = false;
  bool truncate = false;
  bool terminal_difference = false;

  std::string out, panel, weights, fit, regimens, curves_dir;
};

RunConfig resolve(const Flags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : RunConfig::load(f.config);
  c.threads = default_threads(c.threads);
  if (f.threads) c.threads = *f.threads;
  if (c.threads < 1) fail(ErrorKind::Config, "threads must be >= 1");
  if (f.seed) c.seed = *f.seed;
  c.simulation.seed = c.seed;
  if (f.n) c.simulation.n = *f.n;
  if (f.reps) c.reps = *f.reps;
  if (f.estimator) c.estimator = parse_estimator(*f.estimator);
  if (f.estimators) c.estimators = cli::parse_estimator_list(*f.estimators);
  if (f.ordering) c.ordering = *f.ordering;
  if (f.interactions) c.interactions = *f.interactions;
  if (f.dt) c.dt = cli::parse_double_list(*f.dt);
  if (f.dt_model) {
    if (*f.dt_model != "forest" && *f.dt_model != "logistic") fail(ErrorKind::Config, "--dt-model must be forest or logistic");
    c.dt_model = *f.dt_model == "forest" ? DtModel::Forest : DtModel::Logistic;
  }
  if (f.bootstrap) c.bootstrap = *f.bootstrap;
  if (f.tau) c.tau = *f.tau;
  if (f.censoring_rate) c.censoring_rate = *f.censoring_rate;
  if (f.ragged) c.ragged = true;
  if (f.rectangular) c.ragged = false;
  if (f.no_censoring) c.censoring = false;
  if (f.truncate) c.truncate = true;
  if (f.terminal_difference) c.survival_difference_terminal = true;
  c.simulation.validate();
  return c;
}

void print_summary(const WeightTable& t) {
  const auto& s = t.summary;
  std::cerr << "weights: min " << s.min << " q1 " << s.q1 << " mean " << s.mean << " q3 " << s.q3 << " max " << s.max
            << (t.truncated ? " (truncated)" : "") << '\n';
  for (const auto& w : t.warnings) std::cerr << "warning: " << w << '\n';
}

int cmd_simulate(const Flags& f, bool seed_given) {
  if (!seed_given) fail(ErrorKind::Config, "simulate requires --seed");
  const auto c = resolve(f);
  auto panel = simulate_rectangular(c.simulation);
  if (c.ragged)
    panel = make_ragged(panel, c.simulation.ragged_subject_fraction, c.simulation.ragged_drop_prob, c.seed);
  if (c.censoring_rate > 0.0) {
    CensoringMechanism mech;
    mech.base_rate = c.censoring_rate;
    mech.treatment_coef = {0.5, -0.5};
    mech.covariate_coef = {0.3, 0.5};
    mech.seed = hash_combine(c.seed, 0xce);
    panel = apply_censoring(panel, mech);
  }
  write_output(f.out, [&](std::ostream& out) { write_panel(out, panel); });
  return 0;
}

int cmd_weights(const Flags& f) {
  const auto c = resolve(f);
  require_file(f.panel, "panel file");
  const auto panel = read_panel_file(f.panel);
  const auto table = estimate_weights(panel, c.weight_config(panel.num_treatments()));
  print_summary(table);
  write_output(f.out, [&](std::ostream& out) { write_weights(out, table); });
  return 0;
}

int cmd_fit(const Flags& f) {
  const auto c = resolve(f);
  require_file(f.panel, "panel file");
  require_file(f.weights, "weights file");
  const auto panel = read_panel_file(f.panel);
  const auto weights = read_weights_file(f.weights);
  const auto spec = StructuralModelSpec::parse(panel.num_treatments(), c.interactions);
  const auto fit = fit_weighted_cox(panel, weights, spec);
  auto report = nlohmann::json::parse(fit.to_json());
  if (c.bootstrap > 0) {
    BootstrapConfig bc;
    bc.replicates = c.bootstrap;
    bc.seed = c.seed;
    bc.threads = c.threads;
    const auto boot = bootstrap_ci(panel, c.weight_config(panel.num_treatments()), spec, bc);
    nlohmann::json lo = nlohmann::json::array(), hi = nlohmann::json::array();
    for (const auto& ci : boot.psi) {
      lo.push_back(ci.lo);
      hi.push_back(ci.hi);
    }
    report["bootstrap"] = {{"replicates", c.bootstrap}, {"failures", boot.failures}, {"ci_lo", lo}, {"ci_hi", hi}};
  }
  for (std::size_t j = 0; j < fit.term_names.size(); ++j)
    std::cerr << fit.term_names[j] << ": psi " << fit.psi[static_cast<Eigen::Index>(j)] << " se "
              << fit.se[static_cast<Eigen::Index>(j)] << '\n';
  write_output(f.out, [&](std::ostream& out) { out << report.dump(1) << '\n'; });
  return 0;
}

int cmd_estimands(const Flags& f) {
  const auto c = resolve(f);
  require_file(f.fit, "fit report");
  require_file(f.regimens, "regimens file");
  const auto fit = PsiEstimate::load(f.fit);
  const auto regimens = read_regimens_file(f.regimens);
  std::vector<EstimandRow> rows;
  for (const auto& reg : regimens) {
    const auto curve = counterfactual_survival(fit, reg, std::max(c.tau, fit.baseline.jump_times().empty()
                                                                              ? c.tau
                                                                              : fit.baseline.jump_times().back()));
    rows.push_back({reg.label, survival_at(curve, c.tau), rmst(curve, c.tau), std::nullopt, std::nullopt});
    if (!f.curves_dir.empty()) {
      if (!fs::is_directory(f.curves_dir)) fail(ErrorKind::Io, "curves directory '" + f.curves_dir + "' does not exist");
      write_output((fs::path(f.curves_dir) / (reg.label + ".csv")).string(),
                   [&](std::ostream& out) { write_curve(out, curve); });
    }
  }
  if (c.bootstrap > 0) {
    if (f.panel.empty()) fail(ErrorKind::Config, "bootstrap intervals for estimands need --panel");
    require_file(f.panel, "panel file");
    const auto panel = read_panel_file(f.panel);
    BootstrapConfig bc;
    bc.replicates = c.bootstrap;
    bc.seed = c.seed;
    bc.threads = c.threads;
    bc.statistics = [&](const PsiEstimate& e) {
      std::vector<double> out;
      for (const auto& reg : regimens) {
        const auto curve = counterfactual_survival(e, reg, c.tau);
        out.push_back(survival_at(curve, c.tau));
        out.push_back(rmst(curve, c.tau));
      }
      return out;
    };
    const auto boot = bootstrap_ci(panel, c.weight_config(panel.num_treatments()), fit.spec, bc);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      rows[k].survival_ci = boot.statistics[2 * k];
      rows[k].rmst_ci = boot.statistics[2 * k + 1];
    }
  }
  write_output(f.out, [&](std::ostream& out) { write_estimands(out, rows); });
  return 0;
}

int cmd_benchmark(const Flags& f, bool seed_given) {
  if (!seed_given) fail(ErrorKind::Config, "benchmark requires --seed");
  auto c = resolve(f);
  if (!f.dt) c.dt.clear();
  const auto result = run_benchmark(c.benchmark_config());
  for (const auto& e : result.failures) std::cerr << "failed: " << e << '\n';
  write_output(f.out, [&](std::ostream& out) { write_metrics(out, result.metrics); });
  return 0;
}

int cmd_compare_dt(const Flags& f, bool seed_given) {
  if (!seed_given) fail(ErrorKind::Config, "compare-dt requires --seed");
  const auto c = resolve(f);
  auto rect = c.benchmark_config();
  rect.ragged = false;
  rect.estimators = {c.estimator};
  rect.dt = {1.0};
  auto ragged = rect;
  ragged.ragged = true;
  ragged.dt = c.dt;
  const auto a = run_benchmark(rect);
  const auto b = run_benchmark(ragged);
  write_output(f.out, [&](std::ostream& out) {
    write_metrics(out, a.metrics, "rectangular");
    std::ostringstream rest;
    write_metrics(rest, b.metrics, "ragged");
    const auto text = rest.str();
    out << text.substr(text.find('\n') + 1);
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous-time joint marginal structural survival models"};
  app.require_subcommand(1);
  Flags f;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON config file (flags override it)");
    sub->add_option("--threads", f.threads, "worker threads (default CTMSM_THREADS or 1)");
  };
  const auto weight_opts = [&](CLI::App* sub) {
    sub->add_option("--estimator", f.estimator, "i, ii, iii or iv");
    sub->add_option("--ordering", f.ordering, "treatment conditioning order, e.g. 2,1");
    sub->add_flag("--no-censoring", f.no_censoring, "skip censoring weights");
    sub->add_flag("--truncate", f.truncate, "cap weights at the 1st/99th percentiles");
    sub->add_flag("--terminal-survival-difference", f.terminal_difference,
                  "use 1 - S over an unterminated last eligibility interval");
  };

  auto* sim = app.add_subcommand("simulate", "simulate a panel");
  common(sim);
  auto* sim_seed = sim->add_option("--seed", f.seed, "random seed");
  sim->add_option("--n", f.n, "subjects");
  sim->add_flag("--ragged", f.ragged, "drop follow-up rows for a subset of subjects");
  sim->add_option("--censoring-rate", f.censoring_rate, "add synthetic censoring with this base rate");
  sim->add_option("--out", f.out, "panel CSV")->required();

  auto* wts = app.add_subcommand("weights", "estimate stabilized weights");
  common(wts);
  weight_opts(wts);
  wts->add_option("--panel", f.panel, "panel CSV")->required();
  wts->add_option("--out", f.out, "weights CSV")->required();

  auto* fit = app.add_subcommand("fit", "fit the weighted structural Cox model");
  common(fit);
  weight_opts(fit);
  fit->add_option("--panel", f.panel, "panel CSV")->required();
  fit->add_option("--weights", f.weights, "weights CSV")->required();
  fit->add_option("--interactions", f.interactions, "interaction terms, e.g. 1:2");
  fit->add_option("--bootstrap", f.bootstrap, "bootstrap replicates (0 = none)");
  fit->add_option("--seed", f.seed, "bootstrap seed");
  fit->add_option("--out", f.out, "fit report JSON")->required();

  auto* est = app.add_subcommand("estimands", "counterfactual survival and RMST");
  common(est);
  weight_opts(est);
  est->add_option("--fit", f.fit, "fit report JSON")->required();
  est->add_option("--regimens", f.regimens, "regimens JSON")->required();
  est->add_option("--tau", f.tau, "time horizon");
  est->add_option("--curves-dir", f.curves_dir, "directory for per-regimen curve CSVs");
  est->add_option("--panel", f.panel, "panel CSV (bootstrap only)");
  est->add_option("--bootstrap", f.bootstrap, "bootstrap replicates (0 = none)");
  est->add_option("--seed", f.seed, "bootstrap seed");
  est->add_option("--out", f.out, "estimand CSV")->required();

  auto* bench = app.add_subcommand("benchmark", "Monte Carlo benchmark of the weighting estimators");
  common(bench);
  auto* bench_seed = bench->add_option("--seed", f.seed, "random seed");
  bench->add_option("--n", f.n, "subjects per replication");
  bench->add_option("--reps", f.reps, "replications");
  bench->add_option("--estimators", f.estimators, "comma list, e.g. i,iv");
  bench->add_option("--dt", f.dt, "discrete-time comparator widths, e.g. 2,1,0.5");
  bench->add_option("--dt-model", f.dt_model, "forest or logistic");
  bench->add_flag("--ragged", f.ragged, "make each replication ragged");
  bench->add_flag("--rectangular", f.rectangular, "keep replications rectangular");
  bench->add_flag("--truncate", f.truncate, "cap weights at the 1st/99th percentiles");
  bench->add_option("--out", f.out, "metrics CSV")->required();

  auto* cmp = app.add_subcommand("compare-dt", "continuous vs discrete-time weights on rectangular and ragged data");
  common(cmp);
  auto* cmp_seed = cmp->add_option("--seed", f.seed, "random seed");
  cmp->add_option("--n", f.n, "subjects per replication");
  cmp->add_option("--reps", f.reps, "replications");
  cmp->add_option("--estimator", f.estimator, "continuous-time estimator");
  cmp->add_option("--dt", f.dt, "discrete-time widths for ragged data");
  cmp->add_option("--dt-model", f.dt_model, "forest or logistic");
  cmp->add_option("--out", f.out, "metrics CSV")->required();

  auto* pc = app.add_subcommand("print-config", "print the resolved configuration");
  common(pc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(f, sim_seed->count() > 0);
    if (wts->parsed()) return cmd_weights(f);
    if (fit->parsed()) return cmd_fit(f);
    if (est->parsed()) return cmd_estimands(f);
    if (bench->parsed()) return cmd_benchmark(f, bench_seed->count() > 0);
    if (cmp->parsed()) return cmd_compare_dt(f, cmp_seed->count() > 0);
    if (pc->parsed()) {
      std::cout << resolve(f).to_json() << '\n';
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << kind_name(e.kind()) << "): " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error (io): " << e.what() << '\n';
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
