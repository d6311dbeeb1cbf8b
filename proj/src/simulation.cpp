#include "ctmsm/simulation.hpp"

#include <cmath>
#include <set>

#include <json.hpp>

#include "ctmsm/common.hpp"

namespace ctmsm {

using nlohmann::json;

void SimConfig::validate() const {
  if (n == 0) fail(ErrorKind::Config, "simulation needs n >= 1");
  if (M < 1) fail(ErrorKind::Config, "simulation needs M >= 1");
  if (!(lambda0 > 0.0)) fail(ErrorKind::Config, "lambda0 must be positive");
  if (beta.size() != 4) fail(ErrorKind::Config, "beta must have 4 entries");
  if (zeta.size() != 5) fail(ErrorKind::Config, "zeta must have 5 entries");
  if (gamma.size() != 12) fail(ErrorKind::Config, "gamma must have 12 entries");
  if (eta.size() != 12) fail(ErrorKind::Config, "eta must have 12 entries");
  if (!(duration_rate_1 > 0.0) || !(duration_rate_2 > 0.0)) fail(ErrorKind::Config, "duration rates must be positive");
  if (max_initiations < 1) fail(ErrorKind::Config, "max_initiations must be >= 1");
  if (!(ragged_subject_fraction >= 0.0 && ragged_subject_fraction <= 1.0) ||
      !(ragged_drop_prob >= 0.0 && ragged_drop_prob <= 1.0))
    fail(ErrorKind::Config, "ragged fractions must lie in [0, 1]");
  if (forced_regimen && forced_regimen->size() != 2) fail(ErrorKind::Config, "forced_regimen needs two statuses");
}

std::string SimConfig::to_json() const {
  json j = {{"n", n},
            {"M", M},
            {"lambda0", lambda0},
            {"beta", beta},
            {"zeta", zeta},
            {"gamma", gamma},
            {"eta", eta},
            {"psi1", psi1},
            {"psi2", psi2},
            {"duration_rate_1", duration_rate_1},
            {"duration_rate_2", duration_rate_2},
            {"max_initiations", max_initiations},
            {"ragged", {{"subject_fraction", ragged_subject_fraction}, {"drop_prob", ragged_drop_prob}}},
            {"confounding", confounding},
            {"seed", seed}};
  j["forced_regimen"] = forced_regimen ? json(*forced_regimen) : json(nullptr);
  return j.dump(1);
}

SimConfig SimConfig::from_json(const std::string& text) { return from_json(text, SimConfig{}); }

SimConfig SimConfig::from_json(const std::string& text, const SimConfig& defaults) {
  SimConfig c = defaults;
  try {
    const json j = json::parse(text);
    static const std::set<std::string> known = {"n", "M", "lambda0", "beta", "zeta", "gamma", "eta", "psi1", "psi2",
                                                "duration_rate_1", "duration_rate_2", "max_initiations", "ragged",
                                                "confounding", "forced_regimen", "seed"};
    for (const auto& [key, value] : j.items())
      if (!known.count(key)) fail(ErrorKind::Config, "unknown simulation field '" + key + "'");
    const auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("n", c.n);
    get("M", c.M);
    get("lambda0", c.lambda0);
    get("beta", c.beta);
    get("zeta", c.zeta);
    get("gamma", c.gamma);
    get("eta", c.eta);
    get("psi1", c.psi1);
    get("psi2", c.psi2);
    get("duration_rate_1", c.duration_rate_1);
    get("duration_rate_2", c.duration_rate_2);
    get("max_initiations", c.max_initiations);
    get("confounding", c.confounding);
    get("seed", c.seed);
    if (j.contains("ragged")) {
      const auto& r = j.at("ragged");
      if (r.contains("subject_fraction")) c.ragged_subject_fraction = r.at("subject_fraction").get<double>();
      if (r.contains("drop_prob")) c.ragged_drop_prob = r.at("drop_prob").get<double>();
    }
    if (j.contains("forced_regimen")) {
      if (j.at("forced_regimen").is_null())
        c.forced_regimen.reset();
      else
        c.forced_regimen = j.at("forced_regimen").get<std::vector<std::uint8_t>>();
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed simulation config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

struct TreatmentState {
  int status = 0;  // A_w(m-1)
  int course_end = 0;  // tau
  int initiations = 0;
};

// Advances one treatment to step m given its logit when it may initiate.
int step_treatment(TreatmentState& s, int m, double logit_p, double duration_rate, int max_initiations,
                   CounterRng& rng) {
  const bool eligible = (s.status == 0 || m - 1 == s.course_end) && s.initiations < max_initiations;
  if (!eligible) return s.status;
  const int a = rng.bernoulli(logistic(logit_p)) ? 1 : 0;
  if (a) {
    s.course_end = m + rng.zero_truncated_poisson(duration_rate);
    ++s.initiations;
  }
  return a;
}

}  // namespace

CountingProcessPanel simulate_rectangular(const SimConfig& c) {
  c.validate();
  const auto& g = c.gamma;
  const auto& e = c.eta;
  std::vector<ObservationRow> rows;
  rows.reserve(c.n * static_cast<std::size_t>(c.M));
  for (std::size_t i = 0; i < c.n; ++i) {
    const std::string id = std::to_string(i + 1);
    CounterRng base(c.seed, i, ~std::uint64_t{0});
    const double T0 = base.exponential(c.lambda0);
    double L1p = 0.0, L2p = 0.0, H = 0.0;
    TreatmentState s1, s2;
    for (int m = 0; m < c.M; ++m) {
      CounterRng rng(c.seed, i, static_cast<std::uint64_t>(m));
      const int A1p = s1.status, A2p = s2.status;
      const double L1 = c.zeta[0] + (c.confounding ? c.zeta[1] / std::log(T0) : 0.0) + c.zeta[2] * A1p +
                        c.zeta[3] * L1p + c.zeta[4] * A2p;
      const double L2 = rng.bernoulli(logistic(c.beta[0] + c.beta[1] * A1p + c.beta[2] * L2p + c.beta[3] * A2p)) ? 1.0 : 0.0;
      int A1 = 0, A2 = 0;
      if (c.forced_regimen) {
        A1 = (*c.forced_regimen)[0];
      } else {
        const double lp = g[0] + g[1] * A1p + g[2] * L2p * L2p + g[3] * L1p * L1p + g[4] * A1p * L1 + g[6] * L1 * L2 +
                          g[7] * A1p * L2 + g[8] * A2p + g[9] * A2p * L1 + g[10] * A2p * L2 + g[11] * s1.initiations;
        A1 = step_treatment(s1, m, lp, c.duration_rate_1, c.max_initiations, rng);
      }
      if (c.forced_regimen) {
        A2 = (*c.forced_regimen)[1];
      } else {
        const double lp = e[0] + e[1] * A1p + e[2] * L2p * L2p + e[3] * L1p * L1p + e[4] * A1 * L1 + e[6] * L1 * L2 +
                          e[7] * A1 * L2 + e[8] * A2p + e[9] * A2p * L1 + e[10] * A2p * L2 + e[11] * s2.initiations;
        A2 = step_treatment(s2, m, lp, c.duration_rate_2, c.max_initiations, rng);
      }
      s1.status = A1;
      s2.status = A2;
      const double log_rate = c.psi1 * A1 + c.psi2 * A2;
      const double H_prev = H;
      H += std::exp(log_rate);
      ObservationRow row;
      row.subject_id = id;
      row.t_start = m;
      row.covariates = {L1, L2};
      row.treatment = {static_cast<std::uint8_t>(A1), static_cast<std::uint8_t>(A2)};
      if (T0 < H) {
        row.t_stop = m + (T0 - H_prev) * std::exp(-log_rate);
        row.outcome_event = true;
        rows.push_back(std::move(row));
        break;
      }
      row.t_stop = m + 1;
      rows.push_back(std::move(row));
      L1p = L1;
      L2p = L2;
    }
  }
  return CountingProcessPanel::build(std::move(rows), {"L1", "L2"}, {"A1", "A2"}, static_cast<double>(c.M));
}

CountingProcessPanel make_ragged(const CountingProcessPanel& panel, double subject_fraction, double drop_prob,
                                 std::uint64_t seed) {
  if (!(subject_fraction >= 0.0 && subject_fraction <= 1.0) || !(drop_prob >= 0.0 && drop_prob <= 1.0))
    fail(ErrorKind::Config, "ragged fractions must lie in [0, 1]");
  const std::uint64_t key = hash_combine(seed, 0x7a66ed);
  std::vector<ObservationRow> out;
  out.reserve(panel.rows().size());
  for (std::size_t s = 0; s < panel.num_subjects(); ++s) {
    const auto rows = panel.subject_rows(s);
    const bool selected = CounterRng(key, s, 0).uniform() < subject_fraction;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const bool keep = r == 0 || !selected || rows[r].treatment != rows[r - 1].treatment ||
                        !(CounterRng(key, s, r + 1).uniform() < drop_prob);
      if (keep) {
        out.push_back(rows[r]);
      } else {
        auto& last = out.back();
        last.t_stop = rows[r].t_stop;
        last.outcome_event = rows[r].outcome_event;
        last.censor_event = rows[r].censor_event;
      }
    }
  }
  return CountingProcessPanel::build(std::move(out), panel.covariate_names(), panel.treatment_names(),
                                     panel.max_followup());
}

CountingProcessPanel apply_censoring(const CountingProcessPanel& panel, const CensoringMechanism& mech) {
  if (!(mech.base_rate >= 0.0)) fail(ErrorKind::Config, "censoring rate must be nonnegative");
  if (mech.treatment_coef.size() > panel.num_treatments() || mech.covariate_coef.size() > panel.num_covariates())
    fail(ErrorKind::Config, "censoring coefficients exceed the panel columns");
  std::vector<ObservationRow> out;
  out.reserve(panel.rows().size());
  for (std::size_t s = 0; s < panel.num_subjects(); ++s) {
    const auto rows = panel.subject_rows(s);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& row = rows[r];
      double eta = 0.0;
      for (std::size_t w = 0; w < mech.treatment_coef.size(); ++w) eta += mech.treatment_coef[w] * row.treatment[w];
      for (std::size_t k = 0; k < mech.covariate_coef.size(); ++k) eta += mech.covariate_coef[k] * row.covariates[k];
      const double rate = mech.base_rate * std::exp(eta);
      const double wait = rate > 0.0 ? CounterRng(mech.seed, s, r).exponential(rate) : INFINITY;
      out.push_back(row);
      if (row.t_start + wait < row.t_stop) {
        out.back().t_stop = row.t_start + wait;
        out.back().outcome_event = false;
        out.back().censor_event = true;
        break;
      }
    }
  }
  return CountingProcessPanel::build(std::move(out), panel.covariate_names(), panel.treatment_names(),
                                     panel.max_followup());
}

}  // namespace ctmsm
