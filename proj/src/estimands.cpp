#include "ctmsm/estimands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace ctmsm {

using nlohmann::json;

Regimen Regimen::constant(std::string label, std::vector<std::uint8_t> status) {
  Regimen r;
  r.label = std::move(label);
  for (auto a : status) r.treatments.push_back({a, {}});
  return r;
}

std::uint8_t Regimen::status(std::size_t w, double t) const {
  const auto& p = treatments.at(w);
  const auto flips = std::lower_bound(p.switches.begin(), p.switches.end(), t) - p.switches.begin();
  return static_cast<std::uint8_t>(p.initial ^ (flips % 2));
}

std::vector<std::uint8_t> Regimen::status(double t) const {
  std::vector<std::uint8_t> out(treatments.size());
  for (std::size_t w = 0; w < treatments.size(); ++w) out[w] = status(w, t);
  return out;
}

void Regimen::validate() const {
  if (label.empty()) fail(ErrorKind::Config, "regimen needs a label");
  for (const auto& p : treatments) {
    if (p.initial > 1) fail(ErrorKind::Config, "regimen '" + label + "' has a status other than 0/1");
    for (std::size_t k = 0; k < p.switches.size(); ++k)
      if (!std::isfinite(p.switches[k]) || p.switches[k] < 0.0 || (k > 0 && p.switches[k] <= p.switches[k - 1]))
        fail(ErrorKind::Config, "regimen '" + label + "' switch times must be increasing and nonnegative");
  }
}

std::vector<Regimen> parse_regimens(const std::string& text) {
  std::vector<Regimen> out;
  try {
    const json j = json::parse(text);
    for (const auto& r : j.at("regimens")) {
      Regimen reg;
      reg.label = r.at("label").get<std::string>();
      if (r.contains("static")) {
        for (const auto& a : r.at("static")) reg.treatments.push_back({a.get<std::uint8_t>(), {}});
      } else {
        for (const auto& t : r.at("treatments"))
          reg.treatments.push_back({t.at("initial").get<std::uint8_t>(),
                                    t.value("switches", std::vector<double>{})});
      }
      reg.validate();
      out.push_back(std::move(reg));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed regimens file: ") + e.what());
  }
  return out;
}

std::vector<Regimen> read_regimens_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open regimens file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_regimens(ss.str());
}

CounterfactualCurve counterfactual_survival(const PsiEstimate& fit, const Regimen& regimen,
                                            std::optional<double> horizon) {
  regimen.validate();
  if (regimen.treatments.size() != fit.spec.W)
    fail(ErrorKind::Config, "regimen '" + regimen.label + "' covers " + std::to_string(regimen.treatments.size()) +
                                " treatments but the model has " + std::to_string(fit.spec.W));
  const auto& times = fit.baseline.jump_times();
  const auto& incs = fit.baseline.increments();
  CounterfactualCurve c;
  c.label = regimen.label;
  c.horizon = horizon ? *horizon : (times.empty() ? 0.0 : times.back());
  if (c.horizon < 0.0) fail(ErrorKind::Config, "curve horizon must be nonnegative");
  c.times.push_back(0.0);
  c.values.push_back(1.0);
  std::vector<double> z(fit.spec.num_terms());
  double H = 0.0;
  for (std::size_t j = 0; j < times.size() && times[j] <= c.horizon; ++j) {
    fit.spec.design(regimen.status(times[j]), z.data());
    double eta = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) eta += fit.psi[static_cast<Eigen::Index>(k)] * z[k];
    H += incs[j] * std::exp(eta);
    if (times[j] == 0.0) {
      c.values.back() = std::exp(-H);
    } else {
      c.times.push_back(times[j]);
      c.values.push_back(std::exp(-H));
    }
  }
  return c;
}

double survival_at(const CounterfactualCurve& curve, double t) {
  if (t < 0.0) return 1.0;
  if (t > curve.horizon) fail(ErrorKind::Config, "time " + format_double(t) + " is past the curve horizon");
  const auto k = std::upper_bound(curve.times.begin(), curve.times.end(), t) - curve.times.begin();
  return k == 0 ? 1.0 : curve.values[static_cast<std::size_t>(k - 1)];
}

double rmst(const CounterfactualCurve& curve, double tau) {
  if (!(tau > 0.0)) fail(ErrorKind::Config, "RMST horizon must be positive");
  if (tau > curve.horizon) fail(ErrorKind::Config, "RMST horizon " + format_double(tau) + " is past the curve horizon");
  double area = 0.0;
  for (std::size_t k = 0; k < curve.times.size() && curve.times[k] < tau; ++k) {
    const double end = k + 1 < curve.times.size() ? std::min(curve.times[k + 1], tau) : tau;
    area += curve.values[k] * (end - curve.times[k]);
  }
  return area;
}

void write_curve(std::ostream& out, const CounterfactualCurve& curve, const std::vector<double>& grid) {
  out << "t,S\n";
  if (grid.empty()) {
    for (std::size_t k = 0; k < curve.times.size(); ++k)
      out << format_double(curve.times[k]) << ',' << format_double(curve.values[k]) << '\n';
  } else {
    for (double t : grid) out << format_double(t) << ',' << format_double(survival_at(curve, t)) << '\n';
  }
}

void write_curve_file(const std::string& path, const CounterfactualCurve& curve, const std::vector<double>& grid) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write curve file '" + path + "'");
  write_curve(out, curve, grid);
}

void write_estimands(std::ostream& out, const std::vector<EstimandRow>& rows) {
  out << "regimen_label,S_at_tau,rmst_tau,ci_lo,ci_hi,rmst_ci_lo,rmst_ci_hi\n";
  for (const auto& r : rows) {
    out << r.label << ',' << format_double(r.survival) << ',' << format_double(r.rmst) << ',';
    if (r.survival_ci) out << format_double(r.survival_ci->lo) << ',' << format_double(r.survival_ci->hi);
    else out << ',';
    out << ',';
    if (r.rmst_ci) out << format_double(r.rmst_ci->lo) << ',' << format_double(r.rmst_ci->hi);
    else out << ',';
    out << '\n';
  }
}

}  // namespace ctmsm
