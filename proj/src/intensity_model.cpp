#include "ctmsm/intensity_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ctmsm {

using nlohmann::json;

double IntensityModel::ratio(const double* x) const {
  if (backend_ == IntensityBackend::Forest) return forest_.predict(x);
  double eta = 0.0;
  for (Eigen::Index j = 0; j < theta_.size(); ++j) eta += theta_[j] * x[j];
  return std::exp(eta);
}

double IntensityModel::cumulative_hazard(const double* x, double a, double b, bool closed_left,
                                         bool closed_right) const {
  const double m = baseline_.mass(a, b, closed_left, closed_right);
  return m > 0.0 ? m * ratio(x) : 0.0;
}

double IntensityModel::cumulative_hazard_rr(double rr, double a, double b, bool closed_left,
                                            bool closed_right) const {
  const double m = baseline_.mass(a, b, closed_left, closed_right);
  return m > 0.0 ? m * rr : 0.0;
}

double IntensityModel::point_intensity_rr(double rr, double t) const {
  const double base = baseline_.form() == BaselineForm::Step ? baseline_.jump_at(t) : baseline_.density(t);
  return base > 0.0 ? base * rr : 0.0;
}

double IntensityModel::point_intensity(const double* x, double t) const {
  const double base = baseline_.form() == BaselineForm::Step ? baseline_.jump_at(t) : baseline_.density(t);
  return base > 0.0 ? base * ratio(x) : 0.0;
}

IntensityModel make_cox_model(std::vector<std::string> feature_names, Vector theta, BaselineIntensity baseline) {
  if (static_cast<std::size_t>(theta.size()) != feature_names.size())
    fail(ErrorKind::Config, "coefficient count does not match feature names");
  IntensityModel m;
  m.backend_ = IntensityBackend::Cox;
  m.features_ = std::move(feature_names);
  m.theta_ = std::move(theta);
  m.baseline_ = std::move(baseline);
  return m;
}

namespace {

BaselineIntensity smooth(const BaselineIntensity& step, const IntensitySpec& spec, std::string* warning) {
  double b = 0.0;
  if (spec.bandwidth) {
    b = *spec.bandwidth;
  } else {
    const auto grid = spec.bandwidth_grid.empty() ? default_bandwidth_grid(step) : spec.bandwidth_grid;
    const auto choice = select_bandwidth(step, grid, spec.kernel, spec.cv_folds);
    b = choice.bandwidth;
    if (warning) *warning = choice.warning;
  }
  return kernel_smooth(step, spec.kernel, b);
}

}  // namespace

IntensityModel fit_intensity_model(const EventRecords& records, const IntensitySpec& spec) {
  IntensityModel m;
  m.features_ = records.feature_names;
  const auto p = static_cast<Eigen::Index>(records.num_features());
  m.theta_ = Vector::Zero(p);
  if (records.num_events() == 0) {
    m.baseline_ = BaselineIntensity::step({}, {});
    return m;
  }
  Vector rr;
  if (spec.backend == IntensityBackend::Forest && p > 0) {
    m.backend_ = IntensityBackend::Forest;
    const auto common = nelson_aalen(records, Vector::Ones(static_cast<Eigen::Index>(records.size())));
    std::vector<double> exposure(records.size());
    for (std::size_t i = 0; i < records.size(); ++i)
      exposure[i] = common.mass(records.entry[i], records.exit[i], records.closed_left[i], records.closed_right[i]);
    // Rows with no exposure and no event carry no deviance; they are scored
    // but not grown on, so they do not count towards node sizes.
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < records.size(); ++i)
      if (exposure[i] > 0.0 || records.event[i]) keep.push_back(i);
    RowMatrix X(static_cast<Eigen::Index>(keep.size()), p);
    std::vector<std::uint8_t> ev(keep.size());
    std::vector<double> ex(keep.size());
    std::vector<long> pos(records.size(), -1);
    for (std::size_t k = 0; k < keep.size(); ++k) {
      X.row(static_cast<Eigen::Index>(k)) = records.X.row(static_cast<Eigen::Index>(keep[k]));
      ev[k] = records.event[keep[k]];
      ex[k] = exposure[keep[k]];
      pos[keep[k]] = static_cast<long>(k);
    }
    ForestParams params = spec.forest;
    if (params.min_node == 0)
      params.min_node = std::max(15, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(records.size())))));
    m.forest_ = fit_ltrc_forest(X, ev, ex, params);
    rr.resize(static_cast<Eigen::Index>(records.size()));
    for (Eigen::Index i = 0; i < rr.size(); ++i)
      rr[i] = spec.forest.out_of_bag && pos[i] >= 0 ? m.forest_.oob_predict(static_cast<std::size_t>(pos[i]))
                                                     : m.forest_.predict(records.X.row(i).data());
  } else if (p > 0) {
    const auto fit = fit_cox(records, spec.cox);
    m.theta_ = fit.theta;
    rr = CoxProblem(records).relative_risk(fit.theta);
  } else {
    rr = Vector::Ones(static_cast<Eigen::Index>(records.size()));
  }
  m.training_ratio_.assign(rr.data(), rr.data() + rr.size());
  auto step = nelson_aalen(records, rr);
  if (spec.baseline == BaselineForm::Smoothed) {
    m.baseline_ = smooth(step, spec, &m.warning_);
  } else {
    m.baseline_ = std::move(step);
  }
  return m;
}

std::string IntensityModel::to_json() const {
  json j;
  j["format"] = "ctmsm-intensity-model";
  j["version"] = 1;
  j["backend"] = backend_ == IntensityBackend::Cox ? "cox" : "forest";
  j["features"] = features_;
  j["theta"] = std::vector<double>(theta_.data(), theta_.data() + theta_.size());
  if (backend_ == IntensityBackend::Forest) {
    json trees = json::array();
    for (const auto& t : forest_.trees()) {
      json nodes = json::array();
      for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value, n.reduction});
      trees.push_back(std::move(nodes));
    }
    j["forest"] = {{"rule", forest_.rule() == SplitRule::Poisson ? "poisson" : "bernoulli"},
                   {"num_features", forest_.num_features()},
                   {"scale", forest_.scale()},
                   {"trees", std::move(trees)}};
  }
  j["baseline"] = {{"form", baseline_.form() == BaselineForm::Step ? "step" : "smoothed"},
                   {"jump_times", baseline_.jump_times()},
                   {"increments", baseline_.increments()}};
  if (baseline_.form() == BaselineForm::Smoothed) {
    j["baseline"]["kernel"] = kernel_name(baseline_.kernel());
    j["baseline"]["bandwidth"] = baseline_.bandwidth();
  }
  return j.dump(1);
}

IntensityModel IntensityModel::from_json(const std::string& text) {
  IntensityModel m;
  try {
    const json j = json::parse(text);
    if (j.at("format") != "ctmsm-intensity-model") fail(ErrorKind::Data, "not an intensity model file");
    if (j.at("version").get<int>() != 1) fail(ErrorKind::Data, "unsupported intensity model version");
    m.features_ = j.at("features").get<std::vector<std::string>>();
    const auto theta = j.at("theta").get<std::vector<double>>();
    m.theta_ = Eigen::Map<const Vector>(theta.data(), static_cast<Eigen::Index>(theta.size()));
    m.backend_ = j.at("backend") == "forest" ? IntensityBackend::Forest : IntensityBackend::Cox;
    if (m.backend_ == IntensityBackend::Forest) {
      const auto& f = j.at("forest");
      std::vector<RelativeRiskTree> trees;
      for (const auto& t : f.at("trees")) {
        RelativeRiskTree tree;
        for (const auto& n : t)
          tree.nodes.push_back({n[0].get<int>(), n[1].get<double>(), n[2].get<int>(), n[3].get<int>(),
                                n[4].get<double>(), n[5].get<double>()});
        trees.push_back(std::move(tree));
      }
      m.forest_ = LtrcForest(std::move(trees), f.at("rule") == "poisson" ? SplitRule::Poisson : SplitRule::Bernoulli,
                             f.at("num_features").get<std::size_t>(), f.at("scale").get<double>());
    }
    const auto& b = j.at("baseline");
    auto times = b.at("jump_times").get<std::vector<double>>();
    auto incs = b.at("increments").get<std::vector<double>>();
    if (b.at("form") == "smoothed")
      m.baseline_ = BaselineIntensity::smoothed_from(std::move(times), std::move(incs),
                                                     parse_kernel(b.at("kernel").get<std::string>()),
                                                     b.at("bandwidth").get<double>());
    else
      m.baseline_ = BaselineIntensity::step(std::move(times), std::move(incs));
  } catch (const json::exception& e) {
    fail(ErrorKind::Data, std::string("malformed intensity model: ") + e.what());
  }
  return m;
}

void IntensityModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write model file '" + path + "'");
  out << to_json() << '\n';
}

IntensityModel IntensityModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

SurvivalDensity conditional_survival_density(const IntensityModel& model, const std::vector<PathPiece>& path,
                                             double from, double to, const std::vector<double>* x_at_to,
                                             double ratio_at_to) {
  if (to < from) fail(ErrorKind::Config, "survival interval ends before it starts");
  SurvivalDensity out;
  double H = 0.0;
  if (from < to) {
    std::vector<const PathPiece*> pieces;
    pieces.reserve(path.size());
    for (const auto& piece : path)
      if (piece.stop > from && piece.start < to) pieces.push_back(&piece);
    std::stable_sort(pieces.begin(), pieces.end(),
                     [](const PathPiece* a, const PathPiece* b) { return a->start < b->start; });
    double covered = from;
    for (const auto* piece : pieces) {
      if (piece->start > covered)
        fail(ErrorKind::Config, "covariate path undefined on (" + format_double(covered) + ", " +
                                    format_double(piece->start) + ")");
      const double a = std::max(piece->start, from), b = std::min(piece->stop, to);
      const bool cl = a == piece->start ? piece->closed_left : true;
      const bool cr = b == piece->stop && b < to ? piece->closed_right : false;
      H += piece->ratio >= 0.0 ? model.cumulative_hazard_rr(piece->ratio, a, b, cl, cr)
                               : model.cumulative_hazard(piece->x.data(), a, b, cl, cr);
      covered = std::max(covered, b);
    }
    if (covered < to)
      fail(ErrorKind::Config, "covariate path undefined on (" + format_double(covered) + ", " + format_double(to) + ")");
  }
  out.S = std::exp(-H);
  if (ratio_at_to >= 0.0)
    out.f = model.point_intensity_rr(ratio_at_to, to) * out.S;
  else if (x_at_to)
    out.f = model.point_intensity(x_at_to->data(), to) * out.S;
  return out;
}

}  // namespace ctmsm
