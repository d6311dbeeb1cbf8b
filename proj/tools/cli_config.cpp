#include "cli_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ctmsm::cli {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) fail(ErrorKind::Config, "config section '" + where + "' must be an object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) fail(ErrorKind::Config, "unknown config field '" + where + key + "'");
}

template <class T>
void read(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

std::string estimator_list(const std::vector<Estimator>& es) {
  std::string s;
  for (auto e : es) s += (s.empty() ? "" : ",") + estimator_name(e);
  return s;
}

}  // namespace

std::vector<Estimator> parse_estimator_list(const std::string& text) {
  std::vector<Estimator> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(parse_estimator(tok));
  if (out.empty()) fail(ErrorKind::Config, "estimator list is empty");
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) {
      try {
        out.push_back(parse_double(tok));
      } catch (const Error&) {
        fail(ErrorKind::Config, "bad number '" + tok + "'");
      }
    }
  return out;
}

std::string RunConfig::to_json() const {
  const auto& f = intensity.forest;
  json j;
  j["simulation"] = json::parse(simulation.to_json());
  j["ragged"] = ragged;
  j["censoring_rate"] = censoring_rate;
  j["weights"] = {{"estimator", estimator_name(estimator)},
                  {"ordering", ordering},
                  {"censoring", censoring},
                  {"truncate", truncate},
                  {"survival_difference_terminal", survival_difference_terminal},
                  {"kernel", kernel_name(intensity.kernel)},
                  {"bandwidth", intensity.bandwidth ? json(*intensity.bandwidth) : json(nullptr)},
                  {"bandwidth_grid", intensity.bandwidth_grid},
                  {"cv_folds", intensity.cv_folds},
                  {"forest",
                   {{"n_trees", f.n_trees},
                    {"mtry", f.mtry},
                    {"min_node", f.min_node},
                    {"subsample", f.subsample},
                    {"max_bins", f.max_bins},
                    {"out_of_bag", f.out_of_bag},
                    {"seed", f.seed}}}};
  j["fit"] = {{"interactions", interactions}, {"bootstrap", bootstrap}, {"tau", tau}};
  j["benchmark"] = {{"reps", reps},
                    {"estimators", estimator_list(estimators)},
                    {"dt", dt},
                    {"dt_model", dt_model == DtModel::Forest ? "forest" : "logistic"}};
  j["seed"] = seed;
  j["threads"] = threads;
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  RunConfig c;
  try {
    const json j = json::parse(text);
    check_keys(j, {"simulation", "ragged", "censoring_rate", "weights", "fit", "benchmark", "seed", "threads"}, "");
    if (j.contains("simulation")) c.simulation = SimConfig::from_json(j.at("simulation").dump());
    read(j, "ragged", c.ragged);
    read(j, "censoring_rate", c.censoring_rate);
    read(j, "seed", c.seed);
    read(j, "threads", c.threads);
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      check_keys(w, {"estimator", "ordering", "censoring", "truncate", "survival_difference_terminal", "kernel",
                     "bandwidth", "bandwidth_grid", "cv_folds", "forest"},
                 "weights.");
      if (w.contains("estimator")) c.estimator = parse_estimator(w.at("estimator").get<std::string>());
      read(w, "ordering", c.ordering);
      read(w, "censoring", c.censoring);
      read(w, "truncate", c.truncate);
      read(w, "survival_difference_terminal", c.survival_difference_terminal);
      if (w.contains("kernel")) c.intensity.kernel = parse_kernel(w.at("kernel").get<std::string>());
      if (w.contains("bandwidth") && !w.at("bandwidth").is_null()) c.intensity.bandwidth = w.at("bandwidth").get<double>();
      read(w, "bandwidth_grid", c.intensity.bandwidth_grid);
      read(w, "cv_folds", c.intensity.cv_folds);
      if (w.contains("forest")) {
        const auto& f = w.at("forest");
        check_keys(f, {"n_trees", "mtry", "min_node", "subsample", "max_bins", "out_of_bag", "seed"}, "weights.forest.");
        auto& p = c.intensity.forest;
        read(f, "n_trees", p.n_trees);
        read(f, "mtry", p.mtry);
        read(f, "min_node", p.min_node);
        read(f, "subsample", p.subsample);
        read(f, "max_bins", p.max_bins);
        read(f, "out_of_bag", p.out_of_bag);
        read(f, "seed", p.seed);
      }
    }
    if (j.contains("fit")) {
      const auto& f = j.at("fit");
      check_keys(f, {"interactions", "bootstrap", "tau"}, "fit.");
      read(f, "interactions", c.interactions);
      read(f, "bootstrap", c.bootstrap);
      read(f, "tau", c.tau);
    }
    if (j.contains("benchmark")) {
      const auto& b = j.at("benchmark");
      check_keys(b, {"reps", "estimators", "dt", "dt_model"}, "benchmark.");
      read(b, "reps", c.reps);
      if (b.contains("estimators")) c.estimators = parse_estimator_list(b.at("estimators").get<std::string>());
      read(b, "dt", c.dt);
      if (b.contains("dt_model")) {
        const auto m = b.at("dt_model").get<std::string>();
        if (m != "forest" && m != "logistic") fail(ErrorKind::Config, "dt_model must be forest or logistic");
        c.dt_model = m == "forest" ? DtModel::Forest : DtModel::Logistic;
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed config: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

WeightConfig RunConfig::weight_config(std::size_t W) const {
  WeightConfig w;
  w.estimator = estimator;
  if (!ordering.empty()) w.ordering = OrderingSpec::parse(ordering, W);
  w.intensity = intensity;
  w.censoring = censoring;
  w.truncate = truncate;
  w.options.survival_difference_terminal = survival_difference_terminal;
  w.threads = threads;
  return w;
}

BenchmarkConfig RunConfig::benchmark_config() const {
  BenchmarkConfig b;
  b.sim = simulation;
  b.ragged = ragged;
  b.estimators = estimators;
  b.dt = dt;
  b.dt_model = dt_model;
  b.intensity = intensity;
  b.truncate = truncate;
  b.reps = reps;
  b.seed = seed;
  b.threads = threads;
  return b;
}

}  // namespace ctmsm::cli
