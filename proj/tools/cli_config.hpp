#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ctmsm/benchmark.hpp"
#include "ctmsm/simulation.hpp"
#include "ctmsm/weights.hpp"

namespace ctmsm::cli {

// Every setting the subcommands read. A config file may set any subset;
// command-line flags are applied afterwards and win.
struct RunConfig {
  SimConfig simulation;
  bool ragged = false;
  double censoring_rate = 0.0;  // synthetic censoring for simulate; 0 disables

  Estimator estimator = Estimator::IV;
  std::string ordering;  // "2,1"; empty means file order
  bool censoring = true;
  bool truncate = false;
  bool survival_difference_terminal = false;
  IntensitySpec intensity;

  std::string interactions;  // "1:2"
  std::size_t bootstrap = 0;
  std::uint64_t seed = 1;
  double tau = 14.0;

  std::size_t reps = 100;
  std::vector<Estimator> estimators = {Estimator::I, Estimator::II, Estimator::III, Estimator::IV};
  std::vector<double> dt = {2.0, 1.0, 0.5};
  DtModel dt_model = DtModel::Forest;

  int threads = 1;

  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::string& path);

  WeightConfig weight_config(std::size_t W) const;
  BenchmarkConfig benchmark_config() const;
};

std::vector<Estimator> parse_estimator_list(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);

}  // namespace ctmsm::cli
