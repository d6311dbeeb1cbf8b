#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ctmsm/simulation.hpp"
#include "ctmsm/weights.hpp"

namespace ctmsm {

struct BenchmarkConfig {
  SimConfig sim;
  bool ragged = true;
  std::vector<Estimator> estimators = {Estimator::I, Estimator::II, Estimator::III, Estimator::IV};
  std::vector<double> dt;  // discrete-time comparator grids; empty runs none
  DtModel dt_model = DtModel::Forest;
  IntensitySpec intensity;
  bool truncate = false;
  std::size_t reps = 100;
  std::uint64_t seed = 1;
  int threads = 1;
  double max_failure_rate = 0.05;
};

struct ReplicateEstimate {
  std::string method;  // JMSSM-CT or JMSM-DT(dt)
  std::string estimator;
  std::vector<double> psi;
  std::vector<std::uint8_t> covered;
  bool ok = false;
  std::string error;
};

struct MetricRow {
  std::string method;
  std::string estimator;
  std::string param;
  double mab = 0.0;
  double rmse = 0.0;
  double cp = 0.0;
  std::size_t reps = 0;
  std::size_t n = 0;
};

struct BenchmarkResult {
  std::vector<MetricRow> metrics;
  std::vector<std::vector<ReplicateEstimate>> replicates;  // [rep][method]
  std::vector<std::string> failures;
};

// Methods evaluated per replicate, in output order.
std::vector<std::pair<std::string, std::string>> benchmark_methods(const BenchmarkConfig& config);

// One replicate: simulate (seeded by hash(seed, rep)), optionally make
// ragged, then weight and fit with every method.
std::vector<ReplicateEstimate> run_replicate(const BenchmarkConfig& config, std::size_t rep);

BenchmarkResult run_benchmark(const BenchmarkConfig& config);

void write_metrics(std::ostream& out, const std::vector<MetricRow>& rows, const std::string& data_label = {});

}  // namespace ctmsm
