#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace ctmsm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Categories map one-to-one onto CLI exit codes (2..5).
enum class ErrorKind { Config, Data, Numerical, Io };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

int exit_code(ErrorKind kind) noexcept;
std::string_view kind_name(ErrorKind kind) noexcept;

// Counter-based generator: every (seed, key1, key2) triple names an
// independent stream, so draws never depend on evaluation order.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t key1 = 0, std::uint64_t key2 = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()();

  // Uniform on (0, 1); never returns exactly 0 or 1.
  double uniform();
  double exponential(double rate);
  bool bernoulli(double p);
  // Poisson(lambda) conditioned on being >= 1, by inversion.
  int zero_truncated_poisson(double lambda);
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t state_;
};

std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b);

// Runs body(i) for i in [0, n) on up to `threads` workers. Callers write
// results into slots indexed by i so that output never depends on scheduling.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

// Thread count from CTMSM_THREADS when set, otherwise `fallback`.
int default_threads(int fallback = 1);

// Shortest decimal representation that reads back to the same double.
std::string format_double(double x);
double parse_double(std::string_view text);

double logistic(double x);

// Type-7 sample quantile of already sorted values.
double quantile_sorted(const std::vector<double>& sorted, double p);

}  // namespace ctmsm
