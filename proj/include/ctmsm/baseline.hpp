#pragma once

#include <string>
#include <vector>

namespace ctmsm {

enum class BaselineForm { Step, Smoothed };
enum class Kernel { Epanechnikov, Gaussian };

Kernel parse_kernel(const std::string& name);
std::string kernel_name(Kernel k);
double kernel_value(Kernel k, double x);
// Half-width of the evaluation window in units of the bandwidth.
double kernel_reach(Kernel k);

// Cumulative baseline intensity P0. The step form keeps the Nelson-Aalen
// jumps; the smoothed form adds the density rho0 = b^-1 sum K((t-s)/b) dP0
// and a tabulated integral of it.
class BaselineIntensity {
 public:
  BaselineIntensity() = default;
  static BaselineIntensity step(std::vector<double> jump_times, std::vector<double> increments);

  BaselineForm form() const { return form_; }
  const std::vector<double>& jump_times() const { return times_; }
  const std::vector<double>& increments() const { return increments_; }
  Kernel kernel() const { return kernel_; }
  double bandwidth() const { return bandwidth_; }
  double total_mass() const;

  // Mass of dP0 at exactly t (step form; 0 for smoothed).
  double jump_at(double t) const;
  // P0(t). Smoothed values are measured from the left edge of the support.
  double cumulative(double t) const;
  // dP0 mass over the span from a to b with the given end conventions. The
  // smoothed form has no atoms, so all conventions agree.
  double mass(double a, double b, bool closed_left, bool closed_right) const;
  double density(double t) const;

  double support_begin() const;
  double support_end() const;

  const std::vector<double>& grid_values() const { return grid_cum_; }
  double grid_origin() const { return grid_origin_; }
  double grid_step() const { return grid_step_; }

  // Rebuilds a smoothed baseline from serialized parts.
  static BaselineIntensity smoothed_from(std::vector<double> jump_times, std::vector<double> increments,
                                         Kernel kernel, double bandwidth);

 private:
  friend BaselineIntensity kernel_smooth(const BaselineIntensity&, Kernel, double);
  void tabulate();

  BaselineForm form_ = BaselineForm::Step;
  std::vector<double> times_;
  std::vector<double> increments_;
  std::vector<double> prefix_;  // prefix_[j] = sum of increments before j
  Kernel kernel_ = Kernel::Gaussian;
  double bandwidth_ = 0.0;
  double grid_origin_ = 0.0;
  double grid_step_ = 0.0;
  std::vector<double> grid_cum_;
};

BaselineIntensity kernel_smooth(const BaselineIntensity& step, Kernel kernel, double bandwidth);

struct BandwidthChoice {
  double bandwidth = 0.0;
  std::vector<double> scores;  // CV score per grid value; empty on fallback
  std::string warning;
};

// K-fold cross-validation over the jumps of a step baseline.
BandwidthChoice select_bandwidth(const BaselineIntensity& step, const std::vector<double>& grid,
                                 Kernel kernel, int folds = 5);

// Geometric grid spanning the jump range, used when none is configured.
std::vector<double> default_bandwidth_grid(const BaselineIntensity& step, int points = 12);

}  // namespace ctmsm
