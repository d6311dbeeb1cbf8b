#include "ctmsm/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "ctmsm/common.hpp"

namespace ctmsm {

Kernel parse_kernel(const std::string& name) {
  if (name == "gaussian") return Kernel::Gaussian;
  if (name == "epanechnikov") return Kernel::Epanechnikov;
  fail(ErrorKind::Config, "unknown kernel '" + name + "' (expected gaussian or epanechnikov)");
}

std::string kernel_name(Kernel k) { return k == Kernel::Gaussian ? "gaussian" : "epanechnikov"; }

double kernel_value(Kernel k, double x) {
  if (k == Kernel::Epanechnikov) return std::abs(x) <= 1.0 ? 0.75 * (1.0 - x * x) : 0.0;
  if (std::abs(x) > 4.0) return 0.0;
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double kernel_reach(Kernel k) { return k == Kernel::Epanechnikov ? 1.0 : 4.0; }

BaselineIntensity BaselineIntensity::step(std::vector<double> jump_times, std::vector<double> increments) {
  if (jump_times.size() != increments.size()) fail(ErrorKind::Config, "jump times and increments differ in length");
  for (std::size_t j = 0; j < jump_times.size(); ++j) {
    if (!std::isfinite(jump_times[j]) || !std::isfinite(increments[j]) || increments[j] < 0.0)
      fail(ErrorKind::Numerical, "invalid baseline increment at t=" + format_double(jump_times[j]));
    if (j > 0 && !(jump_times[j - 1] < jump_times[j])) fail(ErrorKind::Config, "baseline jump times must increase");
  }
  BaselineIntensity b;
  b.times_ = std::move(jump_times);
  b.increments_ = std::move(increments);
  b.prefix_.assign(b.times_.size() + 1, 0.0);
  for (std::size_t j = 0; j < b.times_.size(); ++j) b.prefix_[j + 1] = b.prefix_[j] + b.increments_[j];
  return b;
}

double BaselineIntensity::total_mass() const { return prefix_.empty() ? 0.0 : prefix_.back(); }

double BaselineIntensity::jump_at(double t) const {
  if (form_ != BaselineForm::Step) return 0.0;
  const auto it = std::lower_bound(times_.begin(), times_.end(), t);
  return it != times_.end() && *it == t ? increments_[static_cast<std::size_t>(it - times_.begin())] : 0.0;
}

double BaselineIntensity::cumulative(double t) const {
  if (form_ == BaselineForm::Step) {
    const auto k = std::upper_bound(times_.begin(), times_.end(), t) - times_.begin();
    return prefix_[static_cast<std::size_t>(k)];
  }
  if (grid_cum_.empty() || t <= grid_origin_) return 0.0;
  const double pos = (t - grid_origin_) / grid_step_;
  const auto k = static_cast<std::size_t>(pos);
  if (k + 1 >= grid_cum_.size()) return grid_cum_.back();
  const double frac = pos - static_cast<double>(k);
  return grid_cum_[k] + frac * (grid_cum_[k + 1] - grid_cum_[k]);
}

double BaselineIntensity::mass(double a, double b, bool closed_left, bool closed_right) const {
  if (form_ == BaselineForm::Smoothed) return a < b ? std::max(0.0, cumulative(b) - cumulative(a)) : 0.0;
  if (b < a) return 0.0;
  const auto lo = closed_left ? std::lower_bound(times_.begin(), times_.end(), a)
                              : std::upper_bound(times_.begin(), times_.end(), a);
  const auto hi = closed_right ? std::upper_bound(times_.begin(), times_.end(), b)
                               : std::lower_bound(times_.begin(), times_.end(), b);
  if (hi <= lo) return 0.0;
  return prefix_[static_cast<std::size_t>(hi - times_.begin())] - prefix_[static_cast<std::size_t>(lo - times_.begin())];
}

double BaselineIntensity::density(double t) const {
  if (form_ != BaselineForm::Smoothed) return 0.0;
  const double reach = kernel_reach(kernel_) * bandwidth_;
  auto it = std::lower_bound(times_.begin(), times_.end(), t - reach);
  double sum = 0.0;
  for (; it != times_.end() && *it <= t + reach; ++it) {
    const auto j = static_cast<std::size_t>(it - times_.begin());
    sum += kernel_value(kernel_, (t - *it) / bandwidth_) * increments_[j];
  }
  return sum / bandwidth_;
}

double BaselineIntensity::support_begin() const {
  if (times_.empty()) return 0.0;
  return form_ == BaselineForm::Smoothed ? times_.front() - kernel_reach(kernel_) * bandwidth_ : times_.front();
}

double BaselineIntensity::support_end() const {
  if (times_.empty()) return 0.0;
  return form_ == BaselineForm::Smoothed ? times_.back() + kernel_reach(kernel_) * bandwidth_ : times_.back();
}

void BaselineIntensity::tabulate() {
  grid_cum_.clear();
  if (times_.empty()) return;
  grid_origin_ = support_begin();
  const double span = support_end() - grid_origin_;
  const double max_step = bandwidth_ / 20.0;
  const auto steps = static_cast<std::size_t>(std::ceil(span / max_step));
  if (steps > 50'000'000) fail(ErrorKind::Config, "bandwidth too small for the follow-up span");
  grid_step_ = span / static_cast<double>(steps);
  grid_cum_.resize(steps + 1);
  grid_cum_[0] = 0.0;
  double prev = density(grid_origin_);
  for (std::size_t k = 1; k <= steps; ++k) {
    const double cur = density(grid_origin_ + static_cast<double>(k) * grid_step_);
    grid_cum_[k] = grid_cum_[k - 1] + 0.5 * (prev + cur) * grid_step_;
    prev = cur;
  }
}

BaselineIntensity kernel_smooth(const BaselineIntensity& step, Kernel kernel, double bandwidth) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) fail(ErrorKind::Config, "bandwidth must be positive");
  if (step.form() != BaselineForm::Step) fail(ErrorKind::Config, "kernel smoothing needs a step baseline");
  BaselineIntensity out = step;
  out.form_ = BaselineForm::Smoothed;
  out.kernel_ = kernel;
  out.bandwidth_ = bandwidth;
  out.tabulate();
  return out;
}

BaselineIntensity BaselineIntensity::smoothed_from(std::vector<double> jump_times, std::vector<double> increments,
                                                   Kernel kernel, double bandwidth) {
  return kernel_smooth(step(std::move(jump_times), std::move(increments)), kernel, bandwidth);
}

namespace {

double integrated_square(const BaselineIntensity& smooth) {
  if (smooth.jump_times().empty()) return 0.0;
  const double a = smooth.support_begin(), b = smooth.support_end();
  const auto steps = static_cast<std::size_t>(std::ceil((b - a) / (smooth.bandwidth() / 20.0)));
  const double h = (b - a) / static_cast<double>(steps);
  double sum = 0.0;
  for (std::size_t k = 0; k <= steps; ++k) {
    const double r = smooth.density(a + static_cast<double>(k) * h);
    sum += (k == 0 || k == steps ? 0.5 : 1.0) * r * r;
  }
  return sum * h;
}

}  // namespace

BandwidthChoice select_bandwidth(const BaselineIntensity& step, const std::vector<double>& grid, Kernel kernel,
                                 int folds) {
  if (grid.empty()) fail(ErrorKind::Config, "bandwidth grid is empty");
  for (double b : grid)
    if (!(b > 0.0)) fail(ErrorKind::Config, "bandwidth grid values must be positive");
  if (folds < 2) fail(ErrorKind::Config, "cross-validation needs at least 2 folds");
  BandwidthChoice choice;
  if (grid.size() == 1) {
    choice.bandwidth = grid.front();
    return choice;
  }
  const auto& times = step.jump_times();
  const auto& incs = step.increments();
  const auto K = static_cast<std::size_t>(folds);
  if (times.size() < K) {
    auto sorted = grid;
    std::sort(sorted.begin(), sorted.end());
    choice.bandwidth = sorted[(sorted.size() - 1) / 2];
    choice.warning = "only " + std::to_string(times.size()) + " baseline jumps for " + std::to_string(K) +
                     "-fold cross-validation; using the grid median bandwidth " + format_double(choice.bandwidth);
    return choice;
  }
  const double scale = static_cast<double>(K) / static_cast<double>(K - 1);
  // Folds from a fixed shuffle: interleaving sorted jumps would always keep
  // a held-out jump's neighbours in training and favour tiny bandwidths.
  std::vector<std::size_t> fold(times.size());
  {
    std::vector<std::size_t> perm(times.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    CounterRng rng(0xb4d5e1, times.size());
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    for (std::size_t i = 0; i < perm.size(); ++i) fold[perm[i]] = i % K;
  }
  std::vector<BaselineIntensity> training(K);
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<double> t, d;
    for (std::size_t j = 0; j < times.size(); ++j)
      if (fold[j] != k) {
        t.push_back(times[j]);
        d.push_back(incs[j] * scale);
      }
    training[k] = BaselineIntensity::step(std::move(t), std::move(d));
  }
  double best = std::numeric_limits<double>::infinity();
  for (double b : grid) {
    double score = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const auto smooth = kernel_smooth(training[k], kernel, b);
      double held = 0.0;
      for (std::size_t j = 0; j < times.size(); ++j)
        if (fold[j] == k) held += smooth.density(times[j]) * incs[j];
      score += integrated_square(smooth) - 2.0 * static_cast<double>(K) * held;
    }
    score /= static_cast<double>(K);
    choice.scores.push_back(score);
    if (score < best) {
      best = score;
      choice.bandwidth = b;
    }
  }
  return choice;
}

std::vector<double> default_bandwidth_grid(const BaselineIntensity& step, int points) {
  const auto& t = step.jump_times();
  double span = t.size() >= 2 ? t.back() - t.front() : 1.0;
  if (!(span > 0.0)) span = 1.0;
  const double lo = span / 200.0, hi = span / 4.0;
  std::vector<double> grid;
  for (int k = 0; k < points; ++k)
    grid.push_back(lo * std::pow(hi / lo, static_cast<double>(k) / static_cast<double>(points - 1)));
  return grid;
}

}  // namespace ctmsm
