#include <doctest.h>

#include <cmath>

#include "ctmsm/simulation.hpp"
#include "ctmsm/weights.hpp"
#include "helpers.hpp"

using namespace ctmsm;

namespace {

IntensityModel flat(std::vector<double> times, std::vector<double> inc) {
  return make_cox_model({}, Vector(0), BaselineIntensity::step(std::move(times), std::move(inc)));
}

EligibilitySchedule schedule(std::vector<EligibilityInterval> ivs) {
  EligibilitySchedule s;
  s.subject_id = "a";
  s.intervals = std::move(ivs);
  for (const auto& iv : s.intervals)
    if (iv.initiated) s.initiation_times.push_back(iv.U);
  return s;
}

// Off-treatment path with no features, at risk on [0, t).
TreatmentPath empty_path(double t, std::size_t initiations = 0) {
  TreatmentPath p;
  p.numerator = p.denominator = {{0.0, t, true, false, {}}};
  p.numerator_at_initiation.assign(initiations, {});
  p.denominator_at_initiation.assign(initiations, {});
  return p;
}

// Independent treatments: only intercepts drive initiation.
SimConfig null_sim(std::uint64_t seed, std::size_t n = 1000) {
  SimConfig c;
  c.n = n;
  c.seed = seed;
  c.gamma.assign(12, 0.0);
  c.eta.assign(12, 0.0);
  c.gamma[0] = -1.25;
  c.eta[0] = -0.85;
  return c;
}

double mean(const Vector& v) { return v.mean(); }

double simpson(const BaselineIntensity& b, double lo, double hi) {
  return (hi - lo) / 6.0 * (b.density(lo) + 4.0 * b.density(0.5 * (lo + hi)) + b.density(hi));
}

}  // namespace

TEST_CASE("treatment weight: survival ratio without initiation") {
  // cumulative intensities 0.5 and 1.0 over [0, 5)
  const auto num = flat({2.0}, {0.5});
  const auto den = flat({2.0}, {1.0});
  const auto f = treatment_weight(schedule({{0.0, 5.0, false}}), num, den, empty_path(5.0));
  CHECK(f.value == doctest::Approx(std::exp(0.5)).epsilon(1e-14));
}

TEST_CASE("treatment weight: density ratio at an initiation") {
  const auto num = flat({1.0, 3.0}, {0.1, 0.3});
  const auto den = flat({1.0, 3.0}, {0.2, 0.6});
  const auto f = treatment_weight(schedule({{0.0, 3.0, true}}), num, den, empty_path(3.0, 1));
  CHECK(f.value == doctest::Approx(0.5 * std::exp(0.1)).epsilon(1e-14));
}

TEST_CASE("treatment weight: identical models give exactly one") {
  const auto m = flat({0.5, 1.0, 3.0, 4.0}, {0.1, 0.2, 0.3, 0.05});
  const auto s = schedule({{0.0, 1.0, true}, {2.0, 3.0, true}, {3.5, 6.0, false}});
  TreatmentPath p;
  p.numerator = p.denominator = {{0.0, 1.0, true, false, {}}, {2.0, 3.0, true, false, {}}, {3.5, 6.0, false, false, {}}};
  p.numerator_at_initiation = p.denominator_at_initiation = {{}, {}};
  CHECK(treatment_weight(s, m, m, p).value == 1.0);
}

TEST_CASE("treatment weight: restart at each eligibility start") {
  // Second interval starts at 2, so the jump at 1 does not enter its survival.
  const auto num = flat({1.0, 2.5, 4.0}, {0.4, 0.2, 0.1});
  const auto den = flat({1.0, 2.5, 4.0}, {0.8, 0.1, 0.3});
  const auto s = schedule({{0.0, 1.0, true}, {2.0, 5.0, false}});
  TreatmentPath p;
  p.numerator = p.denominator = {{0.0, 1.0, true, false, {}}, {2.0, 5.0, false, false, {}}};
  p.numerator_at_initiation = p.denominator_at_initiation = {{}};
  const double first = 0.4 / 0.8;
  const double second = std::exp(-(0.2 + 0.1)) / std::exp(-(0.1 + 0.3));
  CHECK(treatment_weight(s, num, den, p).value == doctest::Approx(first * second).epsilon(1e-14));
}

TEST_CASE("treatment weight: positivity violation names subject and time") {
  const auto num = flat({2.0}, {0.5});
  const auto den = flat({2.0}, {800.0});
  try {
    treatment_weight(schedule({{0.0, 5.0, false}}), num, den, empty_path(5.0));
    FAIL("expected a positivity error");
  } catch (const Error& e) {
    const std::string what = e.what();
    CHECK(what.find("positivity violation") != std::string::npos);
    CHECK(what.find("'a'") != std::string::npos);
    CHECK(e.kind() == ErrorKind::Numerical);
  }
}

TEST_CASE("censoring weight: closed form and empty baselines") {
  FollowupAnchor g{"a", 10.0, AnchorKind::Censored};
  const std::vector<PathPiece> path = {{0.0, 10.0, false, true, {}}};
  const auto f = censoring_weight(g, flat({4.0}, {0.5}), flat({4.0}, {1.0}), path, path);
  CHECK(f.value == doctest::Approx(std::exp(0.5)).epsilon(1e-14));
  const auto none = flat({}, {});
  CHECK(censoring_weight(g, none, none, path, path).value == 1.0);
}

TEST_CASE("discrete weights: hand product") {
  CHECK(discrete_weight_product({{true, 0.5, 0.25}, {false, 0.5, 0.5}}) == doctest::Approx(2.0));
  CHECK(discrete_weight_product({{false, 0.3, 0.3}, {true, 0.2, 0.2}}) == 1.0);
}

TEST_CASE("discrete product converges to the continuous weight") {
  // Smooth intensities from a dense step baseline smoothed with a wide kernel.
  std::vector<double> t, dn, dd;
  for (int j = 1; j <= 400; ++j) {
    const double s = 0.02 * j;
    t.push_back(s);
    dn.push_back(0.02 * 0.15 * (1.0 + 0.5 * std::sin(s)));
    dd.push_back(0.02 * 0.3 * (1.0 + 0.3 * std::cos(s)));
  }
  const auto num = make_cox_model({}, Vector(0), kernel_smooth(BaselineIntensity::step(t, dn), Kernel::Gaussian, 0.5));
  const auto den = make_cox_model({}, Vector(0), kernel_smooth(BaselineIntensity::step(t, dd), Kernel::Gaussian, 0.5));
  const double U = 3.0;
  const double cont = treatment_weight(schedule({{0.0, U, true}}), num, den, empty_path(U, 1)).value;
  double previous_gap = INFINITY;
  for (double h : {1e-1, 1e-2, 1e-3}) {
    std::vector<BinProbability> bins;
    const auto n = static_cast<int>(std::lround(U / h));
    for (int k = 0; k < n; ++k) {
      const double a = k * h, b = (k + 1) * h;
      BinProbability bin;
      bin.treated = k + 1 == n;
      bin.p_num = 1.0 - std::exp(-simpson(num.baseline(), a, b));
      bin.p_den = 1.0 - std::exp(-simpson(den.baseline(), a, b));
      bins.push_back(bin);
    }
    const double gap = std::abs(discrete_weight_product(bins) / cont - 1.0);
    CHECK(gap < previous_gap);
    previous_gap = gap;
  }
  CHECK(previous_gap < 0.01);
}

TEST_CASE("weights: without covariates every estimator gives weight one") {
  auto c = null_sim(3, 150);
  auto sim = simulate_rectangular(c);
  // drop the covariates so both feature sets coincide
  std::vector<ObservationRow> rows = sim.rows();
  for (auto& r : rows) r.covariates.clear();
  const auto p = CountingProcessPanel::build(std::move(rows), {}, sim.treatment_names(), sim.max_followup());
  for (auto e : {Estimator::I, Estimator::II, Estimator::III, Estimator::IV}) {
    WeightConfig wc;
    wc.estimator = e;
    wc.intensity.forest.n_trees = 20;
    const auto w = estimate_weights(p, wc);
    CHECK(w.total.minCoeff() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w.total.maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("weights: factorization and positivity of every weight") {
  const auto p = make_ragged(simulate_rectangular(null_sim(4, 200)), 0.5, 0.3, 4);
  WeightConfig wc;
  wc.estimator = Estimator::I;
  const auto w = estimate_weights(p, wc);
  for (std::size_t i = 0; i < w.size(); ++i) {
    double prod = w.censoring[static_cast<Eigen::Index>(i)];
    for (Eigen::Index k = 0; k < w.treatment.cols(); ++k) prod *= w.treatment(static_cast<Eigen::Index>(i), k);
    CHECK(w.total[static_cast<Eigen::Index>(i)] == prod);
    CHECK(std::isfinite(prod));
    CHECK(prod > 0.0);
  }
  CHECK(w.summary.min == w.total.minCoeff());
  CHECK(w.summary.max == w.total.maxCoeff());
  CHECK(w.summary.mean == doctest::Approx(w.total.mean()).epsilon(1e-14));
}

TEST_CASE("weights: fitted models reproduce the weights") {
  const auto p = simulate_rectangular(null_sim(6, 200));
  WeightConfig wc;
  wc.estimator = Estimator::II;
  FittedWeightModels models;
  const auto a = estimate_weights(p, wc, &models);
  const auto b = apply_weight_models(p, models, wc);
  CHECK((a.total - b.total).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("weights: null confounding gives mean weight near one for all estimators") {
  const auto p = simulate_rectangular(null_sim(2024));
  for (auto e : {Estimator::I, Estimator::II, Estimator::III, Estimator::IV}) {
    WeightConfig wc;
    wc.estimator = e;
    const auto w = estimate_weights(p, wc);
    INFO("estimator " << estimator_name(e) << " mean " << mean(w.total));
    CHECK(std::abs(mean(w.total) - 1.0) <= 0.05);
  }
}

TEST_CASE("weights: null mean is invariant to the treatment ordering") {
  const auto p = simulate_rectangular(null_sim(2025));
  WeightConfig wc;
  wc.estimator = Estimator::I;
  const double forward = mean(estimate_weights(p, wc).total);
  wc.ordering = OrderingSpec::parse("2,1", 2);
  const double backward = mean(estimate_weights(p, wc).total);
  CHECK(std::abs(forward - backward) <= 0.05);
}

TEST_CASE("weights: truncation caps at percentiles") {
  const auto p = make_ragged(simulate_rectangular(null_sim(8, 300)), 0.5, 0.3, 8);
  WeightConfig wc;
  wc.estimator = Estimator::I;
  auto w = estimate_weights(p, wc);
  std::vector<double> sorted(w.total.data(), w.total.data() + w.total.size());
  std::sort(sorted.begin(), sorted.end());
  truncate_weights(w);
  CHECK(w.truncated);
  CHECK(w.total.maxCoeff() <= quantile_sorted(sorted, 0.99) + 1e-15);
  CHECK(w.total.minCoeff() >= quantile_sorted(sorted, 0.01) - 1e-15);
}
