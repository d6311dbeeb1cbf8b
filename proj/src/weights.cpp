#include "ctmsm/weights.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "ctmsm/logistic.hpp"

namespace ctmsm {

Estimator parse_estimator(const std::string& name) {
  if (name == "i" || name == "1") return Estimator::I;
  if (name == "ii" || name == "2") return Estimator::II;
  if (name == "iii" || name == "3") return Estimator::III;
  if (name == "iv" || name == "4") return Estimator::IV;
  fail(ErrorKind::Config, "unknown estimator '" + name + "' (expected i, ii, iii or iv)");
}

std::string estimator_name(Estimator e) {
  switch (e) {
    case Estimator::I: return "i";
    case Estimator::II: return "ii";
    case Estimator::III: return "iii";
    case Estimator::IV: return "iv";
  }
  return "?";
}

IntensitySpec intensity_spec_for(Estimator e, const IntensitySpec& base) {
  IntensitySpec s = base;
  s.backend = e == Estimator::I || e == Estimator::II ? IntensityBackend::Cox : IntensityBackend::Forest;
  s.baseline = e == Estimator::I || e == Estimator::III ? BaselineForm::Step : BaselineForm::Smoothed;
  return s;
}

WeightSummary summarize_weights(const Vector& values) {
  WeightSummary s;
  if (values.size() == 0) return s;
  std::vector<double> v(values.data(), values.data() + values.size());
  std::sort(v.begin(), v.end());
  s.min = v.front();
  s.max = v.back();
  s.q1 = quantile_sorted(v, 0.25);
  s.q3 = quantile_sorted(v, 0.75);
  s.mean = values.mean();
  return s;
}

void finalize_weights(WeightTable& table) {
  const auto n = static_cast<Eigen::Index>(table.size());
  table.total.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double t = table.censoring[i];
    for (Eigen::Index w = 0; w < table.treatment.cols(); ++w) t *= table.treatment(i, w);
    table.total[i] = t;
  }
  table.truncated = false;
  table.summary = summarize_weights(table.total);
}

void truncate_weights(WeightTable& table, double lower, double upper) {
  if (!(0.0 <= lower && lower < upper && upper <= 1.0)) fail(ErrorKind::Config, "truncation percentiles out of range");
  if (table.size() == 0) return;
  std::vector<double> v(table.total.data(), table.total.data() + table.total.size());
  std::sort(v.begin(), v.end());
  const double a = quantile_sorted(v, lower), b = quantile_sorted(v, upper);
  for (Eigen::Index i = 0; i < table.total.size(); ++i) table.total[i] = std::clamp(table.total[i], a, b);
  table.truncated = true;
  table.summary = summarize_weights(table.total);
}

void write_weights(std::ostream& out, const WeightTable& table) {
  out << "id";
  for (const auto& t : table.treatment_names) out << ",omega_" << t;
  out << ",omega_C,omega_total\n";
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out << table.subject_ids[i];
    for (Eigen::Index w = 0; w < table.treatment.cols(); ++w) out << ',' << format_double(table.treatment(r, w));
    out << ',' << format_double(table.censoring[r]) << ',' << format_double(table.total[r]) << '\n';
  }
}

void write_weights_file(const std::string& path, const WeightTable& table) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write weights file '" + path + "'");
  write_weights(out, table);
}

WeightTable read_weights_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open weights file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::Data, "weights file has no header");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string h;
    while (std::getline(ss, h, ',')) header.push_back(h);
  }
  if (header.size() < 3 || header[0] != "id" || header[header.size() - 2] != "omega_C" ||
      header.back() != "omega_total")
    fail(ErrorKind::Data, "weights file header must be id, omega_<A>..., omega_C, omega_total");
  WeightTable t;
  const std::size_t W = header.size() - 3;
  for (std::size_t w = 0; w < W; ++w) t.treatment_names.push_back(header[w + 1].substr(6));
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f;
    std::vector<std::string> fields;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != header.size())
      fail(ErrorKind::Data, "weights file row " + std::to_string(line_no) + " has the wrong field count");
    t.subject_ids.push_back(fields[0]);
    std::vector<double> vals;
    for (std::size_t k = 1; k < fields.size(); ++k) vals.push_back(parse_double(fields[k]));
    rows.push_back(std::move(vals));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  t.treatment.resize(n, static_cast<Eigen::Index>(W));
  t.censoring.resize(n);
  t.total.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    for (std::size_t w = 0; w < W; ++w) t.treatment(i, static_cast<Eigen::Index>(w)) = r[w];
    t.censoring[i] = r[W];
    t.total[i] = r[W + 1];
    if (!(t.total[i] > 0.0) || !std::isfinite(t.total[i]))
      fail(ErrorKind::Data, "weights must be positive and finite (subject '" + t.subject_ids.back() + "')");
  }
  t.summary = summarize_weights(t.total);
  return t;
}

TreatmentPath treatment_path(std::span<const ObservationRow> rows, std::size_t w, const OrderingSpec& ordering) {
  TreatmentPath path;
  int q = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const bool on = rows[r].treatment[w];
    const bool prev_on = r > 0 && rows[r - 1].treatment[w];
    if (on && prev_on) continue;
    auto xn = treatment_features(rows, r, w, ordering, FeatureSet::Numerator, q);
    auto xd = treatment_features(rows, r, w, ordering, FeatureSet::Denominator, q);
    if (on) {
      path.numerator_at_initiation.push_back(std::move(xn));
      path.denominator_at_initiation.push_back(std::move(xd));
      ++q;
    } else {
      path.numerator.push_back({rows[r].t_start, rows[r].t_stop, !prev_on, false, std::move(xn)});
      path.denominator.push_back({rows[r].t_start, rows[r].t_stop, !prev_on, false, std::move(xd)});
    }
  }
  return path;
}

namespace {

[[noreturn]] void positivity(const std::string& id, double t, const std::string& what) {
  fail(ErrorKind::Numerical, "positivity violation: " + what + " for subject '" + id + "' at t=" + format_double(t));
}

}  // namespace

WeightFactor treatment_weight(const EligibilitySchedule& schedule, const IntensityModel& num,
                              const IntensityModel& den, const TreatmentPath& path, const WeightOptions& options) {
  if (path.numerator_at_initiation.size() != schedule.Q())
    fail(ErrorKind::Data, "covariate path does not match the eligibility schedule of subject '" +
                              schedule.subject_id + "'");
  double log_num = 0.0, log_den = 0.0;
  std::size_t q = 0;
  for (const auto& iv : schedule.intervals) {
    if (iv.initiated) {
      const auto rr = [&](const std::vector<double>& v) { return q < v.size() ? v[q] : -1.0; };
      const auto sn = conditional_survival_density(num, path.numerator, iv.V, iv.U, &path.numerator_at_initiation[q],
                                                   rr(path.numerator_initiation_ratio));
      const auto sd = conditional_survival_density(den, path.denominator, iv.V, iv.U,
                                                   &path.denominator_at_initiation[q],
                                                   rr(path.denominator_initiation_ratio));
      if (!(sd.f >= kPositivityFloor)) positivity(schedule.subject_id, iv.U, "initiation density is 0");
      if (!(sn.f > 0.0)) positivity(schedule.subject_id, iv.U, "numerator initiation density is 0");
      log_num += std::log(sn.f);
      log_den += std::log(sd.f);
      ++q;
    } else {
      const auto sn = conditional_survival_density(num, path.numerator, iv.V, iv.U);
      const auto sd = conditional_survival_density(den, path.denominator, iv.V, iv.U);
      double a = sn.S, b = sd.S;
      if (options.survival_difference_terminal) {
        a = 1.0 - a;
        b = 1.0 - b;
      }
      if (!(b >= kPositivityFloor)) positivity(schedule.subject_id, iv.U, "survival probability is 0");
      if (!(a > 0.0)) positivity(schedule.subject_id, iv.U, "numerator survival probability is 0");
      log_num += std::log(a);
      log_den += std::log(b);
    }
  }
  WeightFactor f;
  f.subject_id = schedule.subject_id;
  f.process = static_cast<int>(schedule.treatment);
  f.numerator = std::exp(log_num);
  f.denominator = std::exp(log_den);
  f.value = std::exp(log_num - log_den);
  if (!std::isfinite(f.value) || !(f.value > 0.0))
    fail(ErrorKind::Numerical, "non-finite treatment weight for subject '" + schedule.subject_id + "'");
  return f;
}

WeightFactor censoring_weight(const FollowupAnchor& anchor, const IntensityModel& num, const IntensityModel& den,
                              const std::vector<PathPiece>& num_path, const std::vector<PathPiece>& den_path) {
  // Integrated censoring intensity over (0, G], the atom at G included.
  const auto integrate = [&](const IntensityModel& m, const std::vector<PathPiece>& path) {
    double H = 0.0;
    for (const auto& piece : path) {
      if (piece.start >= anchor.G) continue;
      const double b = std::min(piece.stop, anchor.G);
      const bool cr = b < piece.stop ? true : piece.closed_right;
      H += piece.ratio >= 0.0 ? m.cumulative_hazard_rr(piece.ratio, piece.start, b, piece.closed_left, cr)
                              : m.cumulative_hazard(piece.x.data(), piece.start, b, piece.closed_left, cr);
    }
    return H;
  };
  const double Hn = integrate(num, num_path), Hd = integrate(den, den_path);
  WeightFactor f;
  f.subject_id = anchor.subject_id;
  f.process = -1;
  f.numerator = std::exp(-Hn);
  f.denominator = std::exp(-Hd);
  if (!(f.denominator >= kPositivityFloor)) positivity(anchor.subject_id, anchor.G, "censoring survival is 0");
  f.value = std::exp(Hd - Hn);
  return f;
}

namespace {

std::vector<PathPiece> censoring_path(std::span<const ObservationRow> rows, FeatureSet set) {
  std::vector<PathPiece> path;
  for (const auto& row : rows) {
    std::vector<double> x;
    if (set == FeatureSet::Denominator) {
      for (auto a : row.treatment) x.push_back(a);
      x.insert(x.end(), row.covariates.begin(), row.covariates.end());
    }
    path.push_back({row.t_start, row.t_stop, false, true, std::move(x)});
  }
  return path;
}

std::uint64_t model_seed(std::uint64_t seed, std::size_t process, int set) {
  return hash_combine(hash_combine(seed, process), static_cast<std::uint64_t>(set));
}

}  // namespace

namespace {

// Training relative risks of each fitted model, sliced per subject. Records
// and path pieces are built in the same row order, so the k-th record of a
// subject matches its k-th piece or initiation.
struct InSampleRatios {
  struct Slices {
    const std::vector<double>* ratio = nullptr;
    std::vector<std::size_t> begin;  // per subject, plus end sentinel
  };
  std::vector<Slices> numerator, denominator;
  Slices censor_numerator, censor_denominator;
};

InSampleRatios::Slices slices(const EventRecords& rec, const IntensityModel& model, std::size_t n) {
  InSampleRatios::Slices sl;
  if (model.backend() != IntensityBackend::Forest || model.training_ratio().size() != rec.size()) return sl;
  sl.ratio = &model.training_ratio();
  sl.begin.assign(n + 1, rec.size());
  for (std::size_t i = rec.size(); i-- > 0;) sl.begin[rec.subject[i]] = i;
  for (std::size_t s = n; s-- > 0;) sl.begin[s] = std::min(sl.begin[s], sl.begin[s + 1]);
  return sl;
}

void attach(const InSampleRatios::Slices& sl, std::size_t s, std::vector<PathPiece>& pieces,
            std::vector<double>* at_initiation, const std::vector<std::uint8_t>* event) {
  if (!sl.ratio) return;
  std::size_t piece = 0;
  for (std::size_t i = sl.begin[s]; i < sl.begin[s + 1]; ++i) {
    if (event && (*event)[i])
      at_initiation->push_back((*sl.ratio)[i]);
    else
      pieces[piece++].ratio = (*sl.ratio)[i];
  }
}

WeightTable compute_weights(const CountingProcessPanel& panel, const FittedWeightModels& models,
                            const WeightConfig& config, const InSampleRatios* in_sample,
                            const std::vector<std::vector<std::uint8_t>>* events) {
  const std::size_t W = panel.num_treatments();
  const OrderingSpec ordering = config.ordering.order.empty() ? OrderingSpec::identity(W) : config.ordering;
  ordering.validate(W);
  WeightTable table;
  table.treatment_names = panel.treatment_names();
  const auto n = panel.num_subjects();
  table.treatment = Matrix::Ones(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(W));
  table.censoring = Vector::Ones(static_cast<Eigen::Index>(n));
  for (const auto& s : panel.subjects()) table.subject_ids.push_back(s.id);
  const bool censor = config.censoring && !models.censor_denominator.baseline().jump_times().empty();
  parallel_for(n, config.threads, [&](std::size_t s) {
    const auto rows = panel.subject_rows(s);
    const auto i = static_cast<Eigen::Index>(s);
    for (std::size_t w = 0; w < W; ++w) {
      const auto schedule = derive_eligibility(rows, w);
      auto path = treatment_path(rows, w, ordering);
      if (in_sample) {
        attach(in_sample->numerator[w], s, path.numerator, &path.numerator_initiation_ratio, &(*events)[w]);
        attach(in_sample->denominator[w], s, path.denominator, &path.denominator_initiation_ratio, &(*events)[w]);
      }
      table.treatment(i, static_cast<Eigen::Index>(w)) =
          treatment_weight(schedule, models.numerator[w], models.denominator[w], path, config.options).value;
    }
    if (censor) {
      auto num_path = censoring_path(rows, FeatureSet::Numerator);
      auto den_path = censoring_path(rows, FeatureSet::Denominator);
      if (in_sample) {
        attach(in_sample->censor_numerator, s, num_path, nullptr, nullptr);
        attach(in_sample->censor_denominator, s, den_path, nullptr, nullptr);
      }
      table.censoring[i] =
          censoring_weight(followup_anchor(rows), models.censor_numerator, models.censor_denominator, num_path, den_path)
              .value;
    }
  });
  finalize_weights(table);
  if (config.truncate) truncate_weights(table);
  return table;
}

}  // namespace

WeightTable apply_weight_models(const CountingProcessPanel& panel, const FittedWeightModels& models,
                                const WeightConfig& config) {
  return compute_weights(panel, models, config, nullptr, nullptr);
}

WeightTable estimate_weights(const CountingProcessPanel& panel, const WeightConfig& config,
                             FittedWeightModels* models_out) {
  const std::size_t W = panel.num_treatments();
  if (W == 0) fail(ErrorKind::Config, "panel has no treatment columns");
  const OrderingSpec ordering = config.ordering.order.empty() ? OrderingSpec::identity(W) : config.ordering;
  ordering.validate(W);
  const IntensitySpec base = intensity_spec_for(config.estimator, config.intensity);
  FittedWeightModels models;
  std::vector<std::string> warnings;
  const auto fit = [&](const EventRecords& rec, std::size_t process, int set) {
    IntensitySpec spec = base;
    spec.forest.seed = model_seed(config.intensity.forest.seed, process, set);
    spec.forest.threads = config.threads;
    auto m = fit_intensity_model(rec, spec);
    if (!m.warning().empty()) warnings.push_back(m.warning());
    return m;
  };
  const auto n = panel.num_subjects();
  models.numerator.reserve(W);
  models.denominator.reserve(W);
  InSampleRatios in_sample;
  std::vector<std::vector<std::uint8_t>> events;
  for (std::size_t w = 0; w < W; ++w) {
    const auto num = treatment_records(panel, w, ordering, FeatureSet::Numerator);
    const auto den = treatment_records(panel, w, ordering, FeatureSet::Denominator);
    models.numerator.push_back(fit(num, w, 0));
    models.denominator.push_back(den.feature_names == num.feature_names ? models.numerator.back() : fit(den, w, 1));
    in_sample.numerator.push_back(slices(num, models.numerator.back(), n));
    in_sample.denominator.push_back(slices(den, models.denominator.back(), n));
    events.push_back(num.event);
  }
  if (config.censoring) {
    const auto num = censoring_records(panel, FeatureSet::Numerator);
    if (num.num_events() > 0) {
      const auto den = censoring_records(panel, FeatureSet::Denominator);
      models.censor_numerator = fit(num, W, 0);
      models.censor_denominator = den.feature_names == num.feature_names ? models.censor_numerator : fit(den, W, 1);
      in_sample.censor_numerator = slices(num, models.censor_numerator, n);
      in_sample.censor_denominator = slices(den, models.censor_denominator, n);
    }
  }
  auto table = compute_weights(panel, models, config, &in_sample, &events);
  table.warnings = std::move(warnings);
  if (models_out) *models_out = std::move(models);
  return table;
}

double discrete_weight_product(const std::vector<BinProbability>& bins) {
  double log_w = 0.0;
  for (const auto& b : bins) {
    const double den = b.treated ? b.p_den : 1.0 - b.p_den;
    const double num = b.treated ? b.p_num : 1.0 - b.p_num;
    if (!(den > 0.0)) fail(ErrorKind::Numerical, "positivity violation: bin probability in the denominator is 0 or 1");
    log_w += std::log(num) - std::log(den);
  }
  return std::exp(log_w);
}

namespace {

// Per-bin binary model: forest, logistic or a constant rate.
struct BinModel {
  enum class Kind { Constant, Forest, Logistic } kind = Kind::Constant;
  double rate = 0.0;
  LtrcForest forest;
  LogisticFit logistic;
  std::size_t p = 0;

  double predict(const double* x) const {
    switch (kind) {
      case Kind::Constant: return rate;
      case Kind::Forest: return forest.predict(x);
      case Kind::Logistic: return logistic.predict(x, p);
    }
    return rate;
  }
  // Prediction for training row k, out-of-bag when the forest kept them.
  double predict_training(std::size_t k, const double* x) const {
    if (kind == Kind::Forest && !forest.oob_raw().empty()) return forest.oob_predict(k);
    return predict(x);
  }
};

BinModel fit_bin_model(const RowMatrix& X, const std::vector<std::uint8_t>& y, const DtConfig& config,
                       std::uint64_t seed) {
  BinModel m;
  m.p = static_cast<std::size_t>(X.cols());
  const auto events = static_cast<double>(std::count(y.begin(), y.end(), std::uint8_t{1}));
  m.rate = y.empty() ? 0.0 : events / static_cast<double>(y.size());
  if (events == 0.0 || events == static_cast<double>(y.size()) || X.cols() == 0) return m;
  if (config.model == DtModel::Forest) {
    auto params = config.forest;
    params.seed = seed;
    params.threads = config.threads;
    m.forest = fit_forest_classifier(X, y, params);
    m.kind = BinModel::Kind::Forest;
  } else {
    m.logistic = fit_logistic(X, y);
    m.kind = BinModel::Kind::Logistic;
  }
  return m;
}

struct BinData {
  RowMatrix X;
  std::vector<std::uint8_t> y;
  std::vector<std::uint32_t> subject;
};

BinData treatment_bins(const CountingProcessPanel& panel, std::size_t w, const OrderingSpec& ordering,
                       FeatureSet set) {
  BinData d;
  std::vector<double> flat;
  std::size_t p = 0;
  for (std::size_t s = 0; s < panel.num_subjects(); ++s) {
    const auto rows = panel.subject_rows(s);
    int q = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const bool prev_on = r > 0 && rows[r - 1].treatment[w];
      if (prev_on) continue;
      const auto x = treatment_features(rows, r, w, ordering, set, q);
      p = x.size();
      flat.insert(flat.end(), x.begin(), x.end());
      d.y.push_back(rows[r].treatment[w]);
      d.subject.push_back(static_cast<std::uint32_t>(s));
      if (rows[r].treatment[w]) ++q;
    }
  }
  if (d.y.empty()) p = treatment_feature_names(panel, w, ordering, set).size();
  d.X = Eigen::Map<const RowMatrix>(flat.data(), static_cast<Eigen::Index>(d.y.size()), static_cast<Eigen::Index>(p));
  return d;
}

}  // namespace

WeightTable discrete_time_weights(const CountingProcessPanel& aligned, const DtConfig& config) {
  const std::size_t W = aligned.num_treatments();
  const OrderingSpec ordering = config.ordering.order.empty() ? OrderingSpec::identity(W) : config.ordering;
  ordering.validate(W);
  const auto n = aligned.num_subjects();
  WeightTable table;
  table.treatment_names = aligned.treatment_names();
  for (const auto& s : aligned.subjects()) table.subject_ids.push_back(s.id);
  table.treatment = Matrix::Ones(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(W));
  table.censoring = Vector::Ones(static_cast<Eigen::Index>(n));

  std::vector<double> log_w(n);
  for (std::size_t w = 0; w < W; ++w) {
    const auto num = treatment_bins(aligned, w, ordering, FeatureSet::Numerator);
    const auto den = treatment_bins(aligned, w, ordering, FeatureSet::Denominator);
    const auto m_num = fit_bin_model(num.X, num.y, config, model_seed(config.forest.seed, w, 0));
    const auto m_den = fit_bin_model(den.X, den.y, config, model_seed(config.forest.seed, w, 1));
    std::fill(log_w.begin(), log_w.end(), 0.0);
    for (std::size_t k = 0; k < num.y.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      const double pn = m_num.predict_training(k, num.X.row(i).data());
      const double pd = m_den.predict_training(k, den.X.row(i).data());
      const bool treated = num.y[k];
      const double a = treated ? pn : 1.0 - pn, b = treated ? pd : 1.0 - pd;
      if (!(b > 0.0))
        fail(ErrorKind::Numerical, "positivity violation: bin probability 0 or 1 in the denominator for subject '" +
                                       table.subject_ids[num.subject[k]] + "'");
      log_w[num.subject[k]] += std::log(a) - std::log(b);
    }
    for (std::size_t s = 0; s < n; ++s) table.treatment(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(w)) = std::exp(log_w[s]);
  }

  if (config.censoring) {
    BinData num, den;
    std::vector<double> fn, fd;
    const std::size_t pc = W + aligned.num_covariates();
    for (std::size_t s = 0; s < n; ++s)
      for (const auto& row : aligned.subject_rows(s)) {
        num.y.push_back(row.censor_event);
        num.subject.push_back(static_cast<std::uint32_t>(s));
        for (auto a : row.treatment) fd.push_back(a);
        fd.insert(fd.end(), row.covariates.begin(), row.covariates.end());
      }
    if (std::count(num.y.begin(), num.y.end(), std::uint8_t{1}) > 0) {
      num.X.resize(static_cast<Eigen::Index>(num.y.size()), 0);
      den.X = Eigen::Map<const RowMatrix>(fd.data(), static_cast<Eigen::Index>(num.y.size()), static_cast<Eigen::Index>(pc));
      const auto m_num = fit_bin_model(num.X, num.y, config, model_seed(config.forest.seed, W, 0));
      const auto m_den = fit_bin_model(den.X, num.y, config, model_seed(config.forest.seed, W, 1));
      std::fill(log_w.begin(), log_w.end(), 0.0);
      for (std::size_t k = 0; k < num.y.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        const double pn = m_num.predict(nullptr);
        const double pd = m_den.predict_training(k, den.X.row(i).data());
        if (!(1.0 - pd > 0.0)) fail(ErrorKind::Numerical, "positivity violation: censoring probability 1 in a bin");
        log_w[num.subject[k]] += std::log1p(-pn) - std::log1p(-pd);
      }
      for (std::size_t s = 0; s < n; ++s) table.censoring[static_cast<Eigen::Index>(s)] = std::exp(log_w[s]);
    }
  }
  finalize_weights(table);
  return table;
}

}  // namespace ctmsm
