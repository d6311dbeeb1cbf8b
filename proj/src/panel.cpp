#include "ctmsm/panel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ctmsm/common.hpp"

namespace ctmsm {

namespace {

bool all_digits(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

// Integer-looking ids compare numerically so "2" sorts before "10".
bool natural_less(const std::string& a, const std::string& b) {
  if (all_digits(a) && all_digits(b)) {
    const auto strip = [](const std::string& s) {
      const auto pos = s.find_first_not_of('0');
      return pos == std::string::npos ? std::string_view{} : std::string_view(s).substr(pos);
    };
    const auto sa = strip(a), sb = strip(b);
    if (sa.size() != sb.size()) return sa.size() < sb.size();
    if (sa != sb) return sa < sb;
  }
  return a < b;
}

std::string where(const std::string& id, std::size_t line) {
  return "subject '" + id + "', row " + std::to_string(line);
}

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == delim && !quoted) {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  out.push_back(field);
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string{} : f.substr(b, e - b + 1);
  }
  return out;
}

}  // namespace

CountingProcessPanel CountingProcessPanel::build(std::vector<ObservationRow> rows,
                                                 std::vector<std::string> covariate_names,
                                                 std::vector<std::string> treatment_names,
                                                 std::optional<double> max_followup,
                                                 const std::vector<std::size_t>& source_lines) {
  const std::size_t W = treatment_names.size();
  const std::size_t P = covariate_names.size();
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  auto line_of = [&](std::size_t i) { return source_lines.empty() ? i + 1 : source_lines[i]; };

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.covariates.size() != P || r.treatment.size() != W)
      fail(ErrorKind::Data, "missing columns at " + where(r.subject_id, line_of(i)));
    if (!std::isfinite(r.t_start) || !std::isfinite(r.t_stop))
      fail(ErrorKind::Data, "non-finite time at " + where(r.subject_id, line_of(i)));
    for (double v : r.covariates)
      if (!std::isfinite(v)) fail(ErrorKind::Data, "non-finite covariate at " + where(r.subject_id, line_of(i)));
    for (auto a : r.treatment)
      if (a > 1) fail(ErrorKind::Data, "treatment flag not 0/1 at " + where(r.subject_id, line_of(i)));
    if (r.t_start < 0.0) fail(ErrorKind::Data, "negative start time at " + where(r.subject_id, line_of(i)));
    if (!(r.t_start < r.t_stop))
      fail(ErrorKind::Data, "t_start must be < t_stop at " + where(r.subject_id, line_of(i)));
    if (r.outcome_event && r.censor_event)
      fail(ErrorKind::Data, "outcome and censoring on one row at " + where(r.subject_id, line_of(i)));
  }

  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rows[a].subject_id != rows[b].subject_id) return natural_less(rows[a].subject_id, rows[b].subject_id);
    return rows[a].t_start < rows[b].t_start;
  });

  CountingProcessPanel panel;
  panel.covariate_names_ = std::move(covariate_names);
  panel.treatment_names_ = std::move(treatment_names);
  panel.rows_.reserve(rows.size());
  double t_max = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    auto& r = rows[i];
    const bool new_subject = panel.subjects_.empty() || panel.subjects_.back().id != r.subject_id;
    if (new_subject) {
      if (r.t_start != 0.0)
        fail(ErrorKind::Data, "follow-up must start at 0 at " + where(r.subject_id, line_of(i)));
      panel.subjects_.push_back({r.subject_id, panel.rows_.size(), 0});
    } else {
      const auto& prev = panel.rows_.back();
      if (r.t_start < prev.t_stop)
        fail(ErrorKind::Data, "overlapping intervals at " + where(r.subject_id, line_of(i)));
      if (r.t_start > prev.t_stop)
        fail(ErrorKind::Data, "gap between intervals at " + where(r.subject_id, line_of(i)));
      if (prev.outcome_event || prev.censor_event)
        fail(ErrorKind::Data, "event on non-terminal row at " + where(r.subject_id, line_of(order[k - 1])));
    }
    t_max = std::max(t_max, r.t_stop);
    panel.rows_.push_back(std::move(r));
    ++panel.subjects_.back().count;
  }
  if (max_followup) {
    if (*max_followup < t_max)
      fail(ErrorKind::Data, "row stops after the maximum follow-up " + format_double(*max_followup));
    panel.max_followup_ = *max_followup;
  } else {
    panel.max_followup_ = t_max;
  }
  return panel;
}

CountingProcessPanel CountingProcessPanel::select(std::span<const std::size_t> subject_indices,
                                                  bool relabel) const {
  CountingProcessPanel out;
  out.covariate_names_ = covariate_names_;
  out.treatment_names_ = treatment_names_;
  out.max_followup_ = max_followup_;
  std::size_t total = 0;
  for (auto s : subject_indices) total += subjects_.at(s).count;
  out.rows_.reserve(total);
  for (std::size_t k = 0; k < subject_indices.size(); ++k) {
    const auto& span = subjects_[subject_indices[k]];
    const std::string id = relabel ? std::to_string(k + 1) : span.id;
    out.subjects_.push_back({id, out.rows_.size(), span.count});
    for (std::size_t r = 0; r < span.count; ++r) {
      out.rows_.push_back(rows_[span.first + r]);
      out.rows_.back().subject_id = id;
    }
  }
  return out;
}

PanelSchema PanelSchema::infer(const std::vector<std::string>& header, char delimiter) {
  PanelSchema schema;
  schema.delimiter = delimiter;
  const auto is_treatment = [](const std::string& h) {
    return h.size() >= 2 && h[0] == 'A' && all_digits(h.substr(1));
  };
  for (const auto& h : header) {
    if (h == schema.id || h == schema.start || h == schema.stop || h == schema.event || h == schema.censor)
      continue;
    (is_treatment(h) ? schema.treatments : schema.covariates).push_back(h);
  }
  std::sort(schema.treatments.begin(), schema.treatments.end(),
            [](const std::string& a, const std::string& b) { return natural_less(a.substr(1), b.substr(1)); });
  return schema;
}

CountingProcessPanel ingest_panel(std::istream& source, const PanelSchema& schema) {
  std::string line;
  if (!std::getline(source, line)) fail(ErrorKind::Data, "missing header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  const auto header = split_line(line, schema.delimiter);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  const auto find = [&](const std::string& name) {
    auto it = col.find(name);
    if (it == col.end()) fail(ErrorKind::Data, "missing column '" + name + "'");
    return it->second;
  };
  const std::size_t c_id = find(schema.id), c_start = find(schema.start), c_stop = find(schema.stop),
                    c_event = find(schema.event), c_censor = find(schema.censor);
  std::vector<std::size_t> c_trt, c_cov;
  for (const auto& t : schema.treatments) c_trt.push_back(find(t));
  for (const auto& c : schema.covariates) c_cov.push_back(find(c));

  std::vector<ObservationRow> rows;
  std::vector<std::size_t> lines;
  std::size_t line_no = 1;
  const auto flag = [&](const std::string& text, const std::string& id, std::size_t ln) -> bool {
    const double v = parse_double(text);
    if (v != 0.0 && v != 1.0) fail(ErrorKind::Data, "binary column not 0/1 at " + where(id, ln));
    return v == 1.0;
  };
  while (std::getline(source, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_line(line, schema.delimiter);
    if (f.size() != header.size())
      fail(ErrorKind::Data, "row " + std::to_string(line_no) + " has " + std::to_string(f.size()) +
                                " fields, header has " + std::to_string(header.size()));
    ObservationRow r;
    r.subject_id = f[c_id];
    try {
      r.t_start = parse_double(f[c_start]);
      r.t_stop = parse_double(f[c_stop]);
      r.outcome_event = flag(f[c_event], r.subject_id, line_no);
      r.censor_event = flag(f[c_censor], r.subject_id, line_no);
      for (auto c : c_trt) r.treatment.push_back(flag(f[c], r.subject_id, line_no) ? 1 : 0);
      for (auto c : c_cov) r.covariates.push_back(parse_double(f[c]));
    } catch (const Error& e) {
      fail(ErrorKind::Data, std::string(e.what()) + " at " + where(r.subject_id, line_no));
    }
    rows.push_back(std::move(r));
    lines.push_back(line_no);
  }
  return CountingProcessPanel::build(std::move(rows), schema.covariates, schema.treatments, std::nullopt, lines);
}

CountingProcessPanel ingest_panel(std::istream& source) {
  std::string header_line;
  if (!std::getline(source, header_line)) fail(ErrorKind::Data, "missing header row");
  const auto schema = PanelSchema::infer(split_line(header_line, ','));
  std::stringstream rest;
  rest << header_line << '\n' << source.rdbuf();
  return ingest_panel(rest, schema);
}

CountingProcessPanel read_panel_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open panel file '" + path + "'");
  return ingest_panel(in);
}

void write_panel(std::ostream& out, const CountingProcessPanel& panel) {
  out << "id,tstart,tstop,event,censor";
  for (const auto& t : panel.treatment_names()) out << ',' << t;
  for (const auto& c : panel.covariate_names()) out << ',' << c;
  out << '\n';
  for (const auto& r : panel.rows()) {
    out << r.subject_id << ',' << format_double(r.t_start) << ',' << format_double(r.t_stop) << ','
        << int(r.outcome_event) << ',' << int(r.censor_event);
    for (auto a : r.treatment) out << ',' << int(a);
    for (double v : r.covariates) out << ',' << format_double(v);
    out << '\n';
  }
}

void write_panel_file(const std::string& path, const CountingProcessPanel& panel) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write panel file '" + path + "'");
  write_panel(out, panel);
  if (!out) fail(ErrorKind::Io, "write failed for '" + path + "'");
}

EligibilitySchedule derive_eligibility(std::span<const ObservationRow> rows, std::size_t w) {
  EligibilitySchedule s;
  if (rows.empty()) return s;
  s.subject_id = rows.front().subject_id;
  s.treatment = w;
  const double t_K = rows.back().t_stop;
  std::uint8_t prev = 0;  // A_w(0^-) = 0
  bool open = true;
  double open_from = 0.0;
  for (const auto& r : rows) {
    if (w >= r.treatment.size()) fail(ErrorKind::Config, "treatment index out of range");
    const auto a = r.treatment[w];
    if (a == 1 && prev == 0) {
      // 0 -> 1 flip at the row boundary: initiation observed at U = t_start.
      s.intervals.push_back({open_from, r.t_start, true});
      s.initiation_times.push_back(r.t_start);
      open = false;
    } else if (a == 0 && prev == 1) {
      open = true;
      open_from = r.t_start;
    }
    prev = a;
  }
  if (open) s.intervals.push_back({open_from, t_K, false});
  return s;
}

std::vector<EligibilitySchedule> derive_eligibility(const CountingProcessPanel& panel, std::size_t w) {
  if (w >= panel.num_treatments()) fail(ErrorKind::Config, "treatment index out of range");
  std::vector<EligibilitySchedule> out;
  out.reserve(panel.num_subjects());
  for (std::size_t s = 0; s < panel.num_subjects(); ++s) out.push_back(derive_eligibility(panel.subject_rows(s), w));
  return out;
}

void write_eligibility(std::ostream& out, const std::vector<EligibilitySchedule>& schedules) {
  out << "id,w,j,V,U,initiated\n";
  for (const auto& s : schedules)
    for (std::size_t j = 0; j < s.intervals.size(); ++j)
      out << s.subject_id << ',' << s.treatment + 1 << ',' << j + 1 << ',' << format_double(s.intervals[j].V) << ','
          << format_double(s.intervals[j].U) << ',' << int(s.intervals[j].initiated) << '\n';
}

FollowupAnchor followup_anchor(std::string subject_id, bool outcome_observed, double event_time,
                               double last_followup, double censor_time) {
  if (outcome_observed) return {std::move(subject_id), event_time, AnchorKind::Event};
  if (censor_time > last_followup) return {std::move(subject_id), last_followup, AnchorKind::AdministrativeEnd};
  return {std::move(subject_id), censor_time, AnchorKind::Censored};
}

FollowupAnchor followup_anchor(std::span<const ObservationRow> rows) {
  const auto& last = rows.back();
  const double inf = std::numeric_limits<double>::infinity();
  return followup_anchor(last.subject_id, last.outcome_event, last.t_stop, last.t_stop,
                         last.censor_event ? last.t_stop : inf);
}

std::vector<PseudoSubject> to_pseudosubjects(const CountingProcessPanel& panel) {
  std::vector<PseudoSubject> out;
  out.reserve(panel.rows().size());
  for (const auto& r : panel.rows()) out.push_back({r.t_start, r.t_stop, r.outcome_event, r.covariates});
  return out;
}

CountingProcessPanel discretize(const CountingProcessPanel& panel, double dt) {
  if (!(dt > 0.0)) fail(ErrorKind::Config, "discretization step must be positive");
  std::vector<ObservationRow> out;
  out.reserve(panel.rows().size());
  double t_max = panel.max_followup();
  const std::size_t W = panel.num_treatments();
  for (std::size_t s = 0; s < panel.num_subjects(); ++s) {
    const auto rows = panel.subject_rows(s);
    const double t_K = rows.back().t_stop;
    const auto bins = static_cast<std::size_t>(std::ceil(t_K / dt - 1e-9));
    std::size_t cov_row = 0;  // row in effect at bin start
    std::size_t overlap_row = 0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double lo = static_cast<double>(k) * dt;
      const double hi = static_cast<double>(k + 1) * dt;
      while (cov_row + 1 < rows.size() && rows[cov_row].t_stop <= lo) ++cov_row;
      while (overlap_row + 1 < rows.size() && rows[overlap_row].t_stop <= lo) ++overlap_row;
      ObservationRow b;
      b.subject_id = rows[0].subject_id;
      b.t_start = lo;
      b.t_stop = hi;
      b.covariates = rows[cov_row].covariates;
      b.treatment.assign(W, 0);
      for (std::size_t r = overlap_row; r < rows.size() && rows[r].t_start < hi; ++r)
        for (std::size_t w = 0; w < W; ++w) b.treatment[w] |= rows[r].treatment[w];
      if (k + 1 == bins) {
        b.outcome_event = rows.back().outcome_event;
        b.censor_event = rows.back().censor_event;
      }
      t_max = std::max(t_max, hi);
      out.push_back(std::move(b));
    }
  }
  return CountingProcessPanel::build(std::move(out), panel.covariate_names(), panel.treatment_names(), t_max);
}

}  // namespace ctmsm
