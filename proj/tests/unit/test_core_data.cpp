#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ctmsm/common.hpp"
#include "ctmsm/panel.hpp"
#include "ctmsm/simulation.hpp"
#include "helpers.hpp"

using namespace ctmsm;
using testing::row;

namespace {

CountingProcessPanel from_text(const std::string& text) {
  std::istringstream in(text);
  return ingest_panel(in);
}

std::string error_of(const std::string& text) {
  try {
    from_text(text);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

SimConfig small_sim(std::uint64_t seed, std::size_t n = 60) {
  SimConfig c;
  c.n = n;
  c.M = 30;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("ingest: minimal subject with an event") {
  const auto p = from_text("id,tstart,tstop,event,censor,A1\n1,0,3,0,0,0\n1,3,7,1,0,1\n");
  REQUIRE(p.num_subjects() == 1);
  REQUIRE(p.rows().size() == 2);
  CHECK(p.rows().back().t_stop == 7.0);
  CHECK(p.rows().back().outcome_event);
  const auto g = followup_anchor(p.subject_rows(0));
  CHECK(g.G == 7.0);
  CHECK(g.kind == AnchorKind::Event);
}

TEST_CASE("ingest: rows are sorted by subject and start") {
  const auto p = from_text("id,tstart,tstop,event,censor,A1,L\n2,0,1,0,0,0,5\n1,2,4,0,0,1,2\n1,0,2,0,0,0,1\n");
  REQUIRE(p.num_subjects() == 2);
  CHECK(p.subjects()[0].id == "1");
  CHECK(p.rows()[0].t_start == 0.0);
  CHECK(p.rows()[1].t_start == 2.0);
  CHECK(p.covariate_names() == std::vector<std::string>{"L"});
}

TEST_CASE("ingest: validation errors name the subject and row") {
  const auto overlap = error_of("id,tstart,tstop,event,censor,A1\n1,0,3,0,0,0\n1,2,5,0,0,0\n");
  CHECK(contains(overlap, "overlapping intervals"));
  CHECK(contains(overlap, "'1'"));
  CHECK(contains(error_of("id,tstart,tstop,event,censor,A1\n1,0,3,1,0,0\n1,3,5,0,0,0\n"), "event on non-terminal row"));
  CHECK(contains(error_of("id,tstart,tstop,event,censor,A1\n1,0,3,0,0,0\n1,4,5,0,0,0\n"), "gap"));
  CHECK(contains(error_of("id,tstart,tstop,event,censor,A1,L\n1,0,3,0,0,0,nan\n"), "non-finite"));
  CHECK(contains(error_of("id,tstart,tstop,event,A1\n1,0,3,0,0\n"), "missing column 'censor'"));
  CHECK(contains(error_of("id,tstart,tstop,event,censor,A1\n1,0,3,1,1,0\n"), "outcome and censoring"));
  CHECK(contains(error_of("id,tstart,tstop,event,censor,A1\n1,3,3,0,0,0\n"), "t_start must be < t_stop"));
  CHECK(contains(error_of("id,tstart,tstop,event,censor,A1\n1,0,3,0,0,2\n"), "0/1"));
}

TEST_CASE("ingest: errors carry the Data category") {
  try {
    from_text("id,tstart,tstop,event,censor,A1\n1,0,3,0,0,0\n1,2,5,0,0,0\n");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
    CHECK(exit_code(e.kind()) == 3);
  }
}

TEST_CASE("ingest: write/read round trip of a simulated panel is exact") {
  auto c = small_sim(5);
  const auto p = make_ragged(simulate_rectangular(c), 0.5, 0.3, 5);
  std::ostringstream out;
  write_panel(out, p);
  std::istringstream in(out.str());
  const auto q = ingest_panel(in);
  CHECK(q.rows() == p.rows());
  CHECK(q.covariate_names() == p.covariate_names());
  CHECK(q.treatment_names() == p.treatment_names());
}

TEST_CASE("partition property: row lengths sum to t_K") {
  const auto p = make_ragged(simulate_rectangular(small_sim(9)), 0.7, 0.5, 9);
  for (std::size_t s = 0; s < p.num_subjects(); ++s) {
    const auto rows = p.subject_rows(s);
    double total = 0.0;
    for (const auto& r : rows) total += r.t_stop - r.t_start;
    CHECK(total == doctest::Approx(rows.back().t_stop).epsilon(1e-12));
    CHECK(rows.front().t_start == 0.0);
  }
}

TEST_CASE("eligibility: never treated") {
  const auto rows = testing::status_rows("a", {0, 4, 10}, {0, 0});
  const auto s = derive_eligibility(rows, 0);
  REQUIRE(s.J() == 1);
  CHECK(s.Q() == 0);
  CHECK(s.intervals[0].V == 0.0);
  CHECK(s.intervals[0].U == 10.0);
  CHECK_FALSE(s.intervals[0].initiated);
}

TEST_CASE("eligibility: one course, unterminated last interval") {
  const auto rows = testing::status_rows("a", {0, 3, 5, 10}, {0, 1, 0});
  const auto s = derive_eligibility(rows, 0);
  REQUIRE(s.J() == 2);
  CHECK(s.Q() == 1);
  CHECK(s.intervals[0].V == 0.0);
  CHECK(s.intervals[0].U == 3.0);
  CHECK(s.intervals[0].initiated);
  CHECK(s.intervals[1].V == 5.0);
  CHECK(s.intervals[1].U == 10.0);
  CHECK_FALSE(s.intervals[1].initiated);
}

TEST_CASE("eligibility: on treatment at follow-up end gives Q = J") {
  const auto rows = testing::status_rows("a", {0, 3, 5, 8, 10}, {0, 1, 0, 1});
  const auto s = derive_eligibility(rows, 0);
  CHECK(s.J() == 2);
  CHECK(s.Q() == 2);
  CHECK(s.initiation_times == std::vector<double>{3.0, 8.0});
}

TEST_CASE("eligibility: initiation at time 0 is a degenerate first interval") {
  const auto rows = testing::status_rows("a", {0, 2, 6}, {1, 0});
  const auto s = derive_eligibility(rows, 0);
  REQUIRE(s.J() == 2);
  CHECK(s.intervals[0].V == 0.0);
  CHECK(s.intervals[0].U == 0.0);
  CHECK(s.intervals[0].initiated);
  CHECK(s.intervals[1].V == 2.0);
}

TEST_CASE("eligibility: duality with the on-treatment set and Q classification") {
  const auto p = make_ragged(simulate_rectangular(small_sim(21)), 0.5, 0.3, 21);
  for (std::size_t w = 0; w < 2; ++w) {
    const auto all = derive_eligibility(p, w);
    for (std::size_t s = 0; s < p.num_subjects(); ++s) {
      const auto rows = p.subject_rows(s);
      const auto& sch = all[s];
      const double tK = rows.back().t_stop;
      // Q = J - [last interval ends at t_K without an initiation]
      const bool open_end = !sch.intervals.empty() && !sch.intervals.back().initiated;
      CHECK(sch.Q() == sch.J() - (open_end ? 1 : 0));
      if (open_end) CHECK(sch.intervals.back().U == tK);
      for (double t = 0.05; t < tK; t += 0.25) {
        bool eligible = false;
        for (const auto& iv : sch.intervals) eligible = eligible || (iv.V < t && t <= iv.U);
        std::uint8_t status = 0;
        for (const auto& r : rows)
          if (r.t_start < t && t <= r.t_stop) status = r.treatment[w];
        CHECK(eligible == (status == 0));
      }
    }
  }
}

TEST_CASE("eligibility csv export") {
  std::ostringstream out;
  write_eligibility(out, {derive_eligibility(testing::status_rows("a", {0, 3, 5, 10}, {0, 1, 0}), 0)});
  CHECK(out.str() == "id,w,j,V,U,initiated\na,1,1,0,3,1\na,1,2,5,10,0\n");
}

TEST_CASE("follow-up anchor branches") {
  auto g = followup_anchor("x", true, 7.0, 7.0);
  CHECK(g.G == 7.0);
  CHECK(g.kind == AnchorKind::Event);
  g = followup_anchor("x", false, 0.0, 10.0, 7.0);
  CHECK(g.G == 7.0);
  CHECK(g.kind == AnchorKind::Censored);
  g = followup_anchor("x", false, 0.0, 12.0, 15.0);
  CHECK(g.G == 12.0);
  CHECK(g.kind == AnchorKind::AdministrativeEnd);
}

TEST_CASE("pseudo-subjects map rows one to one") {
  const auto p = testing::panel_of({row("a", 0, 1, {0}, {1.0}), row("a", 1, 2, {1}, {2.0}),
                                    row("a", 2, 4, {1}, {3.0}, true)},
                                   1, {"L"});
  const auto ps = to_pseudosubjects(p);
  REQUIRE(ps.size() == 3);
  CHECK(ps[2].t_left == 2.0);
  CHECK(ps[2].t_right == 4.0);
  CHECK(ps[2].delta);
  CHECK_FALSE(ps[0].delta);
  CHECK(ps[1].covariates == std::vector<double>{2.0});
  CHECK(to_pseudosubjects(CountingProcessPanel{}).empty());
  const auto sim = simulate_rectangular(small_sim(3));
  CHECK(to_pseudosubjects(sim).size() == sim.rows().size());
}

TEST_CASE("discretize: aligned panel is unchanged and repeat is identity") {
  const auto p = simulate_rectangular(small_sim(4));
  const auto d = discretize(p, 1.0);
  REQUIRE(d.rows().size() == p.rows().size());
  for (std::size_t i = 0; i < d.rows().size(); ++i) {
    auto expect = p.rows()[i];
    expect.t_stop = std::ceil(expect.t_stop);  // event rows end off the grid
    CHECK(d.rows()[i] == expect);
  }
  CHECK(discretize(d, 1.0).rows() == d.rows());
  const auto r = make_ragged(p, 0.6, 0.4, 4);
  const auto dr = discretize(r, 0.5);
  CHECK(discretize(dr, 0.5).rows() == dr.rows());
}

TEST_CASE("discretize: event bin, LOCF covariates and any-on treatment") {
  const auto p = testing::panel_of({row("a", 0, 1.5, {0}, {1.0}), row("a", 1.5, 2.2, {1}, {2.0}),
                                    row("a", 2.2, 3.2, {0}, {3.0}, true)},
                                   1, {"L"});
  const auto d = discretize(p, 1.0);
  REQUIRE(d.rows().size() == 4);
  const auto& last = d.rows().back();
  CHECK(last.t_start == 3.0);
  CHECK(last.t_stop == 4.0);
  CHECK(last.outcome_event);
  CHECK(d.rows()[1].covariates[0] == 1.0);  // row in effect at t=1
  CHECK(d.rows()[2].covariates[0] == 2.0);  // row in effect at t=2
  CHECK(d.rows()[1].treatment[0] == 1);     // on during (1.5, 2]
  CHECK(d.rows()[2].treatment[0] == 1);     // on during (2, 2.2]
  CHECK(d.rows()[0].treatment[0] == 0);
}

TEST_CASE("discretize: bins per subject equal ceil(t_K / dt) on ragged data") {
  const auto r = make_ragged(simulate_rectangular(small_sim(8)), 0.5, 0.3, 8);
  const auto d = discretize(r, 1.0);
  for (std::size_t s = 0; s < r.num_subjects(); ++s)
    CHECK(d.subject_rows(s).size() == static_cast<std::size_t>(std::ceil(r.subject_rows(s).back().t_stop)));
  CHECK_THROWS_AS(discretize(r, 0.0), Error);
}

TEST_CASE("bootstrap selection relabels repeated subjects") {
  const auto p = simulate_rectangular(small_sim(2, 5));
  const std::vector<std::size_t> pick = {1, 1, 3};
  const auto q = p.select(pick, true);
  CHECK(q.num_subjects() == 3);
  CHECK(q.rows().size() == 2 * p.subject_rows(1).size() + p.subject_rows(3).size());
}
