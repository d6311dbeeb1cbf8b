#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Workdir {
  fs::path path;
  explicit Workdir(const std::string& name) : path(fs::temp_directory_path() / ("ctmsm_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~Workdir() { fs::remove_all(path); }
  std::string operator/(const std::string& file) const { return (path / file).string(); }
};

int run(const std::string& args, const std::string& stdout_file = "/dev/null") {
  const std::string cmd = std::string(CTMSM_CLI_PATH) + " " + args + " >" + stdout_file + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const std::string& file, const std::string& text) { std::ofstream(file) << text; }

}  // namespace

TEST_CASE("cli: simulate is deterministic") {
  Workdir d("sim");
  REQUIRE(run("simulate --seed 7 --n 50 --out " + (d / "a.csv")) == 0);
  REQUIRE(run("simulate --seed 7 --n 50 --threads 3 --out " + (d / "b.csv")) == 0);
  CHECK(!slurp(d / "a.csv").empty());
  CHECK(slurp(d / "a.csv") == slurp(d / "b.csv"));
}

TEST_CASE("cli: pipeline from simulation to estimands") {
  Workdir d("pipeline");
  REQUIRE(run("simulate --seed 2 --n 250 --out " + (d / "p.csv")) == 0);
  REQUIRE(run("weights --estimator iv --panel " + (d / "p.csv") + " --out " + (d / "w.csv")) == 0);
  REQUIRE(run("fit --panel " + (d / "p.csv") + " --weights " + (d / "w.csv") + " --out " + (d / "f.json")) == 0);
  write_file(d / "r.json", R"({"regimens": [{"label": "always-A1", "static": [1, 0]}]})");
  fs::create_directories(d / "curves");
  REQUIRE(run("estimands --fit " + (d / "f.json") + " --regimens " + (d / "r.json") + " --curves-dir " +
              (d / "curves") + " --out " + (d / "e.csv")) == 0);
  const auto estimands = slurp(d / "e.csv");
  CHECK(estimands.rfind("regimen_label,S_at_tau,rmst_tau", 0) == 0);
  CHECK(estimands.find("always-A1,") != std::string::npos);
  std::string curve_file;
  for (const auto& e : fs::directory_iterator(d.path / "curves")) curve_file = e.path().string();
  REQUIRE(!curve_file.empty());
  std::istringstream curve(slurp(curve_file));
  std::string header, first;
  std::getline(curve, header);
  std::getline(curve, first);
  CHECK(header == "t,S");
  CHECK(first == "0,1");
}

TEST_CASE("cli: weights and fit are identical across thread counts") {
  Workdir d("threads");
  REQUIRE(run("simulate --seed 4 --n 150 --out " + (d / "p.csv")) == 0);
  for (const std::string t : {"1", "3"}) {
    REQUIRE(run("weights --estimator iii --threads " + t + " --panel " + (d / "p.csv") + " --out " +
                (d / ("w" + t + ".csv"))) == 0);
  }
  CHECK(slurp(d / "w1.csv") == slurp(d / "w3.csv"));
}

TEST_CASE("cli: benchmark output does not depend on the thread count") {
  Workdir d("bench");
  REQUIRE(run("benchmark --seed 3 --n 200 --reps 2 --estimators i,iv --threads 1 --out " + (d / "a.csv")) == 0);
  REQUIRE(run("benchmark --seed 3 --n 200 --reps 2 --estimators i,iv --threads 2 --out " + (d / "b.csv")) == 0);
  CHECK(slurp(d / "a.csv").find("MAB") != std::string::npos);
  CHECK(slurp(d / "a.csv") == slurp(d / "b.csv"));
}

TEST_CASE("cli: print-config reflects the config file") {
  Workdir d("config");
  write_file(d / "c.json", R"({"seed": 11, "simulation": {"n": 40}})");
  REQUIRE(run("print-config --config " + (d / "c.json"), d / "out.json") == 0);
  const auto j = nlohmann::json::parse(slurp(d / "out.json"));
  CHECK(j.at("seed") == 11);
  CHECK(j.at("simulation").at("n") == 40);
  write_file(d / "bad.json", R"({"seed": "eleven"})");
  CHECK(run("print-config --config " + (d / "bad.json")) == 2);
}

TEST_CASE("cli: exit codes by error category") {
  Workdir d("codes");
  CHECK(run("simulate --n 5 --out " + (d / "x.csv")) == 2);
  CHECK(run("weights --estimator v --panel x --out y") == 2);
  CHECK(run("simulate --seed 1 --n 5 --out " + (d / "missing/x.csv")) == 5);
  CHECK(run("weights --panel " + (d / "nothere.csv") + " --out " + (d / "w.csv")) == 5);
  write_file(d / "bad.csv", "garbage\n");
  CHECK(run("weights --panel " + (d / "bad.csv") + " --out " + (d / "w.csv")) == 3);
  // no event while off A2 in this draw: the structural fit has no maximum
  REQUIRE(run("simulate --seed 7 --n 250 --out " + (d / "p.csv")) == 0);
  REQUIRE(run("weights --estimator i --panel " + (d / "p.csv") + " --out " + (d / "w.csv")) == 0);
  CHECK(run("fit --panel " + (d / "p.csv") + " --weights " + (d / "w.csv") + " --out " + (d / "f.json")) == 4);
}
