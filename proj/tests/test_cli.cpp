#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "doctest.h"
#include "uavedge/cli.hpp"
#include "uavedge/io.hpp"
#include "uavedge/scenario.hpp"

using namespace uavedge;
namespace fs = std::filesystem;

namespace {

Scenario small_scenario() {
  Scenario s = default_scenario();
  s.nodes.resize(3);
  s.nodes[0].position = Vec3(60, 200, 0);
  s.nodes[1].position = Vec3(150, 90, 0);
  s.nodes[2].position = Vec3(240, 260, 0);
  for (NodeSpec& n : s.nodes) n.data_demand_bits = 6e6;
  s.time.slots = 12;
  s.time.horizon_s = 12;
  s.uav.start = Vec3(0, 250, 100);
  s.uav.end = Vec3(250, 0, 100);
  return s;
}

struct Workdir {
  fs::path dir;
  Workdir() {
    dir = fs::temp_directory_path() / ("uavedge_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    write_text_file(path("small.json"), serialize_scenario(small_scenario()));
  }
  ~Workdir() { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

const Workdir& work() {
  static const Workdir w;
  return w;
}

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream o, e;
  const int code = run_cli(args, o, e);
  return {code, o.str(), e.str()};
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

const std::string& small_plan_path() {
  static const std::string p = [] {
    const std::string out = work().path("plan.json");
    const Run r = cli({"plan", "--scenario", work().path("small.json"), "--out", out});
    REQUIRE(r.code == 0);
    return out;
  }();
  return p;
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(cli({}).code == kExitUsageOrIo);
  CHECK(cli({"fly"}).code == kExitUsageOrIo);
  CHECK(cli({"plan", "--scenario", "/nonexistent.json", "--out", work().path("x.json")}).code == kExitUsageOrIo);
  CHECK(cli({"plan", "--scenario", work().path("small.json"), "--out", work().path("x.json"), "--mode", "greedy"})
            .code == kExitUsageOrIo);
  CHECK(cli({"compare", "--scenario", work().path("small.json"), "--out", work().path("c.csv")}).code ==
        kExitUsageOrIo);
  CHECK(cli({"sweep", "--scenario", work().path("small.json"), "--param", "colour", "--values", "1",
             "--out", work().path("s.csv")})
            .code == kExitUsageOrIo);
  const Run help = cli({"--help"});
  CHECK(help.code == kExitOk);
  CHECK(help.out.find("gen-scenario") != std::string::npos);
}

TEST_CASE("gen-scenario") {
  const std::string a = work().path("gen_a.json"), b = work().path("gen_b.json");
  CHECK(cli({"gen-scenario", "--out", a, "--nodes", "4", "--seed", "9"}).code == kExitOk);
  CHECK(cli({"gen-scenario", "--out", b, "--nodes", "4", "--seed", "9"}).code == kExitOk);
  CHECK(read_text_file(a) == read_text_file(b));
  const Scenario s = load_scenario_file(a);
  CHECK(s.K() == 4);
  CHECK(s.nodes[0].position == generate_topology(9, 4, s.area_m)[0]);
}

TEST_CASE("plan command") {
  const std::string out = small_plan_path();
  CHECK(fs::exists(out + ".slots.csv"));
  const auto trace = read_csv(out + ".trace.csv");
  REQUIRE(trace.size() > 2);
  CHECK(trace[0] == std::vector<std::string>{"outer", "block", "inner", "objective_j"});
  for (size_t i = 2; i < trace.size(); ++i) CHECK(std::stod(trace[i][3]) <= std::stod(trace[i - 1][3]) + 1e-9);
  const auto slots = read_csv(out + ".slots.csv");
  CHECK(slots.size() == 13u);
  CHECK(slots[0].size() == 7u);

  const auto j = nlohmann::json::parse(read_text_file(out));
  CHECK(j["slots"] == 12);
  CHECK(j["energy"]["total_j"].get<double>() > 0.0);

  std::string custom = work().path("custom_trace.csv");
  CHECK(cli({"plan", "--scenario", work().path("small.json"), "--out", work().path("p2.json"), "--trace", custom,
             "--max-outer", "1"})
            .code == kExitOk);
  CHECK(fs::exists(custom));

  Scenario big = small_scenario();
  for (NodeSpec& n : big.nodes) n.data_demand_bits = 60e6;
  write_text_file(work().path("big.json"), serialize_scenario(big));
  const Run r = cli({"plan", "--scenario", work().path("big.json"), "--out", work().path("big_plan.json"), "--mode",
                     "all-local"});
  CHECK(r.code == kExitInfeasible);
  CHECK(!r.err.empty());
}

TEST_CASE("validate command") {
  const std::string report = work().path("report.json");
  const Run r = cli({"validate", "--plan", small_plan_path(), "--scenario", work().path("small.json"), "--out",
                     report, "--samples", "5000"});
  CHECK(r.code == kExitOk);
  const auto j = nlohmann::json::parse(read_text_file(report));
  CHECK(j["samples"] == 5000);
  CHECK(j["seed"] == 42);
  CHECK(read_csv(report + ".speed_hist.csv")[0] == std::vector<std::string>{"bin_low", "bin_high", "count"});
  CHECK(read_csv(report + ".ratio_hist.csv").size() == 51u);

  CHECK(cli({"validate", "--plan", small_plan_path(), "--scenario", work().path("small.json"), "--out", report,
             "--samples", "0"})
            .code == kExitUsageOrIo);
  CHECK(cli({"validate", "--plan", work().path("missing.json"), "--scenario", work().path("small.json"), "--out",
             report})
            .code == kExitUsageOrIo);

  // near-zero budgets: any observed violation exceeds the bound
  Scenario strict = small_scenario();
  strict.robust.rho_trj = 1e-9;
  strict.robust.rho_off = 1e-9;
  strict.robust.jitter_sigma_m = 40.0;
  write_text_file(work().path("strict.json"), serialize_scenario(strict));
  CHECK(cli({"validate", "--plan", small_plan_path(), "--scenario", work().path("strict.json"), "--out", report,
             "--samples", "2000"})
            .code == kExitBudgetViolated);
}

TEST_CASE("compare and sweep") {
  const std::string a = work().path("cmp_a.csv"), b = work().path("cmp_b.csv");
  const std::vector<std::string> args = {"compare", "--scenario", work().path("small.json"), "--mode", "joint",
                                         "--mode", "all-local", "--samples", "2000", "--out", a};
  REQUIRE(cli(args).code == kExitOk);
  auto again = args;
  again.back() = b;
  REQUIRE(cli(again).code == kExitOk);
  CHECK(read_text_file(a) == read_text_file(b));
  const auto rows = read_csv(a);
  REQUIRE(rows.size() == 3u);
  CHECK(rows[0][0] == "mode");
  CHECK(rows[0].back() == "offload_pct_2");
  CHECK(rows[1][0] == "joint");
  CHECK(rows[2][0] == "all-local");
  CHECK(std::stod(rows[1][2]) <= std::stod(rows[2][2]) * (1.0 + 1e-3));
  CHECK(std::stod(rows[2].back()) == 0.0);

  const std::string sw = work().path("sweep.csv");
  Scenario tight = small_scenario();
  write_text_file(work().path("sweep_base.json"), serialize_scenario(tight));
  REQUIRE(cli({"sweep", "--scenario", work().path("sweep_base.json"), "--param", "data_mbit", "--values", "3,6,30",
               "--samples", "1000", "--out", sw})
              .code == kExitOk);
  const auto srows = read_csv(sw);
  REQUIRE(srows.size() == 4u);
  CHECK(srows[0][0] == "data_mbit");
  CHECK(srows[1][0] == "3");
  CHECK(srows[3][1] == "ok");
  for (size_t i = 2; i < srows.size(); ++i) CHECK(std::stod(srows[i][2]) >= std::stod(srows[i - 1][2]));

  // a row that cannot be planned is recorded, not fatal for the others
  const std::string bad = work().path("sweep_bad.csv");
  const Run r = cli({"sweep", "--scenario", work().path("sweep_base.json"), "--param", "data_mbit", "--values",
                     "3,60", "--mode", "all-local", "--samples", "500", "--out", bad});
  CHECK(r.code == kExitInfeasible);
  const auto brows = read_csv(bad);
  REQUIRE(brows.size() == 3u);
  CHECK(brows[1][1] == "ok");
  CHECK(brows[2][1] == "infeasible");
  CHECK(brows[2].size() == brows[0].size());
}
