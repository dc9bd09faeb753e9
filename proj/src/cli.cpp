#include "uavedge/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "uavedge/errors.hpp"
#include "uavedge/io.hpp"
#include "uavedge/montecarlo.hpp"
#include "uavedge/planner.hpp"
#include "uavedge/scenario.hpp"

namespace uavedge {

namespace {

struct Options {
  std::string scenario, plan, out, trace, param;
  std::vector<std::string> modes;
  std::vector<double> values;
  int samples = 100000;
  std::uint64_t seed = 42;
  int nodes = 10;
  PlannerOptions planner;
};

using Setter = std::function<void(Scenario&, double)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> m = {
      {"data_mbit",
       [](Scenario& s, double v) {
         for (NodeSpec& n : s.nodes) n.data_demand_bits = v * 1e6;
       }},
      {"horizon_s", [](Scenario& s, double v) { s.time.horizon_s = v; }},
      {"slots", [](Scenario& s, double v) { s.time.slots = static_cast<int>(std::lround(v)); }},
      {"v_max", [](Scenario& s, double v) { s.uav.v_max = v; }},
      {"sigma_m", [](Scenario& s, double v) { s.robust.jitter_sigma_m = v; }},
      {"rho",
       [](Scenario& s, double v) {
         s.robust.rho_trj = s.robust.rho_off = v;
         s.robust.rho_trj_per_slot.clear();
         s.robust.rho_off_per_pair.clear();
       }},
      {"p_max_w",
       [](Scenario& s, double v) {
         for (NodeSpec& n : s.nodes) n.max_tx_power_w = v;
       }},
  };
  return m;
}

std::string num(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

void write_file(const std::string& path, const std::function<void(std::ostream&)>& fn) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::ios_base::failure("cannot write '" + path + "'");
  fn(f);
  if (!f) throw std::ios_base::failure("write failed for '" + path + "'");
}

void print_energy(std::ostream& out, const EnergyBreakdown& e) {
  out << "energy_j total=" << num(e.total_j) << " local=" << num(e.local_j) << " transmit=" << num(e.transmit_j)
      << " edge=" << num(e.edge_weighted_j) << " edge_raw=" << num(e.edge_raw_j) << '\n';
}

double offload_percent(const Plan& p, const Scenario& s, int k) {
  const double d = s.nodes[static_cast<size_t>(k)].data_demand_bits;
  return d > 0.0 ? 100.0 * p.d_off.col(k).sum() / d : 0.0;
}

int cmd_plan(const Options& o, std::ostream& out, std::ostream& err) {
  const Scenario s = load_scenario_file(o.scenario);
  const PlanResult r = plan(s, o.planner);
  write_text_file(o.out, serialize_plan(r.plan, s));
  write_file(o.trace.empty() ? o.out + ".trace.csv" : o.trace,
             [&](std::ostream& f) { write_plan_trace_csv(f, r.trace); });
  write_file(o.out + ".slots.csv", [&](std::ostream& f) { write_slots_csv(f, r.plan, s); });
  out << "mode=" << to_string(o.planner.mode) << " outer_iterations=" << r.outer_iterations
      << " converged=" << (r.converged ? "yes" : "no") << '\n';
  print_energy(out, r.energy);
  if (!r.converged) err << "warning: outer loop stopped at the iteration cap\n";
  return kExitOk;
}

int cmd_validate(const Options& o, std::ostream& out, std::ostream&) {
  const Scenario s = load_scenario_file(o.scenario);
  const Plan p = load_plan_file(o.plan);
  const ValidationReport r = validate_plan(p, s, o.samples, o.seed);
  write_text_file(o.out, serialize_report(r));
  write_file(o.out + ".speed_hist.csv", [&](std::ostream& f) { write_histogram_csv(f, r.speed_hist); });
  write_file(o.out + ".ratio_hist.csv", [&](std::ostream& f) { write_histogram_csv(f, r.ratio_hist); });
  const bool ok = within_budget(r, s);
  out << "samples=" << r.samples << " seed=" << r.seed << " worst_speed_freq=" << num(r.worst_speed_freq)
      << " worst_offload_freq=" << num(r.worst_offload_freq) << " within_budget=" << (ok ? "yes" : "no") << '\n';
  return ok ? kExitOk : kExitBudgetViolated;
}

struct Row {
  std::string label;
  std::string status = "ok";
  EnergyBreakdown energy;
  ValidationReport report;
  bool budget = false;
  int outer = 0;
  std::vector<double> offload_pct;
};

Row run_row(const std::string& label, const Scenario& s, const PlannerOptions& po, const Options& o, std::ostream& err) {
  Row row;
  row.label = label;
  try {
    validate(s);
    const PlanResult r = plan(s, po);
    row.energy = r.energy;
    row.outer = r.outer_iterations;
    if (!r.converged) row.status = "not_converged";
    // same seed for every row: paired comparison
    row.report = validate_plan(r.plan, s, o.samples, o.seed);
    row.budget = within_budget(row.report, s);
    for (int k = 0; k < s.K(); ++k) row.offload_pct.push_back(offload_percent(r.plan, s, k));
  } catch (const InfeasibleScenarioError& e) {
    row.status = "infeasible";
    err << label << ": " << e.what() << '\n';
  } catch (const std::exception& e) {
    row.status = "error";
    err << label << ": " << e.what() << '\n';
  }
  return row;
}

void write_summary(std::ostream& f, const std::string& key, int K, const std::vector<Row>& rows) {
  f << key << ",status,total_j,local_j,transmit_j,edge_j,edge_raw_j,worst_speed_freq,worst_offload_freq,"
           "within_budget,outer_iterations";
  for (int k = 0; k < K; ++k) f << ",offload_pct_" << k;
  f << '\n';
  for (const Row& r : rows) {
    f << r.label << ',' << r.status;
    if (r.status == "infeasible" || r.status == "error") {
      for (int c = 0; c < 9 + K; ++c) f << ',';
      f << '\n';
      continue;
    }
    f << ',' << num(r.energy.total_j) << ',' << num(r.energy.local_j) << ',' << num(r.energy.transmit_j) << ','
      << num(r.energy.edge_weighted_j) << ',' << num(r.energy.edge_raw_j) << ',' << num(r.report.worst_speed_freq)
      << ',' << num(r.report.worst_offload_freq) << ',' << (r.budget ? 1 : 0) << ',' << r.outer;
    for (double v : r.offload_pct) f << ',' << num(v);
    f << '\n';
  }
}

int finish_rows(const std::string& key, const std::vector<Row>& rows, int K, const Options& o, std::ostream& out) {
  write_file(o.out, [&](std::ostream& f) { write_summary(f, key, K, rows); });
  int failed = 0;
  for (const Row& r : rows) {
    out << key << '=' << r.label << " status=" << r.status;
    if (r.status != "infeasible" && r.status != "error") out << " total_j=" << num(r.energy.total_j);
    out << '\n';
    if (r.status == "infeasible" || r.status == "error") ++failed;
  }
  if (failed == 0) return kExitOk;
  const bool all_infeasible = std::all_of(rows.begin(), rows.end(), [](const Row& r) {
    return r.status == "ok" || r.status == "not_converged" || r.status == "infeasible";
  });
  return all_infeasible ? kExitInfeasible : kExitUsageOrIo;
}

int cmd_compare(const Options& o, std::ostream& out, std::ostream& err) {
  const Scenario s = load_scenario_file(o.scenario);
  std::vector<PlanMode> modes;
  for (const std::string& m : o.modes) modes.push_back(parse_plan_mode(m));
  std::vector<Row> rows;
  for (PlanMode m : modes) {
    PlannerOptions po = o.planner;
    po.mode = m;
    rows.push_back(run_row(to_string(m), s, po, o, err));
  }
  return finish_rows("mode", rows, s.K(), o, out);
}

int cmd_sweep(const Options& o, std::ostream& out, std::ostream& err) {
  const Scenario base = load_scenario_file(o.scenario);
  const auto it = setters().find(o.param);
  if (it == setters().end()) throw CLI::ValidationError("--param", "unknown sweep parameter '" + o.param + "'");
  if (o.modes.size() > 1) throw CLI::ValidationError("--mode", "sweep takes at most one mode");
  PlannerOptions po = o.planner;
  if (!o.modes.empty()) po.mode = parse_plan_mode(o.modes.front());
  std::vector<Row> rows;
  for (double v : o.values) {
    Scenario s = base;
    it->second(s, v);
    rows.push_back(run_row(num(v), s, po, o, err));
  }
  return finish_rows(o.param, rows, base.K(), o, out);
}

int cmd_gen(const Options& o, std::ostream& out) {
  Scenario s = default_scenario();
  const NodeSpec proto = s.nodes.front();
  s.nodes.assign(static_cast<size_t>(o.nodes), proto);
  const std::vector<Vec3> pos = generate_topology(o.seed, o.nodes, s.area_m);
  for (size_t k = 0; k < pos.size(); ++k) s.nodes[k].position = pos[k];
  validate(s);
  write_text_file(o.out, serialize_scenario(s));
  out << "wrote " << o.out << " (K=" << o.nodes << ", seed=" << o.seed << ")\n";
  return kExitOk;
}

void add_planner_flags(CLI::App* c, Options& o) {
  c->add_option("--eps-outer", o.planner.eps_outer, "Relative outer-loop tolerance")->check(CLI::PositiveNumber);
  c->add_option("--max-outer", o.planner.max_outer, "Outer iteration cap")->check(CLI::PositiveNumber);
  c->add_option("--tau-min", o.planner.tau_min, "Smallest positive time share")->check(CLI::PositiveNumber);
}

std::string mode_help() { return "joint | all-local | all-offload | non-robust"; }

}  // namespace

std::vector<std::string> sweep_parameters() {
  std::vector<std::string> v;
  for (const auto& [k, _] : setters()) v.push_back(k);
  return v;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Robust UAV trajectory and offloading planner"};
  app.require_subcommand(1, 1);
  auto mode_check = CLI::IsMember({"joint", "all-local", "all-offload", "non-robust"});

  CLI::App* plan_cmd = app.add_subcommand("plan", "Plan trajectory and offloading");
  plan_cmd->add_option("--scenario", o.scenario, "Scenario JSON")->required();
  plan_cmd->add_option("--out", o.out, "Plan JSON; side files <out>.trace.csv and <out>.slots.csv")->required();
  plan_cmd->add_option("--trace", o.trace, "Convergence trace CSV (default <out>.trace.csv)");
  std::string mode = "joint";
  plan_cmd->add_option("--mode", mode, mode_help())->check(mode_check);
  add_planner_flags(plan_cmd, o);

  CLI::App* val_cmd = app.add_subcommand("validate", "Monte Carlo validation of a plan");
  val_cmd->add_option("--plan", o.plan, "Plan JSON")->required();
  val_cmd->add_option("--scenario", o.scenario, "Scenario JSON")->required();
  val_cmd->add_option("--out", o.out, "Report JSON; histograms at <out>.speed_hist.csv / <out>.ratio_hist.csv")
      ->required();

  CLI::App* cmp_cmd = app.add_subcommand("compare", "Plan and validate several modes");
  cmp_cmd->add_option("--scenario", o.scenario, "Scenario JSON")->required();
  cmp_cmd->add_option("--mode", o.modes, mode_help())->required()->check(mode_check);
  cmp_cmd->add_option("--out", o.out, "Summary CSV")->required();
  add_planner_flags(cmp_cmd, o);

  CLI::App* swp_cmd = app.add_subcommand("sweep", "Plan and validate over a parameter grid");
  swp_cmd->add_option("--scenario", o.scenario, "Scenario JSON")->required();
  std::string params;
  for (const std::string& p : sweep_parameters()) params += (params.empty() ? "" : " | ") + p;
  swp_cmd->add_option("--param", o.param, params)->required();
  swp_cmd->add_option("--values", o.values, "Comma-separated grid")->required()->delimiter(',');
  swp_cmd->add_option("--mode", o.modes, mode_help())->check(mode_check);
  swp_cmd->add_option("--out", o.out, "Summary CSV")->required();
  add_planner_flags(swp_cmd, o);

  for (CLI::App* c : {val_cmd, cmp_cmd, swp_cmd}) {
    c->add_option("--samples", o.samples, "Monte Carlo samples")->capture_default_str()->check(CLI::PositiveNumber);
    c->add_option("--seed", o.seed, "RNG seed")->capture_default_str();
  }

  CLI::App* gen_cmd = app.add_subcommand("gen-scenario", "Write a default scenario with random node placement");
  gen_cmd->add_option("--out", o.out, "Scenario JSON")->required();
  gen_cmd->add_option("--seed", o.seed, "Topology seed")->capture_default_str();
  gen_cmd->add_option("--nodes", o.nodes, "Node count")->capture_default_str()->check(CLI::PositiveNumber);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    for (CLI::App* c : app.get_subcommands()) err << c->help();
    return kExitUsageOrIo;
  }

  try {
    o.planner.mode = parse_plan_mode(mode);
    if (plan_cmd->parsed()) return cmd_plan(o, out, err);
    if (val_cmd->parsed()) return cmd_validate(o, out, err);
    if (cmp_cmd->parsed()) return cmd_compare(o, out, err);
    if (swp_cmd->parsed()) return cmd_sweep(o, out, err);
    return cmd_gen(o, out);
  } catch (const InfeasibleScenarioError& e) {
    err << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const CLI::Error& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsageOrIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsageOrIo;
  }
}

}  // namespace uavedge
