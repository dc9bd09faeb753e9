#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "uavedge/cli.hpp"
#include "uavedge/errors.hpp"
#include "uavedge/io.hpp"
#include "uavedge/montecarlo.hpp"
#include "uavedge/planner.hpp"
#include "uavedge/robust.hpp"
#include "uavedge/scenario.hpp"

namespace py = pybind11;
using namespace uavedge;

namespace {

Eigen::MatrixXd waypoints_array(const Plan& p) {
  Eigen::MatrixXd w(static_cast<Eigen::Index>(p.waypoints.size()), 3);
  for (size_t n = 0; n < p.waypoints.size(); ++n) w.row(static_cast<Eigen::Index>(n)) = p.waypoints[n].transpose();
  return w;
}

void set_waypoints(Plan& p, const Eigen::MatrixXd& w) {
  if (w.cols() != 3) throw DimensionError("waypoints must be (N+1) x 3");
  p.waypoints.resize(static_cast<size_t>(w.rows()));
  for (Eigen::Index n = 0; n < w.rows(); ++n) p.waypoints[static_cast<size_t>(n)] = w.row(n).transpose();
}

py::dict energy_dict(const EnergyBreakdown& e) {
  py::dict d;
  d["local_j"] = e.local_j;
  d["transmit_j"] = e.transmit_j;
  d["edge_raw_j"] = e.edge_raw_j;
  d["edge_weighted_j"] = e.edge_weighted_j;
  d["total_j"] = e.total_j;
  return d;
}

Vec3 vec3(const std::vector<double>& v) {
  if (v.size() != 3) throw DimensionError("expected 3 coordinates");
  return Vec3(v[0], v[1], v[2]);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Robust UAV trajectory and computation-offloading planner";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<InfeasibleScenarioError>(m, "InfeasibleScenarioError", PyExc_RuntimeError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);

  py::class_<Scenario>(m, "Scenario")
      .def_static("from_json", &load_scenario, py::arg("text"))
      .def_static("load", &load_scenario_file, py::arg("path"))
      .def_static("default", &default_scenario)
      .def("to_json", &serialize_scenario)
      .def("validate", [](const Scenario& s) { validate(s); })
      .def_property_readonly("K", &Scenario::K)
      .def_property_readonly("N", &Scenario::N)
      .def_property(
          "slots", [](const Scenario& s) { return s.time.slots; }, [](Scenario& s, int v) { s.time.slots = v; })
      .def_property(
          "horizon_s", [](const Scenario& s) { return s.time.horizon_s; },
          [](Scenario& s, double v) { s.time.horizon_s = v; })
      .def_property(
          "v_max", [](const Scenario& s) { return s.uav.v_max; }, [](Scenario& s, double v) { s.uav.v_max = v; })
      .def_property(
          "sigma_m", [](const Scenario& s) { return s.robust.jitter_sigma_m; },
          [](Scenario& s, double v) { s.robust.jitter_sigma_m = v; })
      .def_property(
          "rho_trj", [](const Scenario& s) { return s.robust.rho_trj; },
          [](Scenario& s, double v) { s.robust.rho_trj = v; })
      .def_property(
          "rho_off", [](const Scenario& s) { return s.robust.rho_off; },
          [](Scenario& s, double v) { s.robust.rho_off = v; })
      .def_property(
          "start", [](const Scenario& s) { return std::vector<double>{s.uav.start.x(), s.uav.start.y(), s.uav.start.z()}; },
          [](Scenario& s, const std::vector<double>& v) { s.uav.start = vec3(v); })
      .def_property(
          "end", [](const Scenario& s) { return std::vector<double>{s.uav.end.x(), s.uav.end.y(), s.uav.end.z()}; },
          [](Scenario& s, const std::vector<double>& v) { s.uav.end = vec3(v); })
      .def_property(
          "node_positions",
          [](const Scenario& s) {
            Eigen::MatrixXd w(s.K(), 3);
            for (int k = 0; k < s.K(); ++k) w.row(k) = s.nodes[static_cast<size_t>(k)].position.transpose();
            return w;
          },
          [](Scenario& s, const Eigen::MatrixXd& w) {
            if (w.cols() != 3) throw DimensionError("node positions must be K x 3");
            const NodeSpec proto = s.nodes.empty() ? NodeSpec{} : s.nodes.front();
            s.nodes.resize(static_cast<size_t>(w.rows()), proto);
            for (Eigen::Index k = 0; k < w.rows(); ++k) s.nodes[static_cast<size_t>(k)].position = w.row(k).transpose();
          })
      .def_property(
          "data_demand_bits",
          [](const Scenario& s) {
            std::vector<double> v;
            for (const NodeSpec& n : s.nodes) v.push_back(n.data_demand_bits);
            return v;
          },
          [](Scenario& s, const std::vector<double>& v) {
            if (v.size() != s.nodes.size()) throw DimensionError("one demand per node expected");
            for (size_t k = 0; k < v.size(); ++k) s.nodes[k].data_demand_bits = v[k];
          })
      .def("__eq__", [](const Scenario& a, const Scenario& b) { return a == b; })
      .def("__repr__", [](const Scenario& s) {
        std::ostringstream ss;
        ss << "<Scenario K=" << s.K() << " N=" << s.N() << " T=" << s.time.horizon_s << "s>";
        return ss.str();
      });

  py::class_<Plan>(m, "Plan")
      .def_static("zeros", &Plan::zeros, py::arg("N"), py::arg("K"))
      .def_static("from_json", [](const std::string& t) { return parse_plan(t); }, py::arg("text"))
      .def_static("load", &load_plan_file, py::arg("path"))
      .def("to_json", &serialize_plan, py::arg("scenario"))
      .def_property_readonly("N", &Plan::N)
      .def_property_readonly("K", &Plan::K)
      .def_property("waypoints", &waypoints_array, &set_waypoints)
      .def_readwrite("tau", &Plan::tau)
      .def_readwrite("power", &Plan::power)
      .def_readwrite("d_loc", &Plan::d_loc)
      .def_readwrite("d_off", &Plan::d_off)
      .def_readwrite("f_edg", &Plan::f_edg);

  py::class_<ScaTrace>(m, "TraceRow")
      .def_readonly("outer", &ScaTrace::outer)
      .def_property_readonly("block", [](const ScaTrace& t) { return to_string(t.block); })
      .def_readonly("inner", &ScaTrace::inner)
      .def_readonly("objective_j", &ScaTrace::objective_j);

  py::class_<PlanResult>(m, "PlanResult")
      .def_readonly("plan", &PlanResult::plan)
      .def_property_readonly("energy", [](const PlanResult& r) { return energy_dict(r.energy); })
      .def_readonly("trace", &PlanResult::trace)
      .def_readonly("outer_history", &PlanResult::outer_history)
      .def_readonly("outer_iterations", &PlanResult::outer_iterations)
      .def_readonly("converged", &PlanResult::converged);

  m.def(
      "plan",
      [](const Scenario& s, const std::string& mode, double eps_outer, int max_outer, double tau_min) {
        PlannerOptions o;
        o.mode = parse_plan_mode(mode);
        o.eps_outer = eps_outer;
        o.max_outer = max_outer;
        o.tau_min = tau_min;
        py::gil_scoped_release release;
        return plan(s, o);
      },
      py::arg("scenario"), py::arg("mode") = "joint", py::arg("eps_outer") = PlannerOptions{}.eps_outer,
      py::arg("max_outer") = PlannerOptions{}.max_outer, py::arg("tau_min") = PlannerOptions{}.tau_min,
      "Run the alternating planner. mode: joint, all-local, all-offload or non-robust.");

  m.def("init_plan", [](const Scenario& s) { return init_plan(s); }, py::arg("scenario"));
  m.def(
      "total_energy", [](const Plan& p, const Scenario& s) { return energy_dict(total_energy(p, s)); },
      py::arg("plan"), py::arg("scenario"));
  m.def(
      "check_plan",
      [](const Plan& p, const Scenario& s) {
        py::dict d;
        for (const ConstraintEntry& e : check_plan_deterministic(p, s).entries) d[py::str(e.id)] = e.worst_residual;
        return d;
      },
      py::arg("plan"), py::arg("scenario"), "Worst residual per constraint family (<= 0 means satisfied).");
  m.def(
      "check_plan_robust",
      [](const Plan& p, const Scenario& s) {
        const RobustCheck r = check_plan_robust(p, s);
        py::dict d;
        d["worst_speed"] = r.worst_speed;
        d["worst_offload"] = r.worst_offload;
        d["speed_slot"] = r.speed_slot;
        d["offload_slot"] = r.offload_slot;
        d["offload_node"] = r.offload_node;
        return d;
      },
      py::arg("plan"), py::arg("scenario"));
  m.def("effective_max_distance", &effective_max_distance, py::arg("scenario"), py::arg("slot") = -1);
  m.def(
      "bernstein_margin",
      [](const Eigen::Matrix3d& A, const Eigen::Vector3d& b, double c, double rho) {
        BernsteinTriple t;
        t.A = A;
        t.b = b;
        t.c = c;
        t.rho = rho;
        const RobustMargin r = bernstein_margin(t);
        return py::make_tuple(r.margin, r.mu_star, r.nu_star);
      },
      py::arg("A"), py::arg("b"), py::arg("c"), py::arg("rho"), "Returns (margin, mu*, nu*).");

  m.def(
      "sample_jitter",
      [](std::uint64_t seed, int samples, int N, double sigma) {
        const JitterTensor t = sample_jitter(seed, samples, N, sigma);
        py::array_t<double> a({t.samples, t.points, 3});
        std::copy(t.data.begin(), t.data.end(), a.mutable_data());
        return a;
      },
      py::arg("seed"), py::arg("samples"), py::arg("N"), py::arg("sigma"));

  m.def(
      "histogram",
      [](const std::vector<double>& v, int bins) {
        const Histogram h = histogram(v, bins);
        return py::make_tuple(h.low, h.high, h.counts);
      },
      py::arg("values"), py::arg("bins"), "Returns (bin_low, bin_high, count).");

  py::class_<ValidationReport>(m, "ValidationReport")
      .def_readonly("samples", &ValidationReport::samples)
      .def_readonly("seed", &ValidationReport::seed)
      .def_readonly("sigma", &ValidationReport::sigma)
      .def_readonly("speed_violation_freq", &ValidationReport::speed_violation_freq)
      .def_readonly("worst_speed_freq", &ValidationReport::worst_speed_freq)
      .def_readonly("worst_speed_slot", &ValidationReport::worst_speed_slot)
      .def_readonly("worst_offload_freq", &ValidationReport::worst_offload_freq)
      .def_readonly("mean_completion_ratio", &ValidationReport::mean_completion_ratio)
      .def_property_readonly("energy", [](const ValidationReport& r) { return energy_dict(r.energy); })
      .def_property_readonly("completion",
                             [](const ValidationReport& r) {
                               py::list l;
                               for (const CompletionStats& c : r.completion) {
                                 py::dict d;
                                 d["slot"] = c.slot;
                                 d["node"] = c.node;
                                 d["planned_bits"] = c.planned_bits;
                                 d["min"] = c.min;
                                 d["mean"] = c.mean;
                                 d["q05"] = c.q05;
                                 d["q50"] = c.q50;
                                 d["q95"] = c.q95;
                                 d["violation_freq"] = c.violation_freq;
                                 l.append(d);
                               }
                               return l;
                             })
      .def("to_json", &serialize_report);

  m.def(
      "validate_plan",
      [](const Plan& p, const Scenario& s, int samples, std::uint64_t seed) {
        py::gil_scoped_release release;
        return validate_plan(p, s, samples, seed);
      },
      py::arg("plan"), py::arg("scenario"), py::arg("samples") = 100000, py::arg("seed") = 42);
  m.def("within_budget", &within_budget, py::arg("report"), py::arg("scenario"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a command-line verb in-process. Returns (exit_code, stdout, stderr).");
}
