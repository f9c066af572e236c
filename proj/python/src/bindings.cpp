#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "flowtracer/analysis.hpp"
#include "flowtracer/error.hpp"
#include "flowtracer/experiment.hpp"
#include "flowtracer/fabric.hpp"
#include "flowtracer/flowgen.hpp"
#include "flowtracer/hashing.hpp"
#include "flowtracer/routing.hpp"
#include "flowtracer/tracer.hpp"
#include "json.hpp"

namespace py = pybind11;
namespace ft = flowtracer;
using nlohmann::json;

namespace {

// Documents cross the boundary as plain dicts and lists via the json module.
json to_json(const py::handle& obj) {
  return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::object from_json(const json& doc) {
  return py::module_::import("json").attr("loads")(doc.dump());
}

ft::RoutingPolicy policy_from(const py::object& policy) {
  if (policy.is_none()) return ft::RoutingPolicy::ecmp({});
  const json doc = to_json(policy);
  if (doc.value("mode", std::string("ecmp")) == "static") {
    return ft::RoutingPolicy::from_tables(ft::static_tables_from_json(doc.at("tables")));
  }
  return ft::RoutingPolicy::ecmp(ft::ecmp_config_from_json(doc));
}

ft::RunPlan plan_from(std::optional<int> procs, int threads, const std::string& mode, int hop_limit) {
  ft::RunPlan plan;
  plan.procs = procs;
  plan.threads = threads;
  plan.mode = ft::parse_connection_mode(mode);
  plan.hop_limit = hop_limit;
  return plan;
}

json paths_to_json(const std::vector<ft::TracedPath>& paths) {
  ft::RunResult r;
  r.paths = paths;
  return ft::run_result_to_json(r).at("flows");
}

}  // namespace

PYBIND11_MODULE(_flowtracer, m) {
  m.doc() = "Hop-by-hop flow tracing and path imbalance analysis for simulated leaf-spine fabrics";

  auto base = py::register_exception<ft::Error>(m, "FlowtracerError");
  py::register_exception<ft::ParseError>(m, "ParseError", base);
  py::register_exception<ft::ValidationError>(m, "ValidationError", base);
  py::register_exception<ft::ShapeMismatch>(m, "ShapeMismatch", base);
  py::register_exception<ft::ZeroIdeal>(m, "ZeroIdeal", base);

  m.def("reference_testbed", [] { return from_json(ft::topology_to_json(ft::generate_reference_testbed())); },
        "Two racks of eight 4x100G hosts, four leaves and four spines.");

  m.def("validate_topology",
        [](const py::object& topology) {
          return from_json(ft::topology_to_json(ft::topology_from_json(to_json(topology))));
        },
        py::arg("topology"), "Round-trips a topology document, raising on any structural violation.");

  m.def("bipartite_workload",
        [](const py::object& topology, int flows_per_pair, std::uint64_t seed, bool bidirectional) {
          const auto topo = ft::topology_from_json(to_json(topology));
          return from_json(ft::workload_to_json(ft::make_bipartite_workload(topo, flows_per_pair, seed, bidirectional)));
        },
        py::arg("topology"), py::arg("flows_per_pair") = 16, py::arg("seed") = 0, py::arg("bidirectional") = true);

  m.def("generate_flows",
        [](const py::object& workload, const py::object& topology) {
          const auto topo = ft::topology_from_json(to_json(topology));
          const auto flows = ft::generate_flows(ft::workload_from_json(to_json(workload)), topo);
          std::vector<ft::TracedPath> paths;
          for (const auto& f : flows) paths.push_back(ft::TracedPath{f, {}, false});
          json out = paths_to_json(paths);
          for (auto& f : out) {
            f.erase("hops");
            f.erase("complete");
          }
          return from_json(out);
        },
        py::arg("workload"), py::arg("topology"));

  m.def("balanced_static_tables",
        [](const py::object& workload, const py::object& topology) {
          const auto topo = ft::topology_from_json(to_json(topology));
          const auto flows = ft::generate_flows(ft::workload_from_json(to_json(workload)), topo);
          return from_json(ft::static_tables_to_json(ft::build_balanced_static_tables(topo, flows)));
        },
        py::arg("workload"), py::arg("topology"));

  m.def("fnv1a64", [](const py::bytes& data) { return ft::fnv1a64(std::string_view(data)); }, py::arg("data"));

  m.def("trace",
        [](const py::object& workload, const py::object& topology, const py::object& policy, std::optional<int> procs,
           int threads, const std::string& mode, int hop_limit, int connect_latency_ms, int query_latency_ms) {
          const auto topo = ft::topology_from_json(to_json(topology));
          const auto spec = ft::workload_from_json(to_json(workload));
          const auto pol = policy_from(policy);
          const auto plan = plan_from(procs, threads, mode, hop_limit);
          ft::AgentConfig agents;
          agents.connect_latency = std::chrono::milliseconds(connect_latency_ms);
          agents.query_latency = std::chrono::milliseconds(query_latency_ms);
          ft::RunResult result;
          {
            py::gil_scoped_release release;
            result = ft::trace_in_process(spec, topo, pol, plan, agents);
          }
          return from_json(ft::run_result_to_json(result));
        },
        py::arg("workload"), py::arg("topology"), py::arg("policy") = py::none(), py::arg("procs") = py::none(),
        py::arg("threads") = 1, py::arg("mode") = "parallel_persistent", py::arg("hop_limit") = 16,
        py::arg("connect_latency_ms") = 0, py::arg("query_latency_ms") = 0,
        "Starts in-process agents, traces every workload flow and returns the run result.");

  m.def("oracle_paths",
        [](const py::object& workload, const py::object& topology, const py::object& policy, int hop_limit) {
          const auto topo = ft::topology_from_json(to_json(topology));
          const auto spec = ft::workload_from_json(to_json(workload));
          return from_json(paths_to_json(ft::oracle_paths(spec, topo, policy_from(policy), hop_limit)));
        },
        py::arg("workload"), py::arg("topology"), py::arg("policy") = py::none(), py::arg("hop_limit") = 16);

  m.def("analyze",
        [](const py::object& run, const py::object& topology) {
          const auto topo = ft::topology_from_json(to_json(topology));
          const auto result = ft::run_result_from_json(to_json(run));
          const auto a = ft::analyze(result, topo);
          std::vector<ft::TracedPath> complete;
          for (const auto& p : result.paths) {
            if (p.complete) complete.push_back(p);
          }
          return from_json({{"imbalance", ft::imbalance_to_json(a.imbalance)},
                            {"throughput", ft::throughput_to_json(a.throughput, complete)}});
        },
        py::arg("run"), py::arg("topology"));

  m.def("compare",
        [](const py::object& run_a, const py::object& run_b, const py::object& topology) {
          const auto topo = ft::topology_from_json(to_json(topology));
          const auto a = ft::analyze(ft::run_result_from_json(to_json(run_a)), topo);
          const auto b = ft::analyze(ft::run_result_from_json(to_json(run_b)), topo);
          return from_json(ft::comparison_to_json(ft::compare(a, b)));
        },
        py::arg("run_a"), py::arg("run_b"), py::arg("topology"));

  m.def("fim",
        [](const std::vector<double>& actual, const py::object& ideal) {
          if (py::isinstance<py::float_>(ideal) || py::isinstance<py::int_>(ideal)) {
            return ft::fim(actual, ideal.cast<double>());
          }
          const auto per_link = ideal.cast<std::vector<double>>();
          return ft::fim(actual, per_link);
        },
        py::arg("actual"), py::arg("ideal"), "Mean absolute percentage deviation from the ideal per-link count.");

  m.def("maxmin_rates",
        [](const std::vector<std::vector<std::size_t>>& flow_links, const std::vector<double>& capacity) {
          return ft::maxmin_rates(flow_links, capacity);
        },
        py::arg("flow_links"), py::arg("capacity"),
        "Max-min fair rates; flow_links[f] lists the link indices flow f crosses.");

  m.def("bench",
        [](const py::object& topology, const std::vector<int>& flows, const std::vector<int>& threads,
           const std::vector<std::string>& modes, int repetitions, int connect_latency_ms, int query_latency_ms,
           std::uint64_t seed) {
          const auto topo = ft::topology_from_json(to_json(topology));
          ft::BenchSweep sweep;
          sweep.flows = flows;
          sweep.threads = threads;
          sweep.modes.clear();
          for (const auto& mname : modes) sweep.modes.push_back(ft::parse_connection_mode(mname));
          sweep.repetitions = repetitions;
          sweep.agents.connect_latency = std::chrono::milliseconds(connect_latency_ms);
          sweep.agents.query_latency = std::chrono::milliseconds(query_latency_ms);
          sweep.seed = seed;
          std::vector<ft::BenchRow> rows;
          {
            py::gil_scoped_release release;
            rows = ft::run_bench(topo, sweep);
          }
          py::list out;
          for (const auto& r : rows) {
            py::dict d;
            d["flows"] = r.flows;
            d["threads"] = r.threads;
            d["mode"] = std::string(ft::to_string(r.mode));
            d["repetitions"] = r.repetitions;
            d["completion_time_ms"] = r.mean_ms;
            d["min_ms"] = r.min_ms;
            d["max_ms"] = r.max_ms;
            d["query_count"] = r.query_count;
            d["errors"] = r.error_count;
            out.append(d);
          }
          return out;
        },
        py::arg("topology"), py::arg("flows"), py::arg("threads") = std::vector<int>{2, 4, 8},
        py::arg("modes") = std::vector<std::string>{"baseline", "persistent", "parallel_persistent"},
        py::arg("repetitions") = 3, py::arg("connect_latency_ms") = 100, py::arg("query_latency_ms") = 50,
        py::arg("seed") = 0);
}
