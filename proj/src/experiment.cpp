#include "flowtracer/experiment.hpp"

#include <algorithm>
#include <sstream>

#include "flowtracer/error.hpp"

namespace flowtracer {

RunResult trace_in_process(const WorkloadSpec& workload, const Topology& topology, const RoutingPolicy& policy,
                           const RunPlan& plan, const AgentConfig& agents) {
  validate_workload(workload, topology);
  const auto flows = generate_flows(workload, topology);
  AgentFleet fleet(topology, flows, policy, agents);
  RunResult result = run(workload, topology, fleet.registry(), plan);
  fleet.stop();
  return result;
}

WorkloadSpec bench_workload(const Topology& topology, int flows, std::uint64_t seed) {
  const auto racks = topology.racks();
  if (racks.size() < 2) throw NotBipartiteCapable("bench needs at least two racks");
  const auto a = topology.hosts_in_rack(racks[0]);
  const auto b = topology.hosts_in_rack(racks[1]);
  if (a.empty() || b.empty()) throw NotBipartiteCapable("bench needs a host in each of the first two racks");
  WorkloadSpec spec;
  spec.pairs.push_back(PairSpec{a.front(), b.front(), flows});
  spec.seed = seed;
  return spec;
}

std::vector<BenchRow> run_bench(const Topology& topology, const BenchSweep& sweep,
                                const std::function<void(const BenchRow&)>& on_row) {
  std::vector<BenchRow> rows;
  const int reps = std::max(sweep.repetitions, 1);
  for (int f : sweep.flows) {
    const WorkloadSpec workload = bench_workload(topology, f, sweep.seed);
    const auto flows = generate_flows(workload, topology);
    EcmpConfig ecmp = sweep.ecmp;
    ecmp.seed = sweep.seed;
    const RoutingPolicy policy = sweep.balanced_static
                                     ? RoutingPolicy::from_tables(build_balanced_static_tables(topology, flows))
                                     : RoutingPolicy::ecmp(ecmp);
    AgentFleet fleet(topology, flows, policy, sweep.agents);

    for (ConnectionMode mode : sweep.modes) {
      std::vector<int> thread_counts{1};
      if (mode == ConnectionMode::parallel_persistent) thread_counts = sweep.threads;
      for (int t : thread_counts) {
        BenchRow row{f, t, mode, reps};
        RunPlan plan;
        plan.procs = 1;
        plan.threads = t;
        plan.mode = mode;
        double sum = 0;
        for (int r = 0; r < reps; ++r) {
          const RunResult result = run(workload, topology, fleet.registry(), plan);
          const double ms = result.timing.total_ms;
          sum += ms;
          row.min_ms = r == 0 ? ms : std::min(row.min_ms, ms);
          row.max_ms = std::max(row.max_ms, ms);
          row.query_count = result.query_count;
          row.error_count += result.errors.size();
        }
        row.mean_ms = sum / reps;
        rows.push_back(row);
        if (on_row) on_row(row);
      }
    }
    fleet.stop();
  }
  return rows;
}

std::string bench_csv(std::span<const BenchRow> rows) {
  std::ostringstream out;
  out << "flows,threads,mode,repetitions,completion_time_ms,min_ms,max_ms,query_count,errors\n";
  out.setf(std::ios::fixed);
  out.precision(3);
  for (const auto& r : rows) {
    out << r.flows << ',' << r.threads << ',' << to_string(r.mode) << ',' << r.repetitions << ',' << r.mean_ms << ','
        << r.min_ms << ',' << r.max_ms << ',' << r.query_count << ',' << r.error_count << '\n';
  }
  return out.str();
}

}  // namespace flowtracer
