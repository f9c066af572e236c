#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "flowtracer/agents.hpp"
#include "flowtracer/routing.hpp"
#include "flowtracer/tracer.hpp"

namespace flowtracer {

/// Starts an agent fleet in this process, traces the workload through it and
/// tears the fleet down.
RunResult trace_in_process(const WorkloadSpec& workload, const Topology& topology, const RoutingPolicy& policy,
                           const RunPlan& plan, const AgentConfig& agents = {});

/// Completion-time sweep. Baseline and persistent rows always use a single
/// tracer thread; parallel_persistent gets one row per entry of `threads`.
struct BenchSweep {
  std::vector<int> flows{2, 4, 8, 16, 32, 64, 128};
  std::vector<int> threads{2, 4, 8};
  std::vector<ConnectionMode> modes{ConnectionMode::baseline, ConnectionMode::persistent,
                                    ConnectionMode::parallel_persistent};
  int repetitions = 3;
  AgentConfig agents{std::chrono::milliseconds(100), std::chrono::milliseconds(50)};
  std::uint64_t seed = 0;
  /// Route with balanced static tables built per workload instead of ECMP.
  bool balanced_static = false;
  EcmpConfig ecmp;
};

struct BenchRow {
  int flows = 0;
  int threads = 0;
  ConnectionMode mode = ConnectionMode::baseline;
  int repetitions = 0;
  double mean_ms = 0;
  double min_ms = 0;
  double max_ms = 0;
  std::size_t query_count = 0;  // from the last repetition
  std::size_t error_count = 0;  // summed over repetitions
};

/// One inter-rack pair (first host of the first rack to the first host of
/// the second) carrying `flows` kernel-visible flows.
WorkloadSpec bench_workload(const Topology& topology, int flows, std::uint64_t seed);

std::vector<BenchRow> run_bench(const Topology& topology, const BenchSweep& sweep,
                                const std::function<void(const BenchRow&)>& on_row = {});

/// flows,threads,mode,repetitions,completion_time_ms,min_ms,max_ms,query_count,errors
std::string bench_csv(std::span<const BenchRow> rows);

}  // namespace flowtracer
