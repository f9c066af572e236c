#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flowtracer/agents.hpp"
#include "flowtracer/connection.hpp"
#include "flowtracer/fabric.hpp"
#include "flowtracer/flowgen.hpp"
#include "flowtracer/routing.hpp"
#include "json.hpp"

namespace flowtracer {

/// How tracer workers reach agents:
///   baseline            - a fresh connection for every query
///   persistent          - one connection per (worker group, device), reused
///   parallel_persistent - each sub-worker owns its own reused connections
enum class ConnectionMode { baseline, persistent, parallel_persistent };

std::string_view to_string(ConnectionMode mode);
/// Accepts `parallel-persistent` as well.
ConnectionMode parse_connection_mode(std::string_view text);

inline constexpr std::string_view kSourceMarker = "SOURCE";
inline constexpr std::string_view kSinkMarker = "SINK";

struct Hop {
  std::string device;
  std::optional<std::string> ingress;  // nullopt: the flow starts here
  std::optional<std::string> egress;   // nullopt: the flow ends here

  bool operator==(const Hop&) const = default;
};

struct TracedPath {
  FlowRecord flow;
  std::vector<Hop> hops;
  bool complete = false;

  /// Number of switches traversed.
  std::size_t switch_count() const { return hops.size() >= 2 ? hops.size() - 2 : 0; }
  bool operator==(const TracedPath&) const = default;
};

struct RunPlan {
  std::optional<int> procs;  // nullopt: min(pair count, 8)
  int threads = 1;
  ConnectionMode mode = ConnectionMode::parallel_persistent;
  int hop_limit = 16;

  int resolved_procs(std::size_t pair_count) const;
};

enum class TraceErrorKind { flow_retrieval, hop_limit_exceeded, agent_error, disconnected, misdelivered };

std::string_view to_string(TraceErrorKind kind);
TraceErrorKind parse_trace_error_kind(std::string_view text);

struct TraceError {
  std::string source_host;
  std::string dest_host;
  std::optional<FlowRecord> flow;  // absent when the flow list itself was unavailable
  std::string device;
  TraceErrorKind kind = TraceErrorKind::agent_error;
  std::string detail;
  std::vector<Hop> partial_hops;

  bool operator==(const TraceError&) const = default;
};

struct RunTiming {
  double total_ms = 0;
  double flow_retrieval_ms = 0;
  double trace_ms = 0;

  bool operator==(const RunTiming&) const = default;
};

struct RunResult {
  std::vector<PairSpec> pairs;  // workload shape
  RunPlan plan;
  std::vector<TracedPath> paths;
  std::vector<TraceError> errors;
  std::size_t query_count = 0;
  RunTiming timing;

  std::size_t flow_count() const { return paths.size() + errors.size(); }
};

/// Splits `items` into `parts` contiguous blocks in input order whose sizes
/// differ by at most one; the first `size % parts` blocks get the extra item.
template <typename T>
std::vector<std::vector<T>> partition_blocks(std::span<const T> items, int parts) {
  if (parts < 1) parts = 1;
  std::vector<std::vector<T>> out(static_cast<std::size_t>(parts));
  const std::size_t base = items.size() / out.size();
  const std::size_t extra = items.size() % out.size();
  std::size_t pos = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t n = base + (i < extra ? 1 : 0);
    out[i].assign(items.begin() + static_cast<std::ptrdiff_t>(pos),
                  items.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
  }
  return out;
}

std::vector<std::vector<PairSpec>> partition_pairs(std::span<const PairSpec> pairs, int procs);
std::vector<std::vector<FlowRecord>> partition_flows(std::span<const FlowRecord> flows, int threads);

/// Hop-by-hop discovery of one flow through the agents. Throws
/// HopLimitExceeded, AgentError, Disconnected or Misdelivered.
TracedPath trace_flow(const FlowRecord& flow, const Topology& topology, AgentSessions& sessions,
                      int hop_limit = 16);

/// Traces every workload flow: pairs are split over worker groups, each
/// pair's flows over the group's sub-workers. Per-flow failures are
/// collected in `errors`. Throws RegistryIncomplete.
RunResult run(const WorkloadSpec& workload, const Topology& topology, const Registry& registry,
              const RunPlan& plan);

/// Ground-truth paths computed directly from the forwarding function,
/// sorted like `run` output. Throws on routing errors and HopLimitExceeded.
std::vector<TracedPath> oracle_paths(const WorkloadSpec& workload, const Topology& topology,
                                     const RoutingPolicy& policy, int hop_limit = 16);

nlohmann::json run_result_to_json(const RunResult& result);
RunResult run_result_from_json(const nlohmann::json& doc);
RunResult load_run_result(const std::filesystem::path& path);
void save_run_result(const RunResult& result, const std::filesystem::path& path);

}  // namespace flowtracer
