#include "flowtracer/tracer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <thread>
#include <tuple>

#include "flowtracer/error.hpp"
#include "flowtracer/protocol.hpp"
#include "json_util.hpp"

namespace flowtracer {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

bool by_tuple(const TracedPath& a, const TracedPath& b) { return a.flow.tuple < b.flow.tuple; }

bool error_order(const TraceError& a, const TraceError& b) {
  auto key = [](const TraceError& e) {
    return std::tuple(e.source_host, e.dest_host, e.flow ? e.flow->flow_ordinal : -1,
                      e.flow ? e.flow->tuple : FiveTuple{});
  };
  return key(a) < key(b);
}

/// Appends hops to `path` as they are discovered so callers can report the
/// partial path on failure.
void trace_into(const FlowRecord& flow, const Topology& topology, AgentSessions& sessions, int hop_limit,
                TracedPath& path) {
  path.flow = flow;
  path.complete = false;
  path.hops.assign(1, Hop{flow.source_host, std::nullopt, flow.source_interface});

  Endpoint at = topology.neighbor(flow.source_host, flow.source_interface);
  for (;;) {
    if (at.device == flow.dest_host) {
      path.hops.push_back(Hop{at.device, at.interface, std::nullopt});
      path.complete = true;
      return;
    }
    if (!topology.device(at.device).is_switch()) {
      throw Misdelivered("flow delivered to " + at.device + " instead of " + flow.dest_host);
    }
    if (path.hops.size() >= static_cast<std::size_t>(hop_limit)) {
      throw HopLimitExceeded("hop limit " + std::to_string(hop_limit) + " reached at " + at.device);
    }
    const std::string reply = sessions.query(
        at.device, wire::format_request(wire::RouteQuery{at.interface, flow.tuple, flow.dest_host}));
    if (reply.starts_with("ERR ")) throw AgentError(at.device, reply.substr(4));
    if (!reply.starts_with("EGRESS ")) throw AgentError(at.device, "BADREPLY");
    std::string egress = reply.substr(wire::kEgress.size() + 1);
    path.hops.push_back(Hop{at.device, at.interface, egress});
    at = topology.neighbor(at.device, egress);
  }
}

TraceError classify_failure(const FlowRecord& flow, const TracedPath& partial) {
  TraceError err{flow.source_host, flow.dest_host, flow, "", TraceErrorKind::agent_error, "", partial.hops};
  const std::string last_device = partial.hops.empty() ? flow.source_host : partial.hops.back().device;
  try {
    throw;
  } catch (const HopLimitExceeded& e) {
    err.kind = TraceErrorKind::hop_limit_exceeded;
    err.device = last_device;
    err.detail = e.what();
  } catch (const AgentError& e) {
    err.kind = TraceErrorKind::agent_error;
    err.device = e.device();
    err.detail = "ERR " + e.code();
  } catch (const Disconnected& e) {
    err.kind = TraceErrorKind::disconnected;
    err.device = e.device();
    err.detail = e.what();
  } catch (const Misdelivered& e) {
    err.kind = TraceErrorKind::misdelivered;
    err.device = last_device;
    err.detail = e.what();
  } catch (const std::exception& e) {
    err.kind = TraceErrorKind::agent_error;
    err.device = last_device;
    err.detail = e.what();
  }
  return err;
}

struct GroupOutput {
  std::vector<TracedPath> paths;
  std::vector<TraceError> errors;
  double retrieval_ms = 0;
  double trace_ms = 0;
};

void pair_failure(const PairSpec& pair, std::string device, std::string detail, GroupOutput& out) {
  for (int i = 0; i < pair.flows; ++i) {
    out.errors.push_back(TraceError{pair.src, pair.dst, std::nullopt, device, TraceErrorKind::flow_retrieval,
                                    detail, {}});
  }
}

}  // namespace

std::string_view to_string(ConnectionMode mode) {
  switch (mode) {
    case ConnectionMode::baseline:
      return "baseline";
    case ConnectionMode::persistent:
      return "persistent";
    case ConnectionMode::parallel_persistent:
      return "parallel_persistent";
  }
  return "?";
}

ConnectionMode parse_connection_mode(std::string_view text) {
  if (text == "baseline") return ConnectionMode::baseline;
  if (text == "persistent") return ConnectionMode::persistent;
  if (text == "parallel_persistent" || text == "parallel-persistent") return ConnectionMode::parallel_persistent;
  throw ParseError("unknown connection mode '" + std::string(text) + "'");
}

std::string_view to_string(TraceErrorKind kind) {
  switch (kind) {
    case TraceErrorKind::flow_retrieval:
      return "flow_retrieval";
    case TraceErrorKind::hop_limit_exceeded:
      return "hop_limit_exceeded";
    case TraceErrorKind::agent_error:
      return "agent_error";
    case TraceErrorKind::disconnected:
      return "disconnected";
    case TraceErrorKind::misdelivered:
      return "misdelivered";
  }
  return "?";
}

TraceErrorKind parse_trace_error_kind(std::string_view text) {
  for (auto k : {TraceErrorKind::flow_retrieval, TraceErrorKind::hop_limit_exceeded, TraceErrorKind::agent_error,
                 TraceErrorKind::disconnected, TraceErrorKind::misdelivered}) {
    if (to_string(k) == text) return k;
  }
  throw ParseError("unknown error kind '" + std::string(text) + "'");
}

int RunPlan::resolved_procs(std::size_t pair_count) const {
  if (procs) return std::max(*procs, 1);
  return static_cast<int>(std::clamp<std::size_t>(pair_count, 1, 8));
}

std::vector<std::vector<PairSpec>> partition_pairs(std::span<const PairSpec> pairs, int procs) {
  return partition_blocks(pairs, procs);
}

std::vector<std::vector<FlowRecord>> partition_flows(std::span<const FlowRecord> flows, int threads) {
  return partition_blocks(flows, threads);
}

TracedPath trace_flow(const FlowRecord& flow, const Topology& topology, AgentSessions& sessions, int hop_limit) {
  TracedPath path;
  trace_into(flow, topology, sessions, hop_limit, path);
  return path;
}

RunResult run(const WorkloadSpec& workload, const Topology& topology, const Registry& registry,
              const RunPlan& plan) {
  registry.require_complete(topology);
  validate_workload(workload, topology);
  const auto addresses = address_plan(topology);
  const int threads = std::max(plan.threads, 1);

  RunResult result;
  result.pairs = workload.pairs;
  result.plan = plan;
  result.plan.procs = plan.resolved_procs(workload.pairs.size());
  result.plan.threads = threads;

  const auto groups = partition_pairs(workload.pairs, *result.plan.procs);
  std::vector<GroupOutput> outputs(groups.size());
  std::atomic<std::size_t> query_count{0};
  const bool reuse = plan.mode != ConnectionMode::baseline;
  const std::string flows_request = wire::format_request(
      wire::FlowsQuery{workload.flow_class == FlowClass::kernel_bypass, workload.filter});

  auto run_group = [&](std::size_t g) {
    GroupOutput& out = outputs[g];
    const std::string group_name = "group-" + std::to_string(g);
    AgentSessions group_sessions(registry, reuse, group_name, &query_count);
    std::vector<std::unique_ptr<AgentSessions>> owned;
    std::vector<AgentSessions*> workers;
    for (int t = 0; t < threads; ++t) {
      if (plan.mode == ConnectionMode::parallel_persistent) {
        owned.push_back(std::make_unique<AgentSessions>(registry, true,
                                                        group_name + "-worker-" + std::to_string(t), &query_count));
        workers.push_back(owned.back().get());
      } else {
        workers.push_back(&group_sessions);
      }
    }

    for (const PairSpec& pair : groups[g]) {
      const auto retrieval_start = Clock::now();
      std::vector<FlowRecord> flows;
      try {
        const auto lines = group_sessions.query_block(pair.src, flows_request);
        if (!lines.empty() && lines.front().starts_with("ERR ")) {
          pair_failure(pair, pair.src, lines.front(), out);
          out.retrieval_ms += elapsed_ms(retrieval_start);
          continue;
        }
        const Ipv4Address dst_ip = addresses.find(pair.dst)->second;
        for (const std::string& line : lines) {
          const wire::FlowLine fl = wire::parse_flow_line(line);
          if (fl.tuple.dst_ip != dst_ip) continue;
          flows.push_back(FlowRecord{fl.tuple, workload.flow_class, pair.src, pair.dst, fl.source_interface,
                                     static_cast<int>(flows.size())});
        }
        flows = apply_filter(flows, workload.filter);
      } catch (const std::exception& e) {
        pair_failure(pair, pair.src, e.what(), out);
        out.retrieval_ms += elapsed_ms(retrieval_start);
        continue;
      }
      out.retrieval_ms += elapsed_ms(retrieval_start);

      const auto trace_start = Clock::now();
      const auto subsets = partition_flows(flows, threads);
      std::vector<GroupOutput> partial(subsets.size());
      {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < subsets.size(); ++t) {
          if (subsets[t].empty()) continue;
          pool.emplace_back([&, t] {
            for (const FlowRecord& flow : subsets[t]) {
              TracedPath path;
              try {
                trace_into(flow, topology, *workers[t], plan.hop_limit, path);
                partial[t].paths.push_back(std::move(path));
              } catch (...) {
                partial[t].errors.push_back(classify_failure(flow, path));
              }
            }
          });
        }
      }
      for (auto& p : partial) {
        std::move(p.paths.begin(), p.paths.end(), std::back_inserter(out.paths));
        std::move(p.errors.begin(), p.errors.end(), std::back_inserter(out.errors));
      }
      out.trace_ms += elapsed_ms(trace_start);
    }
  };

  const auto start = Clock::now();
  {
    std::vector<std::jthread> pool;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (!groups[g].empty()) pool.emplace_back(run_group, g);
    }
  }
  result.timing.total_ms = elapsed_ms(start);

  for (auto& out : outputs) {
    std::move(out.paths.begin(), out.paths.end(), std::back_inserter(result.paths));
    std::move(out.errors.begin(), out.errors.end(), std::back_inserter(result.errors));
    result.timing.flow_retrieval_ms = std::max(result.timing.flow_retrieval_ms, out.retrieval_ms);
    result.timing.trace_ms = std::max(result.timing.trace_ms, out.trace_ms);
  }
  std::sort(result.paths.begin(), result.paths.end(), by_tuple);
  std::sort(result.errors.begin(), result.errors.end(), error_order);
  result.query_count = query_count.load();
  return result;
}

std::vector<TracedPath> oracle_paths(const WorkloadSpec& workload, const Topology& topology,
                                     const RoutingPolicy& policy, int hop_limit) {
  std::vector<TracedPath> out;
  for (const FlowRecord& flow : apply_filter(generate_flows(workload, topology), workload.filter)) {
    TracedPath path{flow, {{flow.source_host, std::nullopt, flow.source_interface}}, false};
    Endpoint at = topology.neighbor(flow.source_host, flow.source_interface);
    while (at.device != flow.dest_host) {
      if (!topology.device(at.device).is_switch()) {
        throw Misdelivered("flow delivered to " + at.device + " instead of " + flow.dest_host);
      }
      if (path.hops.size() >= static_cast<std::size_t>(hop_limit)) {
        throw HopLimitExceeded("hop limit " + std::to_string(hop_limit) + " reached at " + at.device);
      }
      std::string egress = forward(topology, policy, at.device, at.interface, flow.tuple, flow.dest_host);
      path.hops.push_back(Hop{at.device, at.interface, egress});
      at = topology.neighbor(at.device, egress);
    }
    path.hops.push_back(Hop{at.device, at.interface, std::nullopt});
    path.complete = true;
    out.push_back(std::move(path));
  }
  std::sort(out.begin(), out.end(), by_tuple);
  return out;
}

// ---- Serialization ----

namespace {

nlohmann::json hops_to_json(const std::vector<Hop>& hops) {
  nlohmann::json out = nlohmann::json::array();
  for (const Hop& h : hops) {
    out.push_back({{"device", h.device},
                   {"ingress", h.ingress.value_or(std::string(kSourceMarker))},
                   {"egress", h.egress.value_or(std::string(kSinkMarker))}});
  }
  return out;
}

std::vector<Hop> hops_from_json(const nlohmann::json& j) {
  std::vector<Hop> hops;
  for (const auto& jh : j) {
    detail::expect_keys(jh, {"device", "ingress", "egress"}, "hop");
    Hop h{detail::get_as<std::string>(detail::require(jh, "device", "hop"), "hop.device"), std::nullopt,
          std::nullopt};
    const auto ingress = detail::get_as<std::string>(detail::require(jh, "ingress", "hop"), "hop.ingress");
    const auto egress = detail::get_as<std::string>(detail::require(jh, "egress", "hop"), "hop.egress");
    if (ingress != kSourceMarker) h.ingress = ingress;
    if (egress != kSinkMarker) h.egress = egress;
    hops.push_back(std::move(h));
  }
  return hops;
}

void flow_to_json(const FlowRecord& f, nlohmann::json& j) {
  j["src_host"] = f.source_host;
  j["dst_host"] = f.dest_host;
  j["ordinal"] = f.flow_ordinal;
  j["flow_class"] = std::string(to_string(f.flow_class));
  j["src_ip"] = f.tuple.src_ip.to_string();
  j["dst_ip"] = f.tuple.dst_ip.to_string();
  j["src_port"] = f.tuple.src_port;
  j["dst_port"] = f.tuple.dst_port;
  j["protocol"] = std::string(to_string(f.tuple.protocol));
  j["source_interface"] = f.source_interface;
}

FlowRecord flow_from_json(const nlohmann::json& j) {
  using detail::get_as;
  using detail::require;
  FlowRecord f;
  f.source_host = get_as<std::string>(require(j, "src_host", "flow"), "src_host");
  f.dest_host = get_as<std::string>(require(j, "dst_host", "flow"), "dst_host");
  f.flow_ordinal = get_as<int>(require(j, "ordinal", "flow"), "ordinal");
  f.flow_class = parse_flow_class(get_as<std::string>(require(j, "flow_class", "flow"), "flow_class"));
  f.tuple.src_ip = Ipv4Address::parse(get_as<std::string>(require(j, "src_ip", "flow"), "src_ip"));
  f.tuple.dst_ip = Ipv4Address::parse(get_as<std::string>(require(j, "dst_ip", "flow"), "dst_ip"));
  f.tuple.src_port = get_as<std::uint16_t>(require(j, "src_port", "flow"), "src_port");
  f.tuple.dst_port = get_as<std::uint16_t>(require(j, "dst_port", "flow"), "dst_port");
  f.tuple.protocol = parse_protocol(get_as<std::string>(require(j, "protocol", "flow"), "protocol"));
  f.source_interface = get_as<std::string>(require(j, "source_interface", "flow"), "source_interface");
  return f;
}

}  // namespace

nlohmann::json run_result_to_json(const RunResult& result) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const PairSpec& p : result.pairs) pairs.push_back({{"src", p.src}, {"dst", p.dst}, {"flows", p.flows}});

  nlohmann::json flows = nlohmann::json::array();
  for (const TracedPath& p : result.paths) {
    nlohmann::json j;
    flow_to_json(p.flow, j);
    j["complete"] = p.complete;
    j["hops"] = hops_to_json(p.hops);
    flows.push_back(std::move(j));
  }

  nlohmann::json errors = nlohmann::json::array();
  for (const TraceError& e : result.errors) {
    nlohmann::json j;
    if (e.flow) {
      flow_to_json(*e.flow, j);
    } else {
      j["src_host"] = e.source_host;
      j["dst_host"] = e.dest_host;
    }
    j["device"] = e.device;
    j["kind"] = std::string(to_string(e.kind));
    j["detail"] = e.detail;
    j["hops"] = hops_to_json(e.partial_hops);
    errors.push_back(std::move(j));
  }

  nlohmann::json plan{{"procs", result.plan.procs.value_or(0)},
                      {"threads", result.plan.threads},
                      {"mode", std::string(to_string(result.plan.mode))},
                      {"hop_limit", result.plan.hop_limit}};

  return {{"pairs", std::move(pairs)},
          {"plan", std::move(plan)},
          {"flows", std::move(flows)},
          {"errors", std::move(errors)},
          {"query_count", result.query_count},
          {"timing",
           {{"total_ms", result.timing.total_ms},
            {"per_phase",
             {{"flow_retrieval_ms", result.timing.flow_retrieval_ms}, {"trace_ms", result.timing.trace_ms}}}}}};
}

RunResult run_result_from_json(const nlohmann::json& doc) {
  using detail::get_as;
  using detail::require;
  detail::expect_keys(doc, {"pairs", "plan", "flows", "errors", "query_count", "timing"}, "run result");

  RunResult r;
  for (const auto& jp : require(doc, "pairs", "run result")) {
    r.pairs.push_back({get_as<std::string>(require(jp, "src", "pair"), "src"),
                       get_as<std::string>(require(jp, "dst", "pair"), "dst"),
                       get_as<int>(require(jp, "flows", "pair"), "flows")});
  }
  if (auto it = doc.find("plan"); it != doc.end()) {
    const int procs = get_as<int>(require(*it, "procs", "plan"), "procs");
    if (procs > 0) r.plan.procs = procs;
    r.plan.threads = get_as<int>(require(*it, "threads", "plan"), "threads");
    r.plan.mode = parse_connection_mode(get_as<std::string>(require(*it, "mode", "plan"), "mode"));
    r.plan.hop_limit = get_as<int>(require(*it, "hop_limit", "plan"), "hop_limit");
  }
  for (const auto& jf : require(doc, "flows", "run result")) {
    TracedPath p;
    p.flow = flow_from_json(jf);
    p.complete = get_as<bool>(require(jf, "complete", "flow"), "complete");
    p.hops = hops_from_json(require(jf, "hops", "flow"));
    r.paths.push_back(std::move(p));
  }
  if (auto it = doc.find("errors"); it != doc.end()) {
    for (const auto& je : *it) {
      TraceError e;
      e.source_host = get_as<std::string>(require(je, "src_host", "error"), "src_host");
      e.dest_host = get_as<std::string>(require(je, "dst_host", "error"), "dst_host");
      if (je.contains("src_ip")) e.flow = flow_from_json(je);
      e.device = get_as<std::string>(require(je, "device", "error"), "device");
      e.kind = parse_trace_error_kind(get_as<std::string>(require(je, "kind", "error"), "kind"));
      e.detail = get_as<std::string>(require(je, "detail", "error"), "detail");
      e.partial_hops = hops_from_json(require(je, "hops", "error"));
      r.errors.push_back(std::move(e));
    }
  }
  if (auto it = doc.find("query_count"); it != doc.end()) r.query_count = get_as<std::size_t>(*it, "query_count");
  if (auto it = doc.find("timing"); it != doc.end()) {
    r.timing.total_ms = get_as<double>(require(*it, "total_ms", "timing"), "total_ms");
    const auto& phases = require(*it, "per_phase", "timing");
    r.timing.flow_retrieval_ms = get_as<double>(require(phases, "flow_retrieval_ms", "timing"), "flow_retrieval_ms");
    r.timing.trace_ms = get_as<double>(require(phases, "trace_ms", "timing"), "trace_ms");
  }
  return r;
}

RunResult load_run_result(const std::filesystem::path& path) {
  return run_result_from_json(detail::read_json_file(path));
}

void save_run_result(const RunResult& result, const std::filesystem::path& path) {
  detail::write_json_file(path, run_result_to_json(result));
}

}  // namespace flowtracer
