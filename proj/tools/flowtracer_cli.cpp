// flowtracer command-line tool.
//
// Exit codes: 0 success, 1 unexpected failure, 2 invalid options,
// 3 partial trace (some flows failed), 4 input load failure,
// 5 compared runs have different shapes.

#include <signal.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "flowtracer/agents.hpp"
#include "flowtracer/analysis.hpp"
#include "flowtracer/error.hpp"
#include "flowtracer/experiment.hpp"
#include "flowtracer/fabric.hpp"
#include "flowtracer/flowgen.hpp"
#include "flowtracer/routing.hpp"
#include "flowtracer/tracer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace flowtracer;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kPartial = 3, kLoad = 4, kShape = 5 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LoadError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Settings shared by every subcommand. A --config file fills these first,
// then explicitly given flags overwrite them.
struct Settings {
  std::optional<fs::path> topology;
  std::optional<fs::path> workload;
  std::optional<fs::path> static_tables;
  std::optional<fs::path> registry;
  fs::path out = ".";
  std::string policy = "ecmp";
  std::string field_set = "full_five_tuple";
  bool include_ingress = false;
  std::optional<std::uint64_t> seed;
  std::optional<int> procs;
  int threads = 1;
  std::string mode = "parallel_persistent";
  int hop_limit = 16;
  std::optional<int> connect_latency_ms;
  std::optional<int> query_latency_ms;
  bool in_process = false;

  // bench
  std::vector<int> bench_flows{2, 4, 8, 16, 32, 64, 128};
  std::vector<int> bench_threads{2, 4, 8};
  std::vector<std::string> bench_modes{"baseline", "persistent", "parallel_persistent"};
  int repetitions = 3;
};

// Flag values as parsed, before merging.
struct Flags {
  std::string config;
  std::string topology, workload, static_tables, registry, out;
  std::string policy, field_set, mode;
  bool include_ingress = false;
  std::uint64_t seed = 0;
  int procs = 0, threads = 1, hop_limit = 16, connect_latency_ms = 0, query_latency_ms = 0;
  bool in_process = false;
  std::vector<int> bench_flows, bench_threads;
  std::vector<std::string> bench_modes;
  int repetitions = 3;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

void apply_config_file(const fs::path& file, Settings& s) {
  nlohmann::json doc;
  {
    std::ifstream in(file);
    if (!in) throw LoadError("cannot open config " + file.string());
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw LoadError("config " + file.string() + ": " + e.what());
    }
  }
  const fs::path base = file.parent_path();
  try {
    if (doc.contains("topology")) s.topology = resolve(base, doc["topology"].get<std::string>());
    if (doc.contains("workload")) s.workload = resolve(base, doc["workload"].get<std::string>());
    if (doc.contains("registry")) s.registry = resolve(base, doc["registry"].get<std::string>());
    if (doc.contains("out")) s.out = resolve(base, doc["out"].get<std::string>());
    if (doc.contains("seed")) s.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("in_process")) s.in_process = doc["in_process"].get<bool>();
    if (doc.contains("policy")) {
      const auto& p = doc["policy"];
      s.policy = p.value("mode", s.policy);
      if (s.policy == "static") {
        if (p.contains("tables")) s.static_tables = resolve(base, p["tables"].get<std::string>());
      } else {
        const EcmpConfig ecmp = ecmp_config_from_json(p);
        s.field_set = std::string(to_string(ecmp.field_set));
        s.include_ingress = ecmp.include_ingress;
        if (p.contains("seed") && !s.seed) s.seed = ecmp.seed;
      }
    }
    if (doc.contains("plan")) {
      const auto& p = doc["plan"];
      if (p.contains("procs") && !p["procs"].is_null()) s.procs = p["procs"].get<int>();
      s.threads = p.value("threads", s.threads);
      s.mode = p.value("mode", s.mode);
      s.hop_limit = p.value("hop_limit", s.hop_limit);
    }
    if (doc.contains("agents")) {
      const auto& a = doc["agents"];
      if (a.contains("connect_latency_ms")) s.connect_latency_ms = a["connect_latency_ms"].get<int>();
      if (a.contains("query_latency_ms")) s.query_latency_ms = a["query_latency_ms"].get<int>();
    }
    if (doc.contains("bench")) {
      const auto& b = doc["bench"];
      s.bench_flows = b.value("flows", s.bench_flows);
      s.bench_threads = b.value("threads", s.bench_threads);
      s.bench_modes = b.value("modes", s.bench_modes);
      s.repetitions = b.value("repetitions", s.repetitions);
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("config " + file.string() + ": " + e.what());
  } catch (const flowtracer::ParseError& e) {
    throw LoadError("config " + file.string() + ": " + e.what());
  }
}

class Command {
 public:
  explicit Command(CLI::App* app) : app_(app) {}

  CLI::App* app() const { return app_; }

  void add_common() {
    app_->add_option("--config", flags_.config, "JSON run configuration; flags override it");
    add_out();
  }
  void add_out() { opt("--out", app_->add_option("--out", flags_.out, "Output directory")); }
  void add_topology() { opt("--topology", app_->add_option("--topology", flags_.topology, "Topology JSON")); }
  void add_workload() { opt("--workload", app_->add_option("--workload", flags_.workload, "Workload JSON")); }
  void add_seed() { opt("--seed", app_->add_option("--seed", flags_.seed, "Seed for flow generation and ECMP")); }
  void add_policy() {
    opt("--policy", app_->add_option("--policy", flags_.policy, "Routing policy")->check(
                        CLI::IsMember({"ecmp", "static"})));
    opt("--static-tables", app_->add_option("--static-tables", flags_.static_tables, "Static tables JSON"));
    opt("--field-set", app_->add_option("--field-set", flags_.field_set, "ECMP hash fields")
                           ->check(CLI::IsMember({"full_five_tuple", "reduced_outer"})));
    opt("--include-ingress", app_->add_flag("--include-ingress", flags_.include_ingress,
                                            "Mix the ingress interface into the ECMP hash"));
  }
  void add_latency() {
    opt("--connect-latency-ms", app_->add_option("--connect-latency-ms", flags_.connect_latency_ms,
                                                 "Agent connection setup delay")
                                    ->check(CLI::NonNegativeNumber));
    opt("--query-latency-ms", app_->add_option("--query-latency-ms", flags_.query_latency_ms,
                                               "Agent per-request delay")
                                  ->check(CLI::NonNegativeNumber));
  }
  void add_plan() {
    opt("--procs", app_->add_option("--procs", flags_.procs, "Worker groups (default min(pairs, 8))")
                       ->check(CLI::PositiveNumber));
    opt("--threads", app_->add_option("--threads", flags_.threads, "Tracer threads per group")
                         ->check(CLI::PositiveNumber));
    opt("--mode", app_->add_option("--mode", flags_.mode, "baseline|persistent|parallel-persistent")
                      ->check(CLI::IsMember({"baseline", "persistent", "parallel-persistent", "parallel_persistent"})));
    opt("--hop-limit", app_->add_option("--hop-limit", flags_.hop_limit, "Maximum hops per path")
                           ->check(CLI::PositiveNumber));
  }
  void add_registry() {
    opt("--registry", app_->add_option("--registry", flags_.registry, "Agent registry JSON")
                          ->envname("FLOWTRACER_REGISTRY"));
  }
  void add_in_process() {
    opt("--in-process", app_->add_flag("--in-process", flags_.in_process, "Run agents inside this process"));
  }
  void add_bench() {
    opt("--flows", app_->add_option("--flows", flags_.bench_flows, "Flow counts to sweep")
                       ->delimiter(',')
                       ->check(CLI::PositiveNumber));
    opt("--bench-threads", app_->add_option("--threads", flags_.bench_threads,
                                            "Thread counts for parallel-persistent")
                               ->delimiter(',')
                               ->check(CLI::PositiveNumber));
    opt("--modes", app_->add_option("--modes", flags_.bench_modes, "Connection modes to sweep")->delimiter(','));
    opt("--repetitions", app_->add_option("-R,--repetitions", flags_.repetitions, "Repetitions per row")
                             ->check(CLI::PositiveNumber));
  }

  Settings settings() const {
    Settings s;
    if (!flags_.config.empty()) apply_config_file(flags_.config, s);
    if (given("--topology")) s.topology = flags_.topology;
    if (given("--workload")) s.workload = flags_.workload;
    if (given("--static-tables")) s.static_tables = flags_.static_tables;
    if (given("--registry")) s.registry = flags_.registry;
    if (given("--out")) s.out = flags_.out;
    if (given("--policy")) s.policy = flags_.policy;
    if (given("--field-set")) s.field_set = flags_.field_set;
    if (given("--include-ingress")) s.include_ingress = flags_.include_ingress;
    if (given("--seed")) s.seed = flags_.seed;
    if (given("--procs")) s.procs = flags_.procs;
    if (given("--threads")) s.threads = flags_.threads;
    if (given("--mode")) s.mode = flags_.mode;
    if (given("--hop-limit")) s.hop_limit = flags_.hop_limit;
    if (given("--connect-latency-ms")) s.connect_latency_ms = flags_.connect_latency_ms;
    if (given("--query-latency-ms")) s.query_latency_ms = flags_.query_latency_ms;
    if (given("--in-process")) s.in_process = flags_.in_process;
    if (given("--flows")) s.bench_flows = flags_.bench_flows;
    if (given("--bench-threads")) s.bench_threads = flags_.bench_threads;
    if (given("--modes")) s.bench_modes = flags_.bench_modes;
    if (given("--repetitions")) s.repetitions = flags_.repetitions;
    return s;
  }

 private:
  void opt(const std::string& key, CLI::Option* o) { options_.emplace_back(key, o); }
  bool given(const std::string& key) const {
    for (const auto& [k, o] : options_) {
      if (k == key) return o->count() > 0;
    }
    return false;
  }

  CLI::App* app_;
  Flags flags_;
  std::vector<std::pair<std::string, CLI::Option*>> options_;
};

template <typename Fn>
auto load_stage(const std::string& what, Fn&& fn) {
  try {
    return fn();
  } catch (const flowtracer::Error& e) {
    throw LoadError(what + ": " + e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    throw LoadError(what + ": " + e.what());
  }
}

Topology topology_of(const Settings& s) {
  if (!s.topology) return generate_reference_testbed();
  return load_stage("topology", [&] { return load_topology(*s.topology); });
}

WorkloadSpec workload_of(const Settings& s, const Topology& topology) {
  if (!s.workload) throw UsageError("--workload is required");
  WorkloadSpec w = load_stage("workload", [&] { return load_workload(*s.workload); });
  if (s.seed) w.seed = *s.seed;
  load_stage("workload", [&] {
    validate_workload(w, topology);
    return 0;
  });
  return w;
}

EcmpConfig ecmp_of(const Settings& s, std::uint64_t seed) {
  EcmpConfig c;
  c.field_set = parse_field_set(s.field_set);
  c.include_ingress = s.include_ingress;
  c.seed = seed;
  return c;
}

RoutingPolicy policy_of(const Settings& s, const Topology& topology, std::uint64_t seed) {
  if (s.policy == "static") {
    if (!s.static_tables) throw UsageError("--policy static requires --static-tables");
    StaticTables tables = load_stage("static tables", [&] {
      StaticTables t = load_static_tables(*s.static_tables);
      validate_static_tables(t, topology);
      return t;
    });
    return RoutingPolicy::from_tables(std::move(tables));
  }
  if (s.policy != "ecmp") throw UsageError("unknown policy '" + s.policy + "'");
  return RoutingPolicy::ecmp(ecmp_of(s, seed));
}

AgentConfig agent_config_of(const Settings& s, int default_connect, int default_query) {
  AgentConfig c;
  c.connect_latency = std::chrono::milliseconds(s.connect_latency_ms.value_or(default_connect));
  c.query_latency = std::chrono::milliseconds(s.query_latency_ms.value_or(default_query));
  return c;
}

RunPlan plan_of(const Settings& s) {
  RunPlan p;
  p.procs = s.procs;
  p.threads = s.threads;
  p.mode = parse_connection_mode(s.mode);
  p.hop_limit = s.hop_limit;
  return p;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const nlohmann::json& doc) { write_file(path, doc.dump(2) + "\n"); }

// ---- gen ----

int cmd_gen_topology(const Settings& s, bool reference) {
  if (!reference) throw UsageError("gen topology: only --reference is supported");
  const fs::path path = s.out / "topology.json";
  save_topology(generate_reference_testbed(), path);
  std::cout << "wrote " << path.string() << "\n";
  return kOk;
}

int cmd_gen_workload(const Settings& s, bool bipartite, int flows_per_pair, bool unidirectional,
                     const std::string& flow_class) {
  if (!bipartite) throw UsageError("gen workload: only --bipartite is supported");
  if (flows_per_pair < 1) throw UsageError("gen workload: --flows-per-pair must be at least 1");
  const Topology topology = topology_of(s);
  WorkloadSpec w = make_bipartite_workload(topology, flows_per_pair, s.seed.value_or(0), !unidirectional);
  w.flow_class = parse_flow_class(flow_class);
  const fs::path path = s.out / "workload.json";
  save_workload(w, path);
  std::cout << "wrote " << path.string() << " (" << w.pairs.size() << " pairs, " << w.total_flows()
            << " flows)\n";
  return kOk;
}

int cmd_gen_static_tables(const Settings& s, bool balanced) {
  if (!balanced) throw UsageError("gen static-tables: only --balanced is supported");
  const Topology topology = topology_of(s);
  const WorkloadSpec w = workload_of(s, topology);
  const StaticTables tables = build_balanced_static_tables(topology, generate_flows(w, topology));
  const fs::path path = s.out / "static_tables.json";
  save_static_tables(tables, path);
  std::size_t rules = 0;
  for (const auto& [_, list] : tables) rules += list.size();
  std::cout << "wrote " << path.string() << " (" << tables.size() << " devices, " << rules << " rules)\n";
  return kOk;
}

// ---- agents ----

int cmd_agents(const Settings& s, int base_port) {
  const Topology topology = topology_of(s);
  const WorkloadSpec w = workload_of(s, topology);
  const RoutingPolicy policy = policy_of(s, topology, s.seed.value_or(w.seed));
  const auto flows = generate_flows(w, topology);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  AgentFleet fleet(topology, flows, policy, agent_config_of(s, 0, 0), static_cast<std::uint16_t>(base_port));
  const fs::path registry_path = s.registry.value_or(s.out / "registry.json");
  save_registry(fleet.registry(), registry_path);
  std::cout << "agents: " << fleet.size() << " listening, registry " << registry_path.string() << std::endl;

  int sig = 0;
  sigwait(&signals, &sig);
  std::cerr << "agents: signal " << sig << ", shutting down\n";
  fleet.stop();
  return kOk;
}

// ---- trace ----

int cmd_trace(const Settings& s) {
  const Topology topology = topology_of(s);
  const WorkloadSpec w = workload_of(s, topology);
  const RoutingPolicy policy = policy_of(s, topology, w.seed);
  const RunPlan plan = plan_of(s);

  RunResult result;
  if (s.in_process) {
    result = trace_in_process(w, topology, policy, plan, agent_config_of(s, 0, 0));
  } else {
    if (!s.registry) throw UsageError("trace needs --registry, FLOWTRACER_REGISTRY or --in-process");
    const Registry registry = load_stage("registry", [&] {
      Registry r = load_registry(*s.registry);
      r.require_complete(topology);
      return r;
    });
    result = run(w, topology, registry, plan);
  }

  const fs::path path = s.out / "run.json";
  save_run_result(result, path);
  for (const auto& e : result.errors) {
    std::cerr << "error: " << e.source_host << " -> " << e.dest_host << " at " << e.device << " ("
              << to_string(e.kind) << "): " << e.detail << "\n";
  }
  std::cout << "traced " << result.paths.size() << "/" << result.flow_count() << " flows, " << result.query_count
            << " queries, " << result.timing.total_ms << " ms -> " << path.string() << "\n";
  return result.errors.empty() ? kOk : kPartial;
}

// ---- analyze / compare ----

RunAnalysis analysis_of(const fs::path& run_path, const Topology& topology) {
  const RunResult r = load_stage("run result " + run_path.string(), [&] { return load_run_result(run_path); });
  return load_stage("run result " + run_path.string(), [&] { return analyze(r, topology); });
}

std::string pair_rates_csv(const ThroughputReport& t) {
  std::ostringstream out;
  out << "src_host,dst_host,throughput_gbps\n";
  for (const auto& [key, rate] : t.pair_rates) out << key.first << ',' << key.second << ',' << rate << '\n';
  return out.str();
}

int cmd_analyze(const Settings& s, const fs::path& run_path) {
  const Topology topology = topology_of(s);
  const RunResult r = load_stage("run result", [&] { return load_run_result(run_path); });
  std::vector<TracedPath> complete;
  for (const auto& p : r.paths) {
    if (p.complete) complete.push_back(p);
  }
  const RunAnalysis a = load_stage("run result", [&] { return analyze(r, topology); });

  write_json(s.out / "report.json", {{"imbalance", imbalance_to_json(a.imbalance)},
                                     {"throughput", throughput_to_json(a.throughput, complete)}});
  write_file(s.out / "links.csv", links_csv(a.imbalance));
  write_file(s.out / "pairs.csv", pair_rates_csv(a.throughput));
  std::cout << "aggregate FIM ";
  if (a.imbalance.aggregate_fim) {
    std::cout << *a.imbalance.aggregate_fim << "%";
  } else {
    std::cout << "n/a";
  }
  std::cout << " over " << a.imbalance.flow_count << " flows -> " << (s.out / "report.json").string() << "\n";
  return kOk;
}

int cmd_compare(const Settings& s, const fs::path& path_a, const fs::path& path_b) {
  const Topology topology = topology_of(s);
  const RunAnalysis a = analysis_of(path_a, topology);
  const RunAnalysis b = analysis_of(path_b, topology);
  const Comparison c = compare(a, b);
  write_json(s.out / "comparison.json", comparison_to_json(c));
  write_file(s.out / "comparison.csv", comparison_csv(c));
  auto show = [](std::optional<double> v) { return v ? std::to_string(*v) : std::string("n/a"); };
  std::cout << "aggregate FIM a=" << show(c.aggregate_a) << " b=" << show(c.aggregate_b)
            << " winner=" << c.winner.at("aggregate_fim") << "\n";
  return kOk;
}

// ---- bench ----

int cmd_bench(const Settings& s) {
  const Topology topology = topology_of(s);
  BenchSweep sweep;
  sweep.flows = s.bench_flows;
  sweep.threads = s.bench_threads;
  sweep.modes.clear();
  for (const auto& m : s.bench_modes) {
    try {
      sweep.modes.push_back(parse_connection_mode(m));
    } catch (const flowtracer::ParseError& e) {
      throw UsageError(e.what());
    }
  }
  sweep.repetitions = s.repetitions;
  sweep.agents = agent_config_of(s, 100, 50);
  sweep.seed = s.seed.value_or(0);
  if (s.policy == "static") {
    sweep.balanced_static = true;
  } else {
    sweep.ecmp = ecmp_of(s, sweep.seed);
  }

  std::size_t errors = 0;
  const auto rows = run_bench(topology, sweep, [&](const BenchRow& r) {
    errors += r.error_count;
    std::cerr << "bench: flows=" << r.flows << " threads=" << r.threads << " mode=" << to_string(r.mode)
              << " mean=" << r.mean_ms << " ms\n";
  });
  const fs::path path = s.out / "bench.csv";
  write_file(path, bench_csv(rows));
  std::cout << "wrote " << path.string() << " (" << rows.size() << " rows)\n";
  return errors == 0 ? kOk : kPartial;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flow path tracing and imbalance analysis for leaf-spine fabrics"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate topology, workload or static table files");
  gen->require_subcommand(1);
  bool reference = false, bipartite = false, unidirectional = false, balanced = false;
  int flows_per_pair = 16;
  std::string flow_class = "kernel_visible";

  Command gen_topology(gen->add_subcommand("topology", "Write topology.json"));
  gen_topology.add_common();
  gen_topology.app()->add_flag("--reference", reference, "The two-rack reference testbed");

  Command gen_workload(gen->add_subcommand("workload", "Write workload.json"));
  gen_workload.add_common();
  gen_workload.add_topology();
  gen_workload.add_seed();
  gen_workload.app()->add_flag("--bipartite", bipartite, "Pair host i of one rack with host i of the other");
  gen_workload.app()->add_option("--flows-per-pair", flows_per_pair, "Flows per host pair");
  gen_workload.app()->add_flag("--unidirectional", unidirectional, "Only first-rack to second-rack pairs");
  gen_workload.app()
      ->add_option("--flow-class", flow_class, "kernel_visible or kernel_bypass")
      ->check(CLI::IsMember({"kernel_visible", "kernel_bypass"}));

  Command gen_tables(gen->add_subcommand("static-tables", "Write static_tables.json"));
  gen_tables.add_common();
  gen_tables.add_topology();
  gen_tables.add_workload();
  gen_tables.add_seed();
  gen_tables.app()->add_flag("--balanced", balanced, "Greedy per-flow balanced tables");

  // agents
  int base_port = 0;
  Command agents(app.add_subcommand("agents", "Run one agent per device until SIGINT/SIGTERM"));
  agents.add_common();
  agents.add_topology();
  agents.add_workload();
  agents.add_seed();
  agents.add_policy();
  agents.add_latency();
  agents.add_registry();
  agents.app()->add_option("--base-port", base_port, "First port (default: ephemeral)")->check(CLI::Range(0, 65535));

  // trace
  Command trace(app.add_subcommand("trace", "Trace every workload flow hop by hop"));
  trace.add_common();
  trace.add_topology();
  trace.add_workload();
  trace.add_seed();
  trace.add_policy();
  trace.add_latency();
  trace.add_plan();
  trace.add_registry();
  trace.add_in_process();

  // analyze
  std::string run_path;
  Command analyze_cmd(app.add_subcommand("analyze", "Link histograms, FIM and throughput of a run"));
  analyze_cmd.add_common();
  analyze_cmd.add_topology();
  analyze_cmd.app()->add_option("run", run_path, "run.json")->required();

  // compare
  std::string run_a, run_b;
  Command compare_cmd(app.add_subcommand("compare", "Compare two runs of the same workload"));
  compare_cmd.add_common();
  compare_cmd.add_topology();
  compare_cmd.app()->add_option("run_a", run_a, "First run.json")->required();
  compare_cmd.app()->add_option("run_b", run_b, "Second run.json")->required();

  // bench
  Command bench(app.add_subcommand("bench", "Completion time sweep over flows, threads and modes"));
  bench.add_common();
  bench.add_topology();
  bench.add_seed();
  bench.add_policy();
  bench.add_latency();
  bench.add_bench();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (gen_topology.app()->parsed()) return cmd_gen_topology(gen_topology.settings(), reference);
    if (gen_workload.app()->parsed()) {
      return cmd_gen_workload(gen_workload.settings(), bipartite, flows_per_pair, unidirectional, flow_class);
    }
    if (gen_tables.app()->parsed()) return cmd_gen_static_tables(gen_tables.settings(), balanced);
    if (agents.app()->parsed()) return cmd_agents(agents.settings(), base_port);
    if (trace.app()->parsed()) return cmd_trace(trace.settings());
    if (analyze_cmd.app()->parsed()) return cmd_analyze(analyze_cmd.settings(), run_path);
    if (compare_cmd.app()->parsed()) return cmd_compare(compare_cmd.settings(), run_a, run_b);
    if (bench.app()->parsed()) return cmd_bench(bench.settings());
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const LoadError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kLoad;
  } catch (const ShapeMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kShape;
  } catch (const NotBipartiteCapable& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}
