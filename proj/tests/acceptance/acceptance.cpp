// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <unistd.h>

#include "flowtracer/analysis.hpp"
#include "flowtracer/experiment.hpp"
#include "maxmin_reference.hpp"

using namespace flowtracer;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Aggregate FIM mean of the balls-into-bins Monte-Carlo oracle
// (tests/oracles/balls_into_bins.py, 200000 trials).
constexpr double kBallsIntoBinsMean = 29.0746;
constexpr double kMeanTolerance = 0.20;
constexpr int kFlowsPerPair = 16;

int failures = 0;
std::map<std::string, std::string> verdicts;

void verdict(const std::string& id, bool ok, const std::string& detail) {
  verdicts[id] = id + " " + (ok ? "PASS" : "FAIL") + "  " + detail;
  std::cerr << "done " << id << std::endl;
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

RoutingPolicy ecmp(std::uint64_t seed, FieldSet fields = FieldSet::full_five_tuple) {
  return RoutingPolicy::ecmp({fields, false, seed});
}

RoutingPolicy balanced(const WorkloadSpec& w, const Topology& t) {
  return RoutingPolicy::from_tables(build_balanced_static_tables(t, generate_flows(w, t)));
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(prec);
  os << v;
  return os.str();
}

void ac1_ac5(const Topology& topo) {
  constexpr int kSeeds = 20;
  int mismatches = 0;
  double worst_s = 0;
  std::size_t inter = 0, intra = 0, bad_hops = 0;
  auto check_hops = [&](const RunResult& r) {
    for (const auto& p : r.paths) {
      const bool same_rack = topo.device(p.flow.source_host).rack == topo.device(p.flow.dest_host).rack;
      (same_rack ? intra : inter) += 1;
      if (!p.complete || p.switch_count() != (same_rack ? 1u : 3u)) ++bad_hops;
    }
    bad_hops += r.errors.size();
  };

  for (int s = 0; s < kSeeds; ++s) {
    const auto t0 = Clock::now();
    const WorkloadSpec w = make_bipartite_workload(topo, kFlowsPerPair, 1000 + s);
    for (const RoutingPolicy& policy : {ecmp(1000 + s), balanced(w, topo)}) {
      const RunResult r = trace_in_process(w, topo, policy, {});
      if (!r.errors.empty() || r.paths != oracle_paths(w, topo, policy)) ++mismatches;
      check_hops(r);
    }
    worst_s = std::max(worst_s, seconds_since(t0));
  }
  verdict("AC1", mismatches == 0 && worst_s < 60,
          std::to_string(kSeeds) + " seeds x {ecmp, static}, " + std::to_string(mismatches) +
              " mismatching runs, slowest seed " + fmt(worst_s, 2) + " s (limit 60 s)");

  // intra-rack pairs share a leaf in the reference testbed
  WorkloadSpec local;
  for (int i = 0; i < 8; i += 2) {
    char a[16], b[16];
    std::snprintf(a, sizeof a, "host-%02d", i);
    std::snprintf(b, sizeof b, "host-%02d", i + 1);
    local.pairs.push_back({a, b, kFlowsPerPair});
  }
  check_hops(trace_in_process(local, topo, ecmp(7), {}));
  verdict("AC5", bad_hops == 0 && inter > 0 && intra > 0,
          std::to_string(inter) + " inter-rack paths with 3 switches, " + std::to_string(intra) +
              " intra-rack paths with 1, " + std::to_string(bad_hops) + " violations");
}

void ac2(const Topology& topo) {
  const WorkloadSpec w = make_bipartite_workload(topo, kFlowsPerPair, 42);
  const RunResult r = trace_in_process(w, topo, balanced(w, topo), {});
  const ImbalanceReport rep = report(r.paths, topo);
  std::size_t off = 0, checked = 0;
  for (const LinkLayer l : {LinkLayer::leaf_to_spine, LinkLayer::spine_to_leaf}) {
    for (const auto& link : rep.layer(l).links) {
      ++checked;
      if (link.flow_count != 4) ++off;
    }
  }
  const double agg = rep.aggregate_fim.value_or(NAN);
  verdict("AC2", r.errors.empty() && off == 0 && checked == 128 && std::abs(agg) <= 1e-9,
          std::to_string(checked - off) + "/" + std::to_string(checked) +
              " leaf-spine directed links at 4 flows, aggregate FIM " + fmt(agg, 12));
}

void ac3(const Topology& topo) {
  constexpr int kSeeds = 100;
  int ecmp_worse = 0;
  double sum = 0, sum_sq = 0;
  for (int s = 0; s < kSeeds; ++s) {
    const WorkloadSpec w = make_bipartite_workload(topo, kFlowsPerPair, 5000 + s);
    const RunResult e = trace_in_process(w, topo, ecmp(5000 + s), {});
    const RunResult st = trace_in_process(w, topo, balanced(w, topo), {});
    const double fe = report(e.paths, topo).aggregate_fim.value_or(NAN);
    const double fs_ = report(st.paths, topo).aggregate_fim.value_or(NAN);
    if (e.errors.empty() && st.errors.empty() && fe > fs_) ++ecmp_worse;
    sum += fe;
    sum_sq += fe * fe;
  }
  const double mean = sum / kSeeds;
  const double sd = std::sqrt(std::max(0.0, sum_sq / kSeeds - mean * mean));
  const double rel = std::abs(mean - kBallsIntoBinsMean) / kBallsIntoBinsMean;
  verdict("AC3", ecmp_worse == kSeeds && rel <= kMeanTolerance,
          "ECMP > static in " + std::to_string(ecmp_worse) + "/" + std::to_string(kSeeds) +
              " seeds, ECMP mean FIM " + fmt(mean) + " (sd " + fmt(sd) + ") vs oracle " + fmt(kBallsIntoBinsMean) +
              ", off by " + fmt(100 * rel, 2) + "% (limit 20%)");
}

void ac4(const Topology& topo) {
  // Two flows pinned onto one uplink of leaf-0.
  WorkloadSpec w;
  w.pairs = {{"host-00", "host-08", 1}, {"host-01", "host-09", 1}};
  StaticTables tables;
  tables["leaf-0"] = {StaticRule{RuleMatch{}, "up-spine-0-a"}};
  const auto flows = generate_flows(w, topo);
  for (const auto& f : flows) {
    tables["spine-0"].push_back(StaticRule{RuleMatch{.dst_ip = f.tuple.dst_ip},
                                           f.dest_host == "host-08" ? "down-leaf-2-a" : "down-leaf-2-b"});
    tables["leaf-2"].push_back(
        StaticRule{RuleMatch{.dst_ip = f.tuple.dst_ip}, f.dest_host == "host-08" ? "down-host-08-a" : "down-host-09-a"});
  }
  bool collision_ok = false;
  std::string collision_detail = "sources not on leaf-0";
  if (topo.neighbor("host-00", flows[0].source_interface).device == "leaf-0" &&
      topo.neighbor("host-01", flows[1].source_interface).device == "leaf-0") {
    const RunResult r = trace_in_process(w, topo, RoutingPolicy::from_tables(tables), {});
    const ThroughputReport t = maxmin_throughput(r.paths, topo);
    collision_ok = r.errors.empty() && t.flow_rates.size() == 2 && t.flow_rates[0] == 50.0 && t.flow_rates[1] == 50.0;
    collision_detail = "colliding flows at " + (t.flow_rates.size() == 2 ? fmt(t.flow_rates[0], 3) + " and " +
                                                                               fmt(t.flow_rates[1], 3)
                                                                         : std::string("?")) +
                       " Gbps";
  }

  std::mt19937_64 rng(99);
  int certified = 0, agree = 0;
  constexpr int kInstances = 10000;
  for (int i = 0; i < kInstances; ++i) {
    const std::size_t links = 1 + rng() % 8;
    const std::size_t n = 1 + rng() % 10;
    std::vector<double> cap(links);
    for (auto& c : cap) c = (rng() % 4 == 0) ? 100.0 : 1.0 + static_cast<double>(rng() % 400) / 4;
    std::vector<std::vector<std::size_t>> fl(n);
    for (auto& f : fl) {
      for (std::size_t l = 0; l < links; ++l) {
        if (rng() % 3 == 0) f.push_back(l);
      }
      if (f.empty()) f.push_back(rng() % links);
    }
    const auto rates = maxmin_rates(fl, cap);
    const auto ref = flowtracer::testing::bottleneck_reference(fl, cap);
    bool same = rates.size() == ref.size();
    for (std::size_t f = 0; same && f < n; ++f) same = std::abs(rates[f] - ref[f]) <= 1e-9 * (1 + ref[f]);
    agree += same;
    certified += flowtracer::testing::maxmin_certified(fl, cap, rates);
  }
  verdict("AC4", collision_ok && certified == kInstances && agree == kInstances,
          collision_detail + "; " + std::to_string(certified) + "/" + std::to_string(kInstances) +
              " random instances certified, " + std::to_string(agree) + " agree with the reference");
}

void ac6(const Topology& topo) {
  // The full default sweep: flows 2..128, T {2,4,8}, all modes, R=3.
  const BenchSweep sweep;
  const auto t0 = Clock::now();
  const auto rows = run_bench(topo, sweep);
  const double sweep_s = seconds_since(t0);
  std::map<std::pair<int, ConnectionMode>, double> single;  // baseline and persistent, T=1
  std::map<std::pair<int, int>, double> parallel;           // (flows, T)
  std::size_t errors = 0;
  for (const auto& r : rows) {
    errors += r.error_count;
    if (r.mode == ConnectionMode::parallel_persistent) {
      parallel[{r.flows, r.threads}] = r.mean_ms;
    } else {
      single[{r.flows, r.mode}] = r.mean_ms;
    }
  }
  bool order_ok = errors == 0;
  std::ostringstream detail;
  for (int f : sweep.flows) {
    if (f < 8) continue;
    const double b = single[{f, ConnectionMode::baseline}];
    const double p = single[{f, ConnectionMode::persistent}];
    double slowest_parallel = 0;
    for (int t : sweep.threads) slowest_parallel = std::max(slowest_parallel, parallel[{f, t}]);
    order_ok = order_ok && b >= 1.1 * p && p >= 1.1 * slowest_parallel;
    detail << f << ":" << fmt(b, 0) << ">" << fmt(p, 0) << ">" << fmt(slowest_parallel, 0) << " ";
  }
  const double speedup = parallel[{128, 2}] / parallel[{128, 8}];
  verdict("AC6", order_ok && speedup >= 2.0 && sweep_s < 600,
          "ms baseline>persistent>slowest parallel " + detail.str() + "(margin 10%); 128 flows T=2/T=8 = " +
              fmt(speedup, 2) + " (limit 2.0); full sweep " + fmt(sweep_s, 1) + " s (limit 600 s)");
}

void ac7(const Topology& topo) {
  const WorkloadSpec w = make_bipartite_workload(topo, kFlowsPerPair, 77);
  RunPlan plan;
  plan.threads = 4;
  const fs::path dir = fs::temp_directory_path() / ("flowtracer_ac7_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  std::string bytes[2];
  for (int i = 0; i < 2; ++i) {
    RunResult r = trace_in_process(w, topo, ecmp(77), plan);
    r.timing = {};
    const fs::path p = dir / ("run" + std::to_string(i) + ".json");
    save_run_result(r, p);
    std::ifstream in(p, std::ios::binary);
    bytes[i].assign(std::istreambuf_iterator<char>(in), {});
  }
  fs::remove_all(dir);
  verdict("AC7", !bytes[0].empty() && bytes[0] == bytes[1],
          "two runs, " + std::to_string(bytes[0].size()) + " bytes each, identical=" +
              (bytes[0] == bytes[1] ? "yes" : "no"));
}

void ac8(const Topology& topo) {
  const WorkloadSpec w = make_bipartite_workload(topo, kFlowsPerPair, 8);
  const RunResult r = trace_in_process(w, topo, ecmp(8, FieldSet::reduced_outer), {});
  // pair -> source leaf -> uplinks used
  std::map<std::pair<std::string, std::string>, std::map<std::string, std::set<std::string>>> used;
  std::map<std::pair<std::string, std::string>, int> flows;
  for (const auto& p : r.paths) {
    const auto key = std::pair{p.flow.source_host, p.flow.dest_host};
    ++flows[key];
    used[key][p.hops[1].device].insert(p.hops[1].egress.value_or(""));
  }
  int collapsed = 0;
  for (const auto& [pair, leaves] : used) {
    bool one = flows[pair] == kFlowsPerPair;
    for (const auto& [leaf, uplinks] : leaves) one = one && uplinks.size() == 1;
    collapsed += one;
  }
  verdict("AC8", r.errors.empty() && collapsed == static_cast<int>(w.pairs.size()),
          std::to_string(collapsed) + "/" + std::to_string(w.pairs.size()) +
              " pairs with a single uplink per source leaf under reduced_outer hashing");
}

}  // namespace

int main() {
  const Topology topo = generate_reference_testbed();
  ac1_ac5(topo);
  ac2(topo);
  ac3(topo);
  ac4(topo);
  ac6(topo);
  ac7(topo);
  ac8(topo);
  for (const auto& [id, line] : verdicts) std::cout << line << "\n";
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
