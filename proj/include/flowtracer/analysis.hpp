#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "flowtracer/fabric.hpp"
#include "flowtracer/tracer.hpp"
#include "json.hpp"

namespace flowtracer {

struct DirectedLinkLoad {
  Endpoint from;
  Endpoint to;
  LinkLayer layer = LinkLayer::host_to_leaf;
  int flow_count = 0;
  int capacity_gbps = 0;
};

/// Every directed link of the fabric, grouped by layer and sorted by the
/// sending endpoint. Unused links are present with a zero count.
using LinkHistogram = std::map<LinkLayer, std::vector<DirectedLinkLoad>>;

/// Throws IncompletePath if any path is incomplete.
LinkHistogram link_histogram(std::span<const TracedPath> paths, const Topology& topology);

/// Flow Imbalance Metric: mean absolute percentage deviation of per-link
/// flow counts from the balanced count,
///   100/n * sum_i |actual_i - ideal_i| / ideal_i.
/// Throws ZeroIdeal when an ideal is not positive and std::invalid_argument
/// for empty input or mismatched lengths.
double fim(std::span<const double> actual, double ideal);
double fim(std::span<const double> actual, std::span<const double> ideal);

struct LayerReport {
  LinkLayer layer = LinkLayer::host_to_leaf;
  std::vector<DirectedLinkLoad> links;
  int total_flows = 0;
  double ideal_flows = 0;     // total_flows / links.size()
  std::optional<double> fim;  // absent when the layer carries no traffic
};

struct ImbalanceReport {
  std::vector<LayerReport> layers;  // one per LinkLayer, in kAllLayers order
  /// Over the union of links in layers with traffic, each against its own
  /// layer's ideal.
  std::optional<double> aggregate_fim;
  std::size_t flow_count = 0;

  const LayerReport& layer(LinkLayer l) const;
};

/// Incomplete paths are skipped.
ImbalanceReport report(std::span<const TracedPath> paths, const Topology& topology);

/// Max-min fair rates by progressive filling. `flow_links[f]` lists the link
/// indices flow f crosses; every flow must cross at least one link.
std::vector<double> maxmin_rates(const std::vector<std::vector<std::size_t>>& flow_links,
                                 std::span<const double> capacity);

struct LinkUtilization {
  Endpoint from;
  Endpoint to;
  LinkLayer layer = LinkLayer::host_to_leaf;
  double load_gbps = 0;
  double capacity_gbps = 0;
};

struct ThroughputReport {
  std::vector<double> flow_rates;  // aligned with the input paths
  std::map<std::pair<std::string, std::string>, double> pair_rates;
  std::vector<LinkUtilization> links;  // links carrying at least one flow
};

/// Throws IncompletePath.
ThroughputReport maxmin_throughput(std::span<const TracedPath> paths, const Topology& topology);

struct RunAnalysis {
  ImbalanceReport imbalance;
  ThroughputReport throughput;
  std::vector<PairSpec> pairs;
};

RunAnalysis analyze(const RunResult& result, const Topology& topology);

struct Quantiles {
  double min = 0;
  double median = 0;
  double max = 0;
};

Quantiles quantiles(std::vector<double> values);

struct LayerComparison {
  LinkLayer layer = LinkLayer::host_to_leaf;
  std::optional<double> fim_a;
  std::optional<double> fim_b;
};

struct Comparison {
  std::vector<LayerComparison> layers;
  std::optional<double> aggregate_a;
  std::optional<double> aggregate_b;
  Quantiles pair_throughput_a;
  Quantiles pair_throughput_b;
  /// metric name -> "a", "b" or "tie"
  std::map<std::string, std::string> winner;

  /// b minus a; absent unless both sides are present.
  std::optional<double> aggregate_delta() const;
};

/// Throws ShapeMismatch when the runs cover different pairs or flow counts.
Comparison compare(const RunAnalysis& a, const RunAnalysis& b);

nlohmann::json imbalance_to_json(const ImbalanceReport& report);
nlohmann::json throughput_to_json(const ThroughputReport& report, std::span<const TracedPath> paths);
nlohmann::json comparison_to_json(const Comparison& comparison);

/// from,to,layer,flow_count,ideal,deviation_pct
std::string links_csv(const ImbalanceReport& report);
/// metric,a,b,delta,winner
std::string comparison_csv(const Comparison& comparison);

}  // namespace flowtracer
