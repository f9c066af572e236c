#include "flowtracer/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "flowtracer/error.hpp"

namespace flowtracer {

namespace {

constexpr double kTieTolerance = 1e-9;

struct DirectedIndex {
  std::vector<DirectedLinkLoad> links;
  std::map<Endpoint, std::size_t> by_sender;
};

DirectedIndex directed_links(const Topology& topology) {
  DirectedIndex index;
  for (const Link& link : topology.links()) {
    for (const auto& [from, to] : {std::pair{link.a, link.b}, std::pair{link.b, link.a}}) {
      const auto layer = classify_layer(topology.device(from.device).kind, topology.device(to.device).kind);
      if (!layer) continue;
      const Interface* iface = topology.device(from.device).find_interface(from.interface);
      index.links.push_back(DirectedLinkLoad{from, to, *layer, 0, iface ? iface->speed_gbps : 0});
    }
  }
  std::sort(index.links.begin(), index.links.end(),
            [](const DirectedLinkLoad& x, const DirectedLinkLoad& y) { return x.from < y.from; });
  for (std::size_t i = 0; i < index.links.size(); ++i) index.by_sender[index.links[i].from] = i;
  return index;
}

std::vector<std::size_t> path_links(const TracedPath& path, const DirectedIndex& index) {
  if (!path.complete) {
    throw IncompletePath("path for " + path.flow.source_host + " -> " + path.flow.dest_host + " is incomplete");
  }
  std::vector<std::size_t> out;
  for (const Hop& hop : path.hops) {
    if (!hop.egress) continue;
    const auto it = index.by_sender.find(Endpoint{hop.device, *hop.egress});
    if (it == index.by_sender.end()) {
      throw IncompletePath("hop " + hop.device + ":" + *hop.egress + " is not a fabric link");
    }
    out.push_back(it->second);
  }
  return out;
}

std::string pick(std::optional<double> a, std::optional<double> b, bool lower_is_better) {
  if (!a && !b) return "tie";
  if (!a) return "b";
  if (!b) return "a";
  if (std::abs(*a - *b) <= kTieTolerance * std::max({1.0, std::abs(*a), std::abs(*b)})) return "tie";
  return (*a < *b) == lower_is_better ? "a" : "b";
}

nlohmann::json optional_number(std::optional<double> v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::string csv_number(std::optional<double> v) {
  if (!v) return "";
  std::ostringstream out;
  out.precision(10);
  out << *v;
  return out.str();
}

std::string endpoint_text(const Endpoint& e) { return e.device + ":" + e.interface; }

}  // namespace

LinkHistogram link_histogram(std::span<const TracedPath> paths, const Topology& topology) {
  DirectedIndex index = directed_links(topology);
  for (const TracedPath& path : paths) {
    for (std::size_t link : path_links(path, index)) ++index.links[link].flow_count;
  }
  LinkHistogram histogram;
  for (LinkLayer layer : kAllLayers) histogram[layer];
  for (auto& load : index.links) histogram[load.layer].push_back(std::move(load));
  return histogram;
}

double fim(std::span<const double> actual, double ideal) {
  if (actual.empty()) throw std::invalid_argument("fim: no links");
  if (!(ideal > 0)) throw ZeroIdeal("fim: ideal load must be positive");
  double sum = 0;
  for (double a : actual) sum += std::abs(a - ideal) / ideal;
  return 100.0 * sum / static_cast<double>(actual.size());
}

double fim(std::span<const double> actual, std::span<const double> ideal) {
  if (actual.empty()) throw std::invalid_argument("fim: no links");
  if (actual.size() != ideal.size()) throw std::invalid_argument("fim: length mismatch");
  double sum = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (!(ideal[i] > 0)) throw ZeroIdeal("fim: ideal load must be positive");
    sum += std::abs(actual[i] - ideal[i]) / ideal[i];
  }
  return 100.0 * sum / static_cast<double>(actual.size());
}

const LayerReport& ImbalanceReport::layer(LinkLayer l) const {
  for (const auto& r : layers) {
    if (r.layer == l) return r;
  }
  throw std::out_of_range("layer not in report");
}

ImbalanceReport report(std::span<const TracedPath> paths, const Topology& topology) {
  std::vector<TracedPath> complete;
  for (const auto& p : paths) {
    if (p.complete) complete.push_back(p);
  }
  const LinkHistogram histogram = link_histogram(complete, topology);

  ImbalanceReport out;
  out.flow_count = complete.size();
  std::vector<double> all_actual;
  std::vector<double> all_ideal;
  for (LinkLayer layer : kAllLayers) {
    LayerReport r;
    r.layer = layer;
    r.links = histogram.at(layer);
    std::vector<double> actual;
    for (const auto& l : r.links) {
      r.total_flows += l.flow_count;
      actual.push_back(l.flow_count);
    }
    if (!r.links.empty()) r.ideal_flows = static_cast<double>(r.total_flows) / static_cast<double>(r.links.size());
    if (r.total_flows > 0) {
      r.fim = fim(actual, r.ideal_flows);
      all_actual.insert(all_actual.end(), actual.begin(), actual.end());
      all_ideal.insert(all_ideal.end(), actual.size(), r.ideal_flows);
    }
    out.layers.push_back(std::move(r));
  }
  if (!all_actual.empty()) out.aggregate_fim = fim(all_actual, all_ideal);
  return out;
}

std::vector<double> maxmin_rates(const std::vector<std::vector<std::size_t>>& flow_links,
                                 std::span<const double> capacity) {
  const std::size_t n = flow_links.size();
  std::vector<double> rate(n, 0.0);
  std::vector<bool> frozen(n, false);
  std::vector<double> residual(capacity.begin(), capacity.end());
  std::vector<double> active(capacity.size(), 0.0);
  std::vector<std::vector<std::size_t>> users(capacity.size());

  for (std::size_t f = 0; f < n; ++f) {
    if (flow_links[f].empty()) throw std::invalid_argument("maxmin_rates: flow crosses no link");
    for (std::size_t l : flow_links[f]) {
      if (l >= capacity.size()) throw std::invalid_argument("maxmin_rates: link index out of range");
      active[l] += 1;
      users[l].push_back(f);
    }
  }
  for (double c : capacity) {
    if (!(c > 0)) throw std::invalid_argument("maxmin_rates: capacity must be positive");
  }

  std::size_t remaining = n;
  while (remaining > 0) {
    double delta = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < residual.size(); ++l) {
      if (active[l] > 0) delta = std::min(delta, std::max(residual[l], 0.0) / active[l]);
    }
    for (std::size_t f = 0; f < n; ++f) {
      if (!frozen[f]) rate[f] += delta;
    }
    for (std::size_t l = 0; l < residual.size(); ++l) residual[l] -= delta * active[l];

    for (std::size_t l = 0; l < residual.size(); ++l) {
      if (active[l] == 0 || residual[l] > 1e-9 * capacity[l]) continue;
      for (std::size_t f : users[l]) {
        if (frozen[f]) continue;
        frozen[f] = true;
        --remaining;
        for (std::size_t k : flow_links[f]) active[k] -= 1;
      }
    }
  }
  return rate;
}

ThroughputReport maxmin_throughput(std::span<const TracedPath> paths, const Topology& topology) {
  const DirectedIndex index = directed_links(topology);
  std::vector<std::vector<std::size_t>> flow_links;
  flow_links.reserve(paths.size());
  for (const auto& p : paths) flow_links.push_back(path_links(p, index));
  std::vector<double> capacity;
  for (const auto& l : index.links) capacity.push_back(l.capacity_gbps);

  ThroughputReport out;
  out.flow_rates = maxmin_rates(flow_links, capacity);
  std::vector<double> load(capacity.size(), 0.0);
  std::vector<bool> used(capacity.size(), false);
  for (std::size_t f = 0; f < paths.size(); ++f) {
    out.pair_rates[{paths[f].flow.source_host, paths[f].flow.dest_host}] += out.flow_rates[f];
    for (std::size_t l : flow_links[f]) {
      load[l] += out.flow_rates[f];
      used[l] = true;
    }
  }
  for (std::size_t l = 0; l < index.links.size(); ++l) {
    if (!used[l]) continue;
    const auto& link = index.links[l];
    out.links.push_back(LinkUtilization{link.from, link.to, link.layer, load[l], capacity[l]});
  }
  return out;
}

RunAnalysis analyze(const RunResult& result, const Topology& topology) {
  RunAnalysis out;
  out.pairs = result.pairs;
  out.imbalance = report(result.paths, topology);
  std::vector<TracedPath> complete;
  for (const auto& p : result.paths) {
    if (p.complete) complete.push_back(p);
  }
  out.throughput = maxmin_throughput(complete, topology);
  for (const auto& pair : result.pairs) out.throughput.pair_rates.try_emplace({pair.src, pair.dst}, 0.0);
  return out;
}

Quantiles quantiles(std::vector<double> values) {
  if (values.empty()) return {};
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  const double median = n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
  return Quantiles{values.front(), median, values.back()};
}

std::optional<double> Comparison::aggregate_delta() const {
  if (!aggregate_a || !aggregate_b) return std::nullopt;
  return *aggregate_b - *aggregate_a;
}

Comparison compare(const RunAnalysis& a, const RunAnalysis& b) {
  auto shape = [](const RunAnalysis& r) {
    std::vector<std::tuple<std::string, std::string, int>> s;
    for (const auto& p : r.pairs) s.emplace_back(p.src, p.dst, p.flows);
    std::sort(s.begin(), s.end());
    return s;
  };
  if (shape(a) != shape(b)) throw ShapeMismatch("runs cover different host pairs or flows per pair");
  if (a.imbalance.flow_count != b.imbalance.flow_count) {
    throw ShapeMismatch("runs traced different flow counts (" + std::to_string(a.imbalance.flow_count) + " vs " +
                        std::to_string(b.imbalance.flow_count) + ")");
  }

  Comparison out;
  for (LinkLayer layer : kAllLayers) {
    LayerComparison lc{layer, a.imbalance.layer(layer).fim, b.imbalance.layer(layer).fim};
    out.winner["fim_" + std::string(to_string(layer))] = pick(lc.fim_a, lc.fim_b, true);
    out.layers.push_back(lc);
  }
  out.aggregate_a = a.imbalance.aggregate_fim;
  out.aggregate_b = b.imbalance.aggregate_fim;
  out.winner["aggregate_fim"] = pick(out.aggregate_a, out.aggregate_b, true);

  auto pair_values = [](const RunAnalysis& r) {
    std::vector<double> v;
    for (const auto& [_, rate] : r.throughput.pair_rates) v.push_back(rate);
    return v;
  };
  out.pair_throughput_a = quantiles(pair_values(a));
  out.pair_throughput_b = quantiles(pair_values(b));
  out.winner["pair_throughput_min"] = pick(out.pair_throughput_a.min, out.pair_throughput_b.min, false);
  out.winner["pair_throughput_median"] = pick(out.pair_throughput_a.median, out.pair_throughput_b.median, false);
  out.winner["pair_throughput_max"] = pick(out.pair_throughput_a.max, out.pair_throughput_b.max, false);
  return out;
}

nlohmann::json imbalance_to_json(const ImbalanceReport& report) {
  nlohmann::json layers = nlohmann::json::object();
  for (const auto& r : report.layers) {
    nlohmann::json links = nlohmann::json::array();
    for (const auto& l : r.links) {
      links.push_back({{"from", endpoint_text(l.from)},
                       {"to", endpoint_text(l.to)},
                       {"flow_count", l.flow_count},
                       {"capacity_gbps", l.capacity_gbps}});
    }
    layers[std::string(to_string(r.layer))] = {{"link_count", r.links.size()},
                                               {"total_flows", r.total_flows},
                                               {"ideal", r.ideal_flows},
                                               {"fim", optional_number(r.fim)},
                                               {"links", std::move(links)}};
  }
  return {{"flow_count", report.flow_count},
          {"aggregate_fim", optional_number(report.aggregate_fim)},
          {"layers", std::move(layers)}};
}

nlohmann::json throughput_to_json(const ThroughputReport& report, std::span<const TracedPath> paths) {
  nlohmann::json flows = nlohmann::json::array();
  for (std::size_t i = 0; i < report.flow_rates.size() && i < paths.size(); ++i) {
    const auto& f = paths[i].flow;
    flows.push_back({{"src_host", f.source_host},
                     {"dst_host", f.dest_host},
                     {"ordinal", f.flow_ordinal},
                     {"src_port", f.tuple.src_port},
                     {"rate_gbps", report.flow_rates[i]}});
  }
  nlohmann::json pairs = nlohmann::json::array();
  std::vector<double> values;
  for (const auto& [key, rate] : report.pair_rates) {
    pairs.push_back({{"src_host", key.first}, {"dst_host", key.second}, {"rate_gbps", rate}});
    values.push_back(rate);
  }
  nlohmann::json links = nlohmann::json::array();
  for (const auto& l : report.links) {
    links.push_back({{"from", endpoint_text(l.from)},
                     {"to", endpoint_text(l.to)},
                     {"layer", to_string(l.layer)},
                     {"load_gbps", l.load_gbps},
                     {"capacity_gbps", l.capacity_gbps},
                     {"utilization", l.capacity_gbps > 0 ? l.load_gbps / l.capacity_gbps : 0.0}});
  }
  const Quantiles q = quantiles(values);
  return {{"flows", std::move(flows)},
          {"pairs", std::move(pairs)},
          {"pair_summary", {{"min", q.min}, {"median", q.median}, {"max", q.max}}},
          {"links", std::move(links)}};
}

nlohmann::json comparison_to_json(const Comparison& c) {
  nlohmann::json layers = nlohmann::json::object();
  for (const auto& l : c.layers) {
    std::optional<double> delta;
    if (l.fim_a && l.fim_b) delta = *l.fim_b - *l.fim_a;
    layers[std::string(to_string(l.layer))] = {
        {"fim_a", optional_number(l.fim_a)}, {"fim_b", optional_number(l.fim_b)}, {"delta", optional_number(delta)}};
  }
  auto q = [](const Quantiles& x) { return nlohmann::json{{"min", x.min}, {"median", x.median}, {"max", x.max}}; };
  return {{"layers", std::move(layers)},
          {"aggregate_fim",
           {{"a", optional_number(c.aggregate_a)},
            {"b", optional_number(c.aggregate_b)},
            {"delta", optional_number(c.aggregate_delta())}}},
          {"pair_throughput", {{"a", q(c.pair_throughput_a)}, {"b", q(c.pair_throughput_b)}}},
          {"winner", c.winner}};
}

std::string links_csv(const ImbalanceReport& report) {
  std::ostringstream out;
  out << "from,to,layer,flow_count,ideal,deviation_pct\n";
  for (const auto& r : report.layers) {
    for (const auto& l : r.links) {
      std::optional<double> deviation;
      if (r.ideal_flows > 0) deviation = 100.0 * (l.flow_count - r.ideal_flows) / r.ideal_flows;
      out << endpoint_text(l.from) << ',' << endpoint_text(l.to) << ',' << to_string(r.layer) << ',' << l.flow_count
          << ',' << csv_number(r.ideal_flows) << ',' << csv_number(deviation) << '\n';
    }
  }
  return out.str();
}

std::string comparison_csv(const Comparison& c) {
  std::ostringstream out;
  out << "metric,a,b,delta,winner\n";
  auto row = [&](const std::string& metric, std::optional<double> a, std::optional<double> b) {
    std::optional<double> delta;
    if (a && b) delta = *b - *a;
    const auto w = c.winner.find(metric);
    out << metric << ',' << csv_number(a) << ',' << csv_number(b) << ',' << csv_number(delta) << ','
        << (w == c.winner.end() ? "" : w->second) << '\n';
  };
  for (const auto& l : c.layers) row("fim_" + std::string(to_string(l.layer)), l.fim_a, l.fim_b);
  row("aggregate_fim", c.aggregate_a, c.aggregate_b);
  row("pair_throughput_min", c.pair_throughput_a.min, c.pair_throughput_b.min);
  row("pair_throughput_median", c.pair_throughput_a.median, c.pair_throughput_b.median);
  row("pair_throughput_max", c.pair_throughput_a.max, c.pair_throughput_b.max);
  return out.str();
}

}  // namespace flowtracer
