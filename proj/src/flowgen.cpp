#include "flowtracer/flowgen.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "flowtracer/error.hpp"
#include "flowtracer/hashing.hpp"
#include "json_util.hpp"

namespace flowtracer {

Ipv4Address Ipv4Address::parse(std::string_view dotted) {
  std::uint32_t value = 0;
  const char* p = dotted.data();
  const char* end = dotted.data() + dotted.size();
  for (int octet = 0; octet < 4; ++octet) {
    unsigned part = 0;
    auto [next, ec] = std::from_chars(p, end, part);
    if (ec != std::errc{} || next == p || part > 255 || next - p > 3) {
      throw ParseError("invalid IPv4 address '" + std::string(dotted) + "'");
    }
    value = (value << 8) | part;
    p = next;
    if (octet < 3) {
      if (p == end || *p != '.') throw ParseError("invalid IPv4 address '" + std::string(dotted) + "'");
      ++p;
    }
  }
  if (p != end) throw ParseError("invalid IPv4 address '" + std::string(dotted) + "'");
  return Ipv4Address{value};
}

std::string Ipv4Address::to_string() const {
  return std::to_string(value >> 24) + "." + std::to_string((value >> 16) & 0xff) + "." +
         std::to_string((value >> 8) & 0xff) + "." + std::to_string(value & 0xff);
}

std::string_view to_string(Protocol p) { return p == Protocol::tcp ? "tcp" : "udp"; }

Protocol parse_protocol(std::string_view text) {
  if (text == "tcp" || text == "TCP") return Protocol::tcp;
  if (text == "udp" || text == "UDP") return Protocol::udp;
  throw ParseError("unknown protocol '" + std::string(text) + "'");
}

std::string_view to_string(FlowClass c) {
  return c == FlowClass::kernel_visible ? "kernel_visible" : "kernel_bypass";
}

FlowClass parse_flow_class(std::string_view text) {
  if (text == "kernel_visible") return FlowClass::kernel_visible;
  if (text == "kernel_bypass") return FlowClass::kernel_bypass;
  throw ParseError("unknown flow class '" + std::string(text) + "'");
}

std::size_t WorkloadSpec::total_flows() const {
  std::size_t n = 0;
  for (const PairSpec& p : pairs) n += static_cast<std::size_t>(std::max(p.flows, 0));
  return n;
}

std::map<std::string, Ipv4Address, std::less<>> address_plan(const Topology& topology) {
  std::map<std::string, Ipv4Address, std::less<>> plan;
  const auto racks = topology.racks();
  for (std::size_t r = 0; r < racks.size(); ++r) {
    const auto hosts = topology.hosts_in_rack(racks[r]);
    if (r > 255 || hosts.size() > 256) {
      throw ValidationError(racks[r], "rack or host count exceeds the 10.R.H.1 address plan");
    }
    for (std::size_t h = 0; h < hosts.size(); ++h) {
      plan.emplace(hosts[h], Ipv4Address{(10u << 24) | (static_cast<std::uint32_t>(r) << 16) |
                                         (static_cast<std::uint32_t>(h) << 8) | 1u});
    }
  }
  return plan;
}

void validate_workload(const WorkloadSpec& spec, const Topology& topology) {
  if (spec.filter.dst_port_low > spec.filter.dst_port_high || spec.filter.dst_port_low == 0) {
    throw ValidationError("filter", "dst port range must satisfy 1 <= low <= high");
  }
  std::set<std::pair<std::string_view, std::string_view>> seen;
  for (const PairSpec& p : spec.pairs) {
    for (const std::string* host : {&p.src, &p.dst}) {
      const Device* d = topology.find_device(*host);
      if (!d || d->kind != DeviceKind::host) {
        throw UnknownHost("workload references unknown host '" + *host + "'");
      }
    }
    const std::string label = p.src + "->" + p.dst;
    if (p.src == p.dst) throw ValidationError(label, "source and destination must differ");
    if (p.flows < 1) throw ValidationError(label, "flow count must be at least 1");
    if (!seen.emplace(p.src, p.dst).second) throw ValidationError(label, "duplicate pair");
  }
}

std::vector<FlowRecord> generate_flows(const WorkloadSpec& spec, const Topology& topology) {
  validate_workload(spec, topology);
  const auto addresses = address_plan(topology);
  const FilterSpec& filter = spec.filter;

  const bool bypass = spec.flow_class == FlowClass::kernel_bypass;
  const Protocol protocol = filter.protocol.value_or(bypass ? Protocol::udp : Protocol::tcp);
  std::uint16_t dst_port = bypass ? kRoceV2Port : kDefaultTcpPort;
  if (dst_port < filter.dst_port_low || dst_port > filter.dst_port_high) {
    dst_port = filter.dst_port_low;
  }

  std::set<FiveTuple> used;
  std::vector<FlowRecord> flows;
  flows.reserve(spec.total_flows());
  constexpr std::uint32_t kPortSpan = 65536u - kEphemeralPortLow;

  for (std::size_t p = 0; p < spec.pairs.size(); ++p) {
    const PairSpec& pair = spec.pairs[p];
    std::vector<std::string> ifaces;
    for (const Interface& i : topology.device(pair.src).interfaces) ifaces.push_back(i.name);
    std::sort(ifaces.begin(), ifaces.end());

    for (int k = 0; k < pair.flows; ++k) {
      const std::uint64_t draw =
          mix64(spec.seed ^ mix64((static_cast<std::uint64_t>(p) << 32) | static_cast<std::uint32_t>(k)));
      FiveTuple t{addresses.find(pair.src)->second, addresses.find(pair.dst)->second,
                  static_cast<std::uint16_t>(kEphemeralPortLow + draw % kPortSpan), dst_port, protocol};
      std::uint32_t probes = 0;
      while (used.contains(t)) {
        if (++probes == kPortSpan) {
          throw ValidationError(pair.src + "->" + pair.dst, "ephemeral port range exhausted");
        }
        t.src_port = t.src_port == 65535 ? kEphemeralPortLow : static_cast<std::uint16_t>(t.src_port + 1);
      }
      used.insert(t);
      flows.push_back(FlowRecord{t, spec.flow_class, pair.src, pair.dst,
                                 ifaces[(p + static_cast<std::size_t>(k)) % ifaces.size()], k});
    }
  }
  return flows;
}

WorkloadSpec make_bipartite_workload(const Topology& topology, int flows_per_pair,
                                     std::uint64_t seed, bool bidirectional) {
  const auto racks = topology.racks();
  if (racks.size() != 2) {
    throw NotBipartiteCapable("bipartite workload needs exactly 2 racks, found " +
                              std::to_string(racks.size()));
  }
  const auto left = topology.hosts_in_rack(racks[0]);
  const auto right = topology.hosts_in_rack(racks[1]);
  if (left.size() != right.size() || left.empty()) {
    throw NotBipartiteCapable("racks hold unequal or zero host counts");
  }
  WorkloadSpec spec;
  spec.seed = seed;
  for (std::size_t i = 0; i < left.size(); ++i) {
    spec.pairs.push_back({left[i], right[i], flows_per_pair});
  }
  if (bidirectional) {
    for (std::size_t i = 0; i < left.size(); ++i) {
      spec.pairs.push_back({right[i], left[i], flows_per_pair});
    }
  }
  return spec;
}

std::vector<FlowRecord> apply_filter(std::span<const FlowRecord> flows, const FilterSpec& filter) {
  std::vector<FlowRecord> out;
  std::copy_if(flows.begin(), flows.end(), std::back_inserter(out),
               [&](const FlowRecord& f) { return filter.matches(f.tuple); });
  return out;
}

nlohmann::json workload_to_json(const WorkloadSpec& spec) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const PairSpec& p : spec.pairs) {
    pairs.push_back({{"src", p.src}, {"dst", p.dst}, {"flows", p.flows}});
  }
  return {{"pairs", std::move(pairs)},
          {"flow_class", std::string(to_string(spec.flow_class))},
          {"filter",
           {{"dst_port_low", spec.filter.dst_port_low},
            {"dst_port_high", spec.filter.dst_port_high},
            {"protocol", spec.filter.protocol ? std::string(to_string(*spec.filter.protocol)) : "any"}}},
          {"seed", spec.seed}};
}

WorkloadSpec workload_from_json(const nlohmann::json& doc) {
  using detail::expect_keys;
  using detail::get_as;
  using detail::require;

  expect_keys(doc, {"pairs", "flow_class", "filter", "seed"}, "workload");
  WorkloadSpec spec;
  const auto& jpairs = require(doc, "pairs", "workload");
  if (!jpairs.is_array()) throw ParseError("workload: 'pairs' must be an array");
  for (const auto& jp : jpairs) {
    expect_keys(jp, {"src", "dst", "flows"}, "workload pair");
    spec.pairs.push_back({get_as<std::string>(require(jp, "src", "pair"), "pair.src"),
                          get_as<std::string>(require(jp, "dst", "pair"), "pair.dst"),
                          get_as<int>(require(jp, "flows", "pair"), "pair.flows")});
  }
  if (auto it = doc.find("flow_class"); it != doc.end()) {
    spec.flow_class = parse_flow_class(get_as<std::string>(*it, "flow_class"));
  }
  if (auto it = doc.find("filter"); it != doc.end()) {
    expect_keys(*it, {"dst_port_low", "dst_port_high", "protocol"}, "workload filter");
    auto port = [&](const char* key, std::uint16_t fallback) -> std::uint16_t {
      auto f = it->find(key);
      if (f == it->end()) return fallback;
      const int v = get_as<int>(*f, key);
      if (v < 1 || v > 65535) throw ParseError(std::string("filter.") + key + " out of range");
      return static_cast<std::uint16_t>(v);
    };
    spec.filter.dst_port_low = port("dst_port_low", 1);
    spec.filter.dst_port_high = port("dst_port_high", 65535);
    if (auto pr = it->find("protocol"); pr != it->end()) {
      const auto text = get_as<std::string>(*pr, "filter.protocol");
      if (text != "any") spec.filter.protocol = parse_protocol(text);
    }
  }
  if (auto it = doc.find("seed"); it != doc.end()) {
    spec.seed = it->is_number_unsigned() ? it->get<std::uint64_t>()
                                         : static_cast<std::uint64_t>(get_as<std::int64_t>(*it, "seed"));
  }
  return spec;
}

WorkloadSpec load_workload(const std::filesystem::path& path) {
  return workload_from_json(detail::read_json_file(path));
}

void save_workload(const WorkloadSpec& spec, const std::filesystem::path& path) {
  detail::write_json_file(path, workload_to_json(spec));
}

}  // namespace flowtracer
