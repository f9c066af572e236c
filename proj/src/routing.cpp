#include "flowtracer/routing.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "flowtracer/error.hpp"
#include "flowtracer/hashing.hpp"
#include "json_util.hpp"

namespace flowtracer {

std::string_view to_string(FieldSet f) {
  return f == FieldSet::full_five_tuple ? "full_five_tuple" : "reduced_outer";
}

FieldSet parse_field_set(std::string_view text) {
  if (text == "full_five_tuple") return FieldSet::full_five_tuple;
  if (text == "reduced_outer") return FieldSet::reduced_outer;
  throw ParseError("unknown field set '" + std::string(text) + "'");
}

bool RuleMatch::matches(const FiveTuple& t) const {
  return (!src_ip || *src_ip == t.src_ip) && (!dst_ip || *dst_ip == t.dst_ip) &&
         (!src_port || src_port->contains(t.src_port)) && (!dst_port || dst_port->contains(t.dst_port));
}

std::vector<std::uint8_t> hash_key(const FiveTuple& tuple, std::string_view ingress,
                                   const EcmpConfig& config) {
  std::vector<std::uint8_t> key;
  key.reserve(13 + (config.include_ingress ? ingress.size() : 0));
  auto put32 = [&](std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) key.push_back(static_cast<std::uint8_t>(v >> shift));
  };
  auto put16 = [&](std::uint16_t v) {
    key.push_back(static_cast<std::uint8_t>(v >> 8));
    key.push_back(static_cast<std::uint8_t>(v));
  };
  put32(tuple.src_ip.value);
  put32(tuple.dst_ip.value);
  if (config.field_set == FieldSet::full_five_tuple) {
    put16(tuple.src_port);
    put16(tuple.dst_port);
    key.push_back(static_cast<std::uint8_t>(tuple.protocol));
  }
  if (config.include_ingress) key.insert(key.end(), ingress.begin(), ingress.end());
  return key;
}

std::uint64_t ecmp_hash(const FiveTuple& tuple, std::string_view ingress, const EcmpConfig& config,
                        std::string_view device) {
  const std::uint64_t salt = mix64(config.seed ^ fnv1a64(device));
  // The final mix spreads entropy into the low bits used by the modulo;
  // without it every switch would pick from the same low bits of the key hash.
  return mix64(fnv1a64(hash_key(tuple, ingress, config)) ^ salt);
}

std::vector<std::string> candidate_egress(const Topology& topology, std::string_view device,
                                          std::string_view dst_host, std::string_view ingress) {
  const Device* dev = topology.find_device(device);
  if (!dev) throw NoRoute("unknown device '" + std::string(device) + "'");
  if (!dev->is_switch()) throw std::invalid_argument("candidate_egress: '" + dev->id + "' is not a switch");
  const auto dist = topology.distance_to_host(device, dst_host);
  if (!dist) {
    throw NoRoute(dev->id + " has no route to '" + std::string(dst_host) + "'");
  }

  std::vector<std::string> out;
  for (const Interface& iface : dev->interfaces) {
    if (iface.name == ingress) continue;
    const auto p = topology.peer(dev->id, iface.name);
    if (!p) continue;
    if (p->device == dst_host) {
      out.push_back(iface.name);
      continue;
    }
    const Device& next = topology.device(p->device);
    if (!next.is_switch()) continue;
    const auto next_dist = topology.distance_to_host(next.id, dst_host);
    if (next_dist && *next_dist == *dist - 1) out.push_back(iface.name);
  }
  if (out.empty()) {
    throw NoRoute(dev->id + " has no onward route to '" + std::string(dst_host) + "'");
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string hash_select(std::span<const std::string> candidates, const FiveTuple& tuple,
                        std::string_view ingress, const EcmpConfig& config, std::string_view device) {
  if (candidates.empty()) throw EmptyCandidates(std::string(device) + ": no ECMP candidates");
  return candidates[ecmp_hash(tuple, ingress, config, device) % candidates.size()];
}

std::string static_select(const StaticTables& tables, std::string_view device, const FiveTuple& tuple) {
  auto it = tables.find(device);
  if (it != tables.end()) {
    for (const StaticRule& rule : it->second) {
      if (rule.match.matches(tuple)) return rule.egress;
    }
  }
  throw NoMatchingRule(std::string(device) + ": no static rule matches the flow");
}

std::string forward(const Topology& topology, const RoutingPolicy& policy, std::string_view device,
                    std::string_view ingress, const FiveTuple& tuple, std::string_view dst_host) {
  const Device& dev = topology.device(device);
  if (!dev.is_switch()) throw std::invalid_argument("forward: '" + dev.id + "' is not a switch");
  if (!dev.find_interface(ingress)) {
    throw UnknownDevice(dev.id + " has no interface '" + std::string(ingress) + "'");
  }
  std::string egress;
  if (const EcmpConfig* ecmp = policy.ecmp_config()) {
    const auto candidates = candidate_egress(topology, device, dst_host, ingress);
    egress = hash_select(candidates, tuple, ingress, *ecmp, device);
  } else {
    egress = static_select(*policy.tables(), device, tuple);
  }
  if (!topology.peer(device, egress)) {
    throw NoRoute(dev.id + ": egress '" + egress + "' is not linked");
  }
  return egress;
}

namespace {

struct Step {
  Endpoint from;
  LinkLayer layer;
};

void enumerate_paths(const Topology& topology, const std::string& device, const std::string& ingress,
                     const std::string& dst_host, std::vector<Step>& prefix,
                     std::vector<std::vector<Step>>& out) {
  const DeviceKind kind = topology.device(device).kind;
  for (const std::string& egress : candidate_egress(topology, device, dst_host, ingress)) {
    const Endpoint to = *topology.peer(device, egress);
    prefix.push_back(Step{{device, egress}, *classify_layer(kind, topology.device(to.device).kind)});
    if (to.device == dst_host) {
      out.push_back(prefix);
    } else {
      enumerate_paths(topology, to.device, to.interface, dst_host, prefix, out);
    }
    prefix.pop_back();
  }
}

}  // namespace

StaticTables build_balanced_static_tables(const Topology& topology, std::span<const FlowRecord> flows) {
  std::map<Endpoint, int> load;
  std::map<LinkLayer, std::vector<Endpoint>> layer_links;
  for (const Link& l : topology.links()) {
    for (const auto& [from, to] : {std::pair{l.a, l.b}, std::pair{l.b, l.a}}) {
      const auto layer = classify_layer(topology.device(from.device).kind, topology.device(to.device).kind);
      layer_links[*layer].push_back(from);
      load[from] = 0;
    }
  }
  auto layer_min = [&](LinkLayer layer) {
    int m = std::numeric_limits<int>::max();
    for (const Endpoint& e : layer_links[layer]) m = std::min(m, load[e]);
    return m;
  };

  StaticTables tables;
  for (const FlowRecord& flow : flows) {
    const Endpoint first = topology.neighbor(flow.source_host, flow.source_interface);
    ++load[Endpoint{flow.source_host, flow.source_interface}];
    if (first.device == flow.dest_host) continue;

    std::vector<std::vector<Step>> paths;
    std::vector<Step> prefix;
    enumerate_paths(topology, first.device, first.interface, flow.dest_host, prefix, paths);

    std::map<LinkLayer, int> mins;
    for (LinkLayer layer : kAllLayers) mins[layer] = layer_min(layer);

    const std::vector<Step>* best = nullptr;
    std::pair<int, int> best_key{std::numeric_limits<int>::max(), std::numeric_limits<int>::max()};
    for (const auto& path : paths) {
      int worst = 0;
      int total = 0;
      for (const Step& s : path) {
        const int excess = load[s.from] - mins[s.layer];
        worst = std::max(worst, excess);
        total += excess;
      }
      if (std::pair{worst, total} < best_key) {
        best_key = {worst, total};
        best = &path;
      }
    }

    const PortRange sport{flow.tuple.src_port, flow.tuple.src_port};
    const PortRange dport{flow.tuple.dst_port, flow.tuple.dst_port};
    for (const Step& s : *best) {
      ++load[s.from];
      tables[s.from.device].push_back(
          StaticRule{RuleMatch{flow.tuple.src_ip, flow.tuple.dst_ip, sport, dport}, s.from.interface});
    }
  }
  return tables;
}

void validate_static_tables(const StaticTables& tables, const Topology& topology) {
  for (const auto& [device, rules] : tables) {
    const Device* dev = topology.find_device(device);
    if (!dev || !dev->is_switch()) {
      throw ValidationError(device, "static table for an unknown or non-switch device");
    }
    for (const StaticRule& rule : rules) {
      if (!dev->find_interface(rule.egress) || !topology.peer(device, rule.egress)) {
        throw ValidationError(device + ":" + rule.egress, "static egress is not a linked interface");
      }
    }
  }
}

nlohmann::json static_tables_to_json(const StaticTables& tables) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [device, rules] : tables) {
    nlohmann::json jrules = nlohmann::json::array();
    for (const StaticRule& r : rules) {
      nlohmann::json match = nlohmann::json::object();
      if (r.match.src_ip) match["src_ip"] = r.match.src_ip->to_string();
      if (r.match.dst_ip) match["dst_ip"] = r.match.dst_ip->to_string();
      if (r.match.src_port) match["src_port"] = {r.match.src_port->low, r.match.src_port->high};
      if (r.match.dst_port) match["dst_port"] = {r.match.dst_port->low, r.match.dst_port->high};
      jrules.push_back({{"match", std::move(match)}, {"egress", r.egress}});
    }
    doc[device] = std::move(jrules);
  }
  return doc;
}

StaticTables static_tables_from_json(const nlohmann::json& doc) {
  using detail::expect_keys;
  using detail::get_as;
  using detail::require;

  if (!doc.is_object()) throw ParseError("static tables: expected an object");
  StaticTables tables;
  for (const auto& [device, jrules] : doc.items()) {
    const std::string where = "static table " + device;
    if (!jrules.is_array()) throw ParseError(where + ": expected an array of rules");
    auto& rules = tables[device];
    for (const auto& jr : jrules) {
      expect_keys(jr, {"match", "egress"}, where);
      StaticRule rule;
      rule.egress = get_as<std::string>(require(jr, "egress", where), where + " egress");
      if (auto m = jr.find("match"); m != jr.end()) {
        expect_keys(*m, {"src_ip", "dst_ip", "src_port", "dst_port"}, where + " match");
        auto ip = [&](const char* key) -> std::optional<Ipv4Address> {
          auto f = m->find(key);
          if (f == m->end() || f->is_null()) return std::nullopt;
          return Ipv4Address::parse(get_as<std::string>(*f, key));
        };
        auto range = [&](const char* key) -> std::optional<PortRange> {
          auto f = m->find(key);
          if (f == m->end() || f->is_null()) return std::nullopt;
          const auto bounds = get_as<std::vector<int>>(*f, key);
          if (bounds.size() != 2 || bounds[0] < 0 || bounds[1] > 65535 || bounds[0] > bounds[1]) {
            throw ParseError(where + ": bad port range for " + key);
          }
          return PortRange{static_cast<std::uint16_t>(bounds[0]), static_cast<std::uint16_t>(bounds[1])};
        };
        rule.match = RuleMatch{ip("src_ip"), ip("dst_ip"), range("src_port"), range("dst_port")};
      }
      rules.push_back(std::move(rule));
    }
  }
  return tables;
}

StaticTables load_static_tables(const std::filesystem::path& path) {
  return static_tables_from_json(detail::read_json_file(path));
}

void save_static_tables(const StaticTables& tables, const std::filesystem::path& path) {
  detail::write_json_file(path, static_tables_to_json(tables));
}

nlohmann::json ecmp_config_to_json(const EcmpConfig& config) {
  return {{"mode", "ecmp"},
          {"field_set", std::string(to_string(config.field_set))},
          {"include_ingress", config.include_ingress},
          {"seed", config.seed}};
}

EcmpConfig ecmp_config_from_json(const nlohmann::json& doc) {
  detail::expect_keys(doc, {"mode", "field_set", "include_ingress", "seed"}, "ecmp config");
  EcmpConfig config;
  if (auto it = doc.find("mode"); it != doc.end() && detail::get_as<std::string>(*it, "mode") != "ecmp") {
    throw ParseError("ecmp config: mode must be 'ecmp'");
  }
  if (auto it = doc.find("field_set"); it != doc.end()) {
    config.field_set = parse_field_set(detail::get_as<std::string>(*it, "field_set"));
  }
  if (auto it = doc.find("include_ingress"); it != doc.end()) {
    config.include_ingress = detail::get_as<bool>(*it, "include_ingress");
  }
  if (auto it = doc.find("seed"); it != doc.end()) {
    config.seed = it->is_number_unsigned()
                      ? it->get<std::uint64_t>()
                      : static_cast<std::uint64_t>(detail::get_as<std::int64_t>(*it, "seed"));
  }
  return config;
}

}  // namespace flowtracer
