#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "flowtracer/fabric.hpp"
#include "flowtracer/flowgen.hpp"
#include "json.hpp"

namespace flowtracer {

/// Header fields fed to the ECMP hash. `reduced_outer` keeps only the
/// address pair, which is all an overlay-encapsulated packet exposes to an
/// underlay switch.
enum class FieldSet { full_five_tuple, reduced_outer };

std::string_view to_string(FieldSet f);
FieldSet parse_field_set(std::string_view text);

struct EcmpConfig {
  FieldSet field_set = FieldSet::full_five_tuple;
  bool include_ingress = false;
  std::uint64_t seed = 0;  // global salt, combined with each device id

  bool operator==(const EcmpConfig&) const = default;
};

struct PortRange {
  std::uint16_t low = 1;
  std::uint16_t high = 65535;

  bool contains(std::uint16_t port) const { return port >= low && port <= high; }
  bool operator==(const PortRange&) const = default;
};

/// Absent fields match anything.
struct RuleMatch {
  std::optional<Ipv4Address> src_ip;
  std::optional<Ipv4Address> dst_ip;
  std::optional<PortRange> src_port;
  std::optional<PortRange> dst_port;

  bool matches(const FiveTuple& t) const;
  bool operator==(const RuleMatch&) const = default;
};

struct StaticRule {
  RuleMatch match;
  std::string egress;

  bool operator==(const StaticRule&) const = default;
};

/// Per-device ordered rule lists; the first matching rule wins.
using StaticTables = std::map<std::string, std::vector<StaticRule>, std::less<>>;

class RoutingPolicy {
 public:
  enum class Mode { ecmp, static_tables };

  static RoutingPolicy ecmp(EcmpConfig config) { return RoutingPolicy(std::move(config)); }
  static RoutingPolicy from_tables(StaticTables tables) { return RoutingPolicy(std::move(tables)); }

  Mode mode() const { return std::holds_alternative<EcmpConfig>(config_) ? Mode::ecmp : Mode::static_tables; }
  const EcmpConfig* ecmp_config() const { return std::get_if<EcmpConfig>(&config_); }
  const StaticTables* tables() const { return std::get_if<StaticTables>(&config_); }

 private:
  explicit RoutingPolicy(std::variant<EcmpConfig, StaticTables> c) : config_(std::move(c)) {}
  std::variant<EcmpConfig, StaticTables> config_;
};

/// Canonical hash input: src_ip(4B BE), dst_ip(4B BE), src_port(2B BE),
/// dst_port(2B BE), protocol(1B); reduced_outer stops after dst_ip. Ingress
/// name bytes follow when `include_ingress` is set.
std::vector<std::uint8_t> hash_key(const FiveTuple& tuple, std::string_view ingress,
                                   const EcmpConfig& config);

/// mix64(fnv1a64(key) ^ mix64(seed ^ fnv1a64(device)))
std::uint64_t ecmp_hash(const FiveTuple& tuple, std::string_view ingress, const EcmpConfig& config,
                        std::string_view device);

/// Interfaces on `device` that lie on a shortest path to `dst_host`, minus
/// the ingress interface, sorted bytewise. Throws NoRoute.
std::vector<std::string> candidate_egress(const Topology& topology, std::string_view device,
                                          std::string_view dst_host, std::string_view ingress);

/// Throws EmptyCandidates.
std::string hash_select(std::span<const std::string> candidates, const FiveTuple& tuple,
                        std::string_view ingress, const EcmpConfig& config, std::string_view device);

/// Throws NoMatchingRule.
std::string static_select(const StaticTables& tables, std::string_view device, const FiveTuple& tuple);

/// The forwarding decision of `device` for a flow that arrived on `ingress`.
std::string forward(const Topology& topology, const RoutingPolicy& policy, std::string_view device,
                    std::string_view ingress, const FiveTuple& tuple, std::string_view dst_host);

/// Per-flow exact-match tables that spread `flows` evenly over every
/// directed link layer. Flows are placed greedily in input order, each on
/// the shortest path whose links sit closest to their layer's current
/// minimum load.
StaticTables build_balanced_static_tables(const Topology& topology, std::span<const FlowRecord> flows);

/// Every table device must be a switch and every egress a linked interface.
void validate_static_tables(const StaticTables& tables, const Topology& topology);

nlohmann::json static_tables_to_json(const StaticTables& tables);
StaticTables static_tables_from_json(const nlohmann::json& doc);
StaticTables load_static_tables(const std::filesystem::path& path);
void save_static_tables(const StaticTables& tables, const std::filesystem::path& path);

/// `{"mode":"ecmp","field_set":...,"include_ingress":...,"seed":...}`
nlohmann::json ecmp_config_to_json(const EcmpConfig& config);
EcmpConfig ecmp_config_from_json(const nlohmann::json& doc);

}  // namespace flowtracer
