#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flowtracer/fabric.hpp"
#include "json.hpp"

namespace flowtracer {

struct Ipv4Address {
  std::uint32_t value = 0;

  static Ipv4Address parse(std::string_view dotted);  // throws ParseError
  std::string to_string() const;

  auto operator<=>(const Ipv4Address&) const = default;
};

enum class Protocol : std::uint8_t { tcp = 6, udp = 17 };

std::string_view to_string(Protocol p);
Protocol parse_protocol(std::string_view text);

/// How the source host learns about a flow: through kernel socket tables, or
/// from the NIC for traffic that bypasses the kernel (RDMA).
enum class FlowClass { kernel_visible, kernel_bypass };

std::string_view to_string(FlowClass c);
FlowClass parse_flow_class(std::string_view text);

struct FiveTuple {
  Ipv4Address src_ip;
  Ipv4Address dst_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  Protocol protocol = Protocol::tcp;

  auto operator<=>(const FiveTuple&) const = default;
};

struct FlowRecord {
  FiveTuple tuple;
  FlowClass flow_class = FlowClass::kernel_visible;
  std::string source_host;
  std::string dest_host;
  std::string source_interface;
  int flow_ordinal = 0;

  bool operator==(const FlowRecord&) const = default;
};

struct FilterSpec {
  std::uint16_t dst_port_low = 1;
  std::uint16_t dst_port_high = 65535;
  std::optional<Protocol> protocol;  // nullopt matches any

  bool matches(const FiveTuple& t) const {
    return t.dst_port >= dst_port_low && t.dst_port <= dst_port_high &&
           (!protocol || *protocol == t.protocol);
  }
  bool operator==(const FilterSpec&) const = default;
};

struct PairSpec {
  std::string src;
  std::string dst;
  int flows = 1;

  bool operator==(const PairSpec&) const = default;
};

struct WorkloadSpec {
  std::vector<PairSpec> pairs;
  FlowClass flow_class = FlowClass::kernel_visible;
  FilterSpec filter;
  std::uint64_t seed = 0;

  std::size_t total_flows() const;
  bool operator==(const WorkloadSpec&) const = default;
};

inline constexpr std::uint16_t kEphemeralPortLow = 49152;
inline constexpr std::uint16_t kRoceV2Port = 4791;
inline constexpr std::uint16_t kDefaultTcpPort = 5201;

/// Synthesized host addressing: 10.<rack index>.<host index within rack>.1,
/// racks and hosts both in sorted order.
std::map<std::string, Ipv4Address, std::less<>> address_plan(const Topology& topology);

/// Throws UnknownHost or ValidationError.
void validate_workload(const WorkloadSpec& spec, const Topology& topology);

std::vector<FlowRecord> generate_flows(const WorkloadSpec& spec, const Topology& topology);

/// Pairs host i of the first rack with host i of the second (sorted ids);
/// bidirectional adds the reverse pairs after the forward ones.
WorkloadSpec make_bipartite_workload(const Topology& topology, int flows_per_pair,
                                     std::uint64_t seed, bool bidirectional = true);

std::vector<FlowRecord> apply_filter(std::span<const FlowRecord> flows, const FilterSpec& filter);

nlohmann::json workload_to_json(const WorkloadSpec& spec);
WorkloadSpec workload_from_json(const nlohmann::json& doc);
WorkloadSpec load_workload(const std::filesystem::path& path);
void save_workload(const WorkloadSpec& spec, const std::filesystem::path& path);

}  // namespace flowtracer
