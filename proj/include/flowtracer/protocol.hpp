#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "flowtracer/flowgen.hpp"

/// Line-oriented agent protocol. One request per line; responses are a
/// single line, or for flow listings a block of `FLOW` lines closed by `END`.
namespace flowtracer::wire {

struct Hello {
  std::string client_id;
};

/// FLOWS / RDMAFLOWS with filter `proto,dport_lo,dport_hi` (proto: tcp|udp|any).
struct FlowsQuery {
  bool kernel_bypass = false;
  FilterSpec filter;
};

struct RouteQuery {
  std::string ingress;
  FiveTuple tuple;
  std::string dst_host;
};

struct Ping {};

using Request = std::variant<Hello, FlowsQuery, RouteQuery, Ping>;

/// nullopt for anything malformed; the agent answers `ERR BADQUERY`.
std::optional<Request> parse_request(std::string_view line);
std::string format_request(const Request& request);

std::string format_filter(const FilterSpec& filter);
std::optional<FilterSpec> parse_filter(std::string_view text);

struct FlowLine {
  FiveTuple tuple;
  std::string source_interface;
};

std::string format_flow_line(const FiveTuple& tuple, std::string_view source_interface);
/// Throws ParseError.
FlowLine parse_flow_line(std::string_view line);

inline constexpr std::string_view kEnd = "END";
inline constexpr std::string_view kPong = "PONG";
inline constexpr std::string_view kEgress = "EGRESS";
inline constexpr std::string_view kErrNoRoute = "NOROUTE";
inline constexpr std::string_view kErrNoMatch = "NOMATCH";
inline constexpr std::string_view kErrBadQuery = "BADQUERY";

std::vector<std::string_view> split_tokens(std::string_view line);

}  // namespace flowtracer::wire
