#include "flowtracer/protocol.hpp"

#include <charconv>

#include "flowtracer/error.hpp"

namespace flowtracer::wire {

namespace {

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

std::optional<std::uint16_t> parse_port(std::string_view s) {
  auto v = parse_number<unsigned>(s);
  if (!v || *v < 1 || *v > 65535) return std::nullopt;
  return static_cast<std::uint16_t>(*v);
}

std::optional<Protocol> parse_proto(std::string_view s) {
  if (s == "tcp") return Protocol::tcp;
  if (s == "udp") return Protocol::udp;
  return std::nullopt;
}

std::optional<Ipv4Address> parse_ip(std::string_view s) {
  try {
    return Ipv4Address::parse(s);
  } catch (const ParseError&) {
    return std::nullopt;
  }
}

}  // namespace

std::vector<std::string_view> split_tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string format_filter(const FilterSpec& filter) {
  return std::string(filter.protocol ? to_string(*filter.protocol) : "any") + "," +
         std::to_string(filter.dst_port_low) + "," + std::to_string(filter.dst_port_high);
}

std::optional<FilterSpec> parse_filter(std::string_view text) {
  const auto c1 = text.find(',');
  const auto c2 = c1 == std::string_view::npos ? c1 : text.find(',', c1 + 1);
  if (c2 == std::string_view::npos) return std::nullopt;
  FilterSpec f;
  const auto proto = text.substr(0, c1);
  if (proto != "any") {
    auto p = parse_proto(proto);
    if (!p) return std::nullopt;
    f.protocol = *p;
  }
  auto lo = parse_port(text.substr(c1 + 1, c2 - c1 - 1));
  auto hi = parse_port(text.substr(c2 + 1));
  if (!lo || !hi || *lo > *hi) return std::nullopt;
  f.dst_port_low = *lo;
  f.dst_port_high = *hi;
  return f;
}

std::optional<Request> parse_request(std::string_view line) {
  const auto tok = split_tokens(line);
  if (tok.empty()) return std::nullopt;
  const auto verb = tok[0];
  if (verb == "HELLO" && tok.size() == 2) return Hello{std::string(tok[1])};
  if (verb == "PING" && tok.size() == 1) return Ping{};
  if ((verb == "FLOWS" || verb == "RDMAFLOWS") && tok.size() <= 2) {
    FlowsQuery q{verb == "RDMAFLOWS", {}};
    if (tok.size() == 2) {
      auto f = parse_filter(tok[1]);
      if (!f) return std::nullopt;
      q.filter = *f;
    }
    return q;
  }
  if (verb == "ROUTE" && tok.size() == 8) {
    auto src = parse_ip(tok[2]);
    auto dst = parse_ip(tok[3]);
    auto sport = parse_port(tok[4]);
    auto dport = parse_port(tok[5]);
    auto proto = parse_proto(tok[6]);
    if (!src || !dst || !sport || !dport || !proto) return std::nullopt;
    return RouteQuery{std::string(tok[1]), FiveTuple{*src, *dst, *sport, *dport, *proto},
                      std::string(tok[7])};
  }
  return std::nullopt;
}

std::string format_request(const Request& request) {
  struct Visitor {
    std::string operator()(const Hello& h) const { return "HELLO " + h.client_id; }
    std::string operator()(const Ping&) const { return "PING"; }
    std::string operator()(const FlowsQuery& q) const {
      return std::string(q.kernel_bypass ? "RDMAFLOWS " : "FLOWS ") + format_filter(q.filter);
    }
    std::string operator()(const RouteQuery& q) const {
      const FiveTuple& t = q.tuple;
      return "ROUTE " + q.ingress + " " + t.src_ip.to_string() + " " + t.dst_ip.to_string() + " " +
             std::to_string(t.src_port) + " " + std::to_string(t.dst_port) + " " +
             std::string(to_string(t.protocol)) + " " + q.dst_host;
    }
  };
  return std::visit(Visitor{}, request);
}

std::string format_flow_line(const FiveTuple& t, std::string_view source_interface) {
  return "FLOW " + t.src_ip.to_string() + " " + t.dst_ip.to_string() + " " + std::to_string(t.src_port) +
         " " + std::to_string(t.dst_port) + " " + std::string(to_string(t.protocol)) + " " +
         std::string(source_interface);
}

FlowLine parse_flow_line(std::string_view line) {
  const auto tok = split_tokens(line);
  if (tok.size() != 7 || tok[0] != "FLOW") {
    throw ParseError("malformed FLOW line '" + std::string(line) + "'");
  }
  auto src = parse_ip(tok[1]);
  auto dst = parse_ip(tok[2]);
  auto sport = parse_port(tok[3]);
  auto dport = parse_port(tok[4]);
  auto proto = parse_proto(tok[5]);
  if (!src || !dst || !sport || !dport || !proto) {
    throw ParseError("malformed FLOW line '" + std::string(line) + "'");
  }
  return FlowLine{FiveTuple{*src, *dst, *sport, *dport, *proto}, std::string(tok[6])};
}

}  // namespace flowtracer::wire
