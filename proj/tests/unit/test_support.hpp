#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "flowtracer/fabric.hpp"
#include "json.hpp"

namespace flowtracer::testing {

inline const Topology& testbed() {
  static const Topology topo = generate_reference_testbed();
  return topo;
}

inline nlohmann::json testbed_json() { return topology_to_json(testbed()); }

// Adjacency rebuilt straight from the link list, without Topology's indices.
struct RawGraph {
  // device -> (interface, peer device, peer interface)
  std::map<std::string, std::vector<std::tuple<std::string, std::string, std::string>>> adj;
  std::map<std::string, DeviceKind> kind;

  explicit RawGraph(const Topology& t) {
    for (const auto& d : t.devices()) kind[d.id] = d.kind;
    for (const auto& l : t.links()) {
      adj[l.a.device].emplace_back(l.a.interface, l.b.device, l.b.interface);
      adj[l.b.device].emplace_back(l.b.interface, l.a.device, l.a.interface);
    }
  }
};

// Every shortest path from `from` to host `dst` that never transits a host,
// as interface sequences. Iterative-deepening DFS over simple paths.
inline std::vector<std::vector<std::string>> shortest_egress_sequences(const Topology& t, const std::string& from,
                                                                       const std::string& dst) {
  RawGraph g(t);
  std::vector<std::vector<std::string>> found;
  std::vector<std::string> seq;
  std::set<std::string> seen{from};
  std::size_t limit = 0;
  std::function<void(const std::string&)> dfs = [&](const std::string& at) {
    if (at == dst) {
      found.push_back(seq);
      return;
    }
    if (seq.size() == limit) return;
    if (at != from && g.kind[at] == DeviceKind::host) return;
    for (const auto& [iface, peer, peer_iface] : g.adj[at]) {
      if (seen.count(peer)) continue;
      seen.insert(peer);
      seq.push_back(iface);
      dfs(peer);
      seq.pop_back();
      seen.erase(peer);
    }
  };
  for (limit = 1; limit <= g.kind.size() && found.empty(); ++limit) dfs(from);
  return found;
}

// First hops of shortest paths, minus the ingress interface.
inline std::vector<std::string> oracle_first_hops(const Topology& t, const std::string& device,
                                                  const std::string& dst, const std::string& ingress) {
  std::set<std::string> first;
  for (const auto& s : shortest_egress_sequences(t, device, dst)) first.insert(s.front());
  first.erase(ingress);
  return {first.begin(), first.end()};
}

// One rack, two hosts with two NICs each, two leaves, one spine. Small
// enough for hand-checked expectations.
inline Topology mini_fabric() {
  std::vector<Device> devices;
  for (const std::string h : {"ha", "hb"}) {
    devices.push_back(Device{h, DeviceKind::host, "r0", {{"eth0", 100}, {"eth1", 100}}});
  }
  devices.push_back(Device{"l0", DeviceKind::leaf, "r0", {{"ha", 100}, {"hb", 100}, {"up", 100}}});
  devices.push_back(Device{"l1", DeviceKind::leaf, "r0", {{"ha", 100}, {"hb", 100}, {"up", 100}}});
  devices.push_back(Device{"s0", DeviceKind::spine, std::nullopt, {{"l0", 100}, {"l1", 100}}});
  std::vector<Link> links{
      {{"ha", "eth0"}, {"l0", "ha"}}, {{"ha", "eth1"}, {"l1", "ha"}}, {{"hb", "eth0"}, {"l0", "hb"}},
      {{"hb", "eth1"}, {"l1", "hb"}}, {{"l0", "up"}, {"s0", "l0"}},   {{"l1", "up"}, {"s0", "l1"}},
  };
  return Topology::create(std::move(devices), std::move(links));
}

}  // namespace flowtracer::testing
