#include "flowtracer/fabric.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include "flowtracer/error.hpp"
#include "json_util.hpp"

namespace flowtracer {

namespace {

bool valid_token(std::string_view s) {
  return !s.empty() && std::none_of(s.begin(), s.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r';
  });
}

std::string endpoint_label(const Endpoint& e) { return e.device + ":" + e.interface; }

std::string link_label(const Link& l) {
  return endpoint_label(l.a) + "<->" + endpoint_label(l.b);
}

}  // namespace

std::string_view to_string(DeviceKind kind) {
  switch (kind) {
    case DeviceKind::host:
      return "host";
    case DeviceKind::leaf:
      return "leaf";
    case DeviceKind::spine:
      return "spine";
  }
  return "?";
}

DeviceKind parse_device_kind(std::string_view text) {
  if (text == "host") return DeviceKind::host;
  if (text == "leaf") return DeviceKind::leaf;
  if (text == "spine") return DeviceKind::spine;
  throw ParseError("unknown device kind '" + std::string(text) + "'");
}

std::string_view to_string(LinkLayer layer) {
  switch (layer) {
    case LinkLayer::host_to_leaf:
      return "host_to_leaf";
    case LinkLayer::leaf_to_spine:
      return "leaf_to_spine";
    case LinkLayer::spine_to_leaf:
      return "spine_to_leaf";
    case LinkLayer::leaf_to_host:
      return "leaf_to_host";
  }
  return "?";
}

std::optional<LinkLayer> classify_layer(DeviceKind from, DeviceKind to) {
  if (from == DeviceKind::host && to == DeviceKind::leaf) return LinkLayer::host_to_leaf;
  if (from == DeviceKind::leaf && to == DeviceKind::spine) return LinkLayer::leaf_to_spine;
  if (from == DeviceKind::spine && to == DeviceKind::leaf) return LinkLayer::spine_to_leaf;
  if (from == DeviceKind::leaf && to == DeviceKind::host) return LinkLayer::leaf_to_host;
  return std::nullopt;
}

const Interface* Device::find_interface(std::string_view name) const {
  auto it = std::find_if(interfaces.begin(), interfaces.end(),
                         [&](const Interface& i) { return i.name == name; });
  return it == interfaces.end() ? nullptr : &*it;
}

Topology Topology::create(std::vector<Device> devices, std::vector<Link> links) {
  if (devices.empty()) {
    throw ValidationError("", "topology has no devices");
  }

  Topology topo;
  for (std::size_t i = 0; i < devices.size(); ++i) {
    const Device& d = devices[i];
    if (!valid_token(d.id)) {
      throw ValidationError(d.id, "device id must be non-empty without whitespace");
    }
    if (!topo.index_.emplace(d.id, i).second) {
      throw ValidationError(d.id, "duplicate device id");
    }
    if (d.kind == DeviceKind::spine && d.rack) {
      throw ValidationError(d.id, "spine must not carry a rack label");
    }
    if (d.kind != DeviceKind::spine && (!d.rack || d.rack->empty())) {
      throw ValidationError(d.id, "host and leaf devices require a rack label");
    }
    if (d.interfaces.empty()) {
      throw ValidationError(d.id, "device has no interfaces");
    }
    std::set<std::string_view> names;
    for (const Interface& iface : d.interfaces) {
      if (!valid_token(iface.name) || iface.name == "SOURCE" || iface.name == "SINK") {
        throw ValidationError(d.id + ":" + iface.name, "invalid interface name");
      }
      if (!names.insert(iface.name).second) {
        throw ValidationError(d.id + ":" + iface.name, "duplicate interface name");
      }
      if (iface.speed_gbps <= 0) {
        throw ValidationError(d.id + ":" + iface.name, "interface speed must be positive");
      }
    }
  }
  topo.devices_ = std::move(devices);

  for (const Link& link : links) {
    const Device* da = topo.find_device(link.a.device);
    const Device* db = topo.find_device(link.b.device);
    const Interface* ia = da ? da->find_interface(link.a.interface) : nullptr;
    const Interface* ib = db ? db->find_interface(link.b.interface) : nullptr;
    if (!ia || !ib) {
      throw ValidationError(link_label(link), "dangling link endpoint");
    }
    if (link.a == link.b || da == db) {
      throw ValidationError(link_label(link), "link connects a device to itself");
    }
    auto tier_ok = [](DeviceKind x, DeviceKind y) {
      return (x == DeviceKind::host && y == DeviceKind::leaf) ||
             (x == DeviceKind::leaf && y == DeviceKind::spine);
    };
    if (!tier_ok(da->kind, db->kind) && !tier_ok(db->kind, da->kind)) {
      throw ValidationError(link_label(link), "link must connect host-leaf or leaf-spine");
    }
    if ((da->kind == DeviceKind::host || db->kind == DeviceKind::host) && da->rack != db->rack) {
      throw ValidationError(link_label(link), "host linked to a leaf in another rack");
    }
    if (ia->speed_gbps != ib->speed_gbps) {
      throw ValidationError(link_label(link), "endpoint speeds differ");
    }
    if (!topo.peers_.emplace(link.a, link.b).second) {
      throw ValidationError(endpoint_label(link.a), "interface used by more than one link");
    }
    if (!topo.peers_.emplace(link.b, link.a).second) {
      throw ValidationError(endpoint_label(link.b), "interface used by more than one link");
    }
  }
  topo.links_ = std::move(links);

  // Leaf-spine connectivity, checked only when spines exist.
  std::vector<std::size_t> fabric_nodes;
  for (std::size_t i = 0; i < topo.devices_.size(); ++i) {
    if (topo.devices_[i].is_switch()) fabric_nodes.push_back(i);
  }
  const bool has_spine = std::any_of(topo.devices_.begin(), topo.devices_.end(),
                                     [](const Device& d) { return d.kind == DeviceKind::spine; });
  if (has_spine) {
    std::vector<std::vector<std::size_t>> adj(topo.devices_.size());
    for (const Link& l : topo.links_) {
      std::size_t a = topo.index_.find(l.a.device)->second;
      std::size_t b = topo.index_.find(l.b.device)->second;
      if (topo.devices_[a].is_switch() && topo.devices_[b].is_switch()) {
        adj[a].push_back(b);
        adj[b].push_back(a);
      }
    }
    std::vector<bool> seen(topo.devices_.size(), false);
    std::deque<std::size_t> queue{fabric_nodes.front()};
    seen[fabric_nodes.front()] = true;
    while (!queue.empty()) {
      std::size_t u = queue.front();
      queue.pop_front();
      for (std::size_t v : adj[u]) {
        if (!seen[v]) {
          seen[v] = true;
          queue.push_back(v);
        }
      }
    }
    for (std::size_t i : fabric_nodes) {
      if (!seen[i]) {
        throw ValidationError(topo.devices_[i].id, "switch not connected to the leaf-spine fabric");
      }
    }
  }

  topo.build_indices();
  return topo;
}

void Topology::build_indices() {
  const std::size_t n = devices_.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (const Link& l : links_) {
    std::size_t a = index_.find(l.a.device)->second;
    std::size_t b = index_.find(l.b.device)->second;
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  for (std::size_t h = 0; h < n; ++h) {
    if (devices_[h].kind != DeviceKind::host) continue;
    std::vector<int> dist(n, -1);
    dist[h] = 0;
    std::deque<std::size_t> queue{h};
    while (!queue.empty()) {
      std::size_t u = queue.front();
      queue.pop_front();
      // Hosts terminate traffic; only the target host may be a path endpoint.
      if (u != h && devices_[u].kind == DeviceKind::host) continue;
      for (std::size_t v : adj[u]) {
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          queue.push_back(v);
        }
      }
    }
    host_distance_.emplace(devices_[h].id, std::move(dist));
  }
}

const Device* Topology::find_device(std::string_view id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &devices_[it->second];
}

const Device& Topology::device(std::string_view id) const {
  const Device* d = find_device(id);
  if (!d) throw UnknownDevice("unknown device '" + std::string(id) + "'");
  return *d;
}

std::optional<Endpoint> Topology::peer(std::string_view device, std::string_view interface) const {
  auto it = peers_.find(Endpoint{std::string(device), std::string(interface)});
  if (it == peers_.end()) return std::nullopt;
  return it->second;
}

Endpoint Topology::neighbor(std::string_view device, std::string_view interface) const {
  const Device& d = this->device(device);
  if (!d.find_interface(interface)) {
    throw UnknownDevice("device '" + d.id + "' has no interface '" + std::string(interface) + "'");
  }
  auto p = peer(device, interface);
  if (!p) {
    throw UnlinkedInterface(d.id + ":" + std::string(interface) + " has no link");
  }
  return *p;
}

std::vector<std::string> Topology::hosts() const {
  std::vector<std::string> out;
  for (const Device& d : devices_) {
    if (d.kind == DeviceKind::host) out.push_back(d.id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> Topology::racks() const {
  std::set<std::string> labels;
  for (const Device& d : devices_) {
    if (d.rack) labels.insert(*d.rack);
  }
  return {labels.begin(), labels.end()};
}

std::vector<std::string> Topology::hosts_in_rack(std::string_view rack) const {
  std::vector<std::string> out;
  for (const Device& d : devices_) {
    if (d.kind == DeviceKind::host && d.rack && *d.rack == rack) out.push_back(d.id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<int> Topology::distance_to_host(std::string_view device, std::string_view host) const {
  auto table = host_distance_.find(host);
  auto idx = index_.find(device);
  if (table == host_distance_.end() || idx == index_.end()) return std::nullopt;
  int d = table->second[idx->second];
  if (d < 0) return std::nullopt;
  return d;
}

Endpoint neighbor(const Topology& topology, std::string_view device, std::string_view interface) {
  return topology.neighbor(device, interface);
}

Topology topology_from_json(const nlohmann::json& doc) {
  using detail::expect_keys;
  using detail::get_as;
  using detail::require;

  expect_keys(doc, {"devices", "links"}, "topology");
  const auto& jdevices = require(doc, "devices", "topology");
  if (!jdevices.is_array()) throw ParseError("topology: 'devices' must be an array");

  std::vector<Device> devices;
  for (const auto& jd : jdevices) {
    expect_keys(jd, {"id", "kind", "rack", "interfaces"}, "device");
    Device d;
    d.id = get_as<std::string>(require(jd, "id", "device"), "device.id");
    const std::string where = "device " + d.id;
    d.kind = parse_device_kind(get_as<std::string>(require(jd, "kind", where), where));
    if (auto it = jd.find("rack"); it != jd.end() && !it->is_null()) {
      d.rack = get_as<std::string>(*it, where + ".rack");
    }
    const auto& jifaces = require(jd, "interfaces", where);
    if (!jifaces.is_array()) throw ParseError(where + ": 'interfaces' must be an array");
    for (const auto& ji : jifaces) {
      expect_keys(ji, {"name", "speed_gbps"}, where + " interface");
      d.interfaces.push_back(Interface{
          get_as<std::string>(require(ji, "name", where), where + " interface name"),
          get_as<int>(require(ji, "speed_gbps", where), where + " interface speed")});
    }
    devices.push_back(std::move(d));
  }

  std::vector<Link> links;
  if (auto it = doc.find("links"); it != doc.end()) {
    if (!it->is_array()) throw ParseError("topology: 'links' must be an array");
    for (const auto& jl : *it) {
      expect_keys(jl, {"a", "b"}, "link");
      auto endpoint = [](const nlohmann::json& j) {
        if (!j.is_array() || j.size() != 2) {
          throw ParseError("link endpoint must be [device, interface]");
        }
        return Endpoint{get_as<std::string>(j[0], "link endpoint"),
                        get_as<std::string>(j[1], "link endpoint")};
      };
      links.push_back(Link{endpoint(require(jl, "a", "link")), endpoint(require(jl, "b", "link"))});
    }
  }
  return Topology::create(std::move(devices), std::move(links));
}

nlohmann::json topology_to_json(const Topology& topology) {
  nlohmann::json jdevices = nlohmann::json::array();
  for (const Device& d : topology.devices()) {
    nlohmann::json jd{{"id", d.id}, {"kind", std::string(to_string(d.kind))}};
    if (d.rack) jd["rack"] = *d.rack;
    nlohmann::json jifaces = nlohmann::json::array();
    for (const Interface& i : d.interfaces) {
      jifaces.push_back({{"name", i.name}, {"speed_gbps", i.speed_gbps}});
    }
    jd["interfaces"] = std::move(jifaces);
    jdevices.push_back(std::move(jd));
  }
  nlohmann::json jlinks = nlohmann::json::array();
  for (const Link& l : topology.links()) {
    jlinks.push_back({{"a", {l.a.device, l.a.interface}}, {"b", {l.b.device, l.b.interface}}});
  }
  return {{"devices", std::move(jdevices)}, {"links", std::move(jlinks)}};
}

Topology load_topology(const std::filesystem::path& path) {
  return topology_from_json(detail::read_json_file(path));
}

void save_topology(const Topology& topology, const std::filesystem::path& path) {
  detail::write_json_file(path, topology_to_json(topology));
}

Topology generate_reference_testbed() {
  constexpr int kRacks = 2;
  constexpr int kHostsPerRack = 8;
  constexpr int kLeavesPerRack = 2;
  constexpr int kSpines = 4;
  constexpr int kUplinksPerSpine = 4;
  constexpr int kHostPortsPerLeaf = 2;
  constexpr int kSpeed = 100;
  const char kParallel[] = {'a', 'b', 'c', 'd'};

  auto two_digit = [](int v) { return (v < 10 ? "0" : "") + std::to_string(v); };
  auto host_id = [&](int rack, int h) { return "host-" + two_digit(rack * kHostsPerRack + h); };
  auto leaf_id = [](int rack, int l) { return "leaf-" + std::to_string(rack * kLeavesPerRack + l); };
  auto spine_id = [](int s) { return "spine-" + std::to_string(s); };

  std::vector<Device> devices;
  std::vector<Link> links;

  for (int r = 0; r < kRacks; ++r) {
    const std::string rack = "r" + std::to_string(r);
    for (int h = 0; h < kHostsPerRack; ++h) {
      Device host{host_id(r, h), DeviceKind::host, rack, {}};
      for (int p = 0; p < kLeavesPerRack * kHostPortsPerLeaf; ++p) {
        host.interfaces.push_back({"eth" + std::to_string(p), kSpeed});
      }
      devices.push_back(std::move(host));
    }
    for (int l = 0; l < kLeavesPerRack; ++l) {
      Device leaf{leaf_id(r, l), DeviceKind::leaf, rack, {}};
      for (int h = 0; h < kHostsPerRack; ++h) {
        for (int k = 0; k < kHostPortsPerLeaf; ++k) {
          std::string port = "down-" + host_id(r, h) + "-" + kParallel[k];
          leaf.interfaces.push_back({port, kSpeed});
          links.push_back(Link{{host_id(r, h), "eth" + std::to_string(l * kHostPortsPerLeaf + k)},
                               {leaf.id, port}});
        }
      }
      for (int s = 0; s < kSpines; ++s) {
        for (int k = 0; k < kUplinksPerSpine; ++k) {
          leaf.interfaces.push_back({"up-" + spine_id(s) + "-" + kParallel[k], kSpeed});
        }
      }
      devices.push_back(std::move(leaf));
    }
  }

  for (int s = 0; s < kSpines; ++s) {
    Device spine{spine_id(s), DeviceKind::spine, std::nullopt, {}};
    for (int leaf = 0; leaf < kRacks * kLeavesPerRack; ++leaf) {
      for (int k = 0; k < kUplinksPerSpine; ++k) {
        std::string port = "down-leaf-" + std::to_string(leaf) + "-" + kParallel[k];
        spine.interfaces.push_back({port, kSpeed});
        links.push_back(Link{{"leaf-" + std::to_string(leaf), "up-" + spine.id + "-" + kParallel[k]},
                             {spine.id, port}});
      }
    }
    devices.push_back(std::move(spine));
  }

  return Topology::create(std::move(devices), std::move(links));
}

}  // namespace flowtracer
