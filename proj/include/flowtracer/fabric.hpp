#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace flowtracer {

enum class DeviceKind { host, leaf, spine };

std::string_view to_string(DeviceKind kind);
DeviceKind parse_device_kind(std::string_view text);

/// Directed link classes in a 2-tier fabric.
enum class LinkLayer { host_to_leaf, leaf_to_spine, spine_to_leaf, leaf_to_host };

inline constexpr LinkLayer kAllLayers[] = {LinkLayer::host_to_leaf, LinkLayer::leaf_to_spine,
                                           LinkLayer::spine_to_leaf, LinkLayer::leaf_to_host};

std::string_view to_string(LinkLayer layer);
std::optional<LinkLayer> classify_layer(DeviceKind from, DeviceKind to);

struct Interface {
  std::string name;
  int speed_gbps = 0;

  bool operator==(const Interface&) const = default;
};

struct Device {
  std::string id;
  DeviceKind kind = DeviceKind::host;
  std::optional<std::string> rack;  // hosts and leaves only
  std::vector<Interface> interfaces;

  const Interface* find_interface(std::string_view name) const;
  bool is_switch() const { return kind != DeviceKind::host; }

  bool operator==(const Device&) const = default;
};

/// One side of a cable: a named interface on a device.
struct Endpoint {
  std::string device;
  std::string interface;

  auto operator<=>(const Endpoint&) const = default;
};

struct Link {
  Endpoint a;
  Endpoint b;
};

/// Immutable leaf-spine fabric. Construct through `Topology::create`, which
/// enforces every structural invariant; afterwards the object is read-only
/// and safe to share between threads.
class Topology {
 public:
  static Topology create(std::vector<Device> devices, std::vector<Link> links);

  const std::vector<Device>& devices() const { return devices_; }
  const std::vector<Link>& links() const { return links_; }

  const Device* find_device(std::string_view id) const;
  /// Throws UnknownDevice.
  const Device& device(std::string_view id) const;

  /// Opposite end of the link attached to (device, interface), if any.
  std::optional<Endpoint> peer(std::string_view device, std::string_view interface) const;

  /// Like `peer`, but throws UnlinkedInterface when the interface exists and
  /// has no cable, and UnknownDevice when the endpoint does not exist.
  Endpoint neighbor(std::string_view device, std::string_view interface) const;

  /// Host ids, sorted bytewise.
  std::vector<std::string> hosts() const;
  /// Distinct rack labels, sorted bytewise.
  std::vector<std::string> racks() const;
  std::vector<std::string> hosts_in_rack(std::string_view rack) const;

  /// Link hops from `device` to `host`; nullopt when unreachable.
  std::optional<int> distance_to_host(std::string_view device, std::string_view host) const;

 private:
  Topology() = default;
  void build_indices();

  std::vector<Device> devices_;
  std::vector<Link> links_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::map<Endpoint, Endpoint> peers_;
  // host id -> hop distance per device index (-1 = unreachable)
  std::map<std::string, std::vector<int>, std::less<>> host_distance_;
};

Endpoint neighbor(const Topology& topology, std::string_view device, std::string_view interface);

Topology topology_from_json(const nlohmann::json& doc);
nlohmann::json topology_to_json(const Topology& topology);

/// Throws ParseError or ValidationError.
Topology load_topology(const std::filesystem::path& path);
void save_topology(const Topology& topology, const std::filesystem::path& path);

/// Two racks of eight 4x100G hosts, two leaves per rack, four spines; every
/// leaf has four parallel uplinks to each spine.
Topology generate_reference_testbed();

}  // namespace flowtracer
