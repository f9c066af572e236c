#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "flowtracer/fabric.hpp"
#include "flowtracer/flowgen.hpp"
#include "flowtracer/routing.hpp"
#include "json.hpp"

namespace flowtracer {

struct AgentConfig {
  std::chrono::milliseconds connect_latency{0};
  std::chrono::milliseconds query_latency{0};
  std::string bind_address = "127.0.0.1";
};

enum class LatencyPhase { connect, query };

/// Maps each device id to the `host:port` its agent listens on.
class Registry {
 public:
  void add(std::string device, std::string endpoint);
  /// nullptr when absent.
  const std::string* find(std::string_view device) const;
  const std::map<std::string, std::string, std::less<>>& entries() const { return endpoints_; }
  std::size_t size() const { return endpoints_.size(); }

  /// Throws RegistryIncomplete naming the first device without an endpoint.
  void require_complete(const Topology& topology) const;

 private:
  std::map<std::string, std::string, std::less<>> endpoints_;
};

nlohmann::json registry_to_json(const Registry& registry);
Registry registry_from_json(const nlohmann::json& doc);
Registry load_registry(const std::filesystem::path& path);
void save_registry(const Registry& registry, const std::filesystem::path& path);

/// Request handler for one device. Responses are pure functions of the
/// request line and the immutable state captured at construction.
class AgentService {
 public:
  virtual ~AgentService() = default;
  virtual const std::string& device_id() const = 0;
  virtual DeviceKind kind() const = 0;
  /// Full response text, newline-terminated.
  virtual std::string respond(std::string_view line) const = 0;
};

/// Answers FLOWS / RDMAFLOWS with the flows sourced at one host.
class HostService final : public AgentService {
 public:
  HostService(std::string host_id, std::vector<FlowRecord> flows);
  const std::string& device_id() const override { return host_id_; }
  DeviceKind kind() const override { return DeviceKind::host; }
  std::string respond(std::string_view line) const override;

 private:
  std::string host_id_;
  std::vector<FlowRecord> flows_;
};

/// Answers ROUTE by evaluating the forwarding function.
class SwitchService final : public AgentService {
 public:
  SwitchService(std::string device_id, std::shared_ptr<const Topology> topology,
                std::shared_ptr<const RoutingPolicy> policy);
  const std::string& device_id() const override { return device_id_; }
  DeviceKind kind() const override { return kind_; }
  std::string respond(std::string_view line) const override;

 private:
  std::string device_id_;
  DeviceKind kind_;
  std::shared_ptr<const Topology> topology_;
  std::shared_ptr<const RoutingPolicy> policy_;
};

/// TCP listener serving one AgentService, one thread per connection.
/// Connection setup is delayed by `connect_latency`; every request other
/// than HELLO is delayed by `query_latency`. Requests on one connection are
/// answered strictly in order.
class AgentServer {
 public:
  /// Throws Error when the port cannot be bound.
  AgentServer(std::shared_ptr<const AgentService> service, AgentConfig config, std::uint16_t port = 0);
  ~AgentServer();

  AgentServer(const AgentServer&) = delete;
  AgentServer& operator=(const AgentServer&) = delete;

  std::uint16_t port() const { return port_; }
  std::string endpoint() const;
  void stop();

  /// Blocks for the phase's configured delay, returning early only when the
  /// server stops. Returns the time actually waited.
  std::chrono::milliseconds inject_latency(LatencyPhase phase);

 private:
  struct Session {
    int fd = -1;
    std::thread thread;
    std::atomic<bool> done{false};
  };

  void accept_loop();
  void serve(Session& session);
  void reap_finished();

  std::shared_ptr<const AgentService> service_;
  AgentConfig config_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mutex_;
  std::condition_variable stop_cv_;
  std::list<std::unique_ptr<Session>> sessions_;
};

std::unique_ptr<AgentServer> serve_host(std::string host_id, std::vector<FlowRecord> flows,
                                        const AgentConfig& config, std::uint16_t port = 0);
std::unique_ptr<AgentServer> serve_switch(std::string device_id, std::shared_ptr<const Topology> topology,
                                          std::shared_ptr<const RoutingPolicy> policy,
                                          const AgentConfig& config, std::uint16_t port = 0);

/// One agent per topology device, all hosted in this process.
class AgentFleet {
 public:
  /// With `base_port` > 0 devices bind consecutive ports in topology order;
  /// otherwise ephemeral ports. A bind failure stops every agent already
  /// started and rethrows.
  AgentFleet(const Topology& topology, std::span<const FlowRecord> flows, const RoutingPolicy& policy,
             const AgentConfig& config, std::uint16_t base_port = 0);
  ~AgentFleet();

  const Registry& registry() const { return registry_; }
  std::size_t size() const { return servers_.size(); }
  void stop();

 private:
  Registry registry_;
  std::vector<std::unique_ptr<AgentServer>> servers_;
};

}  // namespace flowtracer
