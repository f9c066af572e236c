#include "flowtracer/agents.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "flowtracer/error.hpp"
#include "flowtracer/protocol.hpp"
#include "json_util.hpp"

namespace flowtracer {

// ---- Registry ----

void Registry::add(std::string device, std::string endpoint) {
  endpoints_[std::move(device)] = std::move(endpoint);
}

const std::string* Registry::find(std::string_view device) const {
  auto it = endpoints_.find(device);
  return it == endpoints_.end() ? nullptr : &it->second;
}

void Registry::require_complete(const Topology& topology) const {
  for (const Device& d : topology.devices()) {
    if (!find(d.id)) throw RegistryIncomplete("no agent endpoint registered for '" + d.id + "'");
  }
}

nlohmann::json registry_to_json(const Registry& registry) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [device, endpoint] : registry.entries()) doc[device] = endpoint;
  return doc;
}

Registry registry_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("registry: expected an object");
  Registry registry;
  for (const auto& [device, endpoint] : doc.items()) {
    registry.add(device, detail::get_as<std::string>(endpoint, "registry entry " + device));
  }
  return registry;
}

Registry load_registry(const std::filesystem::path& path) {
  return registry_from_json(detail::read_json_file(path));
}

void save_registry(const Registry& registry, const std::filesystem::path& path) {
  detail::write_json_file(path, registry_to_json(registry));
}

// ---- Services ----

namespace {

std::string hello_reply(const AgentService& s) {
  return "OK flowtracer-agent " + s.device_id() + " " + std::string(to_string(s.kind())) + "\n";
}

std::string error_reply(std::string_view code) { return "ERR " + std::string(code) + "\n"; }

}  // namespace

HostService::HostService(std::string host_id, std::vector<FlowRecord> flows)
    : host_id_(std::move(host_id)), flows_(std::move(flows)) {}

std::string HostService::respond(std::string_view line) const {
  const auto request = wire::parse_request(line);
  if (!request) return error_reply(wire::kErrBadQuery);
  if (std::holds_alternative<wire::Hello>(*request)) return hello_reply(*this);
  if (std::holds_alternative<wire::Ping>(*request)) return std::string(wire::kPong) + "\n";
  const auto* query = std::get_if<wire::FlowsQuery>(&*request);
  if (!query) return error_reply(wire::kErrBadQuery);

  const FlowClass wanted = query->kernel_bypass ? FlowClass::kernel_bypass : FlowClass::kernel_visible;
  std::string out;
  for (const FlowRecord& f : flows_) {
    if (f.flow_class == wanted && query->filter.matches(f.tuple)) {
      out += wire::format_flow_line(f.tuple, f.source_interface);
      out += '\n';
    }
  }
  out += wire::kEnd;
  out += '\n';
  return out;
}

SwitchService::SwitchService(std::string device_id, std::shared_ptr<const Topology> topology,
                             std::shared_ptr<const RoutingPolicy> policy)
    : device_id_(std::move(device_id)),
      kind_(topology->device(device_id_).kind),
      topology_(std::move(topology)),
      policy_(std::move(policy)) {}

std::string SwitchService::respond(std::string_view line) const {
  const auto request = wire::parse_request(line);
  if (!request) return error_reply(wire::kErrBadQuery);
  if (std::holds_alternative<wire::Hello>(*request)) return hello_reply(*this);
  if (std::holds_alternative<wire::Ping>(*request)) return std::string(wire::kPong) + "\n";
  const auto* query = std::get_if<wire::RouteQuery>(&*request);
  if (!query) return error_reply(wire::kErrBadQuery);

  if (!topology_->device(device_id_).find_interface(query->ingress)) {
    return error_reply(wire::kErrBadQuery);
  }
  try {
    const std::string egress =
        forward(*topology_, *policy_, device_id_, query->ingress, query->tuple, query->dst_host);
    return std::string(wire::kEgress) + " " + egress + "\n";
  } catch (const NoMatchingRule&) {
    return error_reply(wire::kErrNoMatch);
  } catch (const NoRoute&) {
    return error_reply(wire::kErrNoRoute);
  } catch (const EmptyCandidates&) {
    return error_reply(wire::kErrNoRoute);
  }
}

// ---- Server ----

AgentServer::AgentServer(std::shared_ptr<const AgentService> service, AgentConfig config, std::uint16_t port)
    : service_(std::move(service)), config_(std::move(config)) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (listen_fd_ < 0) throw Error(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, config_.bind_address.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    throw Error("invalid bind address '" + config_.bind_address + "'");
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listen_fd_, SOMAXCONN) != 0) {
    const int err = errno;
    ::close(listen_fd_);
    throw Error("agent " + service_->device_id() + ": cannot listen on " + config_.bind_address + ":" +
                std::to_string(port) + ": " + std::strerror(err));
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  acceptor_ = std::thread([this] { accept_loop(); });
}

AgentServer::~AgentServer() { stop(); }

std::string AgentServer::endpoint() const { return config_.bind_address + ":" + std::to_string(port_); }

void AgentServer::stop() {
  if (stopping_.exchange(true)) return;
  stop_cv_.notify_all();
  ::shutdown(listen_fd_, SHUT_RDWR);
  if (acceptor_.joinable()) acceptor_.join();
  ::close(listen_fd_);

  std::list<std::unique_ptr<Session>> sessions;
  {
    std::lock_guard lock(mutex_);
    for (auto& s : sessions_) ::shutdown(s->fd, SHUT_RDWR);
    sessions.swap(sessions_);
  }
  for (auto& s : sessions) {
    if (s->thread.joinable()) s->thread.join();
  }
}

std::chrono::milliseconds AgentServer::inject_latency(LatencyPhase phase) {
  const auto delay = phase == LatencyPhase::connect ? config_.connect_latency : config_.query_latency;
  if (delay.count() <= 0) return std::chrono::milliseconds{0};
  const auto start = std::chrono::steady_clock::now();
  std::unique_lock lock(mutex_);
  stop_cv_.wait_for(lock, delay, [this] { return stopping_.load(); });
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
}

void AgentServer::reap_finished() {
  std::list<std::unique_ptr<Session>> finished;
  {
    std::lock_guard lock(mutex_);
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      if ((*it)->done) {
        finished.push_back(std::move(*it));
        it = sessions_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& s : finished) s->thread.join();
}

void AgentServer::accept_loop() {
  while (!stopping_) {
    const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
      if (errno == EINTR || errno == ECONNABORTED) continue;
      break;
    }
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    reap_finished();

    std::lock_guard lock(mutex_);
    if (stopping_) {
      ::close(fd);
      break;
    }
    auto session = std::make_unique<Session>();
    session->fd = fd;
    Session& ref = *session;
    sessions_.push_back(std::move(session));
    ref.thread = std::thread([this, &ref] { serve(ref); });
  }
}

void AgentServer::serve(Session& session) {
  auto send_all = [&](std::string_view data) {
    while (!data.empty()) {
      const ssize_t n = ::send(session.fd, data.data(), data.size(), MSG_NOSIGNAL);
      if (n <= 0) {
        if (n < 0 && errno == EINTR) continue;
        return false;
      }
      data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
  };

  inject_latency(LatencyPhase::connect);
  std::string buffer;
  char chunk[4096];
  bool open = !stopping_;
  while (open) {
    const ssize_t n = ::recv(session.fd, chunk, sizeof chunk, 0);
    if (n <= 0) {
      if (n < 0 && errno == EINTR) continue;
      break;
    }
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t pos;
    while (open && (pos = buffer.find('\n')) != std::string::npos) {
      std::string line = buffer.substr(0, pos);
      buffer.erase(0, pos + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.starts_with("HELLO")) inject_latency(LatencyPhase::query);
      if (stopping_) {
        open = false;
        break;
      }
      open = send_all(service_->respond(line));
    }
  }
  ::close(session.fd);
  session.done = true;
}

std::unique_ptr<AgentServer> serve_host(std::string host_id, std::vector<FlowRecord> flows,
                                        const AgentConfig& config, std::uint16_t port) {
  return std::make_unique<AgentServer>(std::make_shared<HostService>(std::move(host_id), std::move(flows)),
                                       config, port);
}

std::unique_ptr<AgentServer> serve_switch(std::string device_id, std::shared_ptr<const Topology> topology,
                                          std::shared_ptr<const RoutingPolicy> policy,
                                          const AgentConfig& config, std::uint16_t port) {
  return std::make_unique<AgentServer>(
      std::make_shared<SwitchService>(std::move(device_id), std::move(topology), std::move(policy)), config,
      port);
}

// ---- Fleet ----

AgentFleet::AgentFleet(const Topology& topology, std::span<const FlowRecord> flows, const RoutingPolicy& policy,
                       const AgentConfig& config, std::uint16_t base_port) {
  auto shared_topology = std::make_shared<const Topology>(topology);
  auto shared_policy = std::make_shared<const RoutingPolicy>(policy);
  std::map<std::string, std::vector<FlowRecord>, std::less<>> by_host;
  for (const FlowRecord& f : flows) by_host[f.source_host].push_back(f);

  try {
    std::uint16_t next_port = base_port;
    for (const Device& d : topology.devices()) {
      const std::uint16_t port = base_port ? next_port++ : 0;
      std::unique_ptr<AgentServer> server;
      if (d.kind == DeviceKind::host) {
        auto it = by_host.find(d.id);
        server = serve_host(d.id, it == by_host.end() ? std::vector<FlowRecord>{} : it->second, config, port);
      } else {
        server = serve_switch(d.id, shared_topology, shared_policy, config, port);
      }
      registry_.add(d.id, server->endpoint());
      servers_.push_back(std::move(server));
    }
  } catch (...) {
    stop();
    throw;
  }
}

AgentFleet::~AgentFleet() { stop(); }

void AgentFleet::stop() {
  for (auto& s : servers_) s->stop();
}

}  // namespace flowtracer
