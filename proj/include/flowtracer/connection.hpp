#pragma once

#include <atomic>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowtracer/agents.hpp"

namespace flowtracer {

/// Client side of one agent session. Opening performs the TCP connect and
/// the HELLO handshake. Move-only; the socket closes on destruction.
class Connection {
 public:
  /// Throws Disconnected.
  static Connection open(const std::string& device, const std::string& endpoint, std::string_view client_id);

  Connection(Connection&& other) noexcept;
  Connection& operator=(Connection&& other) noexcept;
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;
  ~Connection();

  /// Sends one request and reads a single response line. Throws Disconnected.
  std::string request_line(std::string_view line);
  /// Sends one request and reads lines until `END` (exclusive). A leading
  /// `ERR` line is returned alone. Throws Disconnected.
  std::vector<std::string> request_block(std::string_view line);

  const std::string& device() const { return device_; }

 private:
  Connection(std::string device, int fd) : device_(std::move(device)), fd_(fd) {}
  void send_line(std::string_view line);
  std::string read_line();
  void close();

  std::string device_;
  int fd_ = -1;
  std::string buffer_;
};

/// Agent access for one tracer worker. With `reuse` off every query opens
/// and closes its own connection; with it on, one connection per device is
/// kept and reused, and a failed session is reopened once before giving up.
/// Safe to share between threads: queries to one device are serialized.
class AgentSessions {
 public:
  AgentSessions(const Registry& registry, bool reuse, std::string client_id,
                std::atomic<std::size_t>* query_counter = nullptr);

  std::string query(const std::string& device, std::string_view line);
  std::vector<std::string> query_block(const std::string& device, std::string_view line);

  std::size_t connections_opened() const { return opened_; }

 private:
  struct Slot {
    std::mutex mutex;
    std::optional<Connection> connection;
  };

  template <typename Fn>
  auto with_connection(const std::string& device, Fn&& fn);
  Connection open(const std::string& device);
  Slot& slot(const std::string& device);

  const Registry& registry_;
  bool reuse_;
  std::string client_id_;
  std::atomic<std::size_t>* query_counter_;
  std::atomic<std::size_t> opened_{0};
  std::mutex slots_mutex_;
  std::map<std::string, std::unique_ptr<Slot>, std::less<>> slots_;
};

}  // namespace flowtracer
