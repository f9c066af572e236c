#include "flowtracer/connection.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <utility>

#include "flowtracer/error.hpp"
#include "flowtracer/protocol.hpp"

namespace flowtracer {

namespace {

constexpr int kReceiveTimeoutSeconds = 30;

}  // namespace

Connection Connection::open(const std::string& device, const std::string& endpoint, std::string_view client_id) {
  const auto colon = endpoint.rfind(':');
  unsigned port = 0;
  if (colon == std::string::npos ||
      std::from_chars(endpoint.data() + colon + 1, endpoint.data() + endpoint.size(), port).ec != std::errc{} ||
      port == 0 || port > 65535) {
    throw Disconnected(device, "bad endpoint '" + endpoint + "'");
  }
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, endpoint.substr(0, colon).c_str(), &addr.sin_addr) != 1) {
    throw Disconnected(device, "bad endpoint '" + endpoint + "'");
  }

  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw Disconnected(device, std::string("socket: ") + std::strerror(errno));
  Connection conn(device, fd);
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  timeval tv{kReceiveTimeoutSeconds, 0};
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    throw Disconnected(device, "connect to " + endpoint + " failed: " + std::strerror(errno));
  }
  const std::string reply = conn.request_line("HELLO " + std::string(client_id));
  if (!reply.starts_with("OK flowtracer-agent ")) {
    throw Disconnected(device, "unexpected handshake reply '" + reply + "'");
  }
  return conn;
}

Connection::Connection(Connection&& other) noexcept
    : device_(std::move(other.device_)), fd_(std::exchange(other.fd_, -1)), buffer_(std::move(other.buffer_)) {}

Connection& Connection::operator=(Connection&& other) noexcept {
  if (this != &other) {
    close();
    device_ = std::move(other.device_);
    fd_ = std::exchange(other.fd_, -1);
    buffer_ = std::move(other.buffer_);
  }
  return *this;
}

Connection::~Connection() { close(); }

void Connection::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void Connection::send_line(std::string_view line) {
  std::string data(line);
  data += '\n';
  std::string_view rest = data;
  while (!rest.empty()) {
    const ssize_t n = ::send(fd_, rest.data(), rest.size(), MSG_NOSIGNAL);
    if (n <= 0) {
      if (n < 0 && errno == EINTR) continue;
      throw Disconnected(device_, std::string("send failed: ") + std::strerror(errno));
    }
    rest.remove_prefix(static_cast<std::size_t>(n));
  }
}

std::string Connection::read_line() {
  char chunk[4096];
  for (;;) {
    if (const auto pos = buffer_.find('\n'); pos != std::string::npos) {
      std::string line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n == 0) throw Disconnected(device_, "agent closed the connection");
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Disconnected(device_, std::string("receive failed: ") + std::strerror(errno));
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::string Connection::request_line(std::string_view line) {
  if (fd_ < 0) throw Disconnected(device_, "connection closed");
  send_line(line);
  return read_line();
}

std::vector<std::string> Connection::request_block(std::string_view line) {
  if (fd_ < 0) throw Disconnected(device_, "connection closed");
  send_line(line);
  std::vector<std::string> lines;
  for (;;) {
    std::string l = read_line();
    if (l == wire::kEnd) break;
    const bool error = l.starts_with("ERR ");
    lines.push_back(std::move(l));
    if (error && lines.size() == 1) break;
  }
  return lines;
}

AgentSessions::AgentSessions(const Registry& registry, bool reuse, std::string client_id,
                             std::atomic<std::size_t>* query_counter)
    : registry_(registry), reuse_(reuse), client_id_(std::move(client_id)), query_counter_(query_counter) {}

Connection AgentSessions::open(const std::string& device) {
  const std::string* endpoint = registry_.find(device);
  if (!endpoint) throw Disconnected(device, "no registered endpoint");
  ++opened_;
  return Connection::open(device, *endpoint, client_id_);
}

AgentSessions::Slot& AgentSessions::slot(const std::string& device) {
  std::lock_guard lock(slots_mutex_);
  auto& s = slots_[device];
  if (!s) s = std::make_unique<Slot>();
  return *s;
}

template <typename Fn>
auto AgentSessions::with_connection(const std::string& device, Fn&& fn) {
  if (query_counter_) ++*query_counter_;
  if (!reuse_) {
    Connection conn = open(device);
    return fn(conn);
  }
  Slot& s = slot(device);
  std::lock_guard lock(s.mutex);
  if (s.connection) {
    try {
      return fn(*s.connection);
    } catch (const Disconnected&) {
      s.connection.reset();  // one reconnect attempt below
    }
  }
  s.connection.emplace(open(device));
  try {
    return fn(*s.connection);
  } catch (const Disconnected&) {
    s.connection.reset();
    throw;
  }
}

std::string AgentSessions::query(const std::string& device, std::string_view line) {
  return with_connection(device, [&](Connection& c) { return c.request_line(line); });
}

std::vector<std::string> AgentSessions::query_block(const std::string& device, std::string_view line) {
  return with_connection(device, [&](Connection& c) { return c.request_block(line); });
}

}  // namespace flowtracer
