#pragma once

#include <stdexcept>
#include <string>

namespace flowtracer {

/// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input file or message could not be parsed.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Parsed input violates a model invariant. `element()` names the
/// offending device, interface or link.
class ValidationError : public Error {
 public:
  ValidationError(std::string element, const std::string& what)
      : Error(element.empty() ? what : element + ": " + what), element_(std::move(element)) {}

  const std::string& element() const noexcept { return element_; }

 private:
  std::string element_;
};

class UnlinkedInterface : public Error {
 public:
  using Error::Error;
};

class UnknownDevice : public Error {
 public:
  using Error::Error;
};

class UnknownHost : public Error {
 public:
  using Error::Error;
};

class NotBipartiteCapable : public Error {
 public:
  using Error::Error;
};

class NoRoute : public Error {
 public:
  using Error::Error;
};

class NoMatchingRule : public Error {
 public:
  using Error::Error;
};

class EmptyCandidates : public Error {
 public:
  using Error::Error;
};

class HopLimitExceeded : public Error {
 public:
  using Error::Error;
};

/// A traced flow reached a host other than its destination.
class Misdelivered : public Error {
 public:
  using Error::Error;
};

/// An agent answered with `ERR <code>`.
class AgentError : public Error {
 public:
  AgentError(std::string device, std::string code)
      : Error(device + ": ERR " + code), device_(std::move(device)), code_(std::move(code)) {}

  const std::string& device() const noexcept { return device_; }
  const std::string& code() const noexcept { return code_; }

 private:
  std::string device_;
  std::string code_;
};

/// The agent for `device` could not be reached, or dropped the session.
class Disconnected : public Error {
 public:
  Disconnected(std::string device, const std::string& detail)
      : Error(device + ": " + detail), device_(std::move(device)) {}

  const std::string& device() const noexcept { return device_; }

 private:
  std::string device_;
};

class RegistryIncomplete : public Error {
 public:
  using Error::Error;
};

class IncompletePath : public Error {
 public:
  using Error::Error;
};

class ZeroIdeal : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace flowtracer
