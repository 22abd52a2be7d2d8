#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ode {

enum class ErrorKind {
  validation,     // bad input data or violated invariant
  not_found,      // unknown label, case, file
  parse,          // malformed structured text
  no_candidates,  // sampler found nothing for a criterion
  transport,      // service unreachable / timed out / 5xx after retries
  protocol,       // service answered with something off-contract
  io,             // filesystem failure
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message)
      : Error(ErrorKind::validation, message) {}
};

class NotFoundError : public Error {
 public:
  explicit NotFoundError(const std::string& message)
      : Error(ErrorKind::not_found, message) {}
};

/// Parse failure; `offset` is the byte offset into the input when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t offset)
      : Error(ErrorKind::parse, message), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class NoCandidatesError : public Error {
 public:
  explicit NoCandidatesError(const std::string& message)
      : Error(ErrorKind::no_candidates, message) {}
};

/// Raised once every retry against a service endpoint has failed. Carries
/// one line per attempt so callers can log what happened.
class TransportError : public Error {
 public:
  TransportError(const std::string& message, std::vector<std::string> attempts)
      : Error(ErrorKind::transport, message), attempts_(std::move(attempts)) {}

  const std::vector<std::string>& attempts() const noexcept { return attempts_; }

 private:
  std::vector<std::string> attempts_;
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& message)
      : Error(ErrorKind::protocol, message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error(ErrorKind::io, message) {}
};

}  // namespace ode
