#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace geoloc {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file or model output. `line` is 1-based, 0 when not
// applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Structurally valid data that breaks a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Model output that cannot be interpreted; keeps the raw text for diagnosis.
class ModelOutputError : public ParseError {
 public:
  ModelOutputError(const std::string& what, std::string raw) : ParseError(what), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

// An internal invariant between pipeline stages did not hold.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

// Optimistic-concurrency failure or a write that conflicts with current state.
class ConflictError : public Error {
 public:
  using Error::Error;
};

// Export attempted while conflicts remain open.
class UnresolvedConflicts : public Error {
 public:
  explicit UnresolvedConflicts(std::vector<int> ids)
      : Error("unresolved conflicts remain"), ids_(std::move(ids)) {}
  const std::vector<int>& ids() const noexcept { return ids_; }

 private:
  std::vector<int> ids_;
};

// Chat endpoint failure. `status` is 0 for network-level failures.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int status = 0, std::string body = {})
      : Error(what), status_(status), body_(std::move(body)) {}
  int status() const noexcept { return status_; }
  const std::string& body() const noexcept { return body_; }

 private:
  int status_;
  std::string body_;
};

}  // namespace geoloc
