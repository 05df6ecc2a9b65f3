#pragma once

#include <stdexcept>
#include <string>

namespace hprm {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorCategory { Usage = 1, Validation = 2, Backend = 3, MetricUndefined = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorCategory::Validation, what) {}
};

class BoundsError : public ValidationError {
 public:
  explicit BoundsError(const std::string& what) : ValidationError(what) {}
};

class ParseError : public ValidationError {
 public:
  explicit ParseError(const std::string& what) : ValidationError(what) {}
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorCategory::Usage, what) {}
};

enum class TransportKind { Timeout, Connection, HttpStatus };

class TransportError : public Error {
 public:
  TransportError(TransportKind kind, const std::string& what, int attempts, int http_status = 0)
      : Error(ErrorCategory::Backend, what), kind_(kind), attempts_(attempts), http_status_(http_status) {}
  TransportKind kind() const noexcept { return kind_; }
  int attempts() const noexcept { return attempts_; }
  int http_status() const noexcept { return http_status_; }

 private:
  TransportKind kind_;
  int attempts_;
  int http_status_;
};

// Backend answered, but the answer breaks the wire contract.
class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& what) : Error(ErrorCategory::Backend, what) {}
};

class MetricUndefinedError : public Error {
 public:
  explicit MetricUndefinedError(const std::string& what) : Error(ErrorCategory::MetricUndefined, what) {}
};

inline const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Usage: return "usage";
    case ErrorCategory::Validation: return "validation";
    case ErrorCategory::Backend: return "backend";
    case ErrorCategory::MetricUndefined: return "metric-undefined";
  }
  return "unknown";
}

}  // namespace hprm
