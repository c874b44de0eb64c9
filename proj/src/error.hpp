#pragma once

#include <stdexcept>
#include <string>

namespace lqm {

enum class ErrorKind {
  validation,
  usage,
  io,
  not_found,
  conflict,
  internal,
};

/// Exception type thrown by every core module. The kind maps onto CLI exit
/// codes, C API status codes and HTTP statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

[[noreturn]] inline void fail_validation(const std::string& message) {
  throw Error(ErrorKind::validation, message);
}

}  // namespace lqm
