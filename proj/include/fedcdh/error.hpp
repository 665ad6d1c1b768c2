#pragma once

#include <stdexcept>
#include <string>

namespace fedcdh {

enum class ErrorKind {
  InvalidConfig,
  Input,
  Protocol,
  Numeric,
  Precondition,
  Io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidConfig: return "invalid-configuration";
    case ErrorKind::Input: return "input";
    case ErrorKind::Protocol: return "protocol";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

/// Every library failure is reported as an Error carrying its category.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error config_error(const std::string& what) { return {ErrorKind::InvalidConfig, what}; }
inline Error input_error(const std::string& what) { return {ErrorKind::Input, what}; }
inline Error protocol_error(const std::string& what) { return {ErrorKind::Protocol, what}; }
inline Error numeric_error(const std::string& what) { return {ErrorKind::Numeric, what}; }
inline Error precondition_error(const std::string& what) { return {ErrorKind::Precondition, what}; }
inline Error io_error(const std::string& what) { return {ErrorKind::Io, what}; }

}  // namespace fedcdh
