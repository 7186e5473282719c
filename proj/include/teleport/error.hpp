#pragma once

#include <stdexcept>
#include <string>

namespace teleport {

enum class ErrorKind {
  invalid_dimension,
  unsupported_dimension,
  violates_assumption,
  invalid_parameter,
  invalid_node,
  invalid_shape,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_dimension: return "invalid dimension";
    case ErrorKind::unsupported_dimension: return "unsupported dimension";
    case ErrorKind::violates_assumption: return "violates assumption";
    case ErrorKind::invalid_parameter: return "invalid parameter";
    case ErrorKind::invalid_node: return "invalid node";
    case ErrorKind::invalid_shape: return "invalid shape";
  }
  return "unknown";
}

/// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace teleport
