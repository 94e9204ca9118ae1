#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gcnv {

enum class ErrorKind {
  Shape,
  NonFinite,
  InvalidArgument,
  Io,
  Format,
  Divergence,
  Degenerate,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library; `kind()` gives a machine-readable
// category that the CLI forwards verbatim.
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

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace gcnv
