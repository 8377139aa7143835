#pragma once

#include <stdexcept>
#include <string>

namespace rem {

enum class ErrorKind {
  InvalidArgument,
  DimensionMismatch,
  InsufficientSamples,
  NotTrained,
  Divergence,
  NonFinite,
  Parse,
  Io,
  MissingFile,
};

// Single exception type for the library; `kind()` drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& message) {
  if (!cond) throw Error(kind, message);
}

inline void require_dims(long got, long expected, const std::string& what) {
  if (got != expected) {
    throw Error(ErrorKind::DimensionMismatch,
                what + ": dimension mismatch (got " + std::to_string(got) + ", expected " +
                    std::to_string(expected) + ")");
  }
}

}  // namespace rem
