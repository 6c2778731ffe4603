#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stablab {

enum class ErrorKind {
  Contract,           // precondition or dimension violation
  Config,             // invalid configuration value
  UnsupportedMethod,  // method/model pairing not available
  EmptyDataset,
  OptimizationFailure,
  EnumerationCap,
  DegenerateExponent,
  Schema,
  Io,
};

std::string_view error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace stablab
