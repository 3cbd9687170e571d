#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace achilles {

enum class ErrorKind {
  InvalidArgument,
  BadInput,
  CorruptFeed,
  InsufficientHistory,
  ShapeMismatch,
  NonFinite,
  FormatVersion,
  NotFound,
  Rejected,
  Coverage,
  Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a kind so the CLI can emit a
/// stable machine-parseable code.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

} // namespace achilles
