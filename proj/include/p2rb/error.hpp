// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace p2rb {

enum class ErrorKind {
  DegenerateGeometry,
  InvalidCovariance,
  IllConditioned,
  Numeric,
  EmptyAnnotation,
  OutOfBounds,
  IsolatedMarker,
  Config,
  Alignment,
  StaleCache,
  Packing,
  Parse,
  Io,
  NonFinite,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateGeometry: return "degenerate-geometry";
    case ErrorKind::InvalidCovariance: return "invalid-covariance";
    case ErrorKind::IllConditioned: return "ill-conditioned";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::EmptyAnnotation: return "empty-annotation";
    case ErrorKind::OutOfBounds: return "out-of-bounds";
    case ErrorKind::IsolatedMarker: return "isolated-marker";
    case ErrorKind::Config: return "config";
    case ErrorKind::Alignment: return "alignment";
    case ErrorKind::StaleCache: return "stale-cache";
    case ErrorKind::Packing: return "packing";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
    case ErrorKind::NonFinite: return "non-finite";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace p2rb
