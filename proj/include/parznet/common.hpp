#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace parznet {

/// Raised for invalid configuration (bad keys, out-of-range values, ...).
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised for malformed input files; carries the byte offset of the defect.
struct parse_error : std::runtime_error {
  std::size_t offset;
  parse_error(std::size_t off, const std::string& msg)
      : std::runtime_error(msg + " (at byte offset " + std::to_string(off) + ")"),
        offset(off) {}
};

/// Raised when a numerical self-check fails (gradient checks, non-finite loss).
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kVersion = "0.1.0";

}  // namespace parznet
