#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ilbsde {

enum class ErrorKind {
  depth_out_of_range,
  domain,
  parameter,
  empty_grid,
  not_found,
  precondition,
  shape_mismatch,
  overflow,
  picard_divergence,
  unsupported_dimension,
  hypothesis_violation,
  certificate_missing,
  degenerate,
  config,
  io,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::depth_out_of_range: return "depth-out-of-range";
    case ErrorKind::domain: return "domain";
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::empty_grid: return "empty-grid";
    case ErrorKind::not_found: return "not-found";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::shape_mismatch: return "shape-mismatch";
    case ErrorKind::overflow: return "overflow";
    case ErrorKind::picard_divergence: return "picard-divergence";
    case ErrorKind::unsupported_dimension: return "unsupported-dimension";
    case ErrorKind::hypothesis_violation: return "hypothesis-violation";
    case ErrorKind::certificate_missing: return "certificate-missing";
    case ErrorKind::degenerate: return "degenerate-input";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

/// Library error carrying a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

namespace detail {

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond) throw Error(kind, msg);
}

}  // namespace detail
}  // namespace ilbsde
