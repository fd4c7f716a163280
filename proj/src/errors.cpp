#include "ssde/errors.hpp"

namespace ssde {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::precondition_violation: return "precondition-violation";
    case ErrorKind::numeric_domain: return "numeric-domain";
    case ErrorKind::simulation_blowup: return "simulation-blowup";
    case ErrorKind::division_guard: return "division-guard";
    case ErrorKind::degenerate_weights: return "degenerate-weights";
    case ErrorKind::assumption_violation: return "assumption-violation";
    case ErrorKind::insufficient_sample: return "insufficient-sample";
    case ErrorKind::invalid_start: return "invalid-start";
    case ErrorKind::config_error: return "config-error";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message,
             std::optional<std::size_t> index)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message),
      kind_(kind),
      index_(index) {}

void fail(ErrorKind kind, const std::string& message,
          std::optional<std::size_t> index) {
  throw Error(kind, message, index);
}

}  // namespace ssde
