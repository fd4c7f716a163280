#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ssde {

enum class ErrorKind {
  invalid_argument,
  precondition_violation,
  numeric_domain,
  simulation_blowup,
  division_guard,
  degenerate_weights,
  assumption_violation,
  insufficient_sample,
  invalid_start,
  config_error,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries one of the kinds above. The
// optional index names the grid step or node where a numeric failure occurred.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        std::optional<std::size_t> index = std::nullopt);

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  ErrorKind kind_;
  std::optional<std::size_t> index_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message,
                       std::optional<std::size_t> index = std::nullopt);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace ssde
