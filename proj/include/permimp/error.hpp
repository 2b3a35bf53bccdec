#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace permimp {

enum class ErrorKind {
  invalid_parameter,
  invalid_input,
  no_derangement_exists,
  never_oob,
  insufficient_oob,
  degenerate_residuals,
  wrong_dataset,
  unsupported_scheme,
  not_additive,
  missing_provenance,
  invalid_figure,
  io,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace permimp
