#include "permimp/error.hpp"

namespace permimp {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_parameter: return "invalid-parameter";
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::no_derangement_exists: return "no-derangement-exists";
    case ErrorKind::never_oob: return "never-oob";
    case ErrorKind::insufficient_oob: return "insufficient-oob";
    case ErrorKind::degenerate_residuals: return "degenerate-residuals";
    case ErrorKind::wrong_dataset: return "wrong-dataset";
    case ErrorKind::unsupported_scheme: return "unsupported-scheme";
    case ErrorKind::not_additive: return "not-additive";
    case ErrorKind::missing_provenance: return "missing-provenance";
    case ErrorKind::invalid_figure: return "invalid-figure";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

}  // namespace permimp
