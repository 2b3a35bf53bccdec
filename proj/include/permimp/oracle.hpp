#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "permimp/datagen.hpp"
#include "permimp/randomness.hpp"

namespace permimp {

enum class OracleMethod { closed_form, monte_carlo };

std::string_view to_string(OracleMethod method) noexcept;

/// Theoretical importance I(j) of one feature.
struct OracleValue {
  double value = 0.0;
  OracleMethod method = OracleMethod::closed_form;
  std::size_t draws = 0;                // monte_carlo only
  std::optional<double> std_error;      // present iff monte_carlo
};

/// I(j) = 2 Var(m_j(X_j)) for additive links with independent uniform
/// features: beta_j^2/6 (linear), 2 beta_j^2 [1/(2j+1) - 1/(j+1)^2]
/// (polynomial, 1-based j). The covariance form for centered components
/// reduces to the same value because cross covariances vanish under feature
/// independence. `j` is 0-based. Throws not_additive for other kinds.
OracleValue oracle_additive(const LinkModel& model, std::size_t j);

inline constexpr std::size_t kOracleDraws = 1'000'000;

/// Monte-Carlo estimate of E[(m(X) - m(X^(j)))^2], X^(j) being X with
/// coordinate j replaced by an independent uniform copy. Coordinates outside
/// the informative set and j are left at 0 since the link never reads them.
OracleValue oracle_mc(const LinkModel& model, std::size_t j, std::size_t draws, const SeedSpec& seed);

/// I(j) for every feature: closed form for additive links; otherwise exact 0
/// on uninformative features and oracle_mc on the informative ones (feature j
/// uses seed.with_lane(j)).
std::vector<OracleValue> oracle_values(const LinkModel& model, std::size_t draws, const SeedSpec& seed);

}  // namespace permimp
