#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "permimp/datagen.hpp"
#include "permimp/forest.hpp"
#include "permimp/oracle.hpp"
#include "permimp/randomness.hpp"

namespace permimp {

enum class PermutationMode { derangement, unrestricted };

std::string_view to_string(PermutationMode mode) noexcept;
PermutationMode parse_permutation_mode(std::string_view name);

struct ImportanceReport {
  std::vector<double> per_feature;  // index j-1 holds feature j
  PermutationMode mode = PermutationMode::derangement;
  std::size_t gamma_n = 0;
  std::size_t skipped_trees = 0;  // trees whose OOB set admits no non-trivial permutation
  SeedSpec seed{};
};

/// Called once per (tree, feature) with the permutation of OOB positions used.
using PermutationObserver = std::function<void(std::size_t tree, std::size_t feature, std::span<const std::uint32_t>)>;

/// OOB permutation importance
///   I(j) = 1/(M gamma_n) sum_t sum_{i in OOB_t}
///          [(Y_i - T_t(X_i with x_j taken from row pi_{j,t}(i)))^2 - (Y_i - T_t(X_i))^2]
/// with one fresh permutation of the OOB rows per (tree, feature), drawn from
/// seed.with_tree(t).with_lane(j). Only subsampled forests are supported.
ImportanceReport permutation_importance(const ForestModel& model, const RegressionDataset& data, PermutationMode mode,
                                        const SeedSpec& seed, unsigned threads = 1,
                                        const PermutationObserver& observer = {});

struct AnnotatedImportance {
  ImportanceReport report;
  std::vector<OracleValue> oracle;
  std::vector<double> gap;  // empirical - oracle
  std::vector<bool> informative;
};

AnnotatedImportance importance_with_oracle(const ImportanceReport& report, const LinkModel& model,
                                           std::size_t draws = kOracleDraws, const SeedSpec& oracle_seed = {});
/// Uses the dataset's synthetic provenance; throws missing_provenance without it.
AnnotatedImportance importance_with_oracle(const ImportanceReport& report, const RegressionDataset& data,
                                           std::size_t draws = kOracleDraws, const SeedSpec& oracle_seed = {});

/// CSV: feature,importance,oracle,gap,mode,gamma_n,seed. Oracle and gap are
/// empty when no annotation is available.
std::string importance_csv(const ImportanceReport& report);
std::string importance_csv(const AnnotatedImportance& annotated);

}  // namespace permimp
