#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "permimp/datagen.hpp"
#include "permimp/randomness.hpp"
#include "permimp/tree.hpp"

namespace permimp {

std::string_view to_string(Scheme scheme) noexcept;
Scheme parse_scheme(std::string_view name);

struct ForestParams {
  std::size_t m_trees = 300;
  Scheme scheme = Scheme::without_replacement;
  std::size_t a_n = 0;  // ignored for the bootstrap
  TreeParams tree{};

  void validate(std::size_t n, std::size_t p) const;

  /// a_n = ceil(2n/3) without replacement, v_try = max(1, floor(p/3)),
  /// min_leaf_size = 5, no leaf budget.
  static ForestParams defaults(std::size_t n, std::size_t p, std::size_t m_trees = 300);
};

std::size_t default_subsample_size(std::size_t n) noexcept;

class ForestModel {
 public:
  ForestModel(ForestParams params, SeedSpec seed, std::size_t n, std::size_t p, std::uint64_t fingerprint,
              std::vector<ResampleRecord> records, std::vector<Tree> trees);

  const ForestParams& params() const noexcept { return params_; }
  const SeedSpec& seed() const noexcept { return seed_; }
  std::size_t n() const noexcept { return n_; }
  std::size_t p() const noexcept { return p_; }
  std::uint64_t train_fingerprint() const noexcept { return fingerprint_; }
  std::size_t size() const noexcept { return trees_.size(); }
  const std::vector<Tree>& trees() const noexcept { return trees_; }
  const std::vector<ResampleRecord>& records() const noexcept { return records_; }

  /// Throws wrong_dataset unless `data` is the training set.
  void check_training_data(const RegressionDataset& data) const;

  /// Same forest with trees (and their records) reordered by `order`.
  ForestModel reordered(std::span<const std::size_t> order) const;

  std::string to_json() const;
  static ForestModel from_json(std::string_view text);

 private:
  ForestParams params_;
  SeedSpec seed_;
  std::size_t n_;
  std::size_t p_;
  std::uint64_t fingerprint_;
  std::vector<ResampleRecord> records_;
  std::vector<Tree> trees_;
};

/// Tree t is grown on the resample drawn from seed.with_tree(t); the result
/// does not depend on `threads`.
ForestModel fit_forest(const RegressionDataset& data, const ForestParams& params, const SeedSpec& seed,
                       unsigned threads = 1);

double predict(const ForestModel& model, std::span<const double> x);

/// Z_i = number of trees for which row i is out of bag.
std::vector<std::uint32_t> oob_counts(const ForestModel& model);

/// Mean over the OOB trees of row i. Throws never_oob when Z_i = 0.
double predict_oob(const ForestModel& model, const RegressionDataset& data, std::size_t i);

/// OOB prediction of every row; empty entries for rows that were never OOB.
std::vector<std::optional<double>> predict_oob_all(const ForestModel& model, const RegressionDataset& data);

struct ResidualVariance {
  double value = 0.0;
  std::size_t used = 0;
  std::size_t skipped = 0;  // rows never out of bag
  double oob_mse = 0.0;     // mean squared OOB residual over used rows
};

/// (1/n_used) * sum (e_i - mean e)^2 with e_i = Y_i - OOB prediction, over rows
/// with Z_i >= 1. Throws insufficient_oob with fewer than two such rows.
ResidualVariance residual_variance(const ForestModel& model, const RegressionDataset& data);

/// Population variance of the responses.
double response_variance(const RegressionDataset& data);

/// |var(Y) - sigma2_RF| / sigma2_RF. Throws degenerate_residuals if sigma2_RF = 0.
double sn_estimate(const ForestModel& model, const RegressionDataset& data);
double sn_estimate(double response_var, double residual_var);

}  // namespace permimp
