#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "permimp/datagen.hpp"
#include "permimp/forest.hpp"
#include "permimp/importance.hpp"
#include "permimp/oracle.hpp"

namespace permimp {

struct ExperimentConfig {
  std::string name = "experiment";
  LinkKind kind = LinkKind::linear;
  std::vector<double> beta = default_beta();
  bool high_dim = false;  // beta = [2,4,2,-3,1,0...] with p = n + 5; `beta` ignored
  std::vector<std::size_t> n_values;
  std::vector<double> sn_values;
  std::size_t mc_replicates = 50;

  std::size_t m_trees = 300;
  Scheme scheme = Scheme::without_replacement;
  std::optional<double> subsample_fraction;  // a_n = ceil(fraction * n); default 2/3
  std::optional<std::size_t> v_try;          // default max(1, floor(p/3))
  std::size_t min_leaf_size = 5;
  std::optional<std::size_t> max_leaves;

  PermutationMode mode = PermutationMode::derangement;
  std::uint64_t seed = 0;
  std::size_t oracle_draws = kOracleDraws;
  std::string output_dir;
  unsigned threads = 0;  // 0 = PERMIMP_THREADS or hardware concurrency

  /// Checks every module precondition for every (n, sn) cell up front.
  void validate() const;

  std::string model_label() const;
  LinkModel model_for(std::size_t n) const;
  ForestParams forest_for(std::size_t n, std::size_t p) const;
};

ExperimentConfig parse_config_toml(std::string_view text);
ExperimentConfig load_config(const std::string& path);

struct CellResult {
  std::string model;
  std::size_t n = 0;
  double sn = 0.0;
  std::size_t p = 0;
  ForestParams forest{};
  double sigma2 = 0.0;

  std::vector<double> mc_mean;
  std::vector<double> mc_se;
  std::vector<OracleValue> oracle;
  std::vector<bool> informative;

  // Per replicate, in replicate order.
  std::vector<std::vector<double>> raw;
  std::vector<double> sn_hat;
  std::vector<double> sigma2_rf;
  std::vector<double> oob_mse;

  double sn_hat_mean = 0.0;
  double oob_mse_mean = 0.0;
  std::optional<std::string> error;
  double seconds = 0.0;
};

struct ExperimentResult {
  std::string name;
  std::uint64_t seed = 0;
  std::size_t mc_replicates = 0;
  PermutationMode mode = PermutationMode::derangement;
  std::vector<CellResult> cells;
  double seconds = 0.0;
  unsigned threads = 1;
};

/// Substream of one Monte-Carlo replicate; depends only on the master seed,
/// the model, n, sn and the replicate index.
SeedSpec replicate_seed(const ExperimentConfig& config, std::size_t n, double sn, std::size_t replicate);

ExperimentResult run_experiment(const ExperimentConfig& config);

// Output tables. results.csv: model,n,sn,feature,mc_mean,mc_se,oracle,gap.
std::string results_csv(const ExperimentResult& result);
std::string raw_csv(const ExperimentResult& result);         // model,n,sn,replicate,feature,importance
std::string replicates_csv(const ExperimentResult& result);  // per replicate SN estimate and OOB error
std::string cells_csv(const ExperimentResult& result);       // per cell aggregates and status
std::string quantiles_csv(const ExperimentResult& result);   // boxplot five-number summaries
std::string meta_json(const ExperimentResult& result);

/// Writes all tables into `dir` (atomic per file).
void write_outputs(const ExperimentResult& result, const std::string& dir);

/// Named experiment presets:
///   fig1..fig4   linear / polynomial / trigonometric / non_continuous, n in {50, 1000}
///   supp1..supp4 same models, n in {100, 500}
///   supp5..supp8 same models in the p = n + 5 setting, n in {50, 100, 500, 1000}
///   supp_table1  SN estimates for all four models, n in {50, 100, 500, 1000}
/// All use SN in {0.5, 1, 3, 5}. `scale` multiplies the full budget of 1000
/// replicates and 1000 trees.
std::vector<ExperimentConfig> figure_configs(std::string_view figure_id, double scale, std::uint64_t seed);

ExperimentResult reproduce(std::string_view figure_id, double scale, std::uint64_t seed, unsigned threads = 0);

}  // namespace permimp
