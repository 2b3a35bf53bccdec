#include "permimp/harness.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <tomlplusplus/toml.hpp>

#include "permimp/error.hpp"
#include "permimp/io.hpp"
#include "permimp/parallel.hpp"

namespace permimp {

namespace {

constexpr const char* kVersion = "permimp 1.0.0";
constexpr std::size_t kFullBudget = 1000;

std::uint64_t model_key(const ExperimentConfig& config, std::size_t n) {
  std::uint64_t h = hash_combine(0x6d6f64656cULL, static_cast<std::uint64_t>(config.kind));
  h = hash_combine(h, config.high_dim ? 1 : 0);
  if (config.high_dim) {
    h = hash_combine(h, n);
  } else {
    for (double b : config.beta) h = hash_combine(h, std::bit_cast<std::uint64_t>(b));
  }
  return h;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

double std_error_of(const std::vector<double>& v) {
  if (v.size() < 2) return std::nan("");
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
}

// Linear interpolation between order statistics.
double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::string num(double v) { return io::format_double(v); }

}  // namespace

std::string ExperimentConfig::model_label() const {
  return std::string(to_string(kind)) + (high_dim ? "_highdim" : "");
}

LinkModel ExperimentConfig::model_for(std::size_t n) const {
  if (!high_dim) return LinkModel(kind, beta);
  return LinkModel(kind, high_dim_model(n).beta());
}

ForestParams ExperimentConfig::forest_for(std::size_t n, std::size_t p) const {
  ForestParams params = ForestParams::defaults(n, p, m_trees);
  params.scheme = scheme;
  if (subsample_fraction) {
    params.a_n = static_cast<std::size_t>(std::ceil(*subsample_fraction * static_cast<double>(n)));
  }
  if (v_try) params.tree.v_try = *v_try;
  params.tree.min_leaf_size = min_leaf_size;
  params.tree.max_leaves = max_leaves;
  return params;
}

void ExperimentConfig::validate() const {
  if (n_values.empty()) throw Error(ErrorKind::invalid_parameter, "config: n list must be non-empty");
  if (sn_values.empty()) throw Error(ErrorKind::invalid_parameter, "config: sn list must be non-empty");
  if (mc_replicates < 1) throw Error(ErrorKind::invalid_parameter, "config: mc_replicates must be >= 1");
  if (oracle_draws < 2) throw Error(ErrorKind::invalid_parameter, "config: oracle_draws must be >= 2");
  if (subsample_fraction && !(*subsample_fraction > 0.0 && *subsample_fraction < 1.0)) {
    throw Error(ErrorKind::invalid_parameter, "config: subsample_fraction must lie in (0, 1)");
  }
  for (double sn : sn_values) {
    if (!(sn > 0.0) || !std::isfinite(sn)) throw Error(ErrorKind::invalid_parameter, "config: sn values must be positive");
  }
  if (mode == PermutationMode::derangement && scheme != Scheme::without_replacement) {
    throw Error(ErrorKind::unsupported_scheme, "config: permutation importance requires without_replacement");
  }
  for (std::size_t n : n_values) {
    if (n < 2) throw Error(ErrorKind::invalid_parameter, "config: every n must be >= 2");
    const auto model = model_for(n);
    const auto params = forest_for(n, model.p());
    params.validate(n, model.p());
    if (mode == PermutationMode::derangement && n - params.a_n < 2) {
      throw Error(ErrorKind::no_derangement_exists,
                  "config: n=" + std::to_string(n) + " leaves fewer than 2 out-of-bag rows per tree");
    }
  }
}

ExperimentConfig parse_config_toml(std::string_view text) {
  toml::table tbl;
  try {
    tbl = toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw Error(ErrorKind::invalid_input, std::string("config TOML: ") + std::string(e.description()));
  }
  const std::map<std::string, std::set<std::string>> known{
      {"", {"name", "seed", "mc_replicates", "oracle_draws", "output_dir", "threads", "model", "grid", "forest",
            "importance"}},
      {"model", {"kind", "beta", "high_dim"}},
      {"grid", {"n", "sn"}},
      {"forest", {"m_trees", "scheme", "subsample_fraction", "v_try", "min_leaf_size", "max_leaves"}},
      {"importance", {"mode"}},
  };
  for (const auto& [key, node] : tbl) {
    const std::string k(key.str());
    if (!known.at("").contains(k)) throw Error(ErrorKind::invalid_input, "config: unknown key '" + k + "'");
    if (!known.contains(k)) continue;
    const auto* sub = node.as_table();
    if (!sub) throw Error(ErrorKind::invalid_input, "config: '" + k + "' must be a table");
    for (const auto& [inner, _] : *sub) {
      if (!known.at(k).contains(std::string(inner.str()))) {
        throw Error(ErrorKind::invalid_input, "config: unknown key '" + k + "." + std::string(inner.str()) + "'");
      }
    }
  }

  ExperimentConfig c;
  auto require_array = [](const toml::node_view<toml::node>& node, const char* what) {
    const auto* arr = node.as_array();
    if (!arr) throw Error(ErrorKind::invalid_input, std::string("config: '") + what + "' must be an array");
    return arr;
  };
  auto as_count = [](std::int64_t v, const char* what) {
    if (v < 0) throw Error(ErrorKind::invalid_parameter, std::string("config: '") + what + "' must be non-negative");
    return static_cast<std::size_t>(v);
  };

  c.name = tbl["name"].value_or(c.name);
  if (auto v = tbl["seed"].value<std::int64_t>()) c.seed = static_cast<std::uint64_t>(*v);
  else throw Error(ErrorKind::invalid_input, "config: 'seed' is required");
  c.mc_replicates = as_count(tbl["mc_replicates"].value_or<std::int64_t>(50), "mc_replicates");
  c.oracle_draws = as_count(tbl["oracle_draws"].value_or<std::int64_t>(static_cast<std::int64_t>(kOracleDraws)), "oracle_draws");
  c.output_dir = tbl["output_dir"].value_or(std::string{});
  c.threads = static_cast<unsigned>(as_count(tbl["threads"].value_or<std::int64_t>(0), "threads"));

  c.kind = parse_link_kind(tbl["model"]["kind"].value_or(std::string("linear")));
  c.high_dim = tbl["model"]["high_dim"].value_or(false);
  if (tbl["model"]["beta"]) {
    c.beta.clear();
    for (const auto& b : *require_array(tbl["model"]["beta"], "model.beta")) {
      const auto v = b.value<double>();
      if (!v) throw Error(ErrorKind::invalid_input, "config: model.beta must hold numbers");
      c.beta.push_back(*v);
    }
  }

  if (tbl["grid"]["n"]) {
    for (const auto& v : *require_array(tbl["grid"]["n"], "grid.n")) {
      const auto x = v.value<std::int64_t>();
      if (!x) throw Error(ErrorKind::invalid_input, "config: grid.n must hold integers");
      c.n_values.push_back(as_count(*x, "grid.n"));
    }
  }
  if (tbl["grid"]["sn"]) {
    for (const auto& v : *require_array(tbl["grid"]["sn"], "grid.sn")) {
      const auto x = v.value<double>();
      if (!x) throw Error(ErrorKind::invalid_input, "config: grid.sn must hold numbers");
      c.sn_values.push_back(*x);
    }
  }

  c.m_trees = as_count(tbl["forest"]["m_trees"].value_or<std::int64_t>(300), "forest.m_trees");
  c.scheme = parse_scheme(tbl["forest"]["scheme"].value_or(std::string("without_replacement")));
  if (auto v = tbl["forest"]["subsample_fraction"].value<double>()) c.subsample_fraction = *v;
  if (auto v = tbl["forest"]["v_try"].value<std::int64_t>()) c.v_try = as_count(*v, "forest.v_try");
  c.min_leaf_size = as_count(tbl["forest"]["min_leaf_size"].value_or<std::int64_t>(5), "forest.min_leaf_size");
  if (auto v = tbl["forest"]["max_leaves"].value<std::int64_t>()) c.max_leaves = as_count(*v, "forest.max_leaves");

  c.mode = parse_permutation_mode(tbl["importance"]["mode"].value_or(std::string("derangement")));
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) { return parse_config_toml(io::read_file(path)); }

SeedSpec replicate_seed(const ExperimentConfig& config, std::size_t n, double sn, std::size_t replicate) {
  std::uint64_t cell = hash_combine(model_key(config, n), n);
  cell = hash_combine(cell, std::bit_cast<std::uint64_t>(sn));
  return SeedSpec{config.seed, StreamId{.experiment = cell, .replicate = replicate}};
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult result;
  result.name = config.name;
  result.seed = config.seed;
  result.mc_replicates = config.mc_replicates;
  result.mode = config.mode;
  result.threads = resolve_threads(config.threads);

  struct Replicate {
    std::vector<double> importance;
    double sn_hat = 0.0;
    double sigma2_rf = 0.0;
    double oob_mse = 0.0;
    double seconds = 0.0;
    std::optional<std::string> error;
  };

  // Cell setup (models, noise levels, oracles); oracles are shared across sn.
  std::map<std::size_t, std::vector<OracleValue>> oracle_cache;
  std::vector<NoiseSpec> noise;
  for (std::size_t n : config.n_values) {
    const auto model = config.model_for(n);
    const auto link_var = link_variance(model);
    if (!oracle_cache.contains(n)) {
      const SeedSpec oracle_seed{config.seed, StreamId{.experiment = model_key(config, n), .purpose = Purpose::oracle}};
      oracle_cache[n] = oracle_values(model, config.oracle_draws, oracle_seed);
    }
    for (double sn : config.sn_values) {
      CellResult cell;
      cell.model = config.model_label();
      cell.n = n;
      cell.sn = sn;
      cell.p = model.p();
      cell.forest = config.forest_for(n, model.p());
      noise.push_back(NoiseSpec::from_sn(sn, link_var));
      cell.sigma2 = noise.back().sigma2;
      cell.oracle = oracle_cache[n];
      for (std::size_t j = 0; j < model.p(); ++j) cell.informative.push_back(model.is_informative(j));
      result.cells.push_back(std::move(cell));
    }
  }

  const std::size_t reps = config.mc_replicates;
  std::vector<Replicate> runs(result.cells.size() * reps);
  parallel_for(runs.size(), result.threads, [&](std::size_t job) {
    const std::size_t c = job / reps;
    const std::size_t r = job % reps;
    const auto& cell = result.cells[c];
    auto& run = runs[job];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const auto model = config.model_for(cell.n);
      const SeedSpec seed = replicate_seed(config, cell.n, cell.sn, r);
      const auto data = generate_dataset(model, cell.n, noise[c], seed);
      const auto forest = fit_forest(data, cell.forest, seed, 1);
      run.importance = permutation_importance(forest, data, config.mode, seed, 1).per_feature;
      const auto rv = residual_variance(forest, data);
      run.sigma2_rf = rv.value;
      run.oob_mse = rv.oob_mse;
      run.sn_hat = sn_estimate(response_variance(data), rv.value);
    } catch (const Error& e) {
      run.error = "replicate " + std::to_string(r) + ": " + std::string(to_string(e.kind())) + ": " + e.what();
    } catch (const std::exception& e) {
      run.error = "replicate " + std::to_string(r) + ": " + e.what();
    }
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  for (std::size_t c = 0; c < result.cells.size(); ++c) {
    auto& cell = result.cells[c];
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& run = runs[c * reps + r];
      cell.seconds += run.seconds;
      if (run.error && !cell.error) cell.error = run.error;
    }
    if (cell.error) {
      cell.mc_mean.assign(cell.p, std::nan(""));
      cell.mc_se.assign(cell.p, std::nan(""));
      cell.sn_hat_mean = cell.oob_mse_mean = std::nan("");
      continue;
    }
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& run = runs[c * reps + r];
      cell.raw.push_back(run.importance);
      cell.sn_hat.push_back(run.sn_hat);
      cell.sigma2_rf.push_back(run.sigma2_rf);
      cell.oob_mse.push_back(run.oob_mse);
    }
    for (std::size_t j = 0; j < cell.p; ++j) {
      std::vector<double> column;
      for (const auto& row : cell.raw) column.push_back(row[j]);
      cell.mc_mean.push_back(mean_of(column));
      cell.mc_se.push_back(std_error_of(column));
    }
    cell.sn_hat_mean = mean_of(cell.sn_hat);
    cell.oob_mse_mean = mean_of(cell.oob_mse);
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::string results_csv(const ExperimentResult& result) {
  std::string out = "model,n,sn,feature,mc_mean,mc_se,oracle,gap\n";
  for (const auto& cell : result.cells) {
    for (std::size_t j = 0; j < cell.p; ++j) {
      out += cell.model + "," + std::to_string(cell.n) + "," + num(cell.sn) + "," + std::to_string(j + 1) + "," +
             num(cell.mc_mean[j]) + "," + num(cell.mc_se[j]) + "," + num(cell.oracle[j].value) + "," +
             num(cell.mc_mean[j] - cell.oracle[j].value) + "\n";
    }
  }
  return out;
}

std::string raw_csv(const ExperimentResult& result) {
  std::string out = "model,n,sn,replicate,feature,importance\n";
  for (const auto& cell : result.cells) {
    for (std::size_t r = 0; r < cell.raw.size(); ++r) {
      for (std::size_t j = 0; j < cell.p; ++j) {
        out += cell.model + "," + std::to_string(cell.n) + "," + num(cell.sn) + "," + std::to_string(r + 1) + "," +
               std::to_string(j + 1) + "," + num(cell.raw[r][j]) + "\n";
      }
    }
  }
  return out;
}

std::string replicates_csv(const ExperimentResult& result) {
  std::string out = "model,n,sn,replicate,sn_hat,sigma2_rf,oob_mse\n";
  for (const auto& cell : result.cells) {
    for (std::size_t r = 0; r < cell.raw.size(); ++r) {
      out += cell.model + "," + std::to_string(cell.n) + "," + num(cell.sn) + "," + std::to_string(r + 1) + "," +
             num(cell.sn_hat[r]) + "," + num(cell.sigma2_rf[r]) + "," + num(cell.oob_mse[r]) + "\n";
    }
  }
  return out;
}

std::string cells_csv(const ExperimentResult& result) {
  std::string out = "model,n,sn,p,replicates,m_trees,a_n,v_try,min_leaf_size,sigma2,sn_hat_mean,oob_mse_mean,status\n";
  for (const auto& cell : result.cells) {
    std::string status = cell.error ? "error: " + *cell.error : "ok";
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    out += cell.model + "," + std::to_string(cell.n) + "," + num(cell.sn) + "," + std::to_string(cell.p) + "," +
           std::to_string(cell.raw.size()) + "," + std::to_string(cell.forest.m_trees) + "," +
           std::to_string(cell.forest.a_n) + "," + std::to_string(cell.forest.tree.v_try) + "," +
           std::to_string(cell.forest.tree.min_leaf_size) + "," + num(cell.sigma2) + "," + num(cell.sn_hat_mean) +
           "," + num(cell.oob_mse_mean) + "," + status + "\n";
  }
  return out;
}

std::string quantiles_csv(const ExperimentResult& result) {
  std::string out = "model,n,sn,feature,min,q1,median,q3,max,mean\n";
  for (const auto& cell : result.cells) {
    if (cell.raw.empty()) continue;
    for (std::size_t j = 0; j < cell.p; ++j) {
      std::vector<double> column;
      for (const auto& row : cell.raw) column.push_back(row[j]);
      out += cell.model + "," + std::to_string(cell.n) + "," + num(cell.sn) + "," + std::to_string(j + 1) + "," +
             num(quantile(column, 0.0)) + "," + num(quantile(column, 0.25)) + "," + num(quantile(column, 0.5)) + "," +
             num(quantile(column, 0.75)) + "," + num(quantile(column, 1.0)) + "," + num(cell.mc_mean[j]) + "\n";
    }
  }
  return out;
}

std::string meta_json(const ExperimentResult& result) {
  nlohmann::json j;
  j["name"] = result.name;
  j["version"] = kVersion;
  j["seed"] = result.seed;
  j["mc_replicates"] = result.mc_replicates;
  j["importance_mode"] = std::string(to_string(result.mode));
  j["threads"] = result.threads;
  j["total_seconds"] = result.seconds;
  j["defaults"] = {{"a_n", "ceil(2n/3) unless subsample_fraction is set"},
                   {"v_try", "max(1, floor(p/3)) unless set"},
                   {"min_leaf_size", 5},
                   {"max_leaves", "unlimited unless set"},
                   {"note", "v_try, leaf size and leaf budget are implementation defaults"}};
  auto& cells = j["cells"] = nlohmann::json::array();
  for (const auto& cell : result.cells) {
    nlohmann::json jc = {{"model", cell.model},
                         {"n", cell.n},
                         {"sn", cell.sn},
                         {"p", cell.p},
                         {"m_trees", cell.forest.m_trees},
                         {"a_n", cell.forest.a_n},
                         {"v_try", cell.forest.tree.v_try},
                         {"min_leaf_size", cell.forest.tree.min_leaf_size},
                         {"seconds", cell.seconds}};
    jc["max_leaves"] = cell.forest.tree.max_leaves ? nlohmann::json(*cell.forest.tree.max_leaves) : nlohmann::json(nullptr);
    jc["error"] = cell.error ? nlohmann::json(*cell.error) : nlohmann::json(nullptr);
    auto& methods = jc["oracle_method"] = nlohmann::json::array();
    for (const auto& o : cell.oracle) methods.push_back(std::string(to_string(o.method)));
    cells.push_back(std::move(jc));
  }
  return j.dump(2) + "\n";
}

void write_outputs(const ExperimentResult& result, const std::string& dir) {
  const std::filesystem::path base(dir);
  std::filesystem::create_directories(base);
  io::write_file_atomic((base / "results.csv").string(), results_csv(result));
  io::write_file_atomic((base / "raw.csv").string(), raw_csv(result));
  io::write_file_atomic((base / "replicates.csv").string(), replicates_csv(result));
  io::write_file_atomic((base / "cells.csv").string(), cells_csv(result));
  io::write_file_atomic((base / "quantiles.csv").string(), quantiles_csv(result));
  io::write_file_atomic((base / "meta.json").string(), meta_json(result));
}

std::vector<ExperimentConfig> figure_configs(std::string_view figure_id, double scale, std::uint64_t seed) {
  if (!(scale > 0.0 && scale <= 1.0)) throw Error(ErrorKind::invalid_parameter, "scale must lie in (0, 1]");
  static const LinkKind kinds[] = {LinkKind::linear, LinkKind::polynomial, LinkKind::trigonometric,
                                   LinkKind::non_continuous};
  const auto budget = [&](std::size_t full) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(scale * static_cast<double>(full))));
  };
  auto base = [&](LinkKind kind, std::vector<std::size_t> n_values, bool high_dim) {
    ExperimentConfig c;
    c.name = std::string(figure_id) + "_" + std::string(to_string(kind));
    c.kind = kind;
    c.high_dim = high_dim;
    c.n_values = std::move(n_values);
    c.sn_values = {0.5, 1.0, 3.0, 5.0};
    c.mc_replicates = budget(kFullBudget);
    c.m_trees = budget(kFullBudget);
    c.seed = seed;
    return c;
  };

  const std::string id(figure_id);
  auto figure_index = [&](std::string_view prefix) -> int {
    if (id.size() != prefix.size() + 1 || id.compare(0, prefix.size(), prefix) != 0) return 0;
    const char d = id.back();
    return d >= '1' && d <= '8' ? d - '0' : 0;
  };

  if (id == "supp_table1") {
    std::vector<ExperimentConfig> out;
    for (auto kind : kinds) out.push_back(base(kind, {50, 100, 500, 1000}, false));
    for (auto& c : out) c.name = "supp_table1_" + std::string(to_string(c.kind));
    return out;
  }
  if (int k = figure_index("fig"); k >= 1 && k <= 4) return {base(kinds[k - 1], {50, 1000}, false)};
  if (int k = figure_index("supp"); k >= 1 && k <= 4) return {base(kinds[k - 1], {100, 500}, false)};
  if (int k = figure_index("supp"); k >= 5 && k <= 8) return {base(kinds[k - 5], {50, 100, 500, 1000}, true)};
  throw Error(ErrorKind::invalid_figure, "unknown figure id '" + id +
                                             "' (expected fig1..fig4, supp1..supp8 or supp_table1)");
}

ExperimentResult reproduce(std::string_view figure_id, double scale, std::uint64_t seed, unsigned threads) {
  const auto configs = figure_configs(figure_id, scale, seed);
  ExperimentResult merged;
  merged.name = std::string(figure_id);
  merged.seed = seed;
  for (auto config : configs) {
    config.threads = threads;
    auto part = run_experiment(config);
    merged.mc_replicates = part.mc_replicates;
    merged.mode = part.mode;
    merged.threads = part.threads;
    merged.seconds += part.seconds;
    for (auto& cell : part.cells) merged.cells.push_back(std::move(cell));
  }
  return merged;
}

}  // namespace permimp
