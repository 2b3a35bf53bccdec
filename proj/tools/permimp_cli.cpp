// permimp: random forests, OOB permutation importance and the simulation harness.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "permimp/datagen.hpp"
#include "permimp/error.hpp"
#include "permimp/forest.hpp"
#include "permimp/harness.hpp"
#include "permimp/importance.hpp"
#include "permimp/io.hpp"
#include "permimp/oracle.hpp"
#include "permimp/parallel.hpp"

using namespace permimp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitFingerprint = 3;
constexpr int kExitUnsupported = 4;
constexpr int kExitInternal = 5;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::wrong_dataset:
      return kExitFingerprint;
    case ErrorKind::unsupported_scheme:
      return kExitUnsupported;
    default:
      return kExitInput;
  }
}

std::string quoted(std::string_view text) {
  std::string out = "\"";
  for (char c : text) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

void report_error(std::string_view kind, std::string_view message) {
  std::cerr << "error: kind=" << kind << " message=" << quoted(message) << "\n";
}

void emit(const std::optional<std::string>& out, const std::string& content) {
  if (out) {
    io::write_file_atomic(*out, content);
  } else {
    std::cout << content;
    std::cout.flush();
  }
}

std::string provenance_path(const std::string& data_path) { return data_path + ".provenance.json"; }

std::vector<double> parse_beta(const std::string& text) {
  std::vector<double> beta;
  for (auto cell : io::split(text, ',')) beta.push_back(io::parse_double(cell));
  return beta;
}

struct ModelFlags {
  std::string kind = "linear";
  std::optional<std::string> beta;
  std::optional<std::size_t> high_dim_n;

  void add(CLI::App* cmd) {
    cmd->add_option("--model-kind", kind, "Link function: linear, polynomial, trigonometric, non_continuous")
        ->capture_default_str();
    cmd->add_option("--beta", beta, "Comma-separated coefficients (default 2,4,2,-3,1,0,0,0,0,0)");
    cmd->add_option("--high-dim", high_dim_n, "Use beta = (2,4,2,-3,1,0,...) with p = N + 5")->excludes("--beta");
  }

  LinkModel model() const {
    const auto k = parse_link_kind(kind);
    if (high_dim_n) {
      const auto m = high_dim_model(*high_dim_n);
      return LinkModel(k, m.beta());
    }
    return LinkModel(k, beta ? parse_beta(*beta) : default_beta());
  }
};

struct TrainFlags {
  std::string data;
  std::uint64_t seed = 0;
  std::size_t trees = 300;
  std::string scheme = "without_replacement";
  std::optional<std::size_t> subsample_size;
  std::optional<std::size_t> v_try;
  std::size_t min_leaf_size = 5;
  std::optional<std::size_t> max_leaves;
  unsigned threads = 0;
  std::optional<std::string> out;
};

int cmd_train(const TrainFlags& f) {
  const auto data = read_dataset_csv(f.data);
  auto params = ForestParams::defaults(data.n(), data.p(), f.trees);
  params.scheme = parse_scheme(f.scheme);
  if (f.subsample_size) params.a_n = *f.subsample_size;
  if (f.v_try) params.tree.v_try = *f.v_try;
  params.tree.min_leaf_size = f.min_leaf_size;
  params.tree.max_leaves = f.max_leaves;
  const auto model = fit_forest(data, params, SeedSpec{f.seed, {}}, resolve_threads(f.threads));
  emit(f.out, model.to_json());

  std::cerr << "trees=" << model.size() << " n=" << data.n() << " p=" << data.p() << "\n";
  try {
    const auto rv = residual_variance(model, data);
    const double var_y = response_variance(data);
    std::cerr << "oob_mse=" << io::format_double(rv.oob_mse) << " sigma2_rf=" << io::format_double(rv.value)
              << " oob_rows=" << rv.used << " never_oob=" << rv.skipped << "\n";
    if (rv.value > 0.0) {
      std::cerr << "sn_hat=" << io::format_double(sn_estimate(var_y, rv.value)) << "\n";
    } else {
      std::cerr << "sn_hat=undefined (zero residual variance)\n";
    }
  } catch (const Error& e) {
    std::cerr << "oob summary unavailable: " << to_string(e.kind()) << ": " << e.what() << "\n";
  }
  return kExitOk;
}

int cmd_predict(const std::string& model_path, const std::string& data_path, const std::optional<std::string>& out) {
  const auto model = ForestModel::from_json(io::read_file(model_path));
  const auto points = read_points_csv(data_path, model.p());
  std::string csv = "row,prediction\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    csv += std::to_string(i + 1) + "," + io::format_double(predict(model, points[i])) + "\n";
  }
  emit(out, csv);
  return kExitOk;
}

struct ImportanceFlags {
  std::string model;
  std::string data;
  std::uint64_t seed = 0;
  std::string mode = "derangement";
  std::optional<std::string> provenance;
  bool no_oracle = false;
  std::size_t oracle_draws = kOracleDraws;
  unsigned threads = 0;
  std::optional<std::string> out;
};

int cmd_importance(const ImportanceFlags& f) {
  const auto mode = parse_permutation_mode(f.mode);
  const auto model = ForestModel::from_json(io::read_file(f.model));
  auto data = read_dataset_csv(f.data);
  const SeedSpec seed{f.seed, {}};
  const auto report = permutation_importance(model, data, mode, seed, resolve_threads(f.threads));

  std::optional<std::string> prov_path = f.provenance;
  if (!prov_path && std::filesystem::exists(provenance_path(f.data))) prov_path = provenance_path(f.data);
  if (prov_path && !f.no_oracle) {
    data.set_provenance(parse_provenance_json(io::read_file(*prov_path)));
    emit(f.out, importance_csv(importance_with_oracle(report, data, f.oracle_draws, seed.with_purpose(Purpose::oracle))));
  } else {
    emit(f.out, importance_csv(report));
  }
  if (report.skipped_trees > 0) std::cerr << "skipped_trees=" << report.skipped_trees << "\n";
  return kExitOk;
}

struct OracleFlags {
  ModelFlags model;
  std::optional<std::size_t> j;
  bool all = false;
  std::size_t mc_draws = kOracleDraws;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

int cmd_oracle(const OracleFlags& f) {
  const auto model = f.model.model();
  if (!f.j && !f.all) throw Error(ErrorKind::invalid_parameter, "oracle needs --j or --all");
  if (f.j && (*f.j < 1 || *f.j > model.p())) {
    throw Error(ErrorKind::invalid_parameter, "--j must lie in 1.." + std::to_string(model.p()));
  }
  if (f.mc_draws < 2) throw Error(ErrorKind::invalid_parameter, "--mc-draws must be >= 2");
  if (!model.is_additive() && !f.seed) {
    throw Error(ErrorKind::invalid_parameter, "--seed is required for Monte-Carlo oracles");
  }
  const SeedSpec seed{f.seed.value_or(0), {}};
  std::vector<std::size_t> features;
  if (f.j) {
    features.push_back(*f.j - 1);
  } else {
    for (std::size_t j = 0; j < model.p(); ++j) features.push_back(j);
  }

  std::string csv = "feature,oracle,method,draws,std_error,informative\n";
  for (auto j : features) {
    OracleValue v;
    if (model.is_additive()) {
      v = oracle_additive(model, j);
    } else if (!model.is_informative(j)) {
      v = OracleValue{0.0, OracleMethod::closed_form, 0, std::nullopt};
    } else {
      v = oracle_mc(model, j, f.mc_draws, seed.with_lane(j));
    }
    csv += std::to_string(j + 1) + "," + io::format_double(v.value) + "," + std::string(to_string(v.method)) + "," +
           std::to_string(v.draws) + "," + (v.std_error ? io::format_double(*v.std_error) : "") + "," +
           (model.is_informative(j) ? "1" : "0") + "\n";
  }
  emit(f.out, csv);
  return kExitOk;
}

struct GenerateFlags {
  ModelFlags model;
  std::size_t n = 0;
  std::optional<double> sn;
  bool noiseless = false;
  std::uint64_t seed = 0;
  std::optional<std::string> out;
};

int cmd_generate(const GenerateFlags& f) {
  const auto model = f.model.model();
  if (!f.sn && !f.noiseless) throw Error(ErrorKind::invalid_parameter, "generate needs --sn or --noiseless");
  const auto noise = f.noiseless ? NoiseSpec::noiseless() : NoiseSpec::from_sn(*f.sn, link_variance(model));
  const auto data = generate_dataset(model, f.n, noise, SeedSpec{f.seed, {}});
  emit(f.out, dataset_csv(data));
  if (f.out) io::write_file_atomic(provenance_path(*f.out), provenance_json(*data.provenance()));
  return kExitOk;
}

void print_summary(const ExperimentResult& result) {
  for (const auto& cell : result.cells) {
    std::cerr << cell.model << " n=" << cell.n << " sn=" << io::format_double(cell.sn);
    if (cell.error) {
      std::cerr << " failed: " << *cell.error << "\n";
    } else {
      std::cerr << " sn_hat=" << io::format_double(cell.sn_hat_mean) << " oob_mse=" << io::format_double(cell.oob_mse_mean)
                << " seconds=" << io::format_double(cell.seconds) << "\n";
    }
  }
  std::cerr << "total_seconds=" << io::format_double(result.seconds) << " threads=" << result.threads << "\n";
}

int finish_experiment(const ExperimentResult& result, const std::optional<std::string>& out_dir) {
  if (out_dir) {
    write_outputs(result, *out_dir);
  } else {
    std::cout << results_csv(result);
    std::cout.flush();
  }
  print_summary(result);
  for (const auto& cell : result.cells) {
    if (cell.error) return kExitInput;
  }
  return kExitOk;
}

int cmd_simulate(const std::string& config_path, std::optional<std::uint64_t> seed, std::optional<std::string> out_dir,
                 std::optional<unsigned> threads) {
  auto config = load_config(config_path);
  if (seed) config.seed = *seed;
  if (threads) config.threads = *threads;
  if (!out_dir && !config.output_dir.empty()) out_dir = config.output_dir;
  return finish_experiment(run_experiment(config), out_dir);
}

int cmd_reproduce(const std::string& figure, double scale, std::uint64_t seed, const std::optional<std::string>& out_dir,
                  unsigned threads) {
  return finish_experiment(reproduce(figure, scale, seed, threads), out_dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random forests with out-of-bag permutation importance"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "permimp 1.0.0");

  TrainFlags train;
  auto* c_train = app.add_subcommand("train", "Fit a forest on x1..xp,y CSV data and write the model JSON");
  c_train->add_option("--data", train.data, "Training CSV")->required();
  c_train->add_option("--seed", train.seed, "Master seed")->required();
  c_train->add_option("--trees", train.trees, "Number of trees M")->capture_default_str();
  c_train->add_option("--scheme", train.scheme, "without_replacement or with_replacement")->capture_default_str();
  c_train->add_option("--subsample-size", train.subsample_size, "a_n (default ceil(2n/3))");
  c_train->add_option("--v-try", train.v_try, "Candidate directions per node (default max(1, p/3))");
  c_train->add_option("--min-leaf-size", train.min_leaf_size, "Minimum points per leaf")->capture_default_str();
  c_train->add_option("--max-leaves", train.max_leaves, "Leaf budget t_n (default unlimited)");
  c_train->add_option("--threads", train.threads, "Worker threads (default PERMIMP_THREADS or all cores)");
  c_train->add_option("--out", train.out, "Model JSON path (default stdout)");

  std::string p_model, p_data;
  std::optional<std::string> p_out;
  auto* c_predict = app.add_subcommand("predict", "Predict with a trained model");
  c_predict->add_option("--model", p_model, "Model JSON")->required();
  c_predict->add_option("--data", p_data, "CSV with header x1..xp and optional y")->required();
  c_predict->add_option("--out", p_out, "Output CSV path (default stdout)");

  ImportanceFlags imp;
  auto* c_imp = app.add_subcommand("importance", "OOB permutation importance of every feature");
  c_imp->add_option("--model", imp.model, "Model JSON")->required();
  c_imp->add_option("--data", imp.data, "Training CSV")->required();
  c_imp->add_option("--seed", imp.seed, "Master seed for the permutations")->required();
  c_imp->add_option("--mode", imp.mode, "derangement or unrestricted")->capture_default_str();
  c_imp->add_option("--provenance", imp.provenance, "Provenance JSON (default <data>.provenance.json if present)");
  c_imp->add_flag("--no-oracle", imp.no_oracle, "Skip oracle columns even when provenance is available");
  c_imp->add_option("--oracle-draws", imp.oracle_draws, "Monte-Carlo draws for non-additive oracles")
      ->capture_default_str();
  c_imp->add_option("--threads", imp.threads, "Worker threads (default PERMIMP_THREADS or all cores)");
  c_imp->add_option("--out", imp.out, "Output CSV path (default stdout)");

  OracleFlags orc;
  auto* c_orc = app.add_subcommand("oracle", "Theoretical importance of a synthetic model");
  orc.model.add(c_orc);
  auto* j_opt = c_orc->add_option("--j", orc.j, "Feature index, 1-based");
  c_orc->add_flag("--all", orc.all, "Every feature")->excludes(j_opt);
  c_orc->add_option("--mc-draws", orc.mc_draws, "Monte-Carlo draws for non-additive links")->capture_default_str();
  c_orc->add_option("--seed", orc.seed, "Master seed (required for Monte-Carlo oracles)");
  c_orc->add_option("--out", orc.out, "Output CSV path (default stdout)");

  GenerateFlags gen;
  auto* c_gen = app.add_subcommand("generate", "Draw a synthetic dataset; --out also writes <out>.provenance.json");
  gen.model.add(c_gen);
  c_gen->add_option("--n", gen.n, "Sample size")->required();
  auto* sn_opt = c_gen->add_option("--sn", gen.sn, "Signal-to-noise ratio Var(m(X)) / sigma^2");
  c_gen->add_flag("--noiseless", gen.noiseless, "Y = m(X) exactly")->excludes(sn_opt);
  c_gen->add_option("--seed", gen.seed, "Master seed")->required();
  c_gen->add_option("--out", gen.out, "Output CSV path (default stdout)");

  std::string s_config;
  std::optional<std::uint64_t> s_seed;
  std::optional<std::string> s_out;
  std::optional<unsigned> s_threads;
  auto* c_sim = app.add_subcommand("simulate", "Run a Monte-Carlo experiment from a TOML config");
  c_sim->add_option("--config", s_config, "Experiment TOML")->required();
  c_sim->add_option("--seed", s_seed, "Override the config seed");
  c_sim->add_option("--out-dir", s_out, "Write results.csv, raw.csv, meta.json and summaries here");
  c_sim->add_option("--threads", s_threads, "Worker threads (default PERMIMP_THREADS or all cores)");

  std::string r_figure;
  double r_scale = 0.05;
  std::uint64_t r_seed = 0;
  std::optional<std::string> r_out;
  unsigned r_threads = 0;
  auto* c_rep = app.add_subcommand("reproduce", "Run a figure preset: fig1..fig4, supp1..supp8, supp_table1");
  c_rep->add_option("figure", r_figure, "Figure id")->required();
  c_rep->add_option("--scale", r_scale, "Fraction of the full budget of 1000 replicates and 1000 trees")
      ->capture_default_str();
  c_rep->add_option("--seed", r_seed, "Master seed")->required();
  c_rep->add_option("--out-dir", r_out, "Output directory (default: results.csv to stdout)");
  c_rep->add_option("--threads", r_threads, "Worker threads (default PERMIMP_THREADS or all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what());
    return kExitInput;
  }

  try {
    if (app.got_subcommand(c_train)) return cmd_train(train);
    if (app.got_subcommand(c_predict)) return cmd_predict(p_model, p_data, p_out);
    if (app.got_subcommand(c_imp)) return cmd_importance(imp);
    if (app.got_subcommand(c_orc)) return cmd_oracle(orc);
    if (app.got_subcommand(c_gen)) return cmd_generate(gen);
    if (app.got_subcommand(c_sim)) return cmd_simulate(s_config, s_seed, s_out, s_threads);
    if (app.got_subcommand(c_rep)) return cmd_reproduce(r_figure, r_scale, r_seed, r_out, r_threads);
  } catch (const Error& e) {
    report_error(to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    report_error("internal", e.what());
    return kExitInternal;
  }
  report_error("internal", "no subcommand handled");
  return kExitInternal;
}
