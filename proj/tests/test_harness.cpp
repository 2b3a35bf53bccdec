#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "permimp/error.hpp"
#include "permimp/harness.hpp"
#include "permimp/io.hpp"

using namespace permimp;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.name = "small";
  c.kind = LinkKind::linear;
  c.n_values = {40, 80};
  c.sn_values = {1.0, 5.0};
  c.mc_replicates = 4;
  c.m_trees = 15;
  c.seed = 123;
  c.oracle_draws = 1000;
  c.threads = 1;
  return c;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::io;
}

}  // namespace

TEST_CASE("TOML configuration") {
  const auto c = parse_config_toml(R"(
name = "demo"
seed = 42
mc_replicates = 7

[model]
kind = "polynomial"

[grid]
n = [50, 100]
sn = [0.5, 3.0]

[forest]
m_trees = 20
v_try = 2
min_leaf_size = 3
max_leaves = 12

[importance]
mode = "unrestricted"
)");
  CHECK(c.name == "demo");
  CHECK(c.seed == 42);
  CHECK(c.mc_replicates == 7);
  CHECK(c.kind == LinkKind::polynomial);
  CHECK(c.n_values == std::vector<std::size_t>{50, 100});
  CHECK(c.sn_values == std::vector<double>{0.5, 3.0});
  CHECK(c.m_trees == 20);
  CHECK(*c.v_try == 2);
  CHECK(c.min_leaf_size == 3);
  CHECK(*c.max_leaves == 12);
  CHECK(c.mode == PermutationMode::unrestricted);

  const auto f = c.forest_for(100, 10);
  CHECK(f.a_n == 67);
  CHECK(f.tree.v_try == 2);

  CHECK(kind_of([] { parse_config_toml("[grid]\nn=[50]\nsn=[1.0]\n"); }) == ErrorKind::invalid_input);
  CHECK(kind_of([] { parse_config_toml("seed=1\n[grid]\nn=[50]\nsn=[0.0]\n"); }) == ErrorKind::invalid_parameter);
  CHECK(kind_of([] { parse_config_toml("seed=1\n[grid]\nn=[]\nsn=[1.0]\n"); }) == ErrorKind::invalid_parameter);
  CHECK(kind_of([] { parse_config_toml("seed=1\n[grid]\nn=[3]\nsn=[1.0]\n"); }) ==
        ErrorKind::no_derangement_exists);
  CHECK(kind_of([] { parse_config_toml("seed=1\n[grid]\nn=[50]\nsn=[1.0]\n[forest]\nscheme=\"with_replacement\"\n"); }) ==
        ErrorKind::unsupported_scheme);
  CHECK(kind_of([] { parse_config_toml("seed=1\n[grid]\nn=[50]\nsn=[1.0]\n[forest]\nmtrees=5\n"); }) ==
        ErrorKind::invalid_input);
  CHECK(kind_of([] { parse_config_toml("seed=1\nsed=2\n[grid]\nn=[50]\nsn=[1.0]\n"); }) == ErrorKind::invalid_input);
  CHECK(kind_of([] { parse_config_toml("seed=1\n[grid]\nn=[50]\nsn=[1.0]\n[model]\nkind=\"cubic\"\n"); }) ==
        ErrorKind::invalid_parameter);
  CHECK(kind_of([] { parse_config_toml("seed = [1"); }) == ErrorKind::invalid_input);
}

TEST_CASE("runs are deterministic and thread invariant") {
  auto c = small_config();
  const auto a = run_experiment(c);
  const auto b = run_experiment(c);
  c.threads = 4;
  const auto d = run_experiment(c);
  CHECK(results_csv(a) == results_csv(b));
  CHECK(raw_csv(a) == raw_csv(b));
  CHECK(results_csv(a) == results_csv(d));
  CHECK(raw_csv(a) == raw_csv(d));
  CHECK(replicates_csv(a) == replicates_csv(d));
  CHECK(quantiles_csv(a) == quantiles_csv(d));
  c.seed = 124;
  CHECK(raw_csv(run_experiment(c)) != raw_csv(a));
}

TEST_CASE("cells are independent of the rest of the grid") {
  auto c = small_config();
  c.sn_values = {5.0};
  c.n_values = {80};
  const auto alone = run_experiment(c);
  const auto full = run_experiment(small_config());
  const CellResult* match = nullptr;
  for (const auto& cell : full.cells)
    if (cell.n == 80 && cell.sn == 5.0) match = &cell;
  REQUIRE(match);
  CHECK(match->raw == alone.cells[0].raw);
  CHECK(match->sn_hat == alone.cells[0].sn_hat);
}

TEST_CASE("aggregates agree with the raw replicates") {
  const auto result = run_experiment(small_config());
  CHECK(result.cells.size() == 4);
  for (const auto& cell : result.cells) {
    REQUIRE_FALSE(cell.error.has_value());
    REQUIRE(cell.raw.size() == 4);
    const double var_m = 34.0 / 12.0;
    CHECK(cell.sigma2 == doctest::Approx(var_m / cell.sn));
    for (std::size_t j = 0; j < cell.p; ++j) {
      double s = 0, ss = 0;
      for (const auto& rep : cell.raw) {
        s += rep[j];
        ss += rep[j] * rep[j];
      }
      const double mean = s / 4;
      CHECK(cell.mc_mean[j] == doctest::Approx(mean).epsilon(1e-12));
      const double sd = std::sqrt(std::max(0.0, (ss - 4 * mean * mean) / 3));
      CHECK(cell.mc_se[j] == doctest::Approx(sd / 2).epsilon(1e-6).scale(1e-12));
    }
    CHECK(cell.oracle[0].value == doctest::Approx(4.0 / 6.0));
    double sn = 0;
    for (double v : cell.sn_hat) sn += v;
    CHECK(cell.sn_hat_mean == doctest::Approx(sn / 4));
  }

  const auto raw_text = raw_csv(result);
  const auto raw = io::split(raw_text, '\n');
  CHECK(raw[0] == "model,n,sn,replicate,feature,importance");
  std::size_t rows = 0;
  for (auto line : raw) rows += !line.empty();
  CHECK(rows == 1 + 4 * 4 * 10);
  const auto res_text = results_csv(result);
  const auto res = io::split(res_text, '\n');
  CHECK(res[0] == "model,n,sn,feature,mc_mean,mc_se,oracle,gap");
  const auto first = io::split(res[1], ',');
  REQUIRE(first.size() == 8);
  CHECK(first[0] == "linear");
  CHECK(io::parse_double(first[7]) ==
        doctest::Approx(io::parse_double(first[4]) - io::parse_double(first[6])).epsilon(1e-12));
}

TEST_CASE("a single replicate reports no standard error") {
  auto c = small_config();
  c.mc_replicates = 1;
  c.n_values = {40};
  c.sn_values = {1.0};
  const auto r = run_experiment(c);
  REQUIRE(r.cells.size() == 1);
  for (double se : r.cells[0].mc_se) CHECK(std::isnan(se));
  CHECK(r.cells[0].mc_mean == r.cells[0].raw[0]);
}

TEST_CASE("failing cells are recorded, not fatal") {
  auto c = small_config();
  c.n_values = {3, 40};
  c.sn_values = {1.0};
  c.m_trees = 1;
  c.mc_replicates = 2;
  c.mode = PermutationMode::unrestricted;
  const auto r = run_experiment(c);
  REQUIRE(r.cells.size() == 2);
  REQUIRE(r.cells[0].error.has_value());
  CHECK(r.cells[0].error->find("insufficient-oob") != std::string::npos);
  CHECK(std::isnan(r.cells[0].mc_mean[0]));
  CHECK_FALSE(r.cells[1].error.has_value());
  CHECK(cells_csv(r).find("insufficient-oob") != std::string::npos);
}

TEST_CASE("the high-dimensional model grows with n") {
  auto c = small_config();
  c.high_dim = true;
  c.n_values = {20};
  c.sn_values = {3.0};
  c.mc_replicates = 2;
  const auto r = run_experiment(c);
  CHECK(r.cells[0].p == 25);
  CHECK(r.cells[0].model == "linear_highdim");
  CHECK(r.cells[0].forest.tree.v_try == 8);
  CHECK(r.cells[0].oracle[24].value == 0.0);
}

TEST_CASE("outputs are written to disk") {
  const auto dir = std::filesystem::temp_directory_path() / "permimp_harness_test";
  std::filesystem::remove_all(dir);
  auto c = small_config();
  c.n_values = {40};
  const auto r = run_experiment(c);
  write_outputs(r, dir.string());
  for (const char* f : {"results.csv", "raw.csv", "replicates.csv", "cells.csv", "quantiles.csv", "meta.json"})
    CHECK(std::filesystem::exists(dir / f));
  CHECK(io::read_file((dir / "results.csv").string()) == results_csv(r));
  const auto meta = nlohmann::json::parse(io::read_file((dir / "meta.json").string()));
  CHECK(meta["seed"] == 123);
  std::filesystem::remove_all(dir);
}

TEST_CASE("quantile summaries") {
  auto c = small_config();
  c.n_values = {40};
  c.sn_values = {1.0};
  c.mc_replicates = 5;
  const auto r = run_experiment(c);
  const auto text = quantiles_csv(r);
  const auto lines = io::split(text, '\n');
  CHECK(lines[0] == "model,n,sn,feature,min,q1,median,q3,max,mean");
  const auto row = io::split(lines[1], ',');
  REQUIRE(row.size() == 10);
  std::vector<double> col;
  for (const auto& rep : r.cells[0].raw) col.push_back(rep[0]);
  std::sort(col.begin(), col.end());
  CHECK(io::parse_double(row[4]) == col[0]);
  CHECK(io::parse_double(row[6]) == col[2]);
  CHECK(io::parse_double(row[8]) == col[4]);
  CHECK(io::parse_double(row[5]) == col[1]);
}

TEST_CASE("figure presets") {
  const auto fig1 = figure_configs("fig1", 0.01, 7);
  REQUIRE(fig1.size() == 1);
  CHECK(fig1[0].kind == LinkKind::linear);
  CHECK(fig1[0].n_values == std::vector<std::size_t>{50, 1000});
  CHECK(fig1[0].sn_values == std::vector<double>{0.5, 1.0, 3.0, 5.0});
  CHECK(fig1[0].mc_replicates == 10);
  CHECK(fig1[0].m_trees == 10);
  CHECK(figure_configs("fig4", 1.0, 7)[0].kind == LinkKind::non_continuous);
  CHECK(figure_configs("fig4", 1.0, 7)[0].mc_replicates == 1000);
  CHECK(figure_configs("supp3", 0.5, 7)[0].n_values == std::vector<std::size_t>{100, 500});
  const auto s6 = figure_configs("supp6", 0.5, 7);
  CHECK(s6[0].high_dim);
  CHECK(s6[0].kind == LinkKind::polynomial);
  CHECK(figure_configs("supp_table1", 0.5, 7).size() == 4);
  CHECK(figure_configs("fig2", 1e-6, 7)[0].m_trees == 1);
  CHECK(kind_of([] { figure_configs("fig9", 0.5, 1); }) == ErrorKind::invalid_figure);
  CHECK(kind_of([] { figure_configs("supp0", 0.5, 1); }) == ErrorKind::invalid_figure);
  CHECK(kind_of([] { figure_configs("fig1", 0.0, 1); }) == ErrorKind::invalid_parameter);
  CHECK(kind_of([] { figure_configs("fig1", 1.5, 1); }) == ErrorKind::invalid_parameter);
}

TEST_CASE("shipped configs parse") {
  for (const auto& entry : std::filesystem::directory_iterator(PERMIMP_CONFIG_DIR)) {
    if (entry.path().extension() != ".toml") continue;
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(load_config(entry.path().string()));
  }
  const auto linear = load_config(std::string(PERMIMP_CONFIG_DIR) + "/linear.toml");
  CHECK(linear.n_values == std::vector<std::size_t>{50, 1000});
  CHECK(linear.output_dir == "out/linear");
}
