#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "permimp/error.hpp"
#include "permimp/tree.hpp"

using namespace permimp;

namespace {

ResampleRecord full_record(std::size_t n) {
  ResampleRecord r;
  r.scheme = Scheme::without_replacement;
  r.in_bag.resize(n);
  std::iota(r.in_bag.begin(), r.in_bag.end(), 0u);
  return r;
}

std::vector<std::uint32_t> all_rows(std::size_t n) {
  std::vector<std::uint32_t> v(n);
  std::iota(v.begin(), v.end(), 0u);
  return v;
}

struct Reference {
  std::uint32_t feature;
  double threshold;
  double gain;
};

double sse(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s;
}

// Enumerates every candidate threshold and evaluates the SSE reduction directly.
std::optional<Reference> brute_force(const RegressionDataset& data, const std::vector<std::uint32_t>& features,
                                     std::size_t leaf) {
  const std::size_t n = data.n();
  std::vector<double> all(data.response().begin(), data.response().end());
  double sq = 0;
  for (double y : all) sq += y * y;
  const double tol = kGainTolerance * sq / n;
  const double parent = sse(all);
  std::optional<Reference> best;
  for (auto j : features) {
    std::vector<double> values;
    for (std::size_t i = 0; i < n; ++i) values.push_back(data.x(i, j));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
      const double z = (values[k] + values[k + 1]) / 2;
      std::vector<double> l, r;
      for (std::size_t i = 0; i < n; ++i) (data.x(i, j) < z ? l : r).push_back(data.y(i));
      if (l.size() < leaf || r.size() < leaf) continue;
      const double gain = (parent - sse(l) - sse(r)) / n;
      if (gain <= tol) continue;
      if (best && gain <= best->gain + tol) continue;
      best = Reference{j, z, gain};
    }
  }
  return best;
}

RegressionDataset grid_dataset(std::size_t n, std::size_t p, std::mt19937_64& eng) {
  std::uniform_int_distribution<int> grid(0, 8), resp(-3, 3);
  std::vector<double> x(n * p), y(n);
  for (auto& v : x) v = grid(eng) / 8.0;
  for (auto& v : y) v = resp(eng);
  return RegressionDataset(n, p, std::move(x), std::move(y));
}

}  // namespace

TEST_CASE("two-point split") {
  const RegressionDataset data(2, 1, {0.0, 1.0}, {0.0, 1.0});
  const std::vector<std::uint32_t> cand{0};
  const auto s = best_split(all_rows(2), cand, data, 1);
  REQUIRE(s);
  CHECK(s->feature == 0);
  CHECK(s->threshold == 0.5);
  CHECK(s->gain == doctest::Approx(0.25));
  CHECK(s->left_count == 1);
  CHECK_FALSE(best_split(all_rows(2), cand, data, 2));
}

TEST_CASE("no admissible split") {
  SUBCASE("equal responses") {
    const RegressionDataset data(4, 1, {0.1, 0.2, 0.3, 0.4}, {2.0, 2.0, 2.0, 2.0});
    const std::vector<std::uint32_t> cand{0};
    CHECK_FALSE(best_split(all_rows(4), cand, data, 1));
  }
  SUBCASE("identical feature values") {
    const RegressionDataset data(4, 1, {0.3, 0.3, 0.3, 0.3}, {1.0, 2.0, 3.0, 4.0});
    const std::vector<std::uint32_t> cand{0};
    CHECK_FALSE(best_split(all_rows(4), cand, data, 1));
  }
  SUBCASE("no candidates") {
    const RegressionDataset data(2, 1, {0.0, 1.0}, {0.0, 1.0});
    CHECK_FALSE(best_split(all_rows(2), {}, data, 1));
  }
}

TEST_CASE("ties break to the smallest feature, then the smallest threshold") {
  const RegressionDataset data(4, 2, {0.1, 0.1, 0.2, 0.2, 0.8, 0.8, 0.9, 0.9}, {0.0, 0.0, 5.0, 5.0});
  const std::vector<std::uint32_t> cand{0, 1};
  const auto s = best_split(all_rows(4), cand, data, 1);
  REQUIRE(s);
  CHECK(s->feature == 0);
  CHECK(s->threshold == doctest::Approx(0.5));

  // Symmetric response: thresholds 0.15 and 0.85 have equal gain.
  const RegressionDataset sym(4, 1, {0.1, 0.2, 0.8, 0.9}, {1.0, 0.0, 0.0, 1.0});
  const std::vector<std::uint32_t> one{0};
  const auto t = best_split(all_rows(4), one, sym, 1);
  REQUIRE(t);
  CHECK(t->threshold == doctest::Approx(0.15));
}

TEST_CASE("best_split matches exhaustive enumeration") {
  std::mt19937_64 eng(2024);
  int splits = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t n = 2 + trial % 11;
    const std::size_t p = 1 + trial % 3;
    const std::size_t leaf = 1 + trial % 3;
    const auto data = grid_dataset(n, p, eng);
    std::vector<std::uint32_t> cand(p);
    std::iota(cand.begin(), cand.end(), 0u);
    const auto got = best_split(all_rows(n), cand, data, leaf);
    const auto want = brute_force(data, cand, leaf);
    REQUIRE(got.has_value() == want.has_value());
    if (!got) continue;
    ++splits;
    CHECK(got->feature == want->feature);
    CHECK(got->threshold == want->threshold);
    CHECK(got->gain == doctest::Approx(want->gain).epsilon(1e-9));
  }
  CHECK(splits > 200);
}

TEST_CASE("prediction routing") {
  const RegressionDataset data(2, 1, {0.0, 1.0}, {0.0, 1.0});
  const auto tree = grow_tree(full_record(2), TreeParams{1, 1, {}}, data, SeedSpec{1, {}});
  REQUIRE(tree.leaf_count() == 2);
  CHECK(tree.root().threshold == 0.5);
  CHECK(predict_tree(tree, std::vector<double>{0.2}) == 0.0);
  CHECK(predict_tree(tree, std::vector<double>{0.7}) == 1.0);
  CHECK(predict_tree(tree, std::vector<double>{0.5}) == 1.0);
  CHECK_THROWS_AS(predict_tree(tree, std::vector<double>{0.5, 0.5}), Error);
}

TEST_CASE("degenerate trees") {
  const RegressionDataset data(6, 2, {0.1, 0.5, 0.2, 0.4, 0.3, 0.3, 0.4, 0.2, 0.5, 0.1, 0.6, 0.0},
                               {1, 2, 3, 4, 5, 6});
  SUBCASE("leaf size larger than half the sample") {
    const auto tree = grow_tree(full_record(6), TreeParams{2, 4, {}}, data, SeedSpec{1, {}});
    CHECK(tree.leaf_count() == 1);
    CHECK(tree.root().mean == 3.5);
  }
  SUBCASE("one-leaf budget") {
    const auto tree = grow_tree(full_record(6), TreeParams{2, 1, 1}, data, SeedSpec{1, {}});
    CHECK(tree.leaf_count() == 1);
    CHECK(predict_tree(tree, std::vector<double>{0.9, 0.9}) == 3.5);
  }
}

TEST_CASE("grown trees respect their invariants") {
  const LinkModel model(LinkKind::linear, default_beta());
  const auto data = generate_dataset(model, 300, 2.0, SeedSpec{11, {}});
  const auto record = subsample_without_replacement(300, 200, SeedSpec{11, {}});

  for (std::size_t leaf : {1u, 5u, 20u}) {
    for (std::optional<std::size_t> budget : {std::optional<std::size_t>{}, std::optional<std::size_t>{7}}) {
      const TreeParams params{3, leaf, budget};
      const auto tree = grow_tree(record, params, data, SeedSpec{11, {}});
      if (budget) CHECK(tree.leaf_count() <= *budget);
      std::size_t total = 0;
      for (const auto& node : tree.nodes()) {
        if (!node.is_leaf()) continue;
        CHECK(node.count >= leaf);
        total += node.count;
      }
      CHECK(total == 200);

      // Every leaf mean is the mean of the in-bag responses routed to it.
      std::vector<double> sum(tree.nodes().size(), 0.0);
      std::vector<std::size_t> cnt(tree.nodes().size(), 0);
      for (auto i : record.in_bag) {
        std::size_t k = 0;
        while (!tree.nodes()[k].is_leaf()) {
          const auto& nd = tree.nodes()[k];
          k = data.x(i, nd.feature) < nd.threshold ? nd.left : nd.right;
        }
        sum[k] += data.y(i);
        ++cnt[k];
      }
      for (std::size_t k = 0; k < tree.nodes().size(); ++k) {
        if (!tree.nodes()[k].is_leaf()) continue;
        CHECK(cnt[k] == tree.nodes()[k].count);
        CHECK(tree.nodes()[k].mean == doctest::Approx(sum[k] / cnt[k]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("determinism and JSON round trip") {
  const LinkModel model(LinkKind::trigonometric, default_beta());
  const auto data = generate_dataset(model, 150, 1.0, SeedSpec{4, {}});
  const auto record = subsample_without_replacement(150, 100, SeedSpec{4, {}});
  const TreeParams params{3, 5, {}};
  const auto a = grow_tree(record, params, data, SeedSpec{4, {}});
  const auto b = grow_tree(record, params, data, SeedSpec{4, {}});
  CHECK(a == b);
  CHECK(a.to_json().dump() == b.to_json().dump());
  const auto c = Tree::from_json(a.to_json(), data.p());
  CHECK(c == a);
  CHECK(c.to_json().dump() == a.to_json().dump());
  const auto d = grow_tree(record, params, data, SeedSpec{5, {}});
  CHECK_FALSE(d == a);
}

TEST_CASE("out-of-sample error falls as the leaf budget grows") {
  const LinkModel model(LinkKind::linear, default_beta());
  const auto train = generate_dataset(model, 2000, 5.0, SeedSpec{8, {}});
  const auto test = generate_dataset(model, 2000, NoiseSpec::noiseless(), SeedSpec{9, {}});
  const TreeParams base{10, 1, {}};
  double previous = 1e300;
  for (std::size_t budget : {1u, 4u, 16u, 64u}) {
    TreeParams params = base;
    params.max_leaves = budget;
    const auto tree = grow_tree(full_record(2000), params, train, SeedSpec{8, {}});
    double mse = 0;
    for (std::size_t i = 0; i < test.n(); ++i) {
      const double e = test.y(i) - tree.predict(test.row(i));
      mse += e * e;
    }
    mse /= test.n();
    CHECK(mse < previous);
    previous = mse;
  }
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS((TreeParams{0, 5, {}}.validate(3)), Error);
  CHECK_THROWS_AS((TreeParams{4, 5, {}}.validate(3)), Error);
  CHECK_THROWS_AS((TreeParams{1, 0, {}}.validate(3)), Error);
  CHECK_THROWS_AS((TreeParams{1, 5, 0}.validate(3)), Error);
  CHECK_NOTHROW((TreeParams{3, 1, 2}.validate(3)));
  CHECK(default_v_try(10) == 3);
  CHECK(default_v_try(2) == 1);
  CHECK(default_v_try(55) == 18);
}
