#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "permimp/error.hpp"
#include "permimp/randomness.hpp"

using namespace permimp;

namespace {

SeedSpec seed_of(std::uint64_t master, std::uint64_t replicate = 0) {
  return SeedSpec{master, StreamId{.replicate = replicate}};
}

// Upper 0.1% points of the chi-square distribution.
double chi2_critical_001(int df) {
  switch (df) {
    case 1: return 10.828;
    case 5: return 20.515;
    case 8: return 26.124;
    default: FAIL("no table entry"); return 0.0;
  }
}

template <class Key>
double chi_square(const std::map<Key, int>& counts, const std::vector<Key>& support, int draws) {
  const double expected = static_cast<double>(draws) / static_cast<double>(support.size());
  double stat = 0.0;
  for (const auto& key : support) {
    const auto it = counts.find(key);
    const double observed = it == counts.end() ? 0.0 : it->second;
    stat += (observed - expected) * (observed - expected) / expected;
  }
  return stat;
}

std::vector<std::vector<std::uint32_t>> enumerate_derangements(std::uint32_t k) {
  std::vector<std::uint32_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0u);
  std::vector<std::vector<std::uint32_t>> out;
  do {
    bool fixed = false;
    for (std::uint32_t i = 0; i < k; ++i) fixed |= perm[i] == i;
    if (!fixed) out.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

}  // namespace

TEST_CASE("substreams are reproducible and label-sensitive") {
  const SeedSpec a = seed_of(42);
  Rng r1(a), r2(a);
  for (int i = 0; i < 100; ++i) CHECK(r1() == r2());

  std::set<std::uint64_t> keys;
  keys.insert(a.key());
  keys.insert(a.with_tree(1).key());
  keys.insert(a.with_lane(1).key());
  keys.insert(a.with_replicate(1).key());
  keys.insert(a.with_experiment(1).key());
  keys.insert(a.with_purpose(Purpose::resample).key());
  keys.insert(seed_of(43).key());
  CHECK(keys.size() == 7);
}

TEST_CASE("distinct substreams are uncorrelated") {
  Rng a(seed_of(1).with_tree(0));
  Rng b(seed_of(1).with_tree(1));
  const int n = 100000;
  double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
  for (int i = 0; i < n; ++i) {
    const double x = a.uniform01(), y = b.uniform01();
    sa += x; sb += y; sab += x * y; saa += x * x; sbb += y * y;
  }
  const double cov = sab / n - (sa / n) * (sb / n);
  const double corr = cov / std::sqrt((saa / n - sa * sa / n / n) * (sbb / n - sb * sb / n / n));
  CHECK(std::abs(corr) < 4.0 / std::sqrt(n));
}

TEST_CASE("bounded integers and normals have the right moments") {
  Rng rng(seed_of(7));
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.below(7)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 400);

  double s = 0, ss = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    ss += z * z;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(ss / n - 1.0) < 0.015);
}

TEST_CASE("subsample_without_replacement") {
  SUBCASE("cardinalities are forced") {
    const auto rec = subsample_without_replacement(3, 2, seed_of(1));
    CHECK(rec.in_bag.size() == 2);
    CHECK(rec.oob.size() == 1);
    CHECK(std::find(rec.in_bag.begin(), rec.in_bag.end(), rec.oob[0]) == rec.in_bag.end());
  }
  SUBCASE("n=2, a_n=1 leaves the unchosen index out of bag") {
    const auto rec = subsample_without_replacement(2, 1, seed_of(2));
    REQUIRE(rec.oob.size() == 1);
    CHECK(rec.oob[0] == 1 - rec.in_bag[0]);
  }
  SUBCASE("a_n >= n is rejected") {
    CHECK_THROWS_AS(subsample_without_replacement(5, 5, seed_of(1)), Error);
    CHECK_THROWS_AS(subsample_without_replacement(5, 0, seed_of(1)), Error);
  }
  SUBCASE("all 6 subsets of size 2 from 4 are equally likely") {
    std::vector<std::vector<std::uint32_t>> support;
    for (std::uint32_t a = 0; a < 4; ++a)
      for (std::uint32_t b = a + 1; b < 4; ++b) support.push_back({a, b});
    REQUIRE(support.size() == 6);
    std::map<std::vector<std::uint32_t>, int> counts;
    const int draws = 60000;
    for (int d = 0; d < draws; ++d) {
      const auto rec = subsample_without_replacement(4, 2, seed_of(11, d));
      ++counts[rec.in_bag];
    }
    CHECK(counts.size() == 6);
    CHECK(chi_square(counts, support, draws) < chi2_critical_001(5));
  }
}

TEST_CASE("bootstrap_with_replacement") {
  SUBCASE("n=1") {
    const auto rec = bootstrap_with_replacement(1, seed_of(1));
    CHECK(rec.in_bag == std::vector<std::uint32_t>{0});
    CHECK(rec.oob.empty());
  }
  SUBCASE("multiplicities sum to n and oob is the zero-multiplicity set") {
    for (std::size_t n : {2u, 17u, 100u}) {
      const auto rec = bootstrap_with_replacement(n, seed_of(3, n));
      CHECK(rec.in_bag.size() == n);
      std::set<std::uint32_t> seen(rec.in_bag.begin(), rec.in_bag.end());
      CHECK(seen.size() + rec.oob.size() == n);
      for (auto i : rec.oob) CHECK(!seen.contains(i));
    }
  }
  SUBCASE("mean OOB fraction matches (1-1/n)^n") {
    const double expected = std::pow(0.99, 100);  // 0.36603...
    double total = 0.0;
    const int draws = 10000;
    for (int d = 0; d < draws; ++d) total += bootstrap_with_replacement(100, seed_of(5, d)).oob.size() / 100.0;
    CHECK(std::abs(total / draws - expected) < 0.002);
  }
  CHECK_THROWS_AS(bootstrap_with_replacement(0, seed_of(1)), Error);
}

TEST_CASE("feature_subspace") {
  CHECK(feature_subspace(5, 5, seed_of(1)) == std::vector<std::uint32_t>{0, 1, 2, 3, 4});
  const auto sub = feature_subspace(10, 3, seed_of(2));
  CHECK(sub.size() == 3);
  CHECK(std::set<std::uint32_t>(sub.begin(), sub.end()).size() == 3);
  CHECK(std::is_sorted(sub.begin(), sub.end()));
  for (auto f : sub) CHECK(f < 10);

  int first = 0;
  const int draws = 20000;
  for (int d = 0; d < draws; ++d) first += feature_subspace(2, 1, seed_of(3, d))[0] == 0;
  CHECK(std::abs(first / static_cast<double>(draws) - 0.5) < 0.015);

  CHECK_THROWS_AS(feature_subspace(3, 0, seed_of(1)), Error);
  CHECK_THROWS_AS(feature_subspace(3, 4, seed_of(1)), Error);
}

TEST_CASE("random_derangement") {
  SUBCASE("k=2 gives the swap") {
    CHECK(random_derangement(2, seed_of(1)) == std::vector<std::uint32_t>{1, 0});
  }
  SUBCASE("k <= 1 has no derangement") {
    for (std::size_t k : {0u, 1u}) {
      try {
        random_derangement(k, seed_of(1));
        FAIL("expected an error");
      } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::no_derangement_exists);
      }
    }
  }
  SUBCASE("small k matches enumeration") {
    for (std::uint32_t k : {3u, 4u}) {
      const auto support = enumerate_derangements(k);
      CHECK(support.size() == (k == 3 ? 2u : 9u));
      std::map<std::vector<std::uint32_t>, int> counts;
      const int draws = k == 3 ? 20000 : 90000;
      Rng rng(seed_of(99, k));
      for (int d = 0; d < draws; ++d) {
        auto perm = random_derangement(k, rng);
        REQUIRE_FALSE(has_fixed_point(perm));
        ++counts[perm];
      }
      CHECK(counts.size() == support.size());
      CHECK(chi_square(counts, support, draws) < chi2_critical_001(static_cast<int>(support.size()) - 1));
    }
  }
  SUBCASE("no draw ever has a fixed point") {
    Rng rng(seed_of(5));
    for (std::size_t k : {2u, 5u, 6u, 33u, 334u}) {
      for (int d = 0; d < 500; ++d) {
        const auto perm = random_derangement(k, rng);
        REQUIRE(perm.size() == k);
        REQUIRE_FALSE(has_fixed_point(perm));
        std::vector<std::uint32_t> sorted = perm;
        std::sort(sorted.begin(), sorted.end());
        for (std::uint32_t i = 0; i < k; ++i) REQUIRE(sorted[i] == i);
      }
    }
  }
  SUBCASE("replay is bit-identical") {
    CHECK(random_derangement(50, seed_of(8)) == random_derangement(50, seed_of(8)));
  }
}

TEST_CASE("oob_probability") {
  CHECK(oob_probability(100, 67, Scheme::without_replacement) == doctest::Approx(0.33).epsilon(1e-12));
  CHECK(oob_probability(1, 0, Scheme::with_replacement) == 0.0);
  CHECK(std::abs(oob_probability(1'000'000, 0, Scheme::with_replacement) - std::exp(-1.0)) < 1e-6);
  CHECK_THROWS_AS(oob_probability(10, 10, Scheme::without_replacement), Error);
}

TEST_CASE("empirical OOB frequency converges to the subsampling constant") {
  const std::size_t n = 100, a_n = 67, trees = 2000;
  std::vector<int> z(n, 0);
  for (std::size_t t = 0; t < trees; ++t) {
    for (auto i : subsample_without_replacement(n, a_n, seed_of(21).with_tree(t)).oob) ++z[i];
  }
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(std::abs(z[i * 10] / static_cast<double>(trees) - 0.33) < 0.03);
  }
}
