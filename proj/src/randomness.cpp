#include "permimp/randomness.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "permimp/error.hpp"

namespace permimp {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) noexcept {
  return splitmix64(seed ^ splitmix64(value + 0x632be59bd9b4e019ULL));
}

std::uint64_t SeedSpec::key() const noexcept {
  std::uint64_t h = splitmix64(master_seed);
  h = hash_combine(h, stream.experiment);
  h = hash_combine(h, stream.replicate);
  h = hash_combine(h, stream.tree);
  h = hash_combine(h, stream.lane);
  h = hash_combine(h, static_cast<std::uint64_t>(stream.purpose));
  return h;
}

Rng::Rng(std::uint64_t key) noexcept {
  std::uint64_t x = key;
  for (auto& word : s_) {
    x += 0x9e3779b97f4a7c15ULL;
    word = splitmix64(x);
  }
}

Rng::result_type Rng::operator()() noexcept {
  const std::uint64_t result = std::rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = std::rotl(s_[3], 45);
  return result;
}

double Rng::uniform01() noexcept {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

__extension__ typedef unsigned __int128 uint128;

std::uint64_t Rng::below(std::uint64_t bound) noexcept {
  uint128 m = static_cast<uint128>((*this)()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      m = static_cast<uint128>((*this)()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double Rng::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform01() - 1.0;
    v = 2.0 * uniform01() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

namespace {

std::vector<std::uint32_t> complement(std::size_t n, const std::vector<std::uint32_t>& sorted_in_bag) {
  std::vector<std::uint32_t> out;
  std::size_t k = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    while (k < sorted_in_bag.size() && sorted_in_bag[k] < i) ++k;
    if (k == sorted_in_bag.size() || sorted_in_bag[k] != i) out.push_back(i);
  }
  return out;
}

// First `k` entries of a partial Fisher-Yates shuffle of {0..n-1}.
std::vector<std::uint32_t> sample_distinct(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::uint32_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0u);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

ResampleRecord subsample_without_replacement(std::size_t n, std::size_t a_n, const SeedSpec& seed) {
  if (a_n < 1 || a_n >= n) {
    throw Error(ErrorKind::invalid_parameter,
                "subsample size a_n=" + std::to_string(a_n) + " must satisfy 1 <= a_n < n=" + std::to_string(n));
  }
  Rng rng(seed);
  ResampleRecord rec;
  rec.scheme = Scheme::without_replacement;
  rec.in_bag = sample_distinct(n, a_n, rng);
  rec.oob = complement(n, rec.in_bag);
  return rec;
}

ResampleRecord bootstrap_with_replacement(std::size_t n, const SeedSpec& seed) {
  if (n == 0) throw Error(ErrorKind::invalid_parameter, "bootstrap requires n >= 1");
  Rng rng(seed);
  ResampleRecord rec;
  rec.scheme = Scheme::with_replacement;
  rec.in_bag.resize(n);
  for (auto& idx : rec.in_bag) idx = static_cast<std::uint32_t>(rng.below(n));
  std::sort(rec.in_bag.begin(), rec.in_bag.end());
  rec.oob = complement(n, rec.in_bag);
  return rec;
}

std::vector<std::uint32_t> feature_subspace(std::size_t p, std::size_t v_try, Rng& rng) {
  if (v_try < 1 || v_try > p) {
    throw Error(ErrorKind::invalid_parameter,
                "v_try=" + std::to_string(v_try) + " must lie in [1, p=" + std::to_string(p) + "]");
  }
  if (v_try == p) {
    std::vector<std::uint32_t> all(p);
    std::iota(all.begin(), all.end(), 0u);
    return all;
  }
  return sample_distinct(p, v_try, rng);
}

std::vector<std::uint32_t> feature_subspace(std::size_t p, std::size_t v_try, const SeedSpec& seed) {
  Rng rng(seed);
  return feature_subspace(p, v_try, rng);
}

std::vector<std::uint32_t> random_permutation(std::size_t k, Rng& rng) {
  std::vector<std::uint32_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0u);
  for (std::size_t i = k; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

bool has_fixed_point(std::span<const std::uint32_t> perm) noexcept {
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (perm[i] == i) return true;
  }
  return false;
}

std::vector<std::uint32_t> random_derangement(std::size_t k, Rng& rng) {
  if (k <= 1) {
    throw Error(ErrorKind::no_derangement_exists,
                "no derangement of " + std::to_string(k) + " element(s) exists");
  }
  // Fisher-Yates fixes position i-1 at step i, so an attempt is abandoned
  // as soon as a fixed point appears. The accept event is unchanged.
  std::vector<std::uint32_t> perm(k);
  for (;;) {
    std::iota(perm.begin(), perm.end(), 0u);
    bool rejected = false;
    for (std::size_t i = k; i > 1 && !rejected; --i) {
      const auto j = static_cast<std::size_t>(rng.below(i));
      std::swap(perm[i - 1], perm[j]);
      rejected = perm[i - 1] == i - 1;
    }
    if (!rejected && perm[0] != 0) return perm;
  }
}

std::vector<std::uint32_t> random_derangement(std::size_t k, const SeedSpec& seed) {
  Rng rng(seed);
  return random_derangement(k, rng);
}

double oob_probability(std::size_t n, std::size_t a_n, Scheme scheme) {
  if (n == 0) throw Error(ErrorKind::invalid_parameter, "oob_probability requires n >= 1");
  if (scheme == Scheme::with_replacement) {
    return std::pow(1.0 - 1.0 / static_cast<double>(n), static_cast<double>(n));
  }
  if (a_n < 1 || a_n >= n) {
    throw Error(ErrorKind::invalid_parameter, "without-replacement requires 1 <= a_n < n");
  }
  return 1.0 - static_cast<double>(a_n) / static_cast<double>(n);
}

}  // namespace permimp
