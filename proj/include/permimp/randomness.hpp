#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace permimp {

/// What a substream is used for. Part of the stream key, so two purposes
/// under otherwise equal labels never share random numbers.
enum class Purpose : std::uint32_t {
  generic = 0,
  features = 1,
  noise = 2,
  resample = 3,
  subspace = 4,
  permutation = 5,
  oracle = 6,
  link_variance = 7,
};

/// Structured label of a substream. `lane` is a free sub-index (e.g. the
/// feature whose column a permutation shuffles).
struct StreamId {
  std::uint64_t experiment = 0;
  std::uint64_t replicate = 0;
  std::uint64_t tree = 0;
  std::uint64_t lane = 0;
  Purpose purpose = Purpose::generic;

  friend bool operator==(const StreamId&, const StreamId&) = default;
};

/// Master seed plus stream label. Every random quantity in the library is a
/// pure function of a SeedSpec and the call parameters.
struct SeedSpec {
  std::uint64_t master_seed = 0;
  StreamId stream{};

  SeedSpec with_experiment(std::uint64_t v) const { auto s = *this; s.stream.experiment = v; return s; }
  SeedSpec with_replicate(std::uint64_t v) const { auto s = *this; s.stream.replicate = v; return s; }
  SeedSpec with_tree(std::uint64_t v) const { auto s = *this; s.stream.tree = v; return s; }
  SeedSpec with_lane(std::uint64_t v) const { auto s = *this; s.stream.lane = v; return s; }
  SeedSpec with_purpose(Purpose p) const { auto s = *this; s.stream.purpose = p; return s; }

  /// 64-bit key of the substream, obtained by chaining SplitMix64 finalizers
  /// over the fields.
  std::uint64_t key() const noexcept;

  friend bool operator==(const SeedSpec&, const SeedSpec&) = default;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) noexcept;

/// xoshiro256** seeded through SplitMix64 from a substream key. Satisfies
/// std::uniform_random_bit_generator.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(const SeedSpec& seed) noexcept : Rng(seed.key()) {}
  explicit Rng(std::uint64_t key) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() noexcept;
  /// Uniform on {0, ..., bound-1}; Lemire's nearly-divisionless rejection.
  std::uint64_t below(std::uint64_t bound) noexcept;
  /// Standard normal, Marsaglia polar method (second variate cached).
  double normal() noexcept;

 private:
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

enum class Scheme { without_replacement, with_replacement };

/// Realized resampling draw of one tree. Indices are 0-based row numbers.
/// `in_bag` is sorted; for the bootstrap it is a multiset (repeats allowed).
struct ResampleRecord {
  Scheme scheme = Scheme::without_replacement;
  std::vector<std::uint32_t> in_bag;
  std::vector<std::uint32_t> oob;
};

ResampleRecord subsample_without_replacement(std::size_t n, std::size_t a_n, const SeedSpec& seed);
ResampleRecord bootstrap_with_replacement(std::size_t n, const SeedSpec& seed);

/// Uniform v_try-subset of {0, ..., p-1}, returned in increasing order.
std::vector<std::uint32_t> feature_subspace(std::size_t p, std::size_t v_try, const SeedSpec& seed);
std::vector<std::uint32_t> feature_subspace(std::size_t p, std::size_t v_try, Rng& rng);

/// Uniform permutation of {0, ..., k-1} (Fisher-Yates).
std::vector<std::uint32_t> random_permutation(std::size_t k, Rng& rng);

/// Uniform draw from the permutations of {0, ..., k-1} without fixed points.
/// Rejection from uniform permutations, so the law conditioned on acceptance
/// is exactly uniform. Throws no_derangement_exists for k <= 1.
std::vector<std::uint32_t> random_derangement(std::size_t k, const SeedSpec& seed);
std::vector<std::uint32_t> random_derangement(std::size_t k, Rng& rng);

bool has_fixed_point(std::span<const std::uint32_t> perm) noexcept;

/// Limiting fraction of trees that leave a fixed observation out of bag:
/// 1 - a_n/n when subsampling, (1 - 1/n)^n for the bootstrap.
double oob_probability(std::size_t n, std::size_t a_n, Scheme scheme);

}  // namespace permimp
