#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "permimp/randomness.hpp"

namespace permimp {

enum class LinkKind { linear, polynomial, trigonometric, non_continuous };

std::string_view to_string(LinkKind kind) noexcept;
LinkKind parse_link_kind(std::string_view name);

/// The coefficient vector used by every p = 10 simulation model.
std::vector<double> default_beta();

/// One of the four synthetic regression links on [0,1]^p:
///   linear          m(x) = <x, beta>
///   polynomial      m(x) = sum_j beta_j x_j^j
///   trigonometric   m(x) = 2 sin(<x, beta> + 2)
///   non_continuous  beta_1 x_1 + beta_2 x_2 + beta_3 x_3      if x_3 > 0.5
///                   beta_4 x_4 + beta_5 x_5 + 3                otherwise
class LinkModel {
 public:
  LinkModel(LinkKind kind, std::vector<double> beta);

  LinkKind kind() const noexcept { return kind_; }
  std::size_t p() const noexcept { return beta_.size(); }
  const std::vector<double>& beta() const noexcept { return beta_; }

  /// 0-based indices of coordinates the link reads with nonzero weight.
  /// For non_continuous this is the fixed set {0, ..., 4}.
  const std::vector<std::size_t>& informative() const noexcept { return informative_; }
  bool is_informative(std::size_t j) const noexcept;
  bool is_additive() const noexcept { return kind_ == LinkKind::linear || kind_ == LinkKind::polynomial; }

  double operator()(std::span<const double> x) const;

 private:
  LinkKind kind_;
  std::vector<double> beta_;
  std::vector<std::size_t> informative_;
};

double link_eval(const LinkModel& model, std::span<const double> x);

/// Linear model with p = n + 5: beta = [2, 4, 2, -3, 1, 0, ..., 0].
LinkModel high_dim_model(std::size_t n);

struct LinkVariance {
  double value = 0.0;
  double std_error = 0.0;  // 0 for closed forms
  bool exact = true;
  std::size_t draws = 0;
  std::uint64_t seed_key = 0;
};

inline constexpr std::size_t kLinkVarianceDraws = 1'000'000;
inline constexpr std::uint64_t kLinkVarianceSeed = 0x5eed'1135'0000'0001ULL;

/// Var(m(X)) for X ~ Unif[0,1]^p. Closed form for linear and polynomial;
/// fixed-seed Monte Carlo for the other two kinds.
LinkVariance link_variance(const LinkModel& model, std::size_t draws = kLinkVarianceDraws);

struct Provenance {
  LinkKind kind = LinkKind::linear;
  std::vector<double> beta;
  std::optional<double> sn;  // empty when noiseless
  double sigma2 = 0.0;
  SeedSpec seed{};
};

/// n x p features (row-major) in [0,1] and n responses.
class RegressionDataset {
 public:
  RegressionDataset(std::size_t n, std::size_t p, std::vector<double> features, std::vector<double> response);

  std::size_t n() const noexcept { return n_; }
  std::size_t p() const noexcept { return p_; }

  std::span<const double> row(std::size_t i) const noexcept { return {features_.data() + i * p_, p_}; }
  double x(std::size_t i, std::size_t j) const noexcept { return features_[i * p_ + j]; }
  double y(std::size_t i) const noexcept { return response_[i]; }
  std::span<const double> response() const noexcept { return response_; }
  std::span<const double> features() const noexcept { return features_; }

  const std::optional<Provenance>& provenance() const noexcept { return provenance_; }
  void set_provenance(Provenance prov) { provenance_ = std::move(prov); }

  /// Content hash over shape, features and responses.
  std::uint64_t fingerprint() const noexcept;

 private:
  std::size_t n_;
  std::size_t p_;
  std::vector<double> features_;
  std::vector<double> response_;
  std::optional<Provenance> provenance_;
};

/// Noise level of a synthetic dataset. `sn` empty means noiseless (sigma2 = 0),
/// which exists for oracle tests only.
struct NoiseSpec {
  std::optional<double> sn;
  double sigma2 = 0.0;

  static NoiseSpec noiseless() { return {}; }
  static NoiseSpec from_sn(double sn, const LinkVariance& var);
};

RegressionDataset generate_dataset(const LinkModel& model, std::size_t n, const NoiseSpec& noise,
                                   const SeedSpec& seed);
RegressionDataset generate_dataset(const LinkModel& model, std::size_t n, double sn, const SeedSpec& seed);

// CSV with header x1,...,xp,y. Reading validates the unit-cube domain and
// reports the 1-based data row of the first violation.
void write_dataset_csv(const RegressionDataset& data, const std::string& path);
std::string dataset_csv(const RegressionDataset& data);
RegressionDataset read_dataset_csv(const std::string& path);
RegressionDataset parse_dataset_csv(std::string_view text);

/// Feature-only matrix for prediction (header x1..xp, optional trailing y).
std::vector<std::vector<double>> read_points_csv(const std::string& path, std::size_t p);

std::string provenance_json(const Provenance& prov);
Provenance parse_provenance_json(std::string_view text);

}  // namespace permimp
