#include "permimp/oracle.hpp"

#include <cmath>
#include <string>

#include "permimp/error.hpp"

namespace permimp {

std::string_view to_string(OracleMethod method) noexcept {
  return method == OracleMethod::closed_form ? "closed_form" : "monte_carlo";
}

OracleValue oracle_additive(const LinkModel& model, std::size_t j) {
  if (j >= model.p()) throw Error(ErrorKind::invalid_parameter, "feature index out of range");
  const double b = model.beta()[j];
  switch (model.kind()) {
    case LinkKind::linear:
      return {b * b / 6.0, OracleMethod::closed_form, 0, std::nullopt};
    case LinkKind::polynomial: {
      const double k = static_cast<double>(j + 1);
      return {2.0 * b * b * (1.0 / (2.0 * k + 1.0) - 1.0 / ((k + 1.0) * (k + 1.0))), OracleMethod::closed_form, 0,
              std::nullopt};
    }
    default:
      throw Error(ErrorKind::not_additive,
                  "no closed-form importance for the " + std::string(to_string(model.kind())) + " link");
  }
}

OracleValue oracle_mc(const LinkModel& model, std::size_t j, std::size_t draws, const SeedSpec& seed) {
  if (j >= model.p()) throw Error(ErrorKind::invalid_parameter, "feature index out of range");
  if (draws < 2) throw Error(ErrorKind::invalid_parameter, "oracle_mc needs at least 2 draws");
  Rng rng(seed.with_purpose(Purpose::oracle));
  std::vector<double> x(model.p(), 0.0);
  const auto& support = model.informative();
  double mean = 0.0, m2 = 0.0;
  for (std::size_t d = 0; d < draws; ++d) {
    for (auto s : support) x[s] = rng.uniform01();
    const double xj = rng.uniform01();
    const double zj = rng.uniform01();
    x[j] = xj;
    const double original = model(x);
    x[j] = zj;
    const double swapped = model(x);
    const double sq = (original - swapped) * (original - swapped);
    const double delta = sq - mean;
    mean += delta / static_cast<double>(d + 1);
    m2 += delta * (sq - mean);
  }
  const double sd = std::sqrt(m2 / static_cast<double>(draws - 1));
  return {mean, OracleMethod::monte_carlo, draws, sd / std::sqrt(static_cast<double>(draws))};
}

std::vector<OracleValue> oracle_values(const LinkModel& model, std::size_t draws, const SeedSpec& seed) {
  std::vector<OracleValue> out(model.p());
  for (std::size_t j = 0; j < model.p(); ++j) {
    if (model.is_additive()) {
      out[j] = oracle_additive(model, j);
    } else if (!model.is_informative(j)) {
      out[j] = {0.0, OracleMethod::closed_form, 0, std::nullopt};
    } else {
      out[j] = oracle_mc(model, j, draws, seed.with_lane(j));
    }
  }
  return out;
}

}  // namespace permimp
