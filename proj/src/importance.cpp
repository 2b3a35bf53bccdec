#include "permimp/importance.hpp"

#include "permimp/error.hpp"
#include "permimp/io.hpp"
#include "permimp/parallel.hpp"

namespace permimp {

std::string_view to_string(PermutationMode mode) noexcept {
  return mode == PermutationMode::derangement ? "derangement" : "unrestricted";
}

PermutationMode parse_permutation_mode(std::string_view name) {
  if (name == "derangement") return PermutationMode::derangement;
  if (name == "unrestricted") return PermutationMode::unrestricted;
  throw Error(ErrorKind::unsupported_scheme, "unknown permutation mode '" + std::string(name) + "'");
}

ImportanceReport permutation_importance(const ForestModel& model, const RegressionDataset& data, PermutationMode mode,
                                        const SeedSpec& seed, unsigned threads, const PermutationObserver& observer) {
  model.check_training_data(data);
  if (model.params().scheme != Scheme::without_replacement) {
    throw Error(ErrorKind::unsupported_scheme,
                "permutation importance requires subsampling without replacement (OOB size must be deterministic)");
  }
  const std::size_t p = data.p();
  const std::size_t trees = model.size();
  const std::size_t gamma = data.n() - model.params().a_n;
  if (mode == PermutationMode::derangement && gamma < 2) {
    throw Error(ErrorKind::no_derangement_exists,
                "OOB size gamma_n=" + std::to_string(gamma) + " admits no derangement");
  }

  ImportanceReport report;
  report.mode = mode;
  report.gamma_n = gamma;
  report.seed = seed;
  report.per_feature.assign(p, 0.0);
  if (gamma < 2) {
    // Only the identity permutes a single row: every term vanishes.
    report.skipped_trees = trees;
    return report;
  }

  std::vector<double> partial(trees * p, 0.0);
  parallel_for(trees, threads, [&](std::size_t t) {
    const auto& tree = model.trees()[t];
    const auto& oob = model.records()[t].oob;
    std::vector<double> base_sq(oob.size());
    for (std::size_t k = 0; k < oob.size(); ++k) {
      const double e = data.y(oob[k]) - tree.predict(data.row(oob[k]));
      base_sq[k] = e * e;
    }
    std::vector<bool> used(p, false);
    for (auto f : tree.split_features()) used[f] = true;

    std::vector<double> point(p);
    for (std::size_t j = 0; j < p; ++j) {
      Rng rng(seed.with_tree(t).with_lane(j).with_purpose(Purpose::permutation));
      const auto perm = mode == PermutationMode::derangement ? random_derangement(oob.size(), rng)
                                                             : random_permutation(oob.size(), rng);
      if (observer) observer(t, j, perm);
      // A tree that never splits on j predicts identically after the shuffle.
      if (!used[j]) continue;
      double sum = 0.0;
      for (std::size_t k = 0; k < oob.size(); ++k) {
        const auto row = data.row(oob[k]);
        std::copy(row.begin(), row.end(), point.begin());
        point[j] = data.x(oob[perm[k]], j);
        const double e = data.y(oob[k]) - tree.predict(point);
        sum += e * e - base_sq[k];
      }
      partial[t * p + j] = sum;
    }
  });

  for (std::size_t t = 0; t < trees; ++t) {
    for (std::size_t j = 0; j < p; ++j) report.per_feature[j] += partial[t * p + j];
  }
  const double norm = static_cast<double>(trees) * static_cast<double>(gamma);
  for (auto& v : report.per_feature) v /= norm;
  return report;
}

AnnotatedImportance importance_with_oracle(const ImportanceReport& report, const LinkModel& model, std::size_t draws,
                                           const SeedSpec& oracle_seed) {
  if (model.p() != report.per_feature.size()) {
    throw Error(ErrorKind::invalid_input, "model dimension does not match the importance report");
  }
  AnnotatedImportance out;
  out.report = report;
  out.oracle = oracle_values(model, draws, oracle_seed);
  for (std::size_t j = 0; j < model.p(); ++j) {
    out.gap.push_back(report.per_feature[j] - out.oracle[j].value);
    out.informative.push_back(model.is_informative(j));
  }
  return out;
}

AnnotatedImportance importance_with_oracle(const ImportanceReport& report, const RegressionDataset& data,
                                           std::size_t draws, const SeedSpec& oracle_seed) {
  if (!data.provenance()) {
    throw Error(ErrorKind::missing_provenance, "dataset has no synthetic provenance; oracle values unavailable");
  }
  const auto& prov = *data.provenance();
  return importance_with_oracle(report, LinkModel(prov.kind, prov.beta), draws, oracle_seed);
}

namespace {

std::string csv_rows(const ImportanceReport& report, const AnnotatedImportance* annotated) {
  std::string out = "feature,importance,oracle,gap,mode,gamma_n,seed\n";
  for (std::size_t j = 0; j < report.per_feature.size(); ++j) {
    out += std::to_string(j + 1) + "," + io::format_double(report.per_feature[j]) + ",";
    if (annotated) out += io::format_double(annotated->oracle[j].value) + "," + io::format_double(annotated->gap[j]);
    else out += ",";
    out += "," + std::string(to_string(report.mode)) + "," + std::to_string(report.gamma_n) + "," +
           std::to_string(report.seed.master_seed) + "\n";
  }
  return out;
}

}  // namespace

std::string importance_csv(const ImportanceReport& report) { return csv_rows(report, nullptr); }

std::string importance_csv(const AnnotatedImportance& annotated) { return csv_rows(annotated.report, &annotated); }

}  // namespace permimp
