#include "permimp/forest.hpp"

#include <algorithm>
#include <cmath>

#include "permimp/error.hpp"
#include "permimp/io.hpp"
#include "permimp/parallel.hpp"

namespace permimp {

namespace {
constexpr int kModelVersion = 1;
constexpr const char* kModelFormat = "permimp-forest";
}  // namespace

std::string_view to_string(Scheme scheme) noexcept {
  return scheme == Scheme::without_replacement ? "without_replacement" : "with_replacement";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "without_replacement" || name == "without-replacement" || name == "subsample") {
    return Scheme::without_replacement;
  }
  if (name == "with_replacement" || name == "with-replacement" || name == "bootstrap") {
    return Scheme::with_replacement;
  }
  throw Error(ErrorKind::invalid_parameter, "unknown resampling scheme '" + std::string(name) + "'");
}

std::size_t default_subsample_size(std::size_t n) noexcept {
  // ceil(2n/3), kept below n so that at least one row is out of bag.
  return n < 2 ? n : std::min((2 * n + 2) / 3, n - 1);
}

void ForestParams::validate(std::size_t n, std::size_t p) const {
  if (m_trees < 1) throw Error(ErrorKind::invalid_parameter, "forest needs at least one tree");
  if (n < 2) throw Error(ErrorKind::invalid_parameter, "forest needs n >= 2");
  if (scheme == Scheme::without_replacement && (a_n < 1 || a_n >= n)) {
    throw Error(ErrorKind::invalid_parameter,
                "without-replacement requires 1 <= a_n < n (a_n=" + std::to_string(a_n) + ", n=" + std::to_string(n) + ")");
  }
  tree.validate(p);
}

ForestParams ForestParams::defaults(std::size_t n, std::size_t p, std::size_t m_trees) {
  ForestParams params;
  params.m_trees = m_trees;
  params.scheme = Scheme::without_replacement;
  params.a_n = default_subsample_size(n);
  params.tree.v_try = default_v_try(p);
  params.tree.min_leaf_size = 5;
  return params;
}

ForestModel::ForestModel(ForestParams params, SeedSpec seed, std::size_t n, std::size_t p, std::uint64_t fingerprint,
                         std::vector<ResampleRecord> records, std::vector<Tree> trees)
    : params_(std::move(params)),
      seed_(seed),
      n_(n),
      p_(p),
      fingerprint_(fingerprint),
      records_(std::move(records)),
      trees_(std::move(trees)) {
  if (trees_.size() != records_.size() || trees_.empty()) {
    throw Error(ErrorKind::invalid_input, "forest needs one resample record per tree and at least one tree");
  }
  for (const auto& rec : records_) {
    if (rec.scheme != params_.scheme) throw Error(ErrorKind::invalid_input, "record scheme differs from forest scheme");
  }
  for (const auto& tree : trees_) {
    if (tree.p() != p_) throw Error(ErrorKind::invalid_input, "tree dimension differs from forest dimension");
  }
}

void ForestModel::check_training_data(const RegressionDataset& data) const {
  if (data.n() != n_ || data.p() != p_ || data.fingerprint() != fingerprint_) {
    throw Error(ErrorKind::wrong_dataset, "dataset fingerprint " + io::hex64(data.fingerprint()) +
                                              " does not match the training fingerprint " + io::hex64(fingerprint_));
  }
}

ForestModel ForestModel::reordered(std::span<const std::size_t> order) const {
  std::vector<ResampleRecord> records;
  std::vector<Tree> trees;
  for (auto t : order) {
    records.push_back(records_.at(t));
    trees.push_back(trees_.at(t));
  }
  return ForestModel(params_, seed_, n_, p_, fingerprint_, std::move(records), std::move(trees));
}

std::string ForestModel::to_json() const {
  nlohmann::json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  nlohmann::json tree_params = {{"v_try", params_.tree.v_try}, {"min_leaf_size", params_.tree.min_leaf_size}};
  tree_params["max_leaves"] = params_.tree.max_leaves ? nlohmann::json(*params_.tree.max_leaves) : nlohmann::json(nullptr);
  j["params"] = {{"m_trees", params_.m_trees},
                 {"scheme", std::string(to_string(params_.scheme))},
                 {"a_n", params_.a_n},
                 {"tree", tree_params}};
  j["seed"] = io::seed_to_json(seed_);
  j["n"] = n_;
  j["p"] = p_;
  j["train_fingerprint"] = io::hex64(fingerprint_);
  auto& records = j["records"] = nlohmann::json::array();
  for (const auto& rec : records_) records.push_back({{"in_bag", rec.in_bag}});
  auto& trees = j["trees"] = nlohmann::json::array();
  for (const auto& tree : trees_) trees.push_back(tree.to_json());
  return j.dump() + "\n";
}

ForestModel ForestModel::from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.value("format", std::string{}) != kModelFormat) {
      throw Error(ErrorKind::invalid_input, "not a permimp forest model");
    }
    if (j.at("version").get<int>() > kModelVersion) {
      throw Error(ErrorKind::invalid_input, "model version " + std::to_string(j.at("version").get<int>()) +
                                                " is newer than supported version " + std::to_string(kModelVersion));
    }
    ForestParams params;
    const auto& jp = j.at("params");
    params.m_trees = jp.at("m_trees").get<std::size_t>();
    params.scheme = parse_scheme(jp.at("scheme").get<std::string>());
    params.a_n = jp.at("a_n").get<std::size_t>();
    params.tree.v_try = jp.at("tree").at("v_try").get<std::size_t>();
    params.tree.min_leaf_size = jp.at("tree").at("min_leaf_size").get<std::size_t>();
    if (!jp.at("tree").at("max_leaves").is_null()) params.tree.max_leaves = jp.at("tree").at("max_leaves").get<std::size_t>();
    const auto n = j.at("n").get<std::size_t>();
    const auto p = j.at("p").get<std::size_t>();

    std::vector<ResampleRecord> records;
    for (const auto& jr : j.at("records")) {
      ResampleRecord rec;
      rec.scheme = params.scheme;
      rec.in_bag = jr.at("in_bag").get<std::vector<std::uint32_t>>();
      std::vector<bool> seen(n, false);
      for (auto i : rec.in_bag) {
        if (i >= n) throw Error(ErrorKind::invalid_input, "record index out of range");
        seen[i] = true;
      }
      for (std::uint32_t i = 0; i < n; ++i) {
        if (!seen[i]) rec.oob.push_back(i);
      }
      records.push_back(std::move(rec));
    }
    std::vector<Tree> trees;
    for (const auto& jt : j.at("trees")) trees.push_back(Tree::from_json(jt, p));
    return ForestModel(params, io::seed_from_json(j.at("seed")), n, p, io::parse_hex64(j.at("train_fingerprint").get<std::string>()),
                       std::move(records), std::move(trees));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_input, std::string("model JSON: ") + e.what());
  }
}

ForestModel fit_forest(const RegressionDataset& data, const ForestParams& params, const SeedSpec& seed,
                       unsigned threads) {
  params.validate(data.n(), data.p());
  std::vector<ResampleRecord> records(params.m_trees);
  std::vector<Tree> trees(params.m_trees);
  parallel_for(params.m_trees, threads, [&](std::size_t t) {
    const SeedSpec tree_seed = seed.with_tree(t);
    const SeedSpec resample_seed = tree_seed.with_purpose(Purpose::resample);
    records[t] = params.scheme == Scheme::without_replacement
                     ? subsample_without_replacement(data.n(), params.a_n, resample_seed)
                     : bootstrap_with_replacement(data.n(), resample_seed);
    trees[t] = grow_tree(records[t], params.tree, data, tree_seed);
  });
  return ForestModel(params, seed, data.n(), data.p(), data.fingerprint(), std::move(records), std::move(trees));
}

double predict(const ForestModel& model, std::span<const double> x) {
  if (x.size() != model.p()) {
    throw Error(ErrorKind::invalid_input,
                "point has dimension " + std::to_string(x.size()) + ", model expects " + std::to_string(model.p()));
  }
  double sum = 0.0;
  for (const auto& tree : model.trees()) sum += tree.predict(x);
  return sum / static_cast<double>(model.size());
}

std::vector<std::uint32_t> oob_counts(const ForestModel& model) {
  std::vector<std::uint32_t> counts(model.n(), 0);
  for (const auto& rec : model.records()) {
    for (auto i : rec.oob) ++counts[i];
  }
  return counts;
}

double predict_oob(const ForestModel& model, const RegressionDataset& data, std::size_t i) {
  model.check_training_data(data);
  if (i >= data.n()) throw Error(ErrorKind::invalid_parameter, "row index out of range");
  double sum = 0.0;
  std::size_t z = 0;
  for (std::size_t t = 0; t < model.size(); ++t) {
    const auto& oob = model.records()[t].oob;
    if (std::binary_search(oob.begin(), oob.end(), static_cast<std::uint32_t>(i))) {
      sum += model.trees()[t].predict(data.row(i));
      ++z;
    }
  }
  if (z == 0) throw Error(ErrorKind::never_oob, "row " + std::to_string(i + 1) + " is in bag for every tree");
  return sum / static_cast<double>(z);
}

std::vector<std::optional<double>> predict_oob_all(const ForestModel& model, const RegressionDataset& data) {
  model.check_training_data(data);
  std::vector<double> sums(data.n(), 0.0);
  std::vector<std::uint32_t> counts(data.n(), 0);
  for (std::size_t t = 0; t < model.size(); ++t) {
    const auto& tree = model.trees()[t];
    for (auto i : model.records()[t].oob) {
      sums[i] += tree.predict(data.row(i));
      ++counts[i];
    }
  }
  std::vector<std::optional<double>> out(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (counts[i] > 0) out[i] = sums[i] / static_cast<double>(counts[i]);
  }
  return out;
}

ResidualVariance residual_variance(const ForestModel& model, const RegressionDataset& data) {
  const auto preds = predict_oob_all(model, data);
  std::vector<double> residuals;
  residuals.reserve(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (preds[i]) residuals.push_back(data.y(i) - *preds[i]);
  }
  if (residuals.size() < 2) {
    throw Error(ErrorKind::insufficient_oob, "only " + std::to_string(residuals.size()) +
                                                 " row(s) have an out-of-bag prediction; need at least 2");
  }
  const double used = static_cast<double>(residuals.size());
  double mean = 0.0, sq = 0.0;
  for (double e : residuals) {
    mean += e;
    sq += e * e;
  }
  mean /= used;
  double var = 0.0;
  for (double e : residuals) var += (e - mean) * (e - mean);
  return {var / used, residuals.size(), data.n() - residuals.size(), sq / used};
}

double response_variance(const RegressionDataset& data) {
  const auto y = data.response();
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  return var / static_cast<double>(y.size());
}

double sn_estimate(double response_var, double residual_var) {
  if (!(residual_var > 0.0)) {
    throw Error(ErrorKind::degenerate_residuals, "residual variance is zero; signal-to-noise ratio undefined");
  }
  return std::abs(response_var - residual_var) / residual_var;
}

double sn_estimate(const ForestModel& model, const RegressionDataset& data) {
  return sn_estimate(response_variance(data), residual_variance(model, data).value);
}

}  // namespace permimp
