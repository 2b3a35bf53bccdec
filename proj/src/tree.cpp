#include "permimp/tree.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>

#include "permimp/error.hpp"

namespace permimp {

void TreeParams::validate(std::size_t p) const {
  if (v_try < 1 || v_try > p) {
    throw Error(ErrorKind::invalid_parameter,
                "v_try=" + std::to_string(v_try) + " must lie in [1, p=" + std::to_string(p) + "]");
  }
  if (min_leaf_size < 1) throw Error(ErrorKind::invalid_parameter, "min_leaf_size must be >= 1");
  if (max_leaves && *max_leaves < 1) throw Error(ErrorKind::invalid_parameter, "max_leaves must be >= 1");
}

std::size_t default_v_try(std::size_t p) noexcept { return std::max<std::size_t>(1, p / 3); }

Tree::Tree(std::vector<TreeNode> nodes, std::size_t p) : nodes_(std::move(nodes)), p_(p) {
  if (nodes_.empty()) throw Error(ErrorKind::invalid_input, "tree must have at least one node");
  for (const auto& node : nodes_) {
    if (node.is_leaf()) continue;
    if (node.feature < 0 || static_cast<std::size_t>(node.feature) >= p_ || node.left >= nodes_.size() ||
        node.right >= nodes_.size()) {
      throw Error(ErrorKind::invalid_input, "tree node refers outside the tree or feature range");
    }
  }
}

std::size_t Tree::leaf_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

std::vector<std::uint32_t> Tree::split_features() const {
  std::vector<std::uint32_t> out;
  for (const auto& node : nodes_) {
    if (!node.is_leaf()) out.push_back(static_cast<std::uint32_t>(node.feature));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

nlohmann::json node_to_json(const std::vector<TreeNode>& nodes, std::uint32_t id) {
  const auto& node = nodes[id];
  if (node.is_leaf()) return {{"mean", node.mean}, {"count", node.count}};
  return {{"feature", node.feature + 1},
          {"threshold", node.threshold},
          {"left", node_to_json(nodes, node.left)},
          {"right", node_to_json(nodes, node.right)}};
}

// Leaf statistics of internal nodes are not part of the dump; they are
// recomputed from children (count-weighted mean).
std::uint32_t node_from_json(const nlohmann::json& j, std::vector<TreeNode>& nodes) {
  const auto id = static_cast<std::uint32_t>(nodes.size());
  nodes.emplace_back();
  if (j.contains("mean")) {
    nodes[id].mean = j.at("mean").get<double>();
    nodes[id].count = j.at("count").get<std::uint32_t>();
    return id;
  }
  const int feature = j.at("feature").get<int>() - 1;
  const double threshold = j.at("threshold").get<double>();
  const auto left = node_from_json(j.at("left"), nodes);
  const auto right = node_from_json(j.at("right"), nodes);
  auto& node = nodes[id];
  node.feature = feature;
  node.threshold = threshold;
  node.left = left;
  node.right = right;
  node.count = nodes[left].count + nodes[right].count;
  node.mean = node.count == 0 ? 0.0
                              : (nodes[left].mean * nodes[left].count + nodes[right].mean * nodes[right].count) /
                                    static_cast<double>(node.count);
  return id;
}

}  // namespace

nlohmann::json Tree::to_json() const { return node_to_json(nodes_, 0); }

Tree Tree::from_json(const nlohmann::json& j, std::size_t p) {
  std::vector<TreeNode> nodes;
  try {
    node_from_json(j, nodes);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_input, std::string("tree JSON: ") + e.what());
  }
  return Tree(std::move(nodes), p);
}

namespace {

bool same_subtree(const std::vector<TreeNode>& a, std::uint32_t i, const std::vector<TreeNode>& b, std::uint32_t k) {
  const auto& x = a[i];
  const auto& y = b[k];
  if (x.feature != y.feature || x.count != y.count) return false;
  if (x.is_leaf()) return x.mean == y.mean;
  return x.threshold == y.threshold && same_subtree(a, x.left, b, y.left) && same_subtree(a, x.right, b, y.right);
}

}  // namespace

bool operator==(const Tree& a, const Tree& b) noexcept {
  if (a.p_ != b.p_ || a.nodes_.size() != b.nodes_.size()) return false;
  return a.nodes_.empty() || same_subtree(a.nodes_, 0, b.nodes_, 0);
}

std::optional<Split> best_split(std::span<const std::uint32_t> indices, std::span<const std::uint32_t> candidates,
                                const RegressionDataset& data, std::size_t min_leaf_size) {
  const std::size_t count = indices.size();
  if (candidates.empty() || count < 2 * min_leaf_size || count < 2) return std::nullopt;

  double total = 0.0, total_sq = 0.0;
  for (auto i : indices) {
    total += data.y(i);
    total_sq += data.y(i) * data.y(i);
  }
  const double n = static_cast<double>(count);
  const double tol = kGainTolerance * (total_sq / n) + 1e-300;

  std::optional<Split> best;
  std::vector<std::pair<double, double>> column(count);
  for (auto feature : candidates) {
    for (std::size_t k = 0; k < count; ++k) column[k] = {data.x(indices[k], feature), data.y(indices[k])};
    std::sort(column.begin(), column.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    if (column.front().first == column.back().first) continue;

    double left_sum = 0.0;
    for (std::size_t k = 0; k + 1 < count; ++k) {
      left_sum += column[k].second;
      const std::size_t left_n = k + 1;
      if (column[k].first == column[k + 1].first) continue;
      if (left_n < min_leaf_size) continue;
      if (count - left_n < min_leaf_size) break;
      const double nl = static_cast<double>(left_n);
      const double nr = n - nl;
      const double diff = left_sum / nl - (total - left_sum) / nr;
      // SSE(node) - SSE(left) - SSE(right) = nl*nr/n * (mean_l - mean_r)^2
      const double gain = nl * nr * diff * diff / (n * n);
      if (gain <= tol) continue;
      if (best && gain <= best->gain + tol) continue;
      double z = 0.5 * (column[k].first + column[k + 1].first);
      if (!(z > column[k].first)) z = column[k + 1].first;
      best = Split{feature, z, gain, left_n};
    }
  }
  return best;
}

namespace {

struct Pending {
  std::uint32_t node;
  std::vector<std::uint32_t> indices;
  Split split;
};

struct PendingOrder {
  bool operator()(const Pending& a, const Pending& b) const noexcept {
    if (a.split.gain != b.split.gain) return a.split.gain < b.split.gain;
    return a.node > b.node;
  }
};

}  // namespace

Tree grow_tree(const ResampleRecord& record, const TreeParams& params, const RegressionDataset& data,
               const SeedSpec& seed) {
  params.validate(data.p());
  if (record.in_bag.empty()) throw Error(ErrorKind::invalid_parameter, "grow_tree needs a non-empty in-bag sample");

  Rng rng(seed.with_purpose(Purpose::subspace));
  std::vector<TreeNode> nodes;
  std::priority_queue<Pending, std::vector<Pending>, PendingOrder> frontier;
  const bool may_split = !params.max_leaves || *params.max_leaves > 1;

  auto make_node = [&](std::vector<std::uint32_t> indices) {
    const auto id = static_cast<std::uint32_t>(nodes.size());
    double sum = 0.0;
    for (auto i : indices) sum += data.y(i);
    TreeNode node;
    node.count = static_cast<std::uint32_t>(indices.size());
    node.mean = sum / static_cast<double>(indices.size());
    nodes.push_back(node);
    if (may_split && indices.size() >= 2 * params.min_leaf_size && indices.size() >= 2) {
      const auto candidates = feature_subspace(data.p(), params.v_try, rng);
      if (auto split = best_split(indices, candidates, data, params.min_leaf_size)) {
        frontier.push(Pending{id, std::move(indices), *split});
      }
    }
  };

  make_node(record.in_bag);
  std::size_t leaves = 1;
  while (!frontier.empty() && (!params.max_leaves || leaves < *params.max_leaves)) {
    Pending top = std::move(const_cast<Pending&>(frontier.top()));
    frontier.pop();
    const auto feature = top.split.feature;
    const double threshold = top.split.threshold;
    std::vector<std::uint32_t> left, right;
    left.reserve(top.split.left_count);
    right.reserve(top.indices.size() - top.split.left_count);
    for (auto i : top.indices) (data.x(i, feature) < threshold ? left : right).push_back(i);
    top.indices = {};

    const auto left_id = static_cast<std::uint32_t>(nodes.size());
    make_node(std::move(left));
    const auto right_id = static_cast<std::uint32_t>(nodes.size());
    make_node(std::move(right));
    auto& parent = nodes[top.node];
    parent.feature = static_cast<std::int32_t>(feature);
    parent.threshold = threshold;
    parent.left = left_id;
    parent.right = right_id;
    ++leaves;
  }
  return Tree(std::move(nodes), data.p());
}

double predict_tree(const Tree& tree, std::span<const double> x) {
  if (x.size() != tree.p()) {
    throw Error(ErrorKind::invalid_input,
                "point has dimension " + std::to_string(x.size()) + ", tree expects " + std::to_string(tree.p()));
  }
  return tree.predict(x);
}

}  // namespace permimp
