#pragma once

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <span>
#include <vector>

#include "permimp/datagen.hpp"
#include "permimp/randomness.hpp"

namespace permimp {

struct TreeParams {
  std::size_t v_try = 1;
  std::size_t min_leaf_size = 5;
  std::optional<std::size_t> max_leaves;  // leaf budget t_n; empty = unlimited

  void validate(std::size_t p) const;
};

/// Default number of candidate directions per node: max(1, floor(p/3)).
std::size_t default_v_try(std::size_t p) noexcept;

/// One node of a flattened tree. Internal nodes route x left iff
/// x[feature] < threshold.
struct TreeNode {
  static constexpr std::int32_t kLeaf = -1;

  std::int32_t feature = kLeaf;
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  double mean = 0.0;        // mean of in-bag responses reaching the node
  std::uint32_t count = 0;  // in-bag points (with multiplicity) reaching the node

  bool is_leaf() const noexcept { return feature == kLeaf; }
};

class Tree {
 public:
  Tree() = default;
  Tree(std::vector<TreeNode> nodes, std::size_t p);

  std::size_t p() const noexcept { return p_; }

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  const TreeNode& root() const noexcept { return nodes_.front(); }
  std::size_t leaf_count() const noexcept;

  double predict(std::span<const double> x) const noexcept {
    const TreeNode* node = nodes_.data();
    while (!node->is_leaf()) {
      node = &nodes_[x[static_cast<std::size_t>(node->feature)] < node->threshold ? node->left : node->right];
    }
    return node->mean;
  }

  /// Sorted distinct features used by some split.
  std::vector<std::uint32_t> split_features() const;

  /// Nested {feature, threshold, left, right} / {mean, count} dump.
  /// Features are 1-based in the dump.
  nlohmann::json to_json() const;
  static Tree from_json(const nlohmann::json& j, std::size_t p);

  friend bool operator==(const Tree& a, const Tree& b) noexcept;

 private:
  std::vector<TreeNode> nodes_;
  std::size_t p_ = 0;
};

struct Split {
  std::uint32_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;  // within-node variance reduction per point
  std::size_t left_count = 0;
};

/// Relative tolerance below which two gains count as equal, and below which
/// a gain counts as zero. Scaled by the node's mean squared response.
inline constexpr double kGainTolerance = 1e-12;

/// Exact search over midpoints between consecutive distinct values of each
/// candidate feature. Maximizes
///   L(j, z) = [SSE(node) - SSE(left) - SSE(right)] / N(node)
/// subject to both children holding at least min_leaf_size points. Ties go to
/// the smallest feature, then the smallest threshold. Returns nothing when no
/// admissible split has positive gain.
std::optional<Split> best_split(std::span<const std::uint32_t> indices, std::span<const std::uint32_t> candidates,
                                const RegressionDataset& data, std::size_t min_leaf_size);

/// Grows one tree on the in-bag sample. Nodes are expanded best-first (largest
/// gain); each evaluated node draws a fresh feature subspace from `seed`.
Tree grow_tree(const ResampleRecord& record, const TreeParams& params, const RegressionDataset& data,
               const SeedSpec& seed);

double predict_tree(const Tree& tree, std::span<const double> x);

}  // namespace permimp
