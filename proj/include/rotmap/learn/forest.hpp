#pragma once

// CART regression trees and random forests with out-of-bag machinery and
// permutation importance.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rotmap/learn/table.hpp"
#include "rotmap/rng.hpp"

namespace rotmap::learn {

/// ceil(p / 3), at least 1.
std::size_t default_mtry(std::size_t p) noexcept;

struct ForestParams {
    std::size_t ntree = 500;
    std::size_t nodesize = 5;
    std::optional<std::size_t> mtry;  // default_mtry(p) when unset
    std::uint64_t seed = 1;
    int threads = 1;
};

struct Node {
    int var = -1;  // -1 for leaves
    double threshold = 0.0;               // continuous: x <= threshold goes left
    std::vector<double> left_categories;  // categorical, sorted
    std::vector<double> right_categories;
    bool unseen_left = false;  // routing of category codes absent in training
    int left = -1;
    int right = -1;
    double value = 0.0;  // mean in-bag response of the node

    bool is_leaf() const noexcept { return var < 0; }
};

struct RegressionTree {
    std::vector<Node> nodes;            // nodes[0] is the root
    std::vector<std::uint32_t> in_bag;  // bootstrap multiplicity per training row; empty after load

    double predict(const std::vector<double>& row) const;
    /// Index of the leaf reached by the row.
    std::size_t leaf(const std::vector<double>& row) const;
};

struct Forest {
    std::size_t ntree = 0;
    std::size_t nodesize = 0;
    std::size_t mtry = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> names;
    std::vector<bool> categorical;
    std::vector<RegressionTree> trees;

    double predict(const std::vector<double>& row) const;
    bool has_bags() const noexcept;
};

/// Grows `ntree` trees on bootstrap samples. Tree t draws from a stream
/// derived from (seed, t), so results do not depend on `threads`.
Forest fit_random_forest(const Table& table, const ForestParams& params = {});

struct OobPrediction {
    std::vector<double> prediction;
    std::vector<bool> covered;       // false when every tree had the row in bag
    std::vector<std::size_t> trees;  // number of out-of-bag trees per row
};

/// Rows are the training rows. Uncovered rows get the full-forest prediction.
OobPrediction oob_predict(const Forest& forest, const Table& table, int threads = 1);

/// Reorders `positions` in place; used to permute a variable's OOB values.
using Permuter = std::function<void(std::vector<std::size_t>& positions, Rng& rng)>;

/// Per-variable mean over trees of the increase in OOB MSE after permuting
/// that variable among the tree's OOB rows. Unscaled.
std::vector<double> permutation_importance(const Forest& forest, const Table& table, std::uint64_t seed,
                                           int threads = 1, const Permuter& permuter = {});

nlohmann::json forest_to_json(const Forest& forest);
/// Throws ModelError for malformed input or an unknown version.
Forest forest_from_json(const nlohmann::json& j);

inline constexpr int kModelFormatVersion = 1;

}  // namespace rotmap::learn
