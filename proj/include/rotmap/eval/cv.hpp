#pragma once

// Leave-stand-out and leave-cluster-out cross-validation of the calibrated
// forest, with pooled metrics and per-fold bookkeeping.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rotmap/eval/metrics.hpp"
#include "rotmap/learn/calibration.hpp"
#include "rotmap/learn/kmeans.hpp"
#include "rotmap/learn/table.hpp"
#include "rotmap/stands.hpp"

namespace rotmap::eval {

enum class Strategy { stand, cluster };

std::string_view to_string(Strategy s) noexcept;  // "StandCV" or "ClusterCV"
/// Accepts "stand", "cluster", "StandCV" and "ClusterCV".
Strategy parse_strategy(std::string_view s);

/// Modeling table for a variable set; rows keep the sample order.
learn::Table make_table(std::span<const stands::StandSample> samples, VariableSet set);

struct CvOptions {
    learn::ForestParams forest;  // forest.seed and forest.threads are ignored
    std::uint64_t seed = 1;
    int threads = 1;
    bool importance = true;
};

struct CvRecord {
    std::string stand_id;
    std::size_t fold = 0;
    double observed = 0.0;
    double predicted = 0.0;  // calibrated
};

struct FoldInfo {
    std::size_t fold = 0;
    std::vector<std::string> held_out;
    std::vector<std::string> training;
    learn::Calibration calibration;
};

struct CvReport {
    Strategy strategy = Strategy::stand;
    VariableSet variable_set = VariableSet::all;
    std::uint64_t seed = 0;
    std::vector<CvRecord> records;  // sorted by stand_id
    std::vector<FoldInfo> folds;
    MetricsReport metrics;
    std::vector<std::pair<std::string, double>> importance;  // forest on all rows; empty when disabled
};

/// One fold per row. Throws CvError for fewer than 3 rows.
CvReport leave_stand_out_cv(const learn::Table& table, VariableSet set, const CvOptions& options);

/// One fold per distinct cluster label (labels align with table rows).
/// Throws CvError for fewer than 2 clusters.
CvReport leave_cluster_out_cv(const learn::Table& table, std::span<const std::size_t> clusters, VariableSet set,
                              const CvOptions& options);

/// k-means on the X/Y columns of the table; rows are visited in row-id
/// order so the result does not depend on row order. k defaults to
/// max(2, round(n / 11)).
learn::ClusterAssignment cluster_rows(const learn::Table& table, std::optional<std::size_t> k,
                                      std::size_t min_size, std::uint64_t seed);

nlohmann::json to_json(const CvReport& report);
/// stand_id,fold,observed,predicted
std::string to_csv(const CvReport& report);

}  // namespace rotmap::eval
