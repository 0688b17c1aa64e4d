#include "rotmap/eval/cv.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "rotmap/error.hpp"
#include "rotmap/parallel.hpp"
#include "rotmap/text.hpp"

namespace rotmap::eval {

std::string_view to_string(Strategy s) noexcept { return s == Strategy::stand ? "StandCV" : "ClusterCV"; }

Strategy parse_strategy(std::string_view s) {
    const auto v = text::lower(s);
    if (v == "stand" || v == "standcv") return Strategy::stand;
    if (v == "cluster" || v == "clustercv") return Strategy::cluster;
    throw ConfigError("unknown CV strategy '" + std::string(s) + "'");
}

learn::Table make_table(std::span<const stands::StandSample> samples, VariableSet set) {
    learn::Table table;
    for (const auto& name : variable_names(set)) {
        const auto j = predictor_index(name);
        std::vector<double> column;
        column.reserve(samples.size());
        for (const auto& s : samples) column.push_back(s.predictors[j]);
        table.add_column(name, kPredictors[j].categorical, std::move(column));
    }
    for (const auto& s : samples) {
        table.response.push_back(s.br_vol);
        table.row_ids.push_back(s.stand_id);
    }
    return table;
}

namespace {

std::vector<std::size_t> id_order(const learn::Table& table) {
    if (table.row_ids.size() != table.rows()) throw CvError("cross-validation needs row ids");
    std::vector<std::size_t> order(table.rows());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return table.row_ids[a] < table.row_ids[b]; });
    for (std::size_t k = 1; k < order.size(); ++k) {
        if (table.row_ids[order[k]] == table.row_ids[order[k - 1]]) {
            throw CvError("duplicate row id '" + table.row_ids[order[k]] + "'");
        }
    }
    return order;
}

/// Runs the folds on a table already sorted by row id. fold_of[i] is the
/// fold index of row i; folds are numbered in order of their first row.
CvReport run_folds(const learn::Table& table, const std::vector<std::size_t>& fold_of, std::size_t nfolds,
                   Strategy strategy, VariableSet set, const CvOptions& options) {
    table.validate();
    CvReport report;
    report.strategy = strategy;
    report.variable_set = set;
    report.seed = options.seed;
    report.folds.resize(nfolds);
    report.records.resize(table.rows());

    std::vector<std::vector<std::size_t>> held(nfolds), train(nfolds);
    for (std::size_t i = 0; i < table.rows(); ++i) {
        held[fold_of[i]].push_back(i);
        for (std::size_t f = 0; f < nfolds; ++f) {
            if (f != fold_of[i]) train[f].push_back(i);
        }
    }
    parallel_for(nfolds, options.threads, [&](std::size_t f) {
        if (train[f].size() < 2) throw CvError("fold " + std::to_string(f) + " leaves fewer than 2 training rows");
        const auto sub = table.subset(train[f]);
        auto params = options.forest;
        params.threads = 1;
        // Keyed by the fold's first row id, which is independent of row order.
        params.seed = seeds::derive(options.seed, "fold", {seeds::hash_label(table.row_ids[held[f].front()])});
        const auto model = learn::fit_calibrated_forest(sub, set, params);
        auto& info = report.folds[f];
        info.fold = f;
        info.calibration = model.calibration;
        for (auto i : held[f]) info.held_out.push_back(table.row_ids[i]);
        for (auto i : train[f]) info.training.push_back(table.row_ids[i]);
        for (auto i : held[f]) {
            report.records[i] = {table.row_ids[i], f, table.response[i], model.predict(table.row(i))};
        }
    });

    std::vector<double> observed, predicted;
    for (const auto& r : report.records) {
        observed.push_back(r.observed);
        predicted.push_back(r.predicted);
    }
    report.metrics = compute_metrics(observed, predicted);

    if (options.importance) {
        auto params = options.forest;
        params.threads = options.threads;
        params.seed = seeds::derive(options.seed, "full");
        const auto forest = learn::fit_random_forest(table, params);
        const auto scores = learn::permutation_importance(forest, table, seeds::derive(options.seed, "importance"),
                                                          options.threads);
        for (std::size_t j = 0; j < table.cols(); ++j) report.importance.emplace_back(table.names[j], scores[j]);
    }
    return report;
}

}  // namespace

CvReport leave_stand_out_cv(const learn::Table& table, VariableSet set, const CvOptions& options) {
    if (table.rows() < 3) throw CvError("leave-stand-out CV needs at least 3 stands");
    const auto sorted = table.subset(id_order(table));
    std::vector<std::size_t> fold_of(sorted.rows());
    std::iota(fold_of.begin(), fold_of.end(), 0);
    return run_folds(sorted, fold_of, sorted.rows(), Strategy::stand, set, options);
}

CvReport leave_cluster_out_cv(const learn::Table& table, std::span<const std::size_t> clusters, VariableSet set,
                              const CvOptions& options) {
    if (clusters.size() != table.rows()) throw CvError("cluster labels do not match table rows");
    const auto order = id_order(table);
    const auto sorted = table.subset(order);
    std::map<std::size_t, std::size_t> fold_of_label;
    std::vector<std::size_t> fold_of(sorted.rows());
    for (std::size_t k = 0; k < order.size(); ++k) {
        auto [it, inserted] = fold_of_label.emplace(clusters[order[k]], fold_of_label.size());
        fold_of[k] = it->second;
    }
    if (fold_of_label.size() < 2) throw CvError("leave-cluster-out CV needs at least 2 clusters");
    return run_folds(sorted, fold_of, fold_of_label.size(), Strategy::cluster, set, options);
}

learn::ClusterAssignment cluster_rows(const learn::Table& table, std::optional<std::size_t> k,
                                      std::size_t min_size, std::uint64_t seed) {
    const auto x = std::find(table.names.begin(), table.names.end(), "X");
    const auto y = std::find(table.names.begin(), table.names.end(), "Y");
    if (x == table.names.end() || y == table.names.end()) throw CvError("table has no X/Y columns to cluster on");
    const auto& xs = table.columns[static_cast<std::size_t>(x - table.names.begin())];
    const auto& ys = table.columns[static_cast<std::size_t>(y - table.names.begin())];
    const auto order = id_order(table);
    std::vector<geom::Point> points;
    for (auto i : order) points.push_back({xs[i], ys[i]});
    auto result = learn::kmeans_cluster(points, k.value_or(learn::default_cluster_count(points.size())), min_size,
                                        seeds::derive(seed, "clusters"));
    std::vector<std::size_t> in_table_order(order.size());
    for (std::size_t k2 = 0; k2 < order.size(); ++k2) in_table_order[order[k2]] = result.cluster[k2];
    result.cluster = std::move(in_table_order);
    return result;
}

nlohmann::json to_json(const CvReport& report) {
    auto records = nlohmann::json::array();
    for (const auto& r : report.records) {
        records.push_back({{"stand_id", r.stand_id}, {"fold", r.fold}, {"observed", r.observed},
                           {"predicted", r.predicted}});
    }
    auto folds = nlohmann::json::array();
    for (const auto& f : report.folds) {
        folds.push_back({{"fold", f.fold},
                         {"held_out", f.held_out},
                         {"n_train", f.training.size()},
                         {"a", f.calibration.a},
                         {"b", f.calibration.b}});
    }
    auto importance = nlohmann::json::array();
    for (const auto& [name, score] : report.importance) importance.push_back({{"variable", name}, {"score", score}});
    return {{"strategy", std::string(to_string(report.strategy))},
            {"variable_set", std::string(to_string(report.variable_set))},
            {"seed", report.seed},
            {"metrics", to_json(report.metrics)},
            {"records", records},
            {"folds", folds},
            {"importance", importance}};
}

std::string to_csv(const CvReport& report) {
    std::string out = "stand_id,fold,observed,predicted\n";
    for (const auto& r : report.records) {
        out += r.stand_id + ',' + std::to_string(r.fold) + ',' + text::shortest(r.observed) + ',' +
               text::shortest(r.predicted) + '\n';
    }
    return out;
}

}  // namespace rotmap::eval
