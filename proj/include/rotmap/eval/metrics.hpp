#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include <json.hpp>

namespace rotmap::eval {

struct MetricsReport {
    std::size_t n = 0;
    double mean_observed = 0.0;  // m3/ha
    double mse = 0.0;
    double rmse = 0.0;
    double md = 0.0;  // mean of observed - predicted; positive is underprediction
    std::optional<double> rmse_pct;  // absent when the observed mean is 0
    std::optional<double> md_pct;
    double pseudo_r2 = 0.0;  // 1 - MSE / (sum (y - mean)^2 / (n - 1))
};

/// Throws MetricsError for n < 2, mismatched lengths or a constant response.
MetricsReport compute_metrics(std::span<const double> observed, std::span<const double> predicted);

nlohmann::json to_json(const MetricsReport& m);

}  // namespace rotmap::eval
