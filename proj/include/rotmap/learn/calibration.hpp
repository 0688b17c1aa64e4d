#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rotmap/learn/forest.hpp"
#include "rotmap/predictors.hpp"

namespace rotmap::learn {

struct Calibration {
    double a = 0.0;  // intercept, m3/ha
    double b = 1.0;  // slope
    bool degenerate = false;  // constant predictions: a = mean(observed), b = 0
};

/// Simple OLS of observed on predicted. Throws DataError for fewer than 2
/// pairs or mismatched lengths.
Calibration fit_calibration(std::span<const double> predicted, std::span<const double> observed);

struct CalibratedForest {
    Forest forest;
    Calibration calibration;
    VariableSet variable_set = VariableSet::all;

    double raw(const std::vector<double>& row) const { return forest.predict(row); }
    /// a + b * forest prediction, truncated below at 0.
    double predict(const std::vector<double>& row) const;
};

/// Forest plus calibration on the training set's OOB predictions.
CalibratedForest fit_calibrated_forest(const Table& table, VariableSet set, const ForestParams& params);

nlohmann::json model_to_json(const CalibratedForest& model);
CalibratedForest model_from_json(const nlohmann::json& j);

}  // namespace rotmap::learn
