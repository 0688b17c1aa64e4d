#include "rotmap/learn/calibration.hpp"

#include <algorithm>

#include "rotmap/error.hpp"
#include "rotmap/learn/stats.hpp"

namespace rotmap::learn {

Calibration fit_calibration(std::span<const double> predicted, std::span<const double> observed) {
    if (predicted.size() != observed.size()) throw DataError("calibration inputs differ in length");
    if (predicted.size() < 2) throw DataError("calibration needs at least 2 pairs");
    const bool constant = std::all_of(predicted.begin(), predicted.end(),
                                      [&](double v) { return v == predicted.front(); });
    if (constant) return {mean(observed), 0.0, true};
    const auto fit = ols_line(predicted, observed);
    return {fit.intercept, fit.slope, false};
}

double CalibratedForest::predict(const std::vector<double>& row) const {
    return std::max(0.0, calibration.a + calibration.b * forest.predict(row));
}

CalibratedForest fit_calibrated_forest(const Table& table, VariableSet set, const ForestParams& params) {
    CalibratedForest model;
    model.variable_set = set;
    model.forest = fit_random_forest(table, params);
    const auto oob = oob_predict(model.forest, table, params.threads);
    model.calibration = fit_calibration(oob.prediction, table.response);
    return model;
}

nlohmann::json model_to_json(const CalibratedForest& model) {
    return {{"format", "rotmap-model"},
            {"version", kModelFormatVersion},
            {"variable_set", std::string(to_string(model.variable_set))},
            {"calibration", {{"a", model.calibration.a}, {"b", model.calibration.b},
                             {"degenerate", model.calibration.degenerate}}},
            {"forest", forest_to_json(model.forest)}};
}

CalibratedForest model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "rotmap-model") throw ModelError("not a calibrated model");
        const int version = j.at("version").get<int>();
        if (version != kModelFormatVersion) {
            throw ModelError("unsupported model version " + std::to_string(version));
        }
        CalibratedForest model;
        model.variable_set = parse_variable_set(j.at("variable_set").get<std::string>());
        const auto& c = j.at("calibration");
        model.calibration = {c.at("a").get<double>(), c.at("b").get<double>(), c.value("degenerate", false)};
        model.forest = forest_from_json(j.at("forest"));
        const auto expected = variable_names(model.variable_set);
        if (model.forest.names != expected) throw ModelError("forest variables do not match the variable set");
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("malformed model: ") + e.what());
    }
}

}  // namespace rotmap::learn
