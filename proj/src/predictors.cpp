#include "rotmap/predictors.hpp"

#include "rotmap/error.hpp"

namespace rotmap {

std::size_t predictor_index(std::string_view name) {
    for (std::size_t i = 0; i < kPredictors.size(); ++i) {
        if (kPredictors[i].name == name) return i;
    }
    throw DataError("unknown predictor '" + std::string(name) + "'");
}

std::string_view to_string(VariableSet set) noexcept { return set == VariableSet::all ? "all" : "prior_to_harvest"; }

VariableSet parse_variable_set(std::string_view s) {
    if (s == "all") return VariableSet::all;
    if (s == "prior" || s == "prior_to_harvest") return VariableSet::prior_to_harvest;
    throw DataError("unknown variable set '" + std::string(s) + "'");
}

std::vector<std::string> variable_names(VariableSet set) {
    std::vector<std::string> names;
    for (const auto& p : kPredictors) {
        if (set == VariableSet::prior_to_harvest && p.source == PredictorSource::harvester) continue;
        names.emplace_back(p.name);
    }
    return names;
}

std::vector<std::string> raster_layer_names() {
    std::vector<std::string> names;
    for (const auto& p : kPredictors) {
        if (p.source == PredictorSource::raster) names.emplace_back(p.name);
    }
    return names;
}

}  // namespace rotmap
