#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace rotmap {

enum class PredictorSource { harvester, raster, centroid };

struct PredictorInfo {
    std::string_view name;
    PredictorSource source;
    bool categorical;
};

/// The 22 stand-level predictors in stand-table column order.
inline constexpr std::array<PredictorInfo, 22> kPredictors{{
    {"V_HRV", PredictorSource::harvester, false},
    {"N_HRV", PredictorSource::harvester, false},
    {"QMD_HRV", PredictorSource::harvester, false},
    {"DR_HRV", PredictorSource::harvester, false},
    {"SPP_HRV", PredictorSource::harvester, false},
    {"Hmean_ALS", PredictorSource::raster, false},
    {"Hvar_ALS", PredictorSource::raster, false},
    {"H25_ALS", PredictorSource::raster, false},
    {"H95_ALS", PredictorSource::raster, false},
    {"D2_ALS", PredictorSource::raster, false},
    {"NIR_S2", PredictorSource::raster, false},
    {"AL_CLI", PredictorSource::raster, false},
    {"SL_TER", PredictorSource::raster, false},
    {"TS_CLI", PredictorSource::raster, false},
    {"PS_CLI", PredictorSource::raster, false},
    {"DC_CLI", PredictorSource::raster, false},
    {"BON_SR16", PredictorSource::raster, false},
    {"FT_AR5", PredictorSource::raster, true},
    {"ST_AR5", PredictorSource::raster, true},
    {"SOIL", PredictorSource::raster, true},
    {"X", PredictorSource::centroid, false},
    {"Y", PredictorSource::centroid, false},
}};

inline constexpr std::size_t kPredictorCount = kPredictors.size();

/// Column index of a predictor name; throws DataError for unknown names.
std::size_t predictor_index(std::string_view name);

enum class VariableSet { all, prior_to_harvest };

std::string_view to_string(VariableSet set) noexcept;

/// Accepts "all", "prior" and "prior_to_harvest".
VariableSet parse_variable_set(std::string_view s);

/// Predictor names in a variable set, in column order.
std::vector<std::string> variable_names(VariableSet set);

/// Names of the raster layers a manifest must provide.
std::vector<std::string> raster_layer_names();

}  // namespace rotmap
