#pragma once

// Applicability masking and GeoJSON rendering of segment-level butt-rot
// predictions.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rotmap/grid.hpp"
#include "rotmap/learn/calibration.hpp"
#include "rotmap/stands.hpp"

namespace rotmap::eval {

inline constexpr double kMinH95 = 12.0;        // m
inline constexpr double kMinSprucePct = 50.0;  // % of volume

/// Mature (H95 >= 12 m) and spruce dominated (>= 50 %). A missing
/// attribute makes the segment not applicable.
bool applicability_mask(std::optional<double> h95_m, std::optional<double> spruce_pct) noexcept;

struct MapRecord {
    std::string segment_id;
    bool applicable = false;
    std::optional<double> prediction;  // m3/ha, full precision; present iff applicable
};

struct MapResult {
    std::vector<MapRecord> records;  // segment order
    nlohmann::json collection;
    std::vector<std::string> warnings;
};

/// Throws MapError when the model uses harvester variables.
MapResult render_prediction_map(const learn::CalibratedForest& model, std::span<const stands::Segment> segments,
                                const grid::LayerSet& layers, const std::optional<std::string>& crs_name = {});

}  // namespace rotmap::eval
