#include "rotmap/eval/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rotmap/error.hpp"
#include "rotmap/geojson.hpp"

namespace rotmap::eval {

bool applicability_mask(std::optional<double> h95_m, std::optional<double> spruce_pct) noexcept {
    if (!h95_m || !spruce_pct) return false;
    return *h95_m >= kMinH95 && *spruce_pct >= kMinSprucePct;
}

MapResult render_prediction_map(const learn::CalibratedForest& model, std::span<const stands::Segment> segments,
                                const grid::LayerSet& layers, const std::optional<std::string>& crs_name) {
    if (model.variable_set != VariableSet::prior_to_harvest) {
        throw MapError("mapping needs a model trained on the prior-to-harvest variable set, got '" +
                       std::string(to_string(model.variable_set)) + "'");
    }
    stands::require_predictor_layers(layers);
    const auto frame = grid::check_alignment(layers);
    std::vector<std::size_t> columns;
    for (const auto& name : model.forest.names) columns.push_back(predictor_index(name));

    MapResult result;
    auto features = nlohmann::json::array();
    for (const auto& seg : segments) {
        MapRecord record{seg.segment_id, false, std::nullopt};
        constexpr double inf = std::numeric_limits<double>::infinity();
        geom::BoundingBox bounds{inf, inf, -inf, -inf};
        for (const auto& poly : seg.shape.polygons) {
            const auto b = poly.bbox();
            bounds = {std::min(bounds.min_x, b.min_x), std::min(bounds.min_y, b.min_y),
                      std::max(bounds.max_x, b.max_x), std::max(bounds.max_y, b.max_y)};
        }
        const auto cells =
            grid::cells_in_region(frame, [&](geom::Point c) { return geom::contains(seg.shape, c); }, bounds);
        std::optional<std::array<double, kPredictorCount>> features_row;
        try {
            features_row = stands::raster_predictors(cells, layers);
        } catch (const NoDataError& e) {
            result.warnings.push_back("segment " + seg.segment_id + ": " + e.what());
        }
        std::optional<double> h95;
        if (features_row) h95 = (*features_row)[predictor_index("H95_ALS")];
        if (!seg.spruce_pct) result.warnings.push_back("segment " + seg.segment_id + ": no spruce_pct attribute");
        record.applicable = features_row && applicability_mask(h95, seg.spruce_pct);
        if (record.applicable) {
            std::vector<double> row;
            for (auto j : columns) row.push_back((*features_row)[j]);
            record.prediction = model.predict(row);
        }
        nlohmann::json props = {{"segment_id", seg.segment_id}, {"applicable", record.applicable}};
        if (record.prediction) props["pred_br_m3ha"] = std::round(*record.prediction * 10.0) / 10.0;
        features.push_back(geom::make_feature(geom::to_geojson_geometry(seg.shape), std::move(props)));
        result.records.push_back(std::move(record));
    }
    result.collection = geom::make_feature_collection(features, crs_name);
    return result;
}

}  // namespace rotmap::eval
