#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "rotmap/geometry.hpp"

namespace rotmap::geom {

/// Polygon for a single-polygon shape, MultiPolygon otherwise.
nlohmann::json to_geojson_geometry(const ShapeSet& shape);

/// Accepts Polygon or MultiPolygon; rings are re-oriented (exterior
/// counterclockwise, holes clockwise) and closed if needed.
ShapeSet from_geojson_geometry(const nlohmann::json& geometry);

nlohmann::json make_feature(nlohmann::json geometry, nlohmann::json properties);

/// FeatureCollection; the CRS, if any, rides along as the foreign member
/// "crs_name".
nlohmann::json make_feature_collection(nlohmann::json features, const std::optional<std::string>& crs_name = {});

}  // namespace rotmap::geom
