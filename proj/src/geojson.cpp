#include "rotmap/geojson.hpp"

#include <algorithm>

#include "rotmap/error.hpp"

namespace rotmap::geom {

namespace {

nlohmann::json ring_to_json(const Ring& ring) {
    auto coords = nlohmann::json::array();
    for (const auto& p : ring) coords.push_back({p.x, p.y});
    return coords;
}

nlohmann::json polygon_to_json(const Polygon& polygon) {
    auto rings = nlohmann::json::array();
    rings.push_back(ring_to_json(polygon.exterior));
    for (const auto& h : polygon.holes) rings.push_back(ring_to_json(h));
    return rings;
}

Ring ring_from_json(const nlohmann::json& coords, bool exterior) {
    if (!coords.is_array()) throw FormatError("GeoJSON ring is not an array");
    Ring ring;
    for (const auto& pos : coords) {
        if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number()) {
            throw FormatError("GeoJSON position must be [x, y]");
        }
        ring.push_back({pos[0].get<double>(), pos[1].get<double>()});
    }
    if (!ring.empty() && !(ring.front() == ring.back())) ring.push_back(ring.front());
    if (ring.size() < 4) throw FormatError("GeoJSON ring needs at least 4 positions");
    const double area = signed_area(ring);
    if ((exterior && area < 0) || (!exterior && area > 0)) std::reverse(ring.begin(), ring.end());
    return ring;
}

Polygon polygon_from_json(const nlohmann::json& rings) {
    if (!rings.is_array() || rings.empty()) throw FormatError("GeoJSON polygon has no rings");
    Polygon polygon;
    polygon.exterior = ring_from_json(rings[0], true);
    for (std::size_t i = 1; i < rings.size(); ++i) polygon.holes.push_back(ring_from_json(rings[i], false));
    return polygon;
}

}  // namespace

nlohmann::json to_geojson_geometry(const ShapeSet& shape) {
    if (shape.polygons.size() == 1) {
        return {{"type", "Polygon"}, {"coordinates", polygon_to_json(shape.polygons.front())}};
    }
    auto polys = nlohmann::json::array();
    for (const auto& p : shape.polygons) polys.push_back(polygon_to_json(p));
    return {{"type", "MultiPolygon"}, {"coordinates", polys}};
}

ShapeSet from_geojson_geometry(const nlohmann::json& geometry) {
    if (!geometry.is_object() || !geometry.contains("type") || !geometry.contains("coordinates")) {
        throw FormatError("GeoJSON geometry needs 'type' and 'coordinates'");
    }
    const auto type = geometry["type"].get<std::string>();
    ShapeSet shape;
    if (type == "Polygon") {
        shape.polygons.push_back(polygon_from_json(geometry["coordinates"]));
    } else if (type == "MultiPolygon") {
        for (const auto& rings : geometry["coordinates"]) shape.polygons.push_back(polygon_from_json(rings));
    } else {
        throw FormatError("unsupported GeoJSON geometry type '" + type + "'");
    }
    return shape;
}

nlohmann::json make_feature(nlohmann::json geometry, nlohmann::json properties) {
    return {{"type", "Feature"}, {"geometry", std::move(geometry)}, {"properties", std::move(properties)}};
}

nlohmann::json make_feature_collection(nlohmann::json features, const std::optional<std::string>& crs_name) {
    nlohmann::json fc = {{"type", "FeatureCollection"}, {"features", std::move(features)}};
    if (crs_name) fc["crs_name"] = *crs_name;
    return fc;
}

}  // namespace rotmap::geom
