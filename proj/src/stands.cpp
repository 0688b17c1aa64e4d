#include "rotmap/stands.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "rotmap/error.hpp"
#include "rotmap/geojson.hpp"
#include "rotmap/parallel.hpp"
#include "rotmap/text.hpp"

namespace rotmap::stands {

std::vector<Segment> parse_segments(std::string_view geojson_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(geojson_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("segments: invalid JSON: ") + e.what());
    }
    if (doc.value("type", "") != "FeatureCollection" || !doc.contains("features") || !doc["features"].is_array()) {
        throw FormatError("segments: expected a GeoJSON FeatureCollection");
    }
    std::vector<Segment> segments;
    std::set<std::string> ids;
    for (const auto& feature : doc["features"]) {
        const auto& props = feature.contains("properties") ? feature["properties"] : nlohmann::json();
        if (!props.is_object() || !props.contains("segment_id")) {
            throw FormatError("segments: feature without 'segment_id' property");
        }
        Segment seg;
        const auto& id = props["segment_id"];
        seg.segment_id = id.is_string() ? id.get<std::string>() : id.dump();
        if (!ids.insert(seg.segment_id).second) throw FormatError("segments: duplicate segment_id " + seg.segment_id);
        if (!feature.contains("geometry")) throw FormatError("segments: feature without geometry");
        seg.shape = geom::from_geojson_geometry(feature["geometry"]);
        if (props.contains("spruce_pct") && props["spruce_pct"].is_number()) {
            seg.spruce_pct = props["spruce_pct"].get<double>();
        }
        segments.push_back(std::move(seg));
    }
    return segments;
}

std::string format_segments(const std::vector<Segment>& segments) {
    auto features = nlohmann::json::array();
    for (const auto& seg : segments) {
        nlohmann::json props = {{"segment_id", seg.segment_id}};
        if (seg.spruce_pct) props["spruce_pct"] = *seg.spruce_pct;
        features.push_back(geom::make_feature(geom::to_geojson_geometry(seg.shape), props));
    }
    return geom::make_feature_collection(features).dump() + "\n";
}

std::vector<std::optional<std::size_t>> assign_trees_to_segments(std::span<const TreeRecord> trees,
                                                                 std::span<const Segment> segments) {
    std::vector<std::vector<geom::BoundingBox>> boxes(segments.size());
    for (std::size_t s = 0; s < segments.size(); ++s) {
        for (const auto& poly : segments[s].shape.polygons) boxes[s].push_back(poly.bbox());
    }
    std::vector<std::optional<std::size_t>> out(trees.size());
    for (std::size_t t = 0; t < trees.size(); ++t) {
        const geom::Point p{trees[t].x, trees[t].y};
        std::vector<std::size_t> hits;
        for (std::size_t s = 0; s < segments.size(); ++s) {
            const auto& polys = segments[s].shape.polygons;
            for (std::size_t k = 0; k < polys.size(); ++k) {
                if (boxes[s][k].contains(p, geom::kDuplicateTolerance) && geom::point_in_polygon(p, polys[k])) {
                    hits.push_back(s);
                    break;
                }
            }
        }
        if (hits.size() > 1) {
            std::string ids;
            for (auto s : hits) ids += (ids.empty() ? "" : ", ") + segments[s].segment_id;
            throw AmbiguityError("tree " + trees[t].object_id + "/" + trees[t].stem_id + " lies in segments " + ids);
        }
        if (!hits.empty()) out[t] = hits.front();
    }
    return out;
}

DelineationResult delineate_stands(std::span<const TreeRecord> trees, std::span<const Segment> segments,
                                   const grid::Frame& frame, const DelineationParams& params,
                                   const SpeciesPolicy& species) {
    const auto assignment = assign_trees_to_segments(trees, segments);
    std::map<std::string, std::vector<std::size_t>> by_object;
    for (std::size_t t = 0; t < trees.size(); ++t) by_object[trees[t].object_id].push_back(t);

    DelineationResult result;
    for (const auto& [object_id, members] : by_object) {
        std::vector<geom::Point> positions;
        positions.reserve(members.size());
        for (auto t : members) positions.push_back({trees[t].x, trees[t].y});
        geom::ShapeSet shape;
        try {
            shape = geom::alpha_shape(positions, params.alpha);
        } catch (const DegenerateGeometry& e) {
            result.warnings.push_back("object " + object_id + " skipped: " + e.what());
            continue;
        } catch (const EmptyShape& e) {
            result.warnings.push_back("object " + object_id + " skipped: " + e.what());
            continue;
        }

        std::map<std::size_t, std::vector<std::size_t>> by_segment;
        for (auto t : members) {
            if (assignment[t]) by_segment[*assignment[t]].push_back(t);
        }
        for (const auto& [s, assigned] : by_segment) {
            const Segment& segment = segments[s];
            HarvestedStand stand;
            stand.object_id = object_id;
            stand.segment_id = segment.segment_id;
            stand.stand_id = object_id + "/" + segment.segment_id;

            geom::BoundingBox bounds{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                                     -std::numeric_limits<double>::infinity(),
                                     -std::numeric_limits<double>::infinity()};
            for (const auto& poly : segment.shape.polygons) {
                const auto b = poly.bbox();
                bounds = {std::min(bounds.min_x, b.min_x), std::min(bounds.min_y, b.min_y),
                          std::max(bounds.max_x, b.max_x), std::max(bounds.max_y, b.max_y)};
            }
            stand.cells = grid::cells_in_region(
                frame,
                [&](geom::Point c) {
                    return geom::contains(segment.shape, c) && geom::within_buffer(c, shape, params.buffer_m);
                },
                bounds);
            if (stand.cells.empty()) {
                result.warnings.push_back("stand " + stand.stand_id + " skipped: no cell centre inside the crop");
                continue;
            }
            for (auto t : assigned) {
                const auto& tree = trees[t];
                if (!geom::within_buffer({tree.x, tree.y}, shape, params.buffer_m)) continue;
                stand.stem_ids.push_back(tree.stem_id);
                stand.total_volume_m3 += tree.total_volume_m3;
                stand.br_volume_m3 += tree.br_volume_m3;
                if (species.is_spruce(tree.species)) stand.spruce_volume_m3 += tree.total_volume_m3;
            }
            double sx = 0.0, sy = 0.0;
            for (std::size_t k = 0; k < stand.cells.size(); ++k) {
                const auto c = stand.cells.center(k);
                sx += c.x;
                sy += c.y;
            }
            const auto n = static_cast<double>(stand.cells.size());
            stand.centroid_x = sx / n;
            stand.centroid_y = sy / n;
            stand.area_ha = n * frame.cell_area() / 1e4;
            result.stands.push_back(std::move(stand));
        }
    }
    std::sort(result.stands.begin(), result.stands.end(),
              [](const HarvestedStand& a, const HarvestedStand& b) { return a.stand_id < b.stand_id; });
    return result;
}

FilterResult filter_stands(std::vector<HarvestedStand> stands, const FilterParams& params) {
    FilterResult result;
    for (auto& stand : stands) {
        std::vector<std::string> reasons;
        if (stand.area_ha < params.min_area_ha) reasons.emplace_back(kDropArea);
        if (stand.stem_count() < params.min_stems) reasons.emplace_back(kDropStems);
        if (stand.spruce_share_pct() < params.min_spruce_pct) reasons.emplace_back(kDropComposition);
        if (reasons.empty()) result.kept.push_back(std::move(stand));
        else result.dropped.push_back({std::move(stand), std::move(reasons)});
    }
    return result;
}

double dbh_quantile(std::span<const double> values, double p) {
    if (values.empty()) throw EmptyInput("quantile of an empty list");
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("quantile probability outside [0, 1]");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double h = static_cast<double>(sorted.size() - 1) * p;  // 0-based rank
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

HarvesterFeatures harvester_features(const HarvestedStand& stand, std::span<const TreeRecord> members,
                                     const SpeciesPolicy& species) {
    if (!(stand.area_ha > 0.0)) throw DataError("stand " + stand.stand_id + " has no area");
    HarvesterFeatures f;
    double total = 0.0, spruce_volume = 0.0, spruce_sq = 0.0;
    std::size_t spruce_n = 0;
    std::vector<double> dbh;
    dbh.reserve(members.size());
    for (const auto& t : members) {
        total += t.total_volume_m3;
        dbh.push_back(t.dbh_cm);
        if (species.is_spruce(t.species)) {
            spruce_volume += t.total_volume_m3;
            spruce_sq += t.dbh_cm * t.dbh_cm;
            ++spruce_n;
        }
    }
    if (spruce_n == 0) throw DataError("stand " + stand.stand_id + " has no spruce stems");
    f.volume_m3ha = total / stand.area_ha;
    f.stems_per_ha = static_cast<double>(members.size()) / stand.area_ha;
    f.qmd_cm = std::sqrt(spruce_sq / static_cast<double>(spruce_n));
    f.dbh_range_cm = dbh_quantile(dbh, 0.90) - dbh_quantile(dbh, 0.10);
    f.spruce_pct = total > 0.0 ? 100.0 * spruce_volume / total : 0.0;
    return f;
}

void require_predictor_layers(const grid::LayerSet& layers) {
    for (const auto& info : kPredictors) {
        if (info.source != PredictorSource::raster) continue;
        auto it = layers.find(std::string(info.name));
        if (it == layers.end()) throw ManifestError("missing predictor layer '" + std::string(info.name) + "'");
        const auto expected = info.categorical ? grid::Kind::categorical : grid::Kind::continuous;
        if (it->second.kind != expected) {
            throw ManifestError("layer '" + std::string(info.name) + "' must be " +
                                std::string(grid::to_string(expected)));
        }
    }
}

std::array<double, kPredictorCount> raster_predictors(const grid::CellSet& cells, const grid::LayerSet& layers) {
    std::array<double, kPredictorCount> row{};
    double sx = 0.0, sy = 0.0;
    for (std::size_t k = 0; k < cells.size(); ++k) {
        const auto c = cells.center(k);
        sx += c.x;
        sy += c.y;
    }
    for (std::size_t i = 0; i < kPredictors.size(); ++i) {
        const auto& info = kPredictors[i];
        if (info.source == PredictorSource::raster) {
            row[i] = grid::zonal_aggregate(layers.at(std::string(info.name)), cells);
        } else if (info.source == PredictorSource::centroid) {
            if (cells.empty()) throw NoDataError("empty zone has no centroid");
            row[i] = (info.name == "X" ? sx : sy) / static_cast<double>(cells.size());
        }
    }
    return row;
}

AssemblyResult assemble_samples(std::span<const HarvestedStand> stands, std::span<const TreeRecord> trees,
                                const grid::LayerSet& layers, const grid::Frame& frame,
                                const SpeciesPolicy& species, int threads) {
    require_predictor_layers(layers);
    for (const auto& [name, grid] : layers) {
        if (!grid.frame.aligned_with(frame)) throw AlignmentError("layer '" + name + "' differs from the stand frame");
    }
    std::map<std::pair<std::string_view, std::string_view>, std::size_t> lookup;
    for (std::size_t t = 0; t < trees.size(); ++t) lookup[{trees[t].object_id, trees[t].stem_id}] = t;

    std::vector<std::optional<StandSample>> samples(stands.size());
    std::vector<std::string> failures(stands.size());
    parallel_for(stands.size(), threads, [&](std::size_t s) {
        const auto& stand = stands[s];
        std::vector<TreeRecord> members;
        members.reserve(stand.stem_ids.size());
        for (const auto& id : stand.stem_ids) {
            auto it = lookup.find({stand.object_id, id});
            if (it == lookup.end()) {
                failures[s] = "stem " + id + " not in tree table";
                return;
            }
            members.push_back(trees[it->second]);
        }
        try {
            StandSample sample;
            sample.stand_id = stand.stand_id;
            sample.predictors = raster_predictors(stand.cells, layers);
            const auto hf = harvester_features(stand, members, species);
            sample.predictors[predictor_index("V_HRV")] = hf.volume_m3ha;
            sample.predictors[predictor_index("N_HRV")] = hf.stems_per_ha;
            sample.predictors[predictor_index("QMD_HRV")] = hf.qmd_cm;
            sample.predictors[predictor_index("DR_HRV")] = hf.dbh_range_cm;
            sample.predictors[predictor_index("SPP_HRV")] = hf.spruce_pct;
            double br = 0.0;
            for (const auto& m : members) br += m.br_volume_m3;
            sample.br_vol = br / stand.area_ha;
            samples[s] = std::move(sample);
        } catch (const NoDataError& e) {
            failures[s] = e.what();
        } catch (const DataError& e) {
            failures[s] = e.what();
        }
    });

    AssemblyResult result;
    for (std::size_t s = 0; s < stands.size(); ++s) {
        if (samples[s]) result.samples.push_back(std::move(*samples[s]));
        else result.dropped.emplace_back(stands[s].stand_id, failures[s]);
    }
    std::sort(result.samples.begin(), result.samples.end(),
              [](const StandSample& a, const StandSample& b) { return a.stand_id < b.stand_id; });
    return result;
}

std::string write_stand_table(std::span<const StandSample> samples) {
    std::string out = "stand_id,br_vol";
    for (const auto& p : kPredictors) out += "," + std::string(p.name);
    out += '\n';
    for (const auto& s : samples) {
        out += s.stand_id + ',' + text::significant(s.br_vol, 6);
        for (double v : s.predictors) out += ',' + text::significant(v, 6);
        out += '\n';
    }
    return out;
}

std::vector<StandSample> read_stand_table(std::string_view csv) {
    std::istringstream in{std::string(csv)};
    std::string line;
    if (!std::getline(in, line)) throw FormatError("stand table is empty");
    const auto header = text::split_csv(line);
    std::map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < header.size(); ++i) column[header[i]] = i;
    auto need = [&](const std::string& name) {
        auto it = column.find(name);
        if (it == column.end()) throw FormatError("stand table: missing column '" + name + "'");
        return it->second;
    };
    const auto id_col = need("stand_id");
    const auto br_col = need("br_vol");
    std::array<std::size_t, kPredictorCount> cols{};
    for (std::size_t i = 0; i < kPredictors.size(); ++i) cols[i] = need(std::string(kPredictors[i].name));

    std::vector<StandSample> samples;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const auto f = text::split_csv(line);
        const auto where = "stand table line " + std::to_string(line_no);
        if (f.size() != header.size()) throw FormatError(where + ": wrong field count");
        StandSample s;
        s.stand_id = f[id_col];
        s.br_vol = text::parse_double(f[br_col], where);
        for (std::size_t i = 0; i < kPredictors.size(); ++i) s.predictors[i] = text::parse_double(f[cols[i]], where);
        samples.push_back(std::move(s));
    }
    return samples;
}

geom::ShapeSet cells_outline(const grid::CellSet& cells) {
    const auto& frame = cells.frame;
    // Corner (i, j): column line i (0..ncols), row line j (0..nrows), j = 0 at the top.
    const std::size_t stride = frame.ncols + 1;
    auto corner = [&](std::size_t i, std::size_t j) { return j * stride + i; };
    std::set<std::size_t> members(cells.indices.begin(), cells.indices.end());
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    auto add_edge = [&](std::size_t a, std::size_t b) { edges.emplace_back(a, b); };
    auto has = [&](std::ptrdiff_t r, std::ptrdiff_t c) {
        if (r < 0 || c < 0 || r >= static_cast<std::ptrdiff_t>(frame.nrows) ||
            c >= static_cast<std::ptrdiff_t>(frame.ncols)) {
            return false;
        }
        return members.contains(static_cast<std::size_t>(r) * frame.ncols + static_cast<std::size_t>(c));
    };
    for (std::size_t idx : cells.indices) {
        const auto r = static_cast<std::ptrdiff_t>(idx / frame.ncols);
        const auto c = static_cast<std::ptrdiff_t>(idx % frame.ncols);
        const auto i = static_cast<std::size_t>(c);
        const auto j = static_cast<std::size_t>(r);
        // Counterclockwise around the cell: bottom-left, bottom-right, top-right, top-left.
        const auto bl = corner(i, j + 1), br = corner(i + 1, j + 1), tr = corner(i + 1, j), tl = corner(i, j);
        if (!has(r + 1, c)) add_edge(bl, br);
        if (!has(r, c + 1)) add_edge(br, tr);
        if (!has(r - 1, c)) add_edge(tr, tl);
        if (!has(r, c - 1)) add_edge(tl, bl);
    }
    // Compact vertex table over the corners actually used.
    std::map<std::size_t, std::size_t> compact;
    std::vector<geom::Point> vertices;
    for (auto& [a, b] : edges) {
        for (auto* v : {&a, &b}) {
            auto [it, inserted] = compact.emplace(*v, vertices.size());
            if (inserted) {
                const std::size_t i = *v % stride, j = *v / stride;
                vertices.push_back({frame.xll + static_cast<double>(i) * frame.cellsize,
                                    frame.yll + static_cast<double>(frame.nrows - j) * frame.cellsize});
            }
            *v = it->second;
        }
    }
    return geom::polygons_from_boundary(vertices, edges);
}

nlohmann::json stands_to_geojson(std::span<const HarvestedStand> stands, const grid::Frame& frame) {
    auto features = nlohmann::json::array();
    for (const auto& s : stands) {
        auto cells = nlohmann::json::array();
        for (std::size_t k = 0; k < s.cells.size(); ++k) cells.push_back({s.cells.row(k), s.cells.col(k)});
        nlohmann::json props = {
            {"stand_id", s.stand_id},
            {"object_id", s.object_id},
            {"segment_id", s.segment_id},
            {"area_ha", s.area_ha},
            {"n_stems", s.stem_count()},
            {"centroid_x", s.centroid_x},
            {"centroid_y", s.centroid_y},
            {"total_vol_m3", s.total_volume_m3},
            {"spruce_vol_m3", s.spruce_volume_m3},
            {"br_vol_m3", s.br_volume_m3},
            {"cells", cells},
            {"stem_ids", s.stem_ids},
        };
        auto outline = cells_outline(s.cells);
        auto polys = nlohmann::json::array();
        for (const auto& p : outline.polygons) {
            geom::ShapeSet single;
            single.polygons.push_back(p);
            polys.push_back(geom::to_geojson_geometry(single)["coordinates"]);
        }
        features.push_back(
            geom::make_feature({{"type", "MultiPolygon"}, {"coordinates", polys}}, std::move(props)));
    }
    auto fc = geom::make_feature_collection(features);
    fc["frame"] = {{"ncols", frame.ncols},
                   {"nrows", frame.nrows},
                   {"xllcorner", frame.xll},
                   {"yllcorner", frame.yll},
                   {"cellsize", frame.cellsize}};
    return fc;
}

std::vector<HarvestedStand> stands_from_geojson(const nlohmann::json& fc) {
    if (!fc.is_object() || fc.value("type", "") != "FeatureCollection" || !fc.contains("frame")) {
        throw FormatError("stands file must be a FeatureCollection with a 'frame' member");
    }
    grid::Frame frame;
    try {
        const auto& f = fc["frame"];
        frame.ncols = f.at("ncols").get<std::size_t>();
        frame.nrows = f.at("nrows").get<std::size_t>();
        frame.xll = f.at("xllcorner").get<double>();
        frame.yll = f.at("yllcorner").get<double>();
        frame.cellsize = f.at("cellsize").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("stands frame: ") + e.what());
    }
    std::vector<HarvestedStand> stands;
    for (const auto& feature : fc.at("features")) {
        try {
            const auto& p = feature.at("properties");
            HarvestedStand s;
            s.stand_id = p.at("stand_id").get<std::string>();
            s.object_id = p.at("object_id").get<std::string>();
            s.segment_id = p.at("segment_id").get<std::string>();
            s.area_ha = p.at("area_ha").get<double>();
            s.centroid_x = p.at("centroid_x").get<double>();
            s.centroid_y = p.at("centroid_y").get<double>();
            s.total_volume_m3 = p.at("total_vol_m3").get<double>();
            s.spruce_volume_m3 = p.at("spruce_vol_m3").get<double>();
            s.br_volume_m3 = p.at("br_vol_m3").get<double>();
            s.stem_ids = p.at("stem_ids").get<std::vector<std::string>>();
            s.cells.frame = frame;
            for (const auto& rc : p.at("cells")) {
                const auto r = rc.at(0).get<std::size_t>();
                const auto c = rc.at(1).get<std::size_t>();
                if (r >= frame.nrows || c >= frame.ncols) throw FormatError("stand cell outside frame");
                s.cells.indices.push_back(r * frame.ncols + c);
            }
            std::sort(s.cells.indices.begin(), s.cells.indices.end());
            s.cells.indices.erase(std::unique(s.cells.indices.begin(), s.cells.indices.end()), s.cells.indices.end());
            stands.push_back(std::move(s));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("stands feature: ") + e.what());
        }
    }
    return stands;
}

}  // namespace rotmap::stands
