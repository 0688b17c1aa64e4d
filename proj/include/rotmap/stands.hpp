#pragma once

// Harvested-stand delineation (segments cropped by buffered alpha shapes),
// stand filters, and assembly of the stand-level modeling table.

#include <array>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rotmap/geometry.hpp"
#include "rotmap/grid.hpp"
#include "rotmap/harvester.hpp"
#include "rotmap/predictors.hpp"

namespace rotmap::stands {

using harvester::TreeRecord;

struct Segment {
    std::string segment_id;
    geom::ShapeSet shape;
    std::optional<double> spruce_pct;  // map attribute, used for applicability
};

/// GeoJSON FeatureCollection of Polygon/MultiPolygon features with a
/// `segment_id` property (string or integer) and optional `spruce_pct`.
std::vector<Segment> parse_segments(std::string_view geojson_text);
std::string format_segments(const std::vector<Segment>& segments);

/// Which codes count as Norway spruce when computing composition features.
struct SpeciesPolicy {
    std::set<std::string> spruce_codes{"spruce"};

    bool is_spruce(const harvester::Species& species) const { return spruce_codes.contains(species.code); }
};

/// Segment index per tree (nullopt when the tree falls in no segment).
/// Throws AmbiguityError when a tree lies in more than one segment.
std::vector<std::optional<std::size_t>> assign_trees_to_segments(std::span<const TreeRecord> trees,
                                                                 std::span<const Segment> segments);

struct HarvestedStand {
    std::string stand_id;  // "<object_id>/<segment_id>"
    std::string object_id;
    std::string segment_id;
    grid::CellSet cells;
    std::vector<std::string> stem_ids;
    double centroid_x = 0.0;
    double centroid_y = 0.0;
    double area_ha = 0.0;
    double total_volume_m3 = 0.0;
    double spruce_volume_m3 = 0.0;
    double br_volume_m3 = 0.0;

    std::size_t stem_count() const noexcept { return stem_ids.size(); }
    double spruce_share_pct() const noexcept {
        return total_volume_m3 > 0.0 ? 100.0 * spruce_volume_m3 / total_volume_m3 : 0.0;
    }
};

struct DelineationParams {
    double alpha = 25.0;   // alpha-shape radius, m
    double buffer_m = 2.0;
};

struct DelineationResult {
    std::vector<HarvestedStand> stands;  // sorted by stand_id
    std::vector<std::string> warnings;
};

DelineationResult delineate_stands(std::span<const TreeRecord> trees, std::span<const Segment> segments,
                                   const grid::Frame& frame, const DelineationParams& params = {},
                                   const SpeciesPolicy& species = {});

struct FilterParams {
    double min_area_ha = 0.3;
    std::size_t min_stems = 30;
    double min_spruce_pct = 50.0;
};

inline constexpr std::string_view kDropArea = "area";
inline constexpr std::string_view kDropStems = "stems";
inline constexpr std::string_view kDropComposition = "composition";

struct DroppedStand {
    HarvestedStand stand;
    std::vector<std::string> reasons;
};

struct FilterResult {
    std::vector<HarvestedStand> kept;
    std::vector<DroppedStand> dropped;
};

FilterResult filter_stands(std::vector<HarvestedStand> stands, const FilterParams& params = {});

/// Linear-interpolation quantile at 1-based rank h = (n - 1) p + 1.
double dbh_quantile(std::span<const double> values, double p);

struct HarvesterFeatures {
    double volume_m3ha = 0.0;    // V_HRV
    double stems_per_ha = 0.0;   // N_HRV
    double qmd_cm = 0.0;         // QMD_HRV, spruce only
    double dbh_range_cm = 0.0;   // DR_HRV, all stems
    double spruce_pct = 0.0;     // SPP_HRV
};

/// Harvester variables for a stand from its member trees.
HarvesterFeatures harvester_features(const HarvestedStand& stand, std::span<const TreeRecord> members,
                                     const SpeciesPolicy& species = {});

struct StandSample {
    std::string stand_id;
    double br_vol = 0.0;  // m3/ha
    std::array<double, kPredictorCount> predictors{};

    double get(std::string_view name) const { return predictors[predictor_index(name)]; }
};

struct AssemblyResult {
    std::vector<StandSample> samples;  // sorted by stand_id
    std::vector<std::pair<std::string, std::string>> dropped;  // stand_id, reason
};

/// Response and all 22 predictors per stand. Missing or mistyped raster
/// layers raise ManifestError; a NoDataError zone drops only that stand.
AssemblyResult assemble_samples(std::span<const HarvestedStand> stands, std::span<const TreeRecord> trees,
                                const grid::LayerSet& layers, const grid::Frame& frame,
                                const SpeciesPolicy& species = {}, int threads = 1);

/// Zonal raster predictors (and centroid X/Y) for an arbitrary cell set;
/// harvester columns are left at zero.
std::array<double, kPredictorCount> raster_predictors(const grid::CellSet& cells, const grid::LayerSet& layers);

/// Checks that every raster predictor is present with the right kind.
void require_predictor_layers(const grid::LayerSet& layers);

/// CSV: stand_id,br_vol,<22 predictors>; 6 significant digits.
std::string write_stand_table(std::span<const StandSample> samples);
std::vector<StandSample> read_stand_table(std::string_view csv);

/// Stand outlines (dissolved member cells) plus the bookkeeping needed to
/// rebuild the stands: cells, stem ids and volume totals.
nlohmann::json stands_to_geojson(std::span<const HarvestedStand> stands, const grid::Frame& frame);
std::vector<HarvestedStand> stands_from_geojson(const nlohmann::json& collection);

/// Dissolved outline of a cell set.
geom::ShapeSet cells_outline(const grid::CellSet& cells);

}  // namespace rotmap::stands
