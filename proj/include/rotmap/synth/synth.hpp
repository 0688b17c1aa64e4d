#pragma once

// Synthetic scenarios: harvest objects, segments, predictor rasters and the
// per-stand ground truth, with planted maturity and cluster effects.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rotmap/grid.hpp"
#include "rotmap/harvester.hpp"
#include "rotmap/stands.hpp"

namespace rotmap::synth {

struct ScenarioConfig {
    std::size_t n_clusters = 3;
    std::size_t stands_per_cluster = 10;
    std::size_t decoy_stands = 2;           // spruce minority, removed by the composition filter
    std::size_t empty_segments_per_cluster = 2;  // unharvested segments for mapping

    double area_mean_ha = 1.0;
    double area_sd_ha = 0.4;
    double area_min_ha = 0.5;
    double area_max_ha = 2.5;
    double stems_per_ha_mean = 743.0;
    double stems_per_ha_sd = 150.0;
    double stems_per_ha_min = 300.0;
    double qmd_mean_cm = 22.0;
    double qmd_sd_cm = 3.3;
    double spruce_share_min = 0.8;  // eligible stands, share of stems
    double spruce_share_max = 1.0;

    double br_target_m3ha = 23.9;   // mean stand-level target; 0 disables rot
    double maturity_effect = 0.6;   // log-scale effect of maturity on the target
    double cluster_effect_sd = 0.0;  // m3/ha, shared by all stands of a cluster
    double residual_sd = 5.0;        // m3/ha, stand level
    double rot_dbh_slope = 0.08;     // per cm, stem-level logistic
    double br_fraction_alpha = 2.0;  // Beta shape of the carved stem fraction
    double br_fraction_beta = 3.0;

    double head_position_share = 0.52;
    std::uint64_t seed = 1;
    std::string crs_name = "EPSG:25833";
};

/// Throws ConfigError naming the first infeasible setting.
void validate(const ScenarioConfig& config);

struct TruthRow {
    std::string stand_id;  // "<object_id>/<segment_id>"
    std::string object_id;
    std::string segment_id;
    std::size_t cluster = 0;
    bool eligible = true;
    double area_ha = 0.0;  // footprint cell centres x cell area
    std::size_t n_stems = 0;
    double total_vol_m3 = 0.0;
    double spruce_pct = 0.0;  // of volume
    double br_vol_m3 = 0.0;
    double br_m3ha = 0.0;
    double br_target_m3ha = 0.0;
    double maturity = 0.0;
    double cluster_effect = 0.0;
};

struct Scenario {
    ScenarioConfig config;
    grid::Frame frame;
    std::vector<harvester::HarvestObject> objects;
    std::vector<stands::Segment> segments;
    grid::LayerSet layers;
    std::vector<TruthRow> truth;  // sorted by stand_id
};

Scenario generate_scenario(const ScenarioConfig& config);

struct ScenarioFiles {
    std::filesystem::path index;  // scenario.json
    std::vector<std::filesystem::path> harvester;
    std::filesystem::path segments;
    std::filesystem::path raster_manifest;
    std::filesystem::path truth;
};

/// Writes harvester/<object>.hpr, segments.geojson, rasters/*.asc with
/// rasters/manifest.json, truth.csv and scenario.json listing them all.
ScenarioFiles write_scenario(const Scenario& scenario, const std::filesystem::path& out_dir);

std::string format_truth(const std::vector<TruthRow>& truth);
std::vector<TruthRow> parse_truth(std::string_view csv);

/// Stem volume in m3 from dbh in cm.
double stem_volume(double dbh_cm) noexcept;

}  // namespace rotmap::synth
