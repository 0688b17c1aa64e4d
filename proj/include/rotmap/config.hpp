#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>

namespace rotmap {

/// Workflow parameters shared by the CLI subcommands.
struct PipelineConfig {
    std::filesystem::path trees;
    std::filesystem::path segments;
    std::filesystem::path manifest;
    std::filesystem::path out_dir = ".";

    double alpha = 25.0;
    double buffer_m = 2.0;
    double min_area_ha = 0.3;
    std::size_t min_stems = 30;
    double min_spruce_pct = 50.0;

    std::size_t ntree = 500;
    std::size_t nodesize = 5;
    std::optional<std::size_t> k;  // max(2, round(n / 11)) when unset
    std::size_t min_cluster = 5;

    std::uint64_t seed = 1;
    int threads = 1;
};

}  // namespace rotmap
