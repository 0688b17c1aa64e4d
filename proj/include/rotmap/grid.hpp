#pragma once

// Aligned raster layers in ESRI ASCII grid format, cell enumeration and
// zonal statistics.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rotmap/geometry.hpp"

namespace rotmap::grid {

enum class Kind { continuous, categorical };

std::string_view to_string(Kind kind) noexcept;
Kind parse_kind(std::string_view s);

inline constexpr double kAlignmentTolerance = 1e-6;

/// Grid header. Row 0 is the northernmost row.
struct Frame {
    std::size_t ncols = 0;
    std::size_t nrows = 0;
    double xll = 0.0;  // lower-left corner
    double yll = 0.0;
    double cellsize = 0.0;

    bool aligned_with(const Frame& other, double tolerance = kAlignmentTolerance) const noexcept;
    std::size_t size() const noexcept { return ncols * nrows; }

    geom::Point cell_center(std::size_t row, std::size_t col) const noexcept {
        return {xll + (static_cast<double>(col) + 0.5) * cellsize,
                yll + (static_cast<double>(nrows - row) - 0.5) * cellsize};
    }
    double cell_area() const noexcept { return cellsize * cellsize; }

    bool operator==(const Frame&) const = default;
};

struct Grid {
    Frame frame;
    std::optional<double> nodata;
    Kind kind = Kind::continuous;
    std::vector<double> values;  // row-major, row 0 north

    double at(std::size_t row, std::size_t col) const { return values[row * frame.ncols + col]; }
    bool is_nodata(double v) const noexcept { return nodata && v == *nodata; }
};

Grid parse_grid(std::string_view content, Kind kind, std::string_view source = "grid");
Grid read_grid(const std::filesystem::path& path, Kind kind);

/// Header values are written in shortest round-trip form, so a write/read
/// cycle reproduces them exactly.
std::string format_grid(const Grid& grid);
void write_grid(const std::filesystem::path& path, const Grid& grid);

using LayerSet = std::map<std::string, Grid>;

/// Shared frame of all layers; AlignmentError names the first offending layer.
Frame check_alignment(const LayerSet& layers);

struct CellSet {
    Frame frame;
    std::vector<std::size_t> indices;  // row * ncols + col, ascending

    std::size_t size() const noexcept { return indices.size(); }
    bool empty() const noexcept { return indices.empty(); }
    std::size_t row(std::size_t k) const noexcept { return indices[k] / frame.ncols; }
    std::size_t col(std::size_t k) const noexcept { return indices[k] % frame.ncols; }
    geom::Point center(std::size_t k) const noexcept { return frame.cell_center(row(k), col(k)); }
};

using CellPredicate = std::function<bool(geom::Point)>;

/// Every cell whose centre satisfies the predicate.
CellSet cells_in_region(const Frame& frame, const CellPredicate& predicate);

/// Same result when the predicate is false outside `bounds`; only cells
/// whose centres fall in `bounds` are visited.
CellSet cells_in_region(const Frame& frame, const CellPredicate& predicate, const geom::BoundingBox& bounds);

/// Mean (continuous) or mode with smallest-code tie-break (categorical) of
/// the non-nodata member cells. Throws NoDataError when nothing is left.
double zonal_aggregate(const Grid& grid, const CellSet& cells);

struct ManifestEntry {
    std::filesystem::path path;
    Kind kind = Kind::continuous;
};

using RasterManifest = std::map<std::string, ManifestEntry>;

/// JSON: {"layers": {"NAME": {"path": "...", "kind": "continuous"}}}.
/// Relative paths resolve against `base_dir`.
RasterManifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir);
RasterManifest read_manifest(const std::filesystem::path& path);
std::string format_manifest(const RasterManifest& manifest);

/// Loads `required` layers (ManifestError when one is missing) plus any
/// other listed layers, and checks their alignment.
LayerSet load_layers(const RasterManifest& manifest, const std::vector<std::string>& required);

}  // namespace rotmap::grid
