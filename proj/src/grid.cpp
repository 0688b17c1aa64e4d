#include "rotmap/grid.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <map>
#include <set>

#include "rotmap/error.hpp"
#include "rotmap/text.hpp"

namespace rotmap::grid {

std::string_view to_string(Kind kind) noexcept { return kind == Kind::continuous ? "continuous" : "categorical"; }

Kind parse_kind(std::string_view s) {
    if (s == "continuous") return Kind::continuous;
    if (s == "categorical") return Kind::categorical;
    throw ManifestError("unknown layer kind '" + std::string(s) + "'");
}

bool Frame::aligned_with(const Frame& o, double tol) const noexcept {
    return ncols == o.ncols && nrows == o.nrows && std::abs(xll - o.xll) <= tol && std::abs(yll - o.yll) <= tol &&
           std::abs(cellsize - o.cellsize) <= tol;
}

namespace {

class Tokenizer {
public:
    explicit Tokenizer(std::string_view s) : s_(s) {}

    std::optional<std::string_view> next() {
        while (pos_ < s_.size() && is_space(s_[pos_])) {
            if (s_[pos_] == '\n') ++line_;
            ++pos_;
        }
        if (pos_ >= s_.size()) return std::nullopt;
        const auto start = pos_;
        while (pos_ < s_.size() && !is_space(s_[pos_])) ++pos_;
        return s_.substr(start, pos_ - start);
    }

    std::size_t line() const { return line_; }

private:
    static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }
    std::string_view s_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
};

}  // namespace

Grid parse_grid(std::string_view content, Kind kind, std::string_view source) {
    const std::string where(source);
    // Header lines come first; values start at the first line whose first
    // token is numeric.
    std::map<std::string, std::string> header;
    std::size_t offset = 0;
    std::size_t line_no = 0;
    while (offset < content.size()) {
        auto end = content.find('\n', offset);
        if (end == std::string_view::npos) end = content.size();
        const auto line = text::trim(content.substr(offset, end - offset));
        if (line.empty()) {
            offset = end + 1;
            ++line_no;
            continue;
        }
        const auto split = line.find_first_of(" \t");
        const auto key = text::lower(line.substr(0, split));
        if (!key.empty() && (std::isdigit(static_cast<unsigned char>(key[0])) || key[0] == '-' || key[0] == '+' ||
                             key[0] == '.')) {
            break;
        }
        if (split == std::string_view::npos) throw FormatError(where + ": header keyword '" + key + "' has no value");
        if (!header.emplace(key, std::string(text::trim(line.substr(split)))).second) {
            throw FormatError(where + ": duplicated header keyword '" + key + "'");
        }
        offset = end + 1;
        ++line_no;
    }
    static const std::set<std::string> known{"ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"};
    for (const auto& [key, value] : header) {
        if (!known.contains(key)) throw FormatError(where + ": unknown header keyword '" + key + "'");
    }
    auto require = [&](const char* key) -> const std::string& {
        auto it = header.find(key);
        if (it == header.end()) throw FormatError(where + ": missing header keyword '" + key + "'");
        return it->second;
    };

    Grid grid;
    grid.kind = kind;
    const auto ncols = text::parse_int(require("ncols"), where + " ncols");
    const auto nrows = text::parse_int(require("nrows"), where + " nrows");
    if (ncols <= 0 || nrows <= 0) throw FormatError(where + ": ncols and nrows must be positive");
    grid.frame.ncols = static_cast<std::size_t>(ncols);
    grid.frame.nrows = static_cast<std::size_t>(nrows);
    grid.frame.xll = text::parse_double(require("xllcorner"), where + " xllcorner");
    grid.frame.yll = text::parse_double(require("yllcorner"), where + " yllcorner");
    grid.frame.cellsize = text::parse_double(require("cellsize"), where + " cellsize");
    if (!(grid.frame.cellsize > 0.0)) throw FormatError(where + ": cellsize must be positive");
    if (auto it = header.find("nodata_value"); it != header.end()) {
        grid.nodata = text::parse_double(it->second, where + " NODATA_value");
    }

    grid.values.reserve(grid.frame.size());
    std::size_t row = 0;
    while (offset < content.size()) {
        auto end = content.find('\n', offset);
        if (end == std::string_view::npos) end = content.size();
        const auto line = content.substr(offset, end - offset);
        offset = end + 1;
        ++line_no;
        if (text::trim(line).empty()) continue;
        Tokenizer tokens(line);
        std::size_t count = 0;
        while (auto token = tokens.next()) {
            const double v = text::parse_double(*token, where + " line " + std::to_string(line_no));
            if (kind == Kind::categorical && !grid.is_nodata(v) && v != std::floor(v)) {
                throw FormatError(where + ": categorical value " + std::string(*token) + " is not an integer");
            }
            grid.values.push_back(v);
            ++count;
        }
        if (count != grid.frame.ncols) {
            throw FormatError(where + ": row " + std::to_string(row) + " has " + std::to_string(count) +
                              " values, expected " + std::to_string(grid.frame.ncols));
        }
        ++row;
    }
    if (row != grid.frame.nrows) {
        throw FormatError(where + ": found " + std::to_string(row) + " rows, expected " +
                          std::to_string(grid.frame.nrows));
    }
    return grid;
}

Grid read_grid(const std::filesystem::path& path, Kind kind) {
    return parse_grid(text::read_file(path), kind, path.string());
}

std::string format_grid(const Grid& grid) {
    std::string out;
    out.reserve(grid.values.size() * 8 + 128);
    out += "ncols " + std::to_string(grid.frame.ncols) + '\n';
    out += "nrows " + std::to_string(grid.frame.nrows) + '\n';
    out += "xllcorner " + text::shortest(grid.frame.xll) + '\n';
    out += "yllcorner " + text::shortest(grid.frame.yll) + '\n';
    out += "cellsize " + text::shortest(grid.frame.cellsize) + '\n';
    if (grid.nodata) out += "NODATA_value " + text::shortest(*grid.nodata) + '\n';
    for (std::size_t r = 0; r < grid.frame.nrows; ++r) {
        for (std::size_t c = 0; c < grid.frame.ncols; ++c) {
            if (c > 0) out += ' ';
            out += text::shortest(grid.at(r, c));
        }
        out += '\n';
    }
    return out;
}

void write_grid(const std::filesystem::path& path, const Grid& grid) { text::write_file(path, format_grid(grid)); }

Frame check_alignment(const LayerSet& layers) {
    if (layers.empty()) throw AlignmentError("no layers to align");
    const auto& [first_name, first] = *layers.begin();
    for (const auto& [name, grid] : layers) {
        if (!grid.frame.aligned_with(first.frame)) {
            throw AlignmentError("layer '" + name + "' is not aligned with layer '" + first_name + "'");
        }
    }
    return first.frame;
}

CellSet cells_in_region(const Frame& frame, const CellPredicate& predicate) {
    CellSet cells{frame, {}};
    for (std::size_t r = 0; r < frame.nrows; ++r) {
        for (std::size_t c = 0; c < frame.ncols; ++c) {
            if (predicate(frame.cell_center(r, c))) cells.indices.push_back(r * frame.ncols + c);
        }
    }
    return cells;
}

CellSet cells_in_region(const Frame& frame, const CellPredicate& predicate, const geom::BoundingBox& bounds) {
    CellSet cells{frame, {}};
    const double cs = frame.cellsize;
    auto clamp_index = [](double v, std::size_t n) -> std::ptrdiff_t {
        return std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(std::floor(v)), 0,
                                          static_cast<std::ptrdiff_t>(n) - 1);
    };
    const auto c0 = clamp_index((bounds.min_x - frame.xll) / cs - 1.0, frame.ncols);
    const auto c1 = clamp_index((bounds.max_x - frame.xll) / cs + 1.0, frame.ncols);
    const double top = frame.yll + static_cast<double>(frame.nrows) * cs;
    const auto r0 = clamp_index((top - bounds.max_y) / cs - 1.0, frame.nrows);
    const auto r1 = clamp_index((top - bounds.min_y) / cs + 1.0, frame.nrows);
    for (auto r = r0; r <= r1; ++r) {
        for (auto c = c0; c <= c1; ++c) {
            const auto center = frame.cell_center(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
            if (bounds.contains(center) && predicate(center)) {
                cells.indices.push_back(static_cast<std::size_t>(r) * frame.ncols + static_cast<std::size_t>(c));
            }
        }
    }
    return cells;
}

double zonal_aggregate(const Grid& grid, const CellSet& cells) {
    if (!grid.frame.aligned_with(cells.frame)) throw AlignmentError("cell set frame differs from grid frame");
    if (cells.empty()) throw NoDataError("empty zone");
    // Summation runs in ascending cell order whatever order the caller built.
    std::vector<std::size_t> sorted;
    const std::vector<std::size_t>* order = &cells.indices;
    if (!std::is_sorted(cells.indices.begin(), cells.indices.end())) {
        sorted = cells.indices;
        std::sort(sorted.begin(), sorted.end());
        order = &sorted;
    }
    if (grid.kind == Kind::continuous) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t idx : *order) {
            const double v = grid.values[idx];
            if (grid.is_nodata(v)) continue;
            sum += v;
            ++n;
        }
        if (n == 0) throw NoDataError("all zone cells are nodata");
        return sum / static_cast<double>(n);
    }
    std::map<double, std::size_t> counts;  // ordered: first maximum is the smallest code
    for (std::size_t idx : cells.indices) {
        const double v = grid.values[idx];
        if (!grid.is_nodata(v)) ++counts[v];
    }
    if (counts.empty()) throw NoDataError("all zone cells are nodata");
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it) {
        if (it->second > best->second) best = it;
    }
    return best->first;
}

RasterManifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ManifestError(std::string("raster manifest is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("layers") || !doc["layers"].is_object()) {
        throw ManifestError("raster manifest needs a 'layers' object");
    }
    RasterManifest manifest;
    for (const auto& [name, entry] : doc["layers"].items()) {
        if (!entry.is_object() || !entry.contains("path") || !entry.contains("kind")) {
            throw ManifestError("manifest layer '" + name + "' needs 'path' and 'kind'");
        }
        std::filesystem::path p = entry["path"].get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        manifest[name] = {p, parse_kind(entry["kind"].get<std::string>())};
    }
    return manifest;
}

RasterManifest read_manifest(const std::filesystem::path& path) {
    return parse_manifest(text::read_file(path), path.parent_path());
}

std::string format_manifest(const RasterManifest& manifest) {
    nlohmann::json layers = nlohmann::json::object();
    for (const auto& [name, entry] : manifest) {
        layers[name] = {{"path", entry.path.generic_string()}, {"kind", std::string(to_string(entry.kind))}};
    }
    return nlohmann::json{{"layers", layers}}.dump(2) + "\n";
}

LayerSet load_layers(const RasterManifest& manifest, const std::vector<std::string>& required) {
    for (const auto& name : required) {
        if (!manifest.contains(name)) throw ManifestError("raster manifest is missing required layer '" + name + "'");
    }
    LayerSet layers;
    for (const auto& [name, entry] : manifest) layers.emplace(name, read_grid(entry.path, entry.kind));
    check_alignment(layers);
    return layers;
}

}  // namespace rotmap::grid
