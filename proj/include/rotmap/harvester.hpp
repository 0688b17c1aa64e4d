#pragma once

// Harvester production records: a simplified StanForD-style XML subset,
// stem-level butt-rot accounting, and tree-position post-processing.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rotmap::harvester {

enum class Assortment { sawlog, pulpwood, energy_wood, br_pulpwood, br_energy_wood, br_cutoff };

/// True for the three butt-rot damaged assortments.
constexpr bool is_butt_rot(Assortment a) noexcept {
    return a == Assortment::br_pulpwood || a == Assortment::br_energy_wood || a == Assortment::br_cutoff;
}

std::string_view to_string(Assortment a) noexcept;
std::optional<Assortment> parse_assortment(std::string_view code) noexcept;

struct LogProduct {
    Assortment assortment = Assortment::sawlog;
    double volume_m3 = 0.0;  // solid over bark
    std::optional<double> length_cm;

    bool operator==(const LogProduct&) const = default;
};

enum class SpeciesKind { spruce, pine, birch, other };

struct Species {
    SpeciesKind kind = SpeciesKind::other;
    std::string code;  // canonical name for known kinds, raw code for `other`

    static Species from_code(std::string_view code);
    bool is_spruce() const noexcept { return kind == SpeciesKind::spruce; }

    bool operator==(const Species&) const = default;
};

enum class PositionSource { head, machine };

std::string_view to_string(PositionSource s) noexcept;
std::optional<PositionSource> parse_position_source(std::string_view s) noexcept;

struct StemRecord {
    std::string stem_id;
    Species species;
    double dbh_cm = 0.0;
    double x = 0.0;  // m, planar national grid
    double y = 0.0;
    PositionSource position_source = PositionSource::head;
    std::vector<LogProduct> products;

    /// Sum of all product volumes, butt-rot products included.
    double total_volume() const noexcept;

    bool operator==(const StemRecord&) const = default;
};

struct HarvestObject {
    std::string object_id;
    std::string machine_id;
    std::vector<StemRecord> stems;

    bool operator==(const HarvestObject&) const = default;
};

struct ParseDiagnostics {
    std::size_t ignored_elements = 0;  // elements outside the supported subset
};

/// Parses one production file. Throws ParseError on malformed XML and
/// SchemaError on content that breaks the supported subset.
HarvestObject parse_hpr(std::string_view xml, ParseDiagnostics* diagnostics = nullptr);

/// Canonical XML in internal units (cm, m3); parse_hpr(serialize_hpr(o)) == o.
std::string serialize_hpr(const HarvestObject& object);

struct Violation {
    std::string stem_id;
    std::string rule;

    bool operator==(const Violation&) const = default;
};

inline constexpr std::string_view kRuleNonpositiveDbh = "nonpositive dbh";
inline constexpr std::string_view kRuleNoProducts = "no products";
inline constexpr std::string_view kRuleBrExceedsTotal = "BR volume exceeds total volume";
inline constexpr std::string_view kRuleBrOnNonSpruce = "BR on non-spruce";

std::vector<Violation> validate(const HarvestObject& object);

/// Butt-rot volume of a stem in m3.
double stem_br_volume(const StemRecord& stem) noexcept;

/// Machine-positioned stems get independent U(-8, 8) m offsets on x and y,
/// drawn from a stream keyed by (seed, object_id, stem_id). Head-positioned
/// stems are returned unchanged.
HarvestObject simulate_head_positions(const HarvestObject& object, std::uint64_t seed);

inline constexpr double kHeadJitterHalfWidth = 8.0;

/// One row of the canonical tree table.
struct TreeRecord {
    std::string stem_id;
    std::string object_id;
    Species species;
    double dbh_cm = 0.0;
    double x = 0.0;
    double y = 0.0;
    PositionSource position_source = PositionSource::head;
    double total_volume_m3 = 0.0;
    double br_volume_m3 = 0.0;

    bool operator==(const TreeRecord&) const = default;
};

std::vector<TreeRecord> to_tree_records(const HarvestObject& object);

/// CSV with header stem_id,object_id,species,dbh_cm,x,y,pos_source,total_vol_m3,br_vol_m3.
std::string write_tree_table(const std::vector<TreeRecord>& trees);
std::vector<TreeRecord> read_tree_table(std::string_view csv);

}  // namespace rotmap::harvester
