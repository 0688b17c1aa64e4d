#include "rotmap/synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "rotmap/error.hpp"
#include "rotmap/geojson.hpp"
#include "rotmap/predictors.hpp"
#include "rotmap/rng.hpp"
#include "rotmap/text.hpp"

namespace rotmap::synth {

using harvester::Assortment;
using harvester::HarvestObject;
using harvester::LogProduct;
using harvester::PositionSource;
using harvester::Species;
using harvester::StemRecord;

namespace {

constexpr double kCell = 16.0;
constexpr double kXll = 500000.0;
constexpr double kYll = 6700000.0;
constexpr long kSlotCells = 20;     // 320 m
constexpr long kMaxFootprintCells = 14;
constexpr long kMarginCells = 10;
constexpr long kMinClusterPitch = 125;  // 2 km
constexpr double kDbhSigma = 0.25;
constexpr double kStripSpacing = 16.0;
constexpr double kStripInset = 8.0;

double normal(Rng& rng, double mean, double sd) {
    std::normal_distribution<double> d(mean, sd);
    return d(rng.engine());
}

double beta(Rng& rng, double a, double b) {
    std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
    const double x = ga(rng.engine());
    const double y = gb(rng.engine());
    return x / (x + y);
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct CellBox {
    long col0 = 0, row0 = 0;  // lower-left cell, rows counted from the bottom
    long ncols = 0, nrows = 0;

    bool contains(long c, long r) const { return c >= col0 && c < col0 + ncols && r >= row0 && r < row0 + nrows; }
};

enum class SlotKind { stand, decoy, empty };

struct Site {
    SlotKind kind = SlotKind::stand;
    std::size_t cluster = 0;
    std::string segment_id;
    std::string object_id;
    CellBox footprint;  // stands only
    CellBox segment;
    double fx0 = 0, fx1 = 0, fy0 = 0, fy1 = 0;  // footprint in metres, edges off the grid lines
    double maturity = 0.0;
    double site_index = 0.0;
    int st_code = 0;
    int soil_code = 0;
    int ft_code = 31;
    double spruce_share = 0.0;  // of stems; empties use it as the segment attribute
    double target = 0.0;
    double cluster_effect = 0.0;
    std::uint64_t stream = 0;
};

geom::ShapeSet rectangle(double x0, double y0, double x1, double y1) {
    geom::Polygon p;
    p.exterior = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}};
    geom::ShapeSet s;
    s.polygons.push_back(std::move(p));
    return s;
}

std::string padded(const char* prefix, std::size_t v, int width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, v);
    return buf;
}

struct Field {
    double kx[3], ky[3], phase[3];

    double at(double x, double y) const {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += std::sin(kx[k] * x + ky[k] * y + phase[k]);
        return s / 3.0;
    }
};

Field make_field(std::uint64_t seed, std::uint64_t index) {
    Rng rng(seeds::derive(seed, "field", {index}));
    Field f{};
    for (int k = 0; k < 3; ++k) {
        const double wavelength = rng.uniform(3000.0, 8000.0);
        const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
        f.kx[k] = 2.0 * std::numbers::pi / wavelength * std::cos(angle);
        f.ky[k] = 2.0 * std::numbers::pi / wavelength * std::sin(angle);
        f.phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    return f;
}

std::vector<LogProduct> buck(double dbh_cm, double volume) {
    if (dbh_cm >= 16.0) {
        return {{Assortment::sawlog, 0.50 * volume, 490.0},
                {Assortment::sawlog, 0.25 * volume, 430.0},
                {Assortment::pulpwood, 0.20 * volume, 300.0},
                {Assortment::energy_wood, 0.05 * volume, std::nullopt}};
    }
    return {{Assortment::pulpwood, 0.80 * volume, 300.0}, {Assortment::energy_wood, 0.20 * volume, std::nullopt}};
}

/// Replaces `carved` m3 at the butt end with butt-rot assortments.
std::vector<LogProduct> carve(const std::vector<LogProduct>& logs, double carved) {
    std::vector<LogProduct> out;
    const double shares[3] = {0.15, 0.65, 0.20};
    const Assortment kinds[3] = {Assortment::br_cutoff, Assortment::br_pulpwood, Assortment::br_energy_wood};
    for (int k = 0; k < 3; ++k) {
        if (shares[k] * carved > 0.0) out.push_back({kinds[k], shares[k] * carved, std::nullopt});
    }
    double remaining = carved;
    for (const auto& log : logs) {
        if (remaining >= log.volume_m3) {
            remaining -= log.volume_m3;
            continue;
        }
        LogProduct rest = log;
        rest.volume_m3 = log.volume_m3 - remaining;
        if (remaining > 0.0) rest.length_cm.reset();
        remaining = 0.0;
        out.push_back(rest);
    }
    return out;
}

}  // namespace

double stem_volume(double dbh_cm) noexcept { return 1.23e-4 * std::pow(dbh_cm, 2.5); }

void validate(const ScenarioConfig& c) {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (c.n_clusters < 1) fail("n_clusters must be at least 1");
    if (c.stands_per_cluster < 1) fail("stands_per_cluster must be at least 1");
    if (c.area_sd_ha < 0 || c.stems_per_ha_sd < 0 || c.qmd_sd_cm < 0 || c.cluster_effect_sd < 0 ||
        c.residual_sd < 0) {
        fail("standard deviations must be non-negative");
    }
    if (c.area_min_ha < 0.35) {
        fail("area_min_ha must be at least 0.35 so stands survive the 0.3 ha filter after cell quantisation");
    }
    if (c.area_max_ha < c.area_min_ha) fail("area_max_ha is below area_min_ha");
    const double max_ha = static_cast<double>(kMaxFootprintCells * kMaxFootprintCells) * kCell * kCell / 1e4;
    if (c.area_max_ha > max_ha) fail("area_max_ha exceeds the largest footprint (" + text::shortest(max_ha) + " ha)");
    if (c.stems_per_ha_min * c.area_min_ha < 45.0) {
        fail("stems_per_ha_min x area_min_ha gives fewer than 45 stems; stands would fall under the 30-stem filter");
    }
    if (c.stems_per_ha_mean < c.stems_per_ha_min) fail("stems_per_ha_mean is below stems_per_ha_min");
    if (!(c.qmd_mean_cm > 0)) fail("qmd_mean_cm must be positive");
    for (double share : {c.head_position_share, c.spruce_share_min, c.spruce_share_max}) {
        if (!(share >= 0.0 && share <= 1.0)) fail("shares must lie in [0, 1]");
    }
    if (c.spruce_share_min > c.spruce_share_max) fail("spruce_share_min exceeds spruce_share_max");
    if (c.spruce_share_min < 0.6) {
        fail("spruce_share_min below 0.6 lets eligible stands fall under the 50 % spruce filter");
    }
    if (c.br_target_m3ha < 0) fail("br_target_m3ha must be non-negative");
    if (!(c.br_fraction_alpha > 0 && c.br_fraction_beta > 0)) fail("Beta shape parameters must be positive");
}

Scenario generate_scenario(const ScenarioConfig& config) {
    validate(config);
    Scenario sc;
    sc.config = config;

    // Layout: clusters on a lattice, sites on a slot lattice inside each cluster.
    std::vector<std::vector<SlotKind>> kinds(config.n_clusters);
    for (std::size_t c = 0; c < config.n_clusters; ++c) kinds[c].assign(config.stands_per_cluster, SlotKind::stand);
    for (std::size_t d = 0; d < config.decoy_stands; ++d) kinds[d % config.n_clusters].push_back(SlotKind::decoy);
    for (auto& k : kinds) k.insert(k.end(), config.empty_segments_per_cluster, SlotKind::empty);
    std::size_t max_slots = 0;
    for (const auto& k : kinds) max_slots = std::max(max_slots, k.size());
    const auto slots_side = static_cast<long>(std::ceil(std::sqrt(static_cast<double>(max_slots))));
    const long pitch = std::max(kMinClusterPitch, slots_side * kSlotCells + 44);
    const auto lattice = static_cast<long>(std::ceil(std::sqrt(static_cast<double>(config.n_clusters))));
    const auto lattice_rows = static_cast<long>((static_cast<long>(config.n_clusters) + lattice - 1) / lattice);
    sc.frame.ncols = static_cast<std::size_t>(2 * kMarginCells + lattice * pitch);
    sc.frame.nrows = static_cast<std::size_t>(2 * kMarginCells + lattice_rows * pitch);
    sc.frame.xll = kXll;
    sc.frame.yll = kYll;
    sc.frame.cellsize = kCell;
    auto X = [&](double col) { return kXll + col * kCell; };
    auto Y = [&](double row) { return kYll + row * kCell; };

    std::vector<double> cluster_effect(config.n_clusters);
    for (std::size_t c = 0; c < config.n_clusters; ++c) {
        Rng rng(seeds::derive(config.seed, "cluster", {c}));
        cluster_effect[c] = config.cluster_effect_sd > 0 ? normal(rng, 0.0, config.cluster_effect_sd) : 0.0;
    }

    std::vector<Site> sites;
    std::size_t segment_counter = 0, object_counter = 0;
    for (std::size_t c = 0; c < config.n_clusters; ++c) {
        const long base_col = kMarginCells + static_cast<long>(c) % lattice * pitch + 22;
        const long base_row = kMarginCells + static_cast<long>(c) / lattice * pitch + 22;
        for (std::size_t s = 0; s < kinds[c].size(); ++s) {
            Site site;
            site.kind = kinds[c][s];
            site.cluster = c;
            site.stream = seeds::derive(config.seed, "site", {c, s});
            Rng rng(site.stream);
            const long slot_col = base_col + static_cast<long>(s) % slots_side * kSlotCells + 1;
            const long slot_row = base_row + static_cast<long>(s) / slots_side * kSlotCells + 1;
            site.segment_id = padded("S", ++segment_counter, 5);

            const double area = std::clamp(normal(rng, config.area_mean_ha, config.area_sd_ha), config.area_min_ha,
                                           config.area_max_ha);
            const double aspect = rng.uniform(0.6, 1.6);
            const double cells = area * 1e4 / (kCell * kCell);
            long nc = std::clamp(std::lround(std::sqrt(cells * aspect)), 3L, kMaxFootprintCells);
            long nr = std::clamp(std::lround(cells / static_cast<double>(nc)), 3L, kMaxFootprintCells);
            const auto min_cells = static_cast<long>(std::ceil(config.area_min_ha * 1e4 / (kCell * kCell)));
            while (nc * nr < min_cells && nr < kMaxFootprintCells) ++nr;
            while (nc * nr < min_cells && nc < kMaxFootprintCells) ++nc;
            const long el = 1 + static_cast<long>(rng.index(2)), er = 1 + static_cast<long>(rng.index(2));
            const long eb = 1 + static_cast<long>(rng.index(2)), et = 1 + static_cast<long>(rng.index(2));
            site.footprint = {slot_col + el, slot_row + eb, nc, nr};
            site.segment = {slot_col, slot_row, el + nc + er, eb + nr + et};
            site.fx0 = X(static_cast<double>(site.footprint.col0)) - rng.uniform(0.5, 1.5);
            site.fx1 = X(static_cast<double>(site.footprint.col0 + nc)) + rng.uniform(0.5, 1.5);
            site.fy0 = Y(static_cast<double>(site.footprint.row0)) - rng.uniform(0.5, 1.5);
            site.fy1 = Y(static_cast<double>(site.footprint.row0 + nr)) + rng.uniform(0.5, 1.5);

            site.site_index = std::clamp(normal(rng, 14.0, 3.0), 6.0, 26.0);
            site.st_code = 11 + static_cast<int>(rng.index(5));
            site.soil_code = 1 + static_cast<int>(rng.index(5));
            switch (site.kind) {
                case SlotKind::stand:
                    // Harvested stands are mature: H95 stays above the 12 m mapping threshold.
                    site.maturity = std::max(-1.5, normal(rng, 0.0, 1.0));
                    site.spruce_share = rng.uniform(config.spruce_share_min, config.spruce_share_max);
                    site.ft_code = 31;
                    break;
                case SlotKind::decoy:
                    site.maturity = std::max(-1.5, normal(rng, 0.0, 1.0));
                    site.spruce_share = rng.uniform(0.15, 0.35);
                    site.ft_code = 33;
                    break;
                case SlotKind::empty:
                    site.maturity = normal(rng, -1.0, 1.5);
                    site.spruce_share = rng.uniform(0.2, 1.0);
                    site.ft_code = site.spruce_share >= 0.5 ? 31 : 33;
                    break;
            }
            if (site.kind != SlotKind::empty) {
                site.object_id = padded("H", ++object_counter, 4);
                site.cluster_effect = cluster_effect[c];
                const double base = config.br_target_m3ha *
                                    std::exp(config.maturity_effect * site.maturity -
                                             0.5 * config.maturity_effect * config.maturity_effect);
                const double noise = config.residual_sd > 0 ? normal(rng, 0.0, config.residual_sd) : 0.0;
                site.target = config.br_target_m3ha > 0 ? std::max(0.0, base + site.cluster_effect + noise) : 0.0;
            }
            sites.push_back(std::move(site));
        }
    }

    // Centre the eligible targets on the configured mean.
    double target_sum = 0.0;
    std::size_t eligible = 0;
    for (const auto& s : sites) {
        if (s.kind == SlotKind::stand) {
            target_sum += s.target;
            ++eligible;
        }
    }
    if (target_sum > 0.0) {
        const double scale = config.br_target_m3ha * static_cast<double>(eligible) / target_sum;
        for (auto& s : sites) s.target *= scale;
    }

    // Stems.
    const double frac_mean = config.br_fraction_alpha / (config.br_fraction_alpha + config.br_fraction_beta);
    for (auto& site : sites) {
        if (site.kind == SlotKind::empty) continue;
        Rng rng(seeds::derive(site.stream, "stems"));
        const double density = std::max(config.stems_per_ha_min,
                                        normal(rng, config.stems_per_ha_mean, config.stems_per_ha_sd));
        const double area_m2 = (site.fx1 - site.fx0) * (site.fy1 - site.fy0);
        const auto n = static_cast<std::size_t>(std::lround(density * area_m2 / 1e4));
        const double qmd = std::clamp(config.qmd_mean_cm + config.qmd_sd_cm * (0.7 * site.maturity +
                                                                              0.714 * normal(rng, 0.0, 1.0)),
                                      14.0, 32.0);
        const double mu = std::log(qmd) - kDbhSigma * kDbhSigma;

        HarvestObject obj;
        obj.object_id = site.object_id;
        obj.machine_id = padded("M", site.cluster + 1, 2);
        std::vector<double> strips;
        for (double x = site.fx0 + kStripInset; x <= site.fx1 - kStripInset; x += kStripSpacing) strips.push_back(x);
        const double strip_offset = (site.fx1 - kStripInset - strips.back()) / 2.0;
        for (auto& x : strips) x += strip_offset;
        for (std::size_t k = 0; k < n; ++k) {
            StemRecord stem;
            stem.stem_id = padded("", k + 1, 5);
            const double u = rng.uniform01();
            stem.species = u < site.spruce_share                      ? Species::from_code("spruce")
                           : u < site.spruce_share + (1 - site.spruce_share) / 2 ? Species::from_code("pine")
                                                                                  : Species::from_code("birch");
            stem.dbh_cm = std::clamp(std::exp(normal(rng, mu, kDbhSigma)), 8.0, 60.0);
            stem.dbh_cm = std::round(stem.dbh_cm * 10.0) / 10.0;
            const double tx = rng.uniform(site.fx0, site.fx1);
            const double ty = rng.uniform(site.fy0, site.fy1);
            if (rng.uniform01() < config.head_position_share) {
                stem.position_source = PositionSource::head;
                stem.x = tx;
                stem.y = ty;
            } else {
                stem.position_source = PositionSource::machine;
                stem.x = *std::min_element(strips.begin(), strips.end(), [&](double a, double b) {
                    return std::abs(a - tx) < std::abs(b - tx);
                });
                stem.y = std::clamp(ty, site.fy0 + kStripInset, site.fy1 - kStripInset);
            }
            stem.x = std::round(stem.x * 100.0) / 100.0;
            stem.y = std::round(stem.y * 100.0) / 100.0;
            stem.products = buck(stem.dbh_cm, stem_volume(stem.dbh_cm));
            obj.stems.push_back(std::move(stem));
        }

        // Stand intercept so the expected butt-rot volume meets the target.
        const double truth_area_ha =
            static_cast<double>(site.footprint.ncols * site.footprint.nrows) * kCell * kCell / 1e4;
        const double wanted = site.target * truth_area_ha;
        auto expected = [&](double b0) {
            double e = 0.0;
            for (const auto& s : obj.stems) {
                if (!s.species.is_spruce()) continue;
                e += logistic(b0 + config.rot_dbh_slope * (s.dbh_cm - qmd)) * frac_mean * s.total_volume();
            }
            return e;
        };
        double lo = -40.0, hi = 40.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (expected(mid) < wanted ? lo : hi) = mid;
        }
        const double b0 = 0.5 * (lo + hi);
        Rng rot(seeds::derive(site.stream, "rot"));
        for (auto& s : obj.stems) {
            if (!s.species.is_spruce() || wanted <= 0.0) continue;
            const double p = logistic(b0 + config.rot_dbh_slope * (s.dbh_cm - qmd));
            const bool infected = rot.uniform01() < p;
            const double frac = std::min(0.9, beta(rot, config.br_fraction_alpha, config.br_fraction_beta));
            if (infected) s.products = carve(s.products, frac * s.total_volume());
        }

        TruthRow row;
        row.object_id = site.object_id;
        row.segment_id = site.segment_id;
        row.stand_id = site.object_id + "/" + site.segment_id;
        row.cluster = site.cluster;
        row.eligible = site.kind == SlotKind::stand;
        row.area_ha = truth_area_ha;
        row.n_stems = obj.stems.size();
        double spruce = 0.0;
        for (const auto& s : obj.stems) {
            row.total_vol_m3 += s.total_volume();
            if (s.species.is_spruce()) spruce += s.total_volume();
            row.br_vol_m3 += harvester::stem_br_volume(s);
        }
        row.spruce_pct = row.total_vol_m3 > 0 ? 100.0 * spruce / row.total_vol_m3 : 0.0;
        row.br_m3ha = row.br_vol_m3 / row.area_ha;
        row.br_target_m3ha = site.target;
        row.maturity = site.maturity;
        row.cluster_effect = site.cluster_effect;
        sc.truth.push_back(row);
        site.spruce_share = row.spruce_pct / 100.0;
        sc.objects.push_back(std::move(obj));
    }
    std::sort(sc.truth.begin(), sc.truth.end(),
              [](const TruthRow& a, const TruthRow& b) { return a.stand_id < b.stand_id; });

    for (const auto& site : sites) {
        stands::Segment seg;
        seg.segment_id = site.segment_id;
        seg.shape = rectangle(X(static_cast<double>(site.segment.col0)), Y(static_cast<double>(site.segment.row0)),
                              X(static_cast<double>(site.segment.col0 + site.segment.ncols)),
                              Y(static_cast<double>(site.segment.row0 + site.segment.nrows)));
        seg.spruce_pct = std::round(site.spruce_share * 1000.0) / 10.0;
        sc.segments.push_back(std::move(seg));
    }

    // Rasters. zone[i] is the site covering cell i (its segment), or -1.
    const auto ncols = static_cast<long>(sc.frame.ncols), nrows = static_cast<long>(sc.frame.nrows);
    std::vector<int> zone(sc.frame.size(), -1);
    for (std::size_t s = 0; s < sites.size(); ++s) {
        const auto& b = sites[s].segment;
        for (long r = b.row0; r < b.row0 + b.nrows; ++r) {
            for (long c = b.col0; c < b.col0 + b.ncols; ++c) {
                zone[static_cast<std::size_t>((nrows - 1 - r) * ncols + c)] = static_cast<int>(s);
            }
        }
    }
    const Field background = make_field(config.seed, 0), altitude = make_field(config.seed, 1),
                slope = make_field(config.seed, 2), precipitation = make_field(config.seed, 3);
    const auto names = raster_layer_names();
    for (std::size_t li = 0; li < names.size(); ++li) {
        const auto& name = names[li];
        const auto& info = kPredictors[predictor_index(name)];
        grid::Grid g;
        g.frame = sc.frame;
        g.nodata = -9999.0;
        g.kind = info.categorical ? grid::Kind::categorical : grid::Kind::continuous;
        g.values.resize(sc.frame.size());
        Rng rng(seeds::derive(config.seed, "raster", {li}));
        for (long r = 0; r < nrows; ++r) {
            for (long c = 0; c < ncols; ++c) {
                const auto i = static_cast<std::size_t>(r * ncols + c);
                const auto p = sc.frame.cell_center(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
                const Site* site = zone[i] >= 0 ? &sites[static_cast<std::size_t>(zone[i])] : nullptr;
                const double m = site ? site->maturity : -1.0 + 1.2 * background.at(p.x, p.y);
                const double h95 = 17.0 + 3.0 * m;
                const double alt = 250.0 + 150.0 * altitude.at(p.x, p.y);
                double v = 0.0;
                if (name == "H95_ALS") v = h95 + normal(rng, 0.0, 0.7);
                else if (name == "Hmean_ALS") v = 0.65 * h95 + normal(rng, 0.0, 0.5);
                else if (name == "H25_ALS") v = 0.4 * h95 + normal(rng, 0.0, 0.5);
                else if (name == "Hvar_ALS") v = std::max(0.1, std::pow(0.22 * h95, 2) + normal(rng, 0.0, 1.0));
                else if (name == "D2_ALS") v = std::clamp(0.55 + 0.06 * m + normal(rng, 0.0, 0.05), 0.0, 1.0);
                else if (name == "NIR_S2") v = 0.22 - 0.015 * m + normal(rng, 0.0, 0.01);
                else if (name == "AL_CLI") v = alt + normal(rng, 0.0, 2.0);
                else if (name == "SL_TER") v = std::abs(8.0 * slope.at(p.x, p.y) + normal(rng, 0.0, 2.0));
                else if (name == "TS_CLI") v = 1350.0 - 0.9 * alt + normal(rng, 0.0, 5.0);
                else if (name == "PS_CLI") v = 900.0 + 150.0 * precipitation.at(p.x, p.y) + normal(rng, 0.0, 5.0);
                else if (name == "DC_CLI") v = 40.0 + 3.0 * (p.x - kXll) / 1000.0 + normal(rng, 0.0, 0.5);
                else if (name == "BON_SR16") v = (site ? site->site_index : 11.0) + normal(rng, 0.0, 0.5);
                else if (name == "FT_AR5") {
                    const double u = rng.uniform01();
                    v = site && u < 0.8 ? site->ft_code : 31 + static_cast<int>(rng.index(3));
                } else if (name == "ST_AR5") {
                    const double u = rng.uniform01();
                    v = site && u < 0.8 ? site->st_code : 11 + static_cast<int>(rng.index(5));
                } else if (name == "SOIL") {
                    const double u = rng.uniform01();
                    v = site && u < 0.8 ? site->soil_code : 1 + static_cast<int>(rng.index(5));
                }
                if (!info.categorical) v = std::round(v * 1000.0) / 1000.0;
                g.values[i] = v;
            }
        }
        sc.layers.emplace(name, std::move(g));
    }
    return sc;
}

std::string format_truth(const std::vector<TruthRow>& truth) {
    std::string out =
        "stand_id,object_id,segment_id,cluster,eligible,area_ha,n_stems,total_vol_m3,spruce_pct,br_vol_m3,br_m3ha,"
        "br_target_m3ha,maturity,cluster_effect\n";
    for (const auto& t : truth) {
        out += t.stand_id + ',' + t.object_id + ',' + t.segment_id + ',' + std::to_string(t.cluster) + ',' +
               (t.eligible ? "1" : "0") + ',' + text::shortest(t.area_ha) + ',' + std::to_string(t.n_stems) + ',' +
               text::shortest(t.total_vol_m3) + ',' + text::shortest(t.spruce_pct) + ',' +
               text::shortest(t.br_vol_m3) + ',' + text::shortest(t.br_m3ha) + ',' + text::shortest(t.br_target_m3ha) +
               ',' + text::shortest(t.maturity) + ',' + text::shortest(t.cluster_effect) + '\n';
    }
    return out;
}

std::vector<TruthRow> parse_truth(std::string_view csv) {
    std::istringstream in{std::string(csv)};
    std::string line;
    if (!std::getline(in, line)) throw FormatError("truth table is empty");
    const auto header = text::split_csv(line);
    if (header.size() != 14 || header[0] != "stand_id") throw FormatError("truth table has an unexpected header");
    std::vector<TruthRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const auto f = text::split_csv(line);
        const auto where = "truth line " + std::to_string(line_no);
        if (f.size() != 14) throw FormatError(where + ": wrong field count");
        TruthRow t;
        t.stand_id = f[0];
        t.object_id = f[1];
        t.segment_id = f[2];
        t.cluster = static_cast<std::size_t>(text::parse_int(f[3], where));
        t.eligible = text::parse_int(f[4], where) != 0;
        t.area_ha = text::parse_double(f[5], where);
        t.n_stems = static_cast<std::size_t>(text::parse_int(f[6], where));
        t.total_vol_m3 = text::parse_double(f[7], where);
        t.spruce_pct = text::parse_double(f[8], where);
        t.br_vol_m3 = text::parse_double(f[9], where);
        t.br_m3ha = text::parse_double(f[10], where);
        t.br_target_m3ha = text::parse_double(f[11], where);
        t.maturity = text::parse_double(f[12], where);
        t.cluster_effect = text::parse_double(f[13], where);
        rows.push_back(std::move(t));
    }
    return rows;
}

ScenarioFiles write_scenario(const Scenario& sc, const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    ScenarioFiles files;
    std::error_code ec;
    fs::create_directories(out_dir / "harvester", ec);
    fs::create_directories(out_dir / "rasters", ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

    nlohmann::json index;
    index["harvester"] = nlohmann::json::array();
    for (const auto& obj : sc.objects) {
        const auto rel = fs::path("harvester") / (obj.object_id + ".hpr");
        text::write_file(out_dir / rel, harvester::serialize_hpr(obj));
        files.harvester.push_back(out_dir / rel);
        index["harvester"].push_back(rel.generic_string());
    }
    files.segments = out_dir / "segments.geojson";
    {
        auto features = nlohmann::json::array();
        for (const auto& seg : sc.segments) {
            features.push_back(geom::make_feature(geom::to_geojson_geometry(seg.shape),
                                                  {{"segment_id", seg.segment_id}, {"spruce_pct", *seg.spruce_pct}}));
        }
        text::write_file(files.segments, geom::make_feature_collection(features, sc.config.crs_name).dump() + "\n");
    }
    index["segments"] = "segments.geojson";

    grid::RasterManifest manifest;
    for (const auto& [name, g] : sc.layers) {
        grid::write_grid(out_dir / "rasters" / (name + ".asc"), g);
        manifest[name] = {name + ".asc", g.kind};
    }
    files.raster_manifest = out_dir / "rasters" / "manifest.json";
    text::write_file(files.raster_manifest, grid::format_manifest(manifest));
    index["rasters"] = "rasters/manifest.json";

    files.truth = out_dir / "truth.csv";
    text::write_file(files.truth, format_truth(sc.truth));
    index["truth"] = "truth.csv";

    const auto& c = sc.config;
    index["config"] = {{"n_clusters", c.n_clusters},
                       {"stands_per_cluster", c.stands_per_cluster},
                       {"decoy_stands", c.decoy_stands},
                       {"empty_segments_per_cluster", c.empty_segments_per_cluster},
                       {"br_target_m3ha", c.br_target_m3ha},
                       {"cluster_effect_sd", c.cluster_effect_sd},
                       {"residual_sd", c.residual_sd},
                       {"maturity_effect", c.maturity_effect},
                       {"head_position_share", c.head_position_share},
                       {"seed", c.seed}};
    index["crs"] = c.crs_name;
    files.index = out_dir / "scenario.json";
    text::write_file(files.index, index.dump(2) + "\n");
    return files;
}

}  // namespace rotmap::synth
