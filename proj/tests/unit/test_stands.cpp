#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <cmath>
#include <random>
#include <set>
#include <string>

#include "geojson_check.hpp"
#include "rotmap/error.hpp"
#include "rotmap/geojson.hpp"
#include "rotmap/geometry.hpp"
#include "rotmap/grid.hpp"
#include "rotmap/predictors.hpp"
#include "rotmap/stands.hpp"

using namespace rotmap;
using namespace rotmap::stands;
using harvester::PositionSource;
using harvester::Species;

namespace {

geom::ShapeSet rect(double x0, double y0, double x1, double y1) {
    return {{geom::Polygon{{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}}, {}}}};
}

TreeRecord tree(std::string id, std::string object, double x, double y, double dbh = 25.0, double vol = 0.5,
                double br = 0.0, std::string species = "spruce") {
    return {std::move(id), std::move(object), Species::from_code(species), dbh, x, y, PositionSource::head, vol, br};
}

// Trees on a regular lattice covering [x0, x1] x [y0, y1].
std::vector<TreeRecord> lattice(const std::string& object, double x0, double y0, double x1, double y1, double step,
                                std::size_t first_id = 0) {
    std::vector<TreeRecord> trees;
    std::size_t id = first_id;
    for (double x = x0; x <= x1 + 1e-9; x += step)
        for (double y = y0; y <= y1 + 1e-9; y += step) trees.push_back(tree(std::to_string(id++), object, x, y));
    return trees;
}

std::set<std::size_t> segment_cells(const grid::Frame& f, const Segment& s) {
    std::set<std::size_t> out;
    for (std::size_t r = 0; r < f.nrows; ++r)
        for (std::size_t c = 0; c < f.ncols; ++c)
            if (geom::contains(s.shape, f.cell_center(r, c))) out.insert(r * f.ncols + c);
    return out;
}

grid::Grid constant_grid(const grid::Frame& f, double value, grid::Kind kind) {
    grid::Grid g;
    g.frame = f;
    g.kind = kind;
    g.nodata = -9999.0;
    g.values.assign(f.size(), value);
    return g;
}

grid::LayerSet full_layers(const grid::Frame& f) {
    grid::LayerSet layers;
    double v = 1.0;
    for (const auto& info : kPredictors) {
        if (info.source != PredictorSource::raster) continue;
        layers.emplace(std::string(info.name),
                       constant_grid(f, info.categorical ? 3.0 : v, info.categorical ? grid::Kind::categorical
                                                                                      : grid::Kind::continuous));
        v += 1.0;
    }
    return layers;
}

HarvestedStand stand_with(double area_ha, std::size_t stems, double spruce_pct) {
    HarvestedStand s;
    s.stand_id = "O/S";
    s.area_ha = area_ha;
    for (std::size_t i = 0; i < stems; ++i) s.stem_ids.push_back(std::to_string(i));
    s.total_volume_m3 = 100.0;
    s.spruce_volume_m3 = spruce_pct;
    return s;
}

const grid::Frame kFrame{20, 20, 0.0, 0.0, 16.0};

}  // namespace

TEST_CASE("filter drops by area, stem count and composition") {
    auto r = filter_stands({stand_with(0.25, 100, 90.0)});
    REQUIRE(r.dropped.size() == 1);
    CHECK(r.dropped[0].reasons == std::vector<std::string>{"area"});
    r = filter_stands({stand_with(1.0, 29, 90.0)});
    REQUIRE(r.dropped.size() == 1);
    CHECK(r.dropped[0].reasons == std::vector<std::string>{"stems"});
    r = filter_stands({stand_with(1.0, 100, 49.0)});
    REQUIRE(r.dropped.size() == 1);
    CHECK(r.dropped[0].reasons == std::vector<std::string>{"composition"});
    r = filter_stands({stand_with(0.3, 30, 50.0), stand_with(0.1, 3, 10.0)});
    CHECK(r.kept.size() == 1);
    REQUIRE(r.dropped.size() == 1);
    CHECK(r.dropped[0].reasons == std::vector<std::string>{"area", "stems", "composition"});
}

TEST_CASE("dbh quantile uses linear interpolation") {
    const std::vector<double> v{100, 30, 20, 10, 40, 50, 60, 70, 80, 90};
    CHECK(dbh_quantile(v, 0.10) == doctest::Approx(19.0).epsilon(1e-12));
    CHECK(dbh_quantile(v, 0.90) == doctest::Approx(91.0).epsilon(1e-12));
    CHECK(dbh_quantile(v, 0.0) == 10.0);
    CHECK(dbh_quantile(v, 1.0) == 100.0);
    CHECK(dbh_quantile(std::vector<double>{7.5}, 0.3) == 7.5);
    CHECK_THROWS_AS(dbh_quantile(std::vector<double>{}, 0.5), EmptyInput);
    CHECK_THROWS_AS(dbh_quantile(v, 1.5), DataError);
    // Quantiles are monotone in p.
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(5, 60);
    std::vector<double> w(37);
    for (auto& x : w) x = u(gen);
    double prev = -1.0;
    for (int k = 0; k <= 100; ++k) {
        const double q = dbh_quantile(w, k / 100.0);
        CHECK(q >= prev);
        prev = q;
    }
}

TEST_CASE("harvester feature examples") {
    HarvestedStand s;
    s.stand_id = "O/S";
    s.area_ha = 1.0;
    const std::vector<TreeRecord> same{tree("1", "O", 0, 0, 20.0), tree("2", "O", 0, 0, 20.0)};
    CHECK(harvester_features(s, same).qmd_cm == 20.0);
    const std::vector<TreeRecord> mixed{tree("1", "O", 0, 0, 10.0), tree("2", "O", 0, 0, 30.0),
                                        tree("3", "O", 0, 0, 50.0, 0.5, 0.0, "pine")};
    const auto f = harvester_features(s, mixed);
    CHECK(f.qmd_cm == doctest::Approx(std::sqrt(500.0)).epsilon(1e-12));
    CHECK(f.stems_per_ha == 3.0);
    // DR uses all stems: q90 - q10 of {10, 30, 50} = 46 - 14.
    CHECK(f.dbh_range_cm == doctest::Approx(32.0));
    CHECK(f.spruce_pct == doctest::Approx(200.0 / 3.0));
    const std::vector<TreeRecord> heavy{tree("1", "O", 0, 0, 30.0, 216.3)};
    CHECK(harvester_features(s, heavy).volume_m3ha == doctest::Approx(216.3));
    s.area_ha = 0.5;
    CHECK(harvester_features(s, heavy).volume_m3ha == doctest::Approx(432.6));
    const std::vector<TreeRecord> pines{tree("1", "O", 0, 0, 30.0, 1.0, 0.0, "pine")};
    CHECK_THROWS_AS(harvester_features(s, pines), DataError);
    SpeciesPolicy policy;
    policy.spruce_codes = {"spruce", "pine"};
    CHECK(harvester_features(s, pines, policy).spruce_pct == 100.0);
}

TEST_CASE("trees map to their unique containing segment") {
    const std::vector<Segment> segs{{"A", rect(0, 0, 10, 10), {}}, {"B", rect(10, 0, 20, 10), {}}};
    const std::vector<TreeRecord> trees{tree("1", "O", 5, 5), tree("2", "O", 15, 5), tree("3", "O", 50, 5)};
    const auto a = assign_trees_to_segments(trees, segs);
    CHECK(a[0] == 0u);
    CHECK(a[1] == 1u);
    CHECK_FALSE(a[2].has_value());
    const std::vector<TreeRecord> edge{tree("4", "O", 10, 5)};
    try {
        assign_trees_to_segments(edge, segs);
        FAIL("expected AmbiguityError");
    } catch (const AmbiguityError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("A") != std::string::npos);
        CHECK(msg.find("B") != std::string::npos);
    }
}

TEST_CASE("trees filling a segment give a stand covering the segment cells") {
    const std::vector<Segment> segs{{"S1", rect(32, 32, 160, 160), {}}};
    const auto trees = lattice("O1", 34, 34, 158, 158, 4.0);
    const auto r = delineate_stands(trees, segs, kFrame);
    REQUIRE(r.stands.size() == 1);
    const auto& st = r.stands[0];
    const auto oracle = segment_cells(kFrame, segs[0]);
    CHECK(oracle.size() == 64);
    CHECK(std::set<std::size_t>(st.cells.indices.begin(), st.cells.indices.end()) == oracle);
    CHECK(st.area_ha == doctest::Approx(64 * 256.0 / 1e4));
    CHECK(std::abs(st.area_ha * 1e4 - segs[0].shape.area()) <= 256.0);
    CHECK(st.stem_ids.size() == trees.size());
    CHECK(st.stand_id == "O1/S1");
    CHECK(st.centroid_x == doctest::Approx(96.0));
    CHECK(st.centroid_y == doctest::Approx(96.0));
    CHECK(st.total_volume_m3 == doctest::Approx(0.5 * trees.size()));
}

TEST_CASE("trees covering half a segment give a smaller stand") {
    const std::vector<Segment> segs{{"S1", rect(32, 32, 160, 160), {}}};
    const auto trees = lattice("O1", 34, 34, 90, 158, 4.0);
    const auto r = delineate_stands(trees, segs, kFrame);
    REQUIRE(r.stands.size() == 1);
    // Buffered shape reaches x = 92, so cell centre columns 40, 56, 72 and 88 qualify.
    CHECK(r.stands[0].cells.size() == 32);
    CHECK(r.stands[0].area_ha * 1e4 < segs[0].shape.area());
}

TEST_CASE("objects with fewer than three positions are skipped with a warning") {
    const std::vector<Segment> segs{{"S1", rect(32, 32, 160, 160), {}}};
    auto trees = lattice("O1", 34, 34, 158, 158, 4.0);
    trees.push_back(tree("x1", "TINY", 50, 50));
    trees.push_back(tree("x2", "TINY", 60, 60));
    const auto r = delineate_stands(trees, segs, kFrame);
    CHECK(r.stands.size() == 1);
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].find("TINY") != std::string::npos);
}

TEST_CASE("each object-segment pair becomes its own stand") {
    const std::vector<Segment> segs{{"S1", rect(32, 32, 96, 160), {}}, {"S2", rect(96, 32, 160, 160), {}}};
    auto trees = lattice("O1", 34, 34, 94, 158, 4.0);
    const auto more = lattice("O2", 98, 34, 158, 158, 4.0, 10000);
    trees.insert(trees.end(), more.begin(), more.end());
    const auto r = delineate_stands(trees, segs, kFrame);
    REQUIRE(r.stands.size() == 2);
    CHECK(r.stands[0].stand_id == "O1/S1");
    CHECK(r.stands[1].stand_id == "O2/S2");
}

TEST_CASE("stand cells are a subset of segment cells and members satisfy both containments") {
    std::mt19937_64 gen(12);
    std::uniform_real_distribution<double> u(0.0, 320.0);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Segment> segs;
        for (int k = 0; k < 4; ++k) {
            const double x0 = 80.0 * k + 1.0;
            segs.push_back({"S" + std::to_string(k), rect(x0, 20.0, x0 + 78.0, 300.0), {}});
        }
        std::vector<TreeRecord> trees;
        for (int i = 0; i < 300; ++i) trees.push_back(tree(std::to_string(i), i % 2 ? "A" : "B", u(gen), u(gen)));
        const auto assigned = assign_trees_to_segments(trees, segs);
        const auto r = delineate_stands(trees, segs, kFrame);
        for (const auto& st : r.stands) {
            const Segment* seg = nullptr;
            for (const auto& s : segs)
                if (s.segment_id == st.segment_id) seg = &s;
            REQUIRE(seg != nullptr);
            const auto oracle = segment_cells(kFrame, *seg);
            for (auto idx : st.cells.indices) CHECK(oracle.contains(idx));
            CHECK(st.area_ha == doctest::Approx(st.cells.size() * 256.0 / 1e4));
            std::vector<geom::Point> object_pts;
            for (const auto& t : trees)
                if (t.object_id == st.object_id) object_pts.push_back({t.x, t.y});
            const auto shape = geom::alpha_shape(object_pts, 25.0);
            for (const auto& id : st.stem_ids) {
                const auto it = std::find_if(trees.begin(), trees.end(),
                                             [&](const TreeRecord& t) { return t.stem_id == id; });
                REQUIRE(it != trees.end());
                CHECK(it->object_id == st.object_id);
                CHECK(geom::contains(seg->shape, {it->x, it->y}));
                CHECK(geom::within_buffer({it->x, it->y}, shape, 2.0));
                CHECK(assigned[static_cast<std::size_t>(it - trees.begin())].has_value());
            }
        }
    }
}

TEST_CASE("zonal H95 over a four-cell stand") {
    const grid::Frame f{2, 2, 0.0, 0.0, 16.0};
    auto layers = full_layers(f);
    layers.at("H95_ALS").values = {11, 12, 13, 14};
    HarvestedStand st;
    st.stand_id = "O/S";
    st.cells = {f, {0, 1, 2, 3}};
    st.area_ha = 4 * 256.0 / 1e4;
    const auto row = raster_predictors(st.cells, layers);
    CHECK(row[predictor_index("H95_ALS")] == 12.5);
    CHECK(row[predictor_index("X")] == 16.0);
    CHECK(row[predictor_index("Y")] == 16.0);
    CHECK(row[predictor_index("SOIL")] == 3.0);
}

TEST_CASE("response is butt-rot volume per hectare") {
    const grid::Frame f{10, 10, 0.0, 0.0, 10.0};  // exactly one hectare
    const auto layers = full_layers(f);
    std::vector<std::size_t> all(100);
    std::iota(all.begin(), all.end(), 0);
    HarvestedStand st;
    st.stand_id = "O/S";
    st.object_id = "O";
    st.cells = {f, all};
    st.area_ha = 1.0;
    std::vector<TreeRecord> trees;
    for (int i = 0; i < 10; ++i) {
        trees.push_back(tree(std::to_string(i), "O", 50, 50, 30.0, 21.63, 2.39));
        st.stem_ids.push_back(std::to_string(i));
    }
    auto r = assemble_samples(std::span(&st, 1), trees, layers, f);
    REQUIRE(r.samples.size() == 1);
    CHECK(r.samples[0].br_vol == doctest::Approx(23.9).epsilon(1e-12));
    CHECK(r.samples[0].get("V_HRV") == doctest::Approx(216.3).epsilon(1e-12));
    for (auto& t : trees) t.br_volume_m3 = 0.0;
    r = assemble_samples(std::span(&st, 1), trees, layers, f);
    CHECK(r.samples[0].br_vol == 0.0);
}

TEST_CASE("a missing or mistyped predictor layer fails loudly") {
    const grid::Frame f{2, 2, 0.0, 0.0, 16.0};
    HarvestedStand st;
    st.stand_id = "O/S";
    st.cells = {f, {0}};
    st.area_ha = 0.0256;
    st.stem_ids = {"1"};
    const std::vector<TreeRecord> trees{tree("1", "O", 8, 24)};
    st.object_id = "O";
    for (const auto& name : raster_layer_names()) {
        auto layers = full_layers(f);
        layers.erase(name);
        CHECK_THROWS_AS(assemble_samples(std::span(&st, 1), trees, layers, f), ManifestError);
    }
    auto layers = full_layers(f);
    layers.at("SOIL").kind = grid::Kind::continuous;
    CHECK_THROWS_AS(assemble_samples(std::span(&st, 1), trees, layers, f), ManifestError);
}

TEST_CASE("an all-nodata zone drops only that stand") {
    const grid::Frame f{2, 1, 0.0, 0.0, 16.0};
    auto layers = full_layers(f);
    layers.at("NIR_S2").values = {-9999.0, 0.2};
    std::vector<HarvestedStand> stands(2);
    std::vector<TreeRecord> trees{tree("1", "O", 8, 8), tree("2", "O", 24, 8)};
    for (std::size_t i = 0; i < 2; ++i) {
        stands[i].stand_id = "O/S" + std::to_string(i);
        stands[i].object_id = "O";
        stands[i].cells = {f, {i}};
        stands[i].area_ha = 0.0256;
        stands[i].stem_ids = {std::to_string(i + 1)};
    }
    const auto r = assemble_samples(stands, trees, layers, f);
    REQUIRE(r.samples.size() == 1);
    CHECK(r.samples[0].stand_id == "O/S1");
    REQUIRE(r.dropped.size() == 1);
    CHECK(r.dropped[0].first == "O/S0");
}

TEST_CASE("assembly is independent of stand order and thread count") {
    const std::vector<Segment> segs{{"S1", rect(32, 32, 96, 160), {}}, {"S2", rect(96, 32, 160, 160), {}},
                                    {"S3", rect(160, 32, 300, 160), {}}};
    std::vector<TreeRecord> trees;
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> ux(34, 298), uy(34, 158), ud(10, 40), uv(0.1, 1.2), ub(0, 1);
    for (int i = 0; i < 600; ++i) {
        const double v = uv(gen);
        trees.push_back(tree(std::to_string(i), i < 300 ? "A" : "B", ux(gen), uy(gen), ud(gen), v,
                             ub(gen) < 0.3 ? v * ub(gen) : 0.0, i % 7 ? "spruce" : "birch"));
    }
    auto f = kFrame;
    auto layers = full_layers(f);
    std::uniform_real_distribution<double> noise(0, 30);
    for (auto& [name, g] : layers)
        if (g.kind == grid::Kind::continuous)
            for (auto& v : g.values) v = noise(gen);
    auto stands = delineate_stands(trees, segs, f).stands;
    REQUIRE(stands.size() >= 4);
    const auto reference = write_stand_table(assemble_samples(stands, trees, layers, f).samples);
    std::reverse(stands.begin(), stands.end());
    CHECK(write_stand_table(assemble_samples(stands, trees, layers, f).samples) == reference);
    CHECK(write_stand_table(assemble_samples(stands, trees, layers, f, {}, 4).samples) == reference);

    for (const auto& s : assemble_samples(stands, trees, layers, f).samples) {
        CHECK(s.br_vol >= 0.0);
        CHECK(s.br_vol <= s.get("V_HRV"));
        CHECK(s.get("SPP_HRV") >= 0.0);
        CHECK(s.get("SPP_HRV") <= 100.0);
        for (double v : s.predictors) CHECK(std::isfinite(v));
        // br_vol / V_HRV recovers the butt-rot share of harvested volume.
        const auto st = std::find_if(stands.begin(), stands.end(), [&](auto& x) { return x.stand_id == s.stand_id; });
        CHECK(100.0 * s.br_vol / s.get("V_HRV") ==
              doctest::Approx(100.0 * st->br_volume_m3 / st->total_volume_m3).epsilon(1e-9));
    }
}

TEST_CASE("stand table round-trips at six significant digits") {
    StandSample a;
    a.stand_id = "H0001/S00001";
    a.br_vol = 23.912345678;
    for (std::size_t i = 0; i < kPredictorCount; ++i) a.predictors[i] = 1.0 / (i + 3.0) * std::pow(10.0, i % 7);
    a.predictors[predictor_index("X")] = 512345.678;
    StandSample b = a;
    b.stand_id = "H0002/S00004";
    b.br_vol = 0.0;
    const std::vector<StandSample> samples{a, b};
    const auto csv = write_stand_table(samples);
    CHECK(csv.substr(0, csv.find('\n')).rfind("stand_id,br_vol,V_HRV,N_HRV,QMD_HRV", 0) == 0);
    CHECK(csv.find("23.9123,") != std::string::npos);
    const auto back = read_stand_table(csv);
    REQUIRE(back.size() == 2);
    CHECK(back[0].stand_id == a.stand_id);
    for (std::size_t i = 0; i < kPredictorCount; ++i)
        CHECK(back[0].predictors[i] == doctest::Approx(a.predictors[i]).epsilon(5e-6));
    CHECK(write_stand_table(back) == csv);
    CHECK_THROWS_AS(read_stand_table("stand_id,br_vol\nx,1\n"), FormatError);
}

TEST_CASE("stands GeoJSON round-trips and is valid") {
    const std::vector<Segment> segs{{"S1", rect(32, 32, 96, 160), {}}, {"S2", rect(96, 32, 160, 160), {}}};
    auto trees = lattice("O1", 34, 34, 158, 158, 4.0);
    const auto stands = delineate_stands(trees, segs, kFrame).stands;
    REQUIRE(stands.size() == 2);
    const auto doc = stands_to_geojson(stands, kFrame);
    const auto problems = geojson_check::validate_feature_collection(doc);
    for (const auto& p : problems) MESSAGE(p);
    CHECK(problems.empty());
    const auto back = stands_from_geojson(nlohmann::json::parse(doc.dump()));
    REQUIRE(back.size() == stands.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].stand_id == stands[i].stand_id);
        CHECK(back[i].cells.indices == stands[i].cells.indices);
        CHECK(back[i].cells.frame == stands[i].cells.frame);
        CHECK(back[i].stem_ids == stands[i].stem_ids);
        CHECK(back[i].area_ha == stands[i].area_ha);
        CHECK(back[i].br_volume_m3 == stands[i].br_volume_m3);
    }
}

TEST_CASE("cell outlines have the cell-count area") {
    std::mt19937_64 gen(5);
    std::bernoulli_distribution coin(0.45);
    for (int trial = 0; trial < 25; ++trial) {
        const grid::Frame f{12, 9, 1000.0, 2000.0, 16.0};
        grid::CellSet cells{f, {}};
        for (std::size_t i = 0; i < f.size(); ++i)
            if (coin(gen)) cells.indices.push_back(i);
        if (cells.empty()) continue;
        const auto outline = cells_outline(cells);
        CHECK(outline.area() == doctest::Approx(cells.size() * 256.0).epsilon(1e-12));
        for (std::size_t k = 0; k < cells.size(); ++k) CHECK(geom::contains(outline, cells.center(k)));
        const auto doc = geom::make_feature_collection(
            nlohmann::json::array({geom::make_feature(geom::to_geojson_geometry(outline), nlohmann::json::object())}));
        CHECK(geojson_check::validate_feature_collection(doc).empty());
    }
}

TEST_CASE("segments GeoJSON parses ids and rejects duplicates") {
    const std::string doc = R"({"type": "FeatureCollection", "features": [
      {"type": "Feature", "properties": {"segment_id": 17, "spruce_pct": 80},
       "geometry": {"type": "Polygon", "coordinates": [[[0,0],[10,0],[10,10],[0,10],[0,0]]]}},
      {"type": "Feature", "properties": {"segment_id": "B"},
       "geometry": {"type": "Polygon", "coordinates": [[[10,0],[20,0],[20,10],[10,10],[10,0]]]}}]})";
    const auto segs = parse_segments(doc);
    REQUIRE(segs.size() == 2);
    CHECK(segs[0].segment_id == "17");
    CHECK(segs[0].spruce_pct == 80.0);
    CHECK_FALSE(segs[1].spruce_pct.has_value());
    CHECK(segs[1].shape.area() == doctest::Approx(100.0));
    const auto again = parse_segments(format_segments(segs));
    CHECK(again.size() == 2);
    CHECK(again[0].segment_id == "17");
    std::string dup = doc;
    dup.replace(dup.find("\"B\""), 3, "\"17\"");
    CHECK_THROWS_AS(parse_segments(dup), FormatError);
}
