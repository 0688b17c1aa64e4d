#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include "fixtures.hpp"
#include "rotmap/error.hpp"
#include "rotmap/grid.hpp"
#include "rotmap/harvester.hpp"
#include "rotmap/pipeline.hpp"
#include "rotmap/stands.hpp"
#include "rotmap/synth/synth.hpp"

using namespace rotmap;
using namespace rotmap::synth;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("rotmap_test_synth_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

struct Recovered {
    std::map<std::string, double> br_m3ha;
    std::size_t delineated = 0;
};

Recovered run_pipeline(const Scenario& sc) {
    const auto ingested = pipeline::ingest(sc.objects, sc.config.seed);
    REQUIRE(ingested.violations.empty());
    const auto built = pipeline::build_stands(ingested.trees, sc.segments, sc.frame);
    const auto assembled = stands::assemble_samples(built.filtered.kept, ingested.trees, sc.layers, sc.frame);
    Recovered r;
    r.delineated = built.delineation.stands.size();
    for (const auto& s : assembled.samples) r.br_m3ha[s.stand_id] = s.br_vol;
    return r;
}

double between_cluster_variance(const std::vector<TruthRow>& truth) {
    std::map<std::size_t, std::pair<double, double>> sums;
    for (const auto& t : truth) {
        if (!t.eligible) continue;
        sums[t.cluster].first += t.br_m3ha;
        sums[t.cluster].second += 1.0;
    }
    std::vector<double> means;
    for (const auto& [c, s] : sums) means.push_back(s.first / s.second);
    double m = 0;
    for (double v : means) m += v;
    m /= means.size();
    double ss = 0;
    for (double v : means) ss += (v - m) * (v - m);
    return ss / (means.size() - 1);
}

}  // namespace

TEST_CASE("infeasible configurations are ConfigErrors") {
    ScenarioConfig c;
    CHECK_NOTHROW(validate(c));
    c.stems_per_ha_min = 50;
    c.area_min_ha = 0.5;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = {};
    c.head_position_share = 1.2;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = {};
    c.cluster_effect_sd = -1;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = {};
    c.area_min_ha = 0.2;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = {};
    c.n_clusters = 0;
    CHECK_THROWS_AS(generate_scenario(c), ConfigError);
    c = {};
    c.spruce_share_min = 0.3;
    CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("a zero rot target gives zero truth and zero recovered response") {
    ScenarioConfig c;
    c.br_target_m3ha = 0.0;
    c.n_clusters = 2;
    c.stands_per_cluster = 4;
    const auto sc = generate_scenario(c);
    for (const auto& t : sc.truth) CHECK(t.br_m3ha == 0.0);
    for (const auto& obj : sc.objects)
        for (const auto& stem : obj.stems) CHECK(harvester::stem_br_volume(stem) == 0.0);
    const auto r = run_pipeline(sc);
    CHECK(r.br_m3ha.size() == 8);
    for (const auto& [id, v] : r.br_m3ha) CHECK(v == 0.0);
}

TEST_CASE("cluster effects raise the between-cluster variance") {
    ScenarioConfig c;
    c.n_clusters = 8;
    c.stands_per_cluster = 8;
    c.decoy_stands = 0;
    c.empty_segments_per_cluster = 0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        c.seed = seed;
        c.cluster_effect_sd = 0.0;
        const double flat = between_cluster_variance(generate_scenario(c).truth);
        c.cluster_effect_sd = 15.0;
        const double structured = between_cluster_variance(generate_scenario(c).truth);
        CHECK(structured > flat);
    }
}

TEST_CASE("default scenario matches the stand-level targets and the pipeline recovers it") {
    const auto sc = generate_scenario({});
    std::size_t eligible = 0, stems = 0, head = 0;
    double br_sum = 0.0;
    for (const auto& t : sc.truth) {
        if (!t.eligible) continue;
        ++eligible;
        br_sum += t.br_m3ha;
    }
    for (const auto& obj : sc.objects)
        for (const auto& s : obj.stems) {
            ++stems;
            head += s.position_source == harvester::PositionSource::head;
        }
    CHECK(eligible == 30);
    CHECK(stems >= 10000);
    CHECK(std::abs(static_cast<double>(head) / stems - 0.52) <= 0.02);
    CHECK(br_sum / eligible == doctest::Approx(23.9).epsilon(0.15));

    const auto r = run_pipeline(sc);
    CHECK(r.delineated == sc.truth.size());
    CHECK(r.br_m3ha.size() == eligible);
    double recovered_sum = 0.0;
    for (const auto& t : sc.truth) {
        if (!t.eligible) continue;
        REQUIRE(r.br_m3ha.contains(t.stand_id));
        const double got = r.br_m3ha.at(t.stand_id);
        recovered_sum += got;
        CHECK(std::abs(got - t.br_m3ha) <= 0.05 * std::max(t.br_m3ha, 1e-9));
    }
    CHECK(recovered_sum / eligible == doctest::Approx(23.9).epsilon(0.15));
}

TEST_CASE("maturity drives canopy height and rot") {
    const auto sc = generate_scenario({});
    // Spearman-free check: the mature half of eligible stands has the higher mean target.
    std::vector<const TruthRow*> rows;
    for (const auto& t : sc.truth)
        if (t.eligible) rows.push_back(&t);
    std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->maturity < b->maturity; });
    double low = 0, high = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) (i < rows.size() / 2 ? low : high) += rows[i]->br_target_m3ha;
    CHECK(high > low);
}

TEST_CASE("written files parse cleanly with zero violations") {
    ScenarioConfig c;
    c.n_clusters = 2;
    c.stands_per_cluster = 3;
    const auto sc = generate_scenario(c);
    const auto dir = temp_dir("files");
    const auto files = write_scenario(sc, dir);
    CHECK(std::filesystem::exists(files.index));
    REQUIRE(files.harvester.size() == sc.objects.size());
    for (std::size_t i = 0; i < files.harvester.size(); ++i) {
        const auto obj = harvester::parse_hpr(fixtures::read_file(files.harvester[i].string()));
        CHECK(harvester::validate(obj).empty());
        CHECK(obj == sc.objects[i]);
    }
    const auto segments = stands::parse_segments(fixtures::read_file(files.segments.string()));
    CHECK(segments.size() == sc.segments.size());
    const auto manifest = grid::read_manifest(files.raster_manifest);
    const auto layers = grid::load_layers(manifest, raster_layer_names());
    CHECK(grid::check_alignment(layers) == sc.frame);
    for (const auto& [name, g] : layers) CHECK(g.values == sc.layers.at(name).values);
    const auto truth = parse_truth(fixtures::read_file(files.truth.string()));
    REQUIRE(truth.size() == sc.truth.size());
    CHECK(format_truth(truth) == format_truth(sc.truth));
    std::filesystem::remove_all(dir);
}

TEST_CASE("generation is deterministic per seed") {
    ScenarioConfig c;
    c.n_clusters = 2;
    c.stands_per_cluster = 3;
    const auto a = generate_scenario(c);
    const auto b = generate_scenario(c);
    CHECK(a.objects == b.objects);
    CHECK(format_truth(a.truth) == format_truth(b.truth));
    c.seed = 2;
    CHECK(generate_scenario(c).objects != a.objects);
}

TEST_CASE("stem volume grows with diameter") {
    CHECK(stem_volume(20.0) > 0.0);
    CHECK(stem_volume(30.0) > stem_volume(20.0));
    CHECK(stem_volume(22.0) == doctest::Approx(1.23e-4 * std::pow(22.0, 2.5)));
}
