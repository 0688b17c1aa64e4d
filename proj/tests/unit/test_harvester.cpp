#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "rotmap/error.hpp"
#include "rotmap/harvester.hpp"

using namespace rotmap;
using namespace rotmap::harvester;

namespace {

std::string wrap_stems(const std::string& stems, const std::string& units = "") {
    std::string header = units.empty() ? "<HarvestedProduction>" : "<HarvestedProduction units=\"" + units + "\">";
    return "<?xml version=\"1.0\"?>\n" + header + "\n<Machine machineId=\"M\">\n<Object objectId=\"O\">\n" + stems +
           "\n</Object>\n</Machine>\n</HarvestedProduction>\n";
}

StemRecord make_stem(std::string id, std::vector<LogProduct> products, std::string species = "spruce") {
    StemRecord s;
    s.stem_id = std::move(id);
    s.species = Species::from_code(species);
    s.dbh_cm = 25.0;
    s.x = 100.0;
    s.y = 200.0;
    s.position_source = PositionSource::head;
    s.products = std::move(products);
    return s;
}

std::vector<std::filesystem::path> corpus() {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(fixtures::data_path("hpr"))) {
        if (entry.path().extension() == ".hpr") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace

TEST_CASE("single healthy spruce stem has zero butt-rot volume") {
    const auto obj = parse_hpr(wrap_stems(
        R"(<Stem stemId="1" species="spruce" dbh="24" x="1" y="2" posSource="head"><Log assortment="sawlog" volume="0.30"/></Stem>)"));
    REQUIRE(obj.stems.size() == 1);
    CHECK(stem_br_volume(obj.stems[0]) == 0.0);
    CHECK(obj.stems[0].total_volume() == doctest::Approx(0.30));
    CHECK(validate(obj).empty());
}

TEST_CASE("butt-rot volume sums the three damaged assortments") {
    const auto obj = parse_hpr(wrap_stems(
        R"(<Stem stemId="1" species="spruce" dbh="24" x="1" y="2" posSource="head"><Log assortment="sawlog" volume="0.30"/><Log assortment="br_pulpwood" volume="0.12"/></Stem>)"));
    CHECK(stem_br_volume(obj.stems[0]) == doctest::Approx(0.12).epsilon(1e-12));

    CHECK(stem_br_volume(make_stem("a", {{Assortment::sawlog, 0.4, {}}, {Assortment::br_pulpwood, 0.2, {}}})) ==
          doctest::Approx(0.2));
    CHECK(stem_br_volume(make_stem("b", {{Assortment::br_energy_wood, 0.1, {}}, {Assortment::br_cutoff, 0.05, {}}})) ==
          doctest::Approx(0.15));
    CHECK(stem_br_volume(make_stem("c", {{Assortment::sawlog, 0.4, {}}, {Assortment::pulpwood, 0.2, {}}})) == 0.0);
}

TEST_CASE("only br-prefixed assortments count as butt rot") {
    const std::vector<std::pair<std::string, bool>> expected = {{"sawlog", false},        {"pulpwood", false},
                                                                {"energy_wood", false},   {"br_pulpwood", true},
                                                                {"br_energy_wood", true}, {"br_cutoff", true}};
    for (const auto& [code, br] : expected) {
        const auto a = parse_assortment(code);
        REQUIRE(a.has_value());
        CHECK(is_butt_rot(*a) == br);
        CHECK(to_string(*a) == code);
    }
    CHECK_FALSE(parse_assortment("BR_PULPWOOD").has_value());
    CHECK_FALSE(parse_assortment("firewood").has_value());
}

TEST_CASE("unclosed Stem tag is a ParseError with a position") {
    const std::string xml =
        "<?xml version=\"1.0\"?>\n<HarvestedProduction>\n<Machine machineId=\"M\">\n<Object objectId=\"O\">\n"
        "<Stem stemId=\"1\" species=\"spruce\" dbh=\"20\" x=\"1\" y=\"2\" posSource=\"head\">\n"
        "<Log assortment=\"sawlog\" volume=\"0.2\"/>\n</Object>\n</Machine>\n</HarvestedProduction>\n";
    try {
        parse_hpr(xml);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 7);
        CHECK(e.column() >= 1);
        CHECK(std::string(e.what()).find("line 7") != std::string::npos);
    }
}

TEST_CASE("truncated and non-XML input are ParseErrors") {
    CHECK_THROWS_AS(parse_hpr("<HarvestedProduction><Machine machineId=\"M\">"), ParseError);
    CHECK_THROWS_AS(parse_hpr("not xml at all"), ParseError);
    CHECK_THROWS_AS(parse_hpr(""), ParseError);
}

TEST_CASE("schema violations are SchemaErrors") {
    const auto stem = [](const std::string& attrs, const std::string& logs = R"(<Log assortment="sawlog" volume="0.2"/>)") {
        return wrap_stems("<Stem " + attrs + ">" + logs + "</Stem>");
    };
    SUBCASE("unknown assortment code") {
        CHECK_THROWS_AS(parse_hpr(stem(R"(stemId="1" species="spruce" dbh="20" x="1" y="2" posSource="head")",
                                       R"(<Log assortment="firewood" volume="0.2"/>)")),
                        SchemaError);
    }
    SUBCASE("missing x") {
        CHECK_THROWS_AS(parse_hpr(stem(R"(stemId="1" species="spruce" dbh="20" y="2" posSource="head")")), SchemaError);
    }
    SUBCASE("missing y") {
        CHECK_THROWS_AS(parse_hpr(stem(R"(stemId="1" species="spruce" dbh="20" x="2" posSource="head")")), SchemaError);
    }
    SUBCASE("unknown position source") {
        CHECK_THROWS_AS(parse_hpr(stem(R"(stemId="1" species="spruce" dbh="20" x="1" y="2" posSource="gps")")),
                        SchemaError);
    }
    SUBCASE("duplicate stem id") {
        const auto s = R"(<Stem stemId="1" species="spruce" dbh="20" x="1" y="2" posSource="head"><Log assortment="sawlog" volume="0.2"/></Stem>)";
        CHECK_THROWS_AS(parse_hpr(wrap_stems(std::string(s) + s)), SchemaError);
    }
    SUBCASE("non-positive log volume") {
        CHECK_THROWS_AS(parse_hpr(stem(R"(stemId="1" species="spruce" dbh="20" x="1" y="2" posSource="head")",
                                       R"(<Log assortment="sawlog" volume="0"/>)")),
                        SchemaError);
    }
    SUBCASE("non-numeric dbh") {
        CHECK_THROWS_AS(parse_hpr(stem(R"(stemId="1" species="spruce" dbh="big" x="1" y="2" posSource="head")")),
                        SchemaError);
    }
    SUBCASE("unsupported unit") {
        CHECK_THROWS_AS(parse_hpr(wrap_stems("", "dbh:inch")), SchemaError);
    }
    SUBCASE("missing Object") {
        CHECK_THROWS_AS(parse_hpr("<HarvestedProduction><Machine machineId=\"M\"/></HarvestedProduction>"),
                        SchemaError);
    }
    SUBCASE("known element out of place") {
        CHECK_THROWS_AS(parse_hpr("<HarvestedProduction><Object objectId=\"O\"/></HarvestedProduction>"),
                        SchemaError);
    }
}

TEST_CASE("schema errors report the offending line") {
    const std::string xml = wrap_stems(
        "<Stem stemId=\"1\" species=\"spruce\" dbh=\"20\" x=\"1\" y=\"2\" posSource=\"head\">\n"
        "<Log assortment=\"firewood\" volume=\"0.2\"/></Stem>");
    try {
        parse_hpr(xml);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("line 6") != std::string::npos);
    }
}

TEST_CASE("a stem without Log elements parses and is flagged by validate") {
    const auto obj = parse_hpr(wrap_stems(R"(<Stem stemId="9" species="spruce" dbh="20" x="1" y="2" posSource="head"/>)"));
    REQUIRE(obj.stems.size() == 1);
    const auto v = validate(obj);
    REQUIRE(v.size() == 1);
    CHECK(v[0] == Violation{"9", std::string(kRuleNoProducts)});
}

TEST_CASE("stem count equals the number of Stem elements") {
    std::string stems;
    for (int i = 0; i < 37; ++i) {
        stems += "<Stem stemId=\"s" + std::to_string(i) +
                 "\" species=\"pine\" dbh=\"20\" x=\"1\" y=\"2\" posSource=\"machine\"><Log assortment=\"pulpwood\" "
                 "volume=\"0.1\"/></Stem>\n";
    }
    CHECK(parse_hpr(wrap_stems(stems)).stems.size() == 37);
}

TEST_CASE("declared mm and dm3 units convert to cm and m3") {
    ParseDiagnostics diag;
    const auto obj = parse_hpr(fixtures::read_data("hpr/mm_dm3_units.hpr"), &diag);
    CHECK(obj.machine_id == "PONSSE-17");
    CHECK(obj.object_id == "7741");
    REQUIRE(obj.stems.size() == 3);
    const auto& a1 = obj.stems[0];
    CHECK(a1.dbh_cm == 25.3);
    CHECK(a1.position_source == PositionSource::machine);
    REQUIRE(a1.products.size() == 3);
    CHECK(a1.products[0].volume_m3 == 0.1);
    CHECK(a1.products[0].length_cm == 120.0);
    CHECK(a1.products[1].volume_m3 == 0.05);
    CHECK_FALSE(a1.products[1].length_cm.has_value());
    CHECK(a1.products[2].length_cm == 490.0);
    CHECK(stem_br_volume(a1) == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(a1.total_volume() == doctest::Approx(0.55).epsilon(1e-12));
    CHECK(obj.stems[1].species.kind == SpeciesKind::birch);
    CHECK(obj.stems[2].species.kind == SpeciesKind::other);
    CHECK(obj.stems[2].species.code == "SP-17");
    // Header, OperatorInfo and StemProfile; nested content is not counted again.
    CHECK(diag.ignored_elements == 3);
    CHECK(validate(obj).empty());
}

TEST_CASE("default units are cm and m3") {
    const auto obj = parse_hpr(fixtures::read_data("hpr/spruce_basic.hpr"));
    REQUIRE(obj.stems.size() == 3);
    CHECK(obj.stems[0].dbh_cm == 24.5);
    CHECK(obj.stems[0].x == 600123.25);
    CHECK(obj.stems[0].products[0].length_cm == 490.0);
    CHECK(stem_br_volume(obj.stems[1]) == doctest::Approx(0.14).epsilon(1e-12));
    CHECK(obj.stems[2].species.kind == SpeciesKind::pine);
}

TEST_CASE("XML entities in identifiers survive parsing") {
    const auto obj = parse_hpr(fixtures::read_data("hpr/escaped_ids.hpr"));
    CHECK(obj.machine_id == "J&D \"1270\"");
    CHECK(obj.object_id == "site <north>");
    CHECK(obj.stems.at(0).stem_id == "s'1");
    CHECK(obj.stems[0].y == 1000.0);
}

TEST_CASE("validate reports each broken rule by stem") {
    HarvestObject obj{"O", "M", {}};
    obj.stems.push_back(make_stem("ok", {{Assortment::sawlog, 0.3, {}}, {Assortment::br_cutoff, 0.01, {}}}));
    obj.stems.push_back(make_stem("pine-br", {{Assortment::br_pulpwood, 0.1, {}}}, "pine"));
    auto zero = make_stem("zero-dbh", {{Assortment::pulpwood, 0.1, {}}});
    zero.dbh_cm = 0.0;
    obj.stems.push_back(zero);
    auto negative = make_stem("neg-dbh", {{Assortment::pulpwood, 0.1, {}}});
    negative.dbh_cm = -3.0;
    obj.stems.push_back(negative);
    obj.stems.push_back(make_stem("empty", {}));
    const auto v = validate(obj);
    const std::vector<Violation> expected = {{"pine-br", std::string(kRuleBrOnNonSpruce)},
                                             {"zero-dbh", std::string(kRuleNonpositiveDbh)},
                                             {"neg-dbh", std::string(kRuleNonpositiveDbh)},
                                             {"empty", std::string(kRuleNoProducts)}};
    CHECK(v == expected);
}

TEST_CASE("validate is empty for a fully valid object") {
    CHECK(validate(parse_hpr(fixtures::read_data("hpr/spruce_basic.hpr"))).empty());
}

TEST_CASE("corpus files round-trip through serialization") {
    const auto files = corpus();
    REQUIRE(files.size() >= 3);
    for (const auto& path : files) {
        CAPTURE(path.string());
        const auto obj = parse_hpr(fixtures::read_file(path.string()));
        const auto text = serialize_hpr(obj);
        CHECK(parse_hpr(text) == obj);
        CHECK(serialize_hpr(parse_hpr(text)) == text);
    }
}

TEST_CASE("butt-rot volume never exceeds total volume over corpus objects") {
    for (const auto& path : corpus()) {
        const auto obj = parse_hpr(fixtures::read_file(path.string()));
        double br = 0.0, total = 0.0;
        for (const auto& s : obj.stems) {
            br += stem_br_volume(s);
            total += s.total_volume();
        }
        CHECK(br <= total);
    }
}

TEST_CASE("random objects round-trip exactly") {
    std::mt19937_64 gen(42);
    std::uniform_real_distribution<double> coord(-1e6, 7e6), dbh(0.5, 80.0), vol(1e-4, 3.0);
    std::uniform_int_distribution<int> pick(0, 5), count(0, 4);
    for (int trial = 0; trial < 20; ++trial) {
        HarvestObject obj{"obj<" + std::to_string(trial) + ">", "m&" + std::to_string(trial), {}};
        for (int i = 0; i < 30; ++i) {
            StemRecord s;
            s.stem_id = "stem\"" + std::to_string(i);
            s.species = Species::from_code(i % 4 == 3 ? "X" + std::to_string(i) : (i % 2 ? "spruce" : "birch"));
            s.dbh_cm = dbh(gen);
            s.x = coord(gen);
            s.y = coord(gen);
            s.position_source = i % 3 ? PositionSource::machine : PositionSource::head;
            for (int k = count(gen); k >= 0; --k) {
                LogProduct p{static_cast<Assortment>(pick(gen)), vol(gen), {}};
                if (k % 2) p.length_cm = dbh(gen) * 10.0;
                s.products.push_back(p);
            }
            obj.stems.push_back(s);
        }
        CHECK(parse_hpr(serialize_hpr(obj)) == obj);
    }
}

TEST_CASE("head-positioned stems are not moved") {
    HarvestObject obj{"O", "M", {make_stem("h", {{Assortment::sawlog, 0.3, {}}})}};
    for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) {
        const auto out = simulate_head_positions(obj, seed);
        CHECK(out.stems[0].x == 100.0);
        CHECK(out.stems[0].y == 200.0);
    }
}

TEST_CASE("machine-positioned stems stay within 8 m per axis and are deterministic") {
    HarvestObject obj{"O", "M", {}};
    for (int i = 0; i < 500; ++i) {
        auto s = make_stem(std::to_string(i), {{Assortment::sawlog, 0.3, {}}});
        s.position_source = PositionSource::machine;
        obj.stems.push_back(s);
    }
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto a = simulate_head_positions(obj, seed);
        const auto b = simulate_head_positions(obj, seed);
        CHECK(a == b);
        for (const auto& s : a.stems) {
            CHECK(s.x >= 92.0);
            CHECK(s.x <= 108.0);
            CHECK(s.y >= 192.0);
            CHECK(s.y <= 208.0);
        }
    }
    CHECK(simulate_head_positions(obj, 1) != simulate_head_positions(obj, 2));
}

TEST_CASE("jitter does not depend on stem order") {
    HarvestObject obj{"O", "M", {}};
    for (int i = 0; i < 50; ++i) {
        auto s = make_stem("s" + std::to_string(i), {{Assortment::sawlog, 0.3, {}}});
        s.position_source = i % 2 ? PositionSource::machine : PositionSource::head;
        obj.stems.push_back(s);
    }
    auto reversed = obj;
    std::reverse(reversed.stems.begin(), reversed.stems.end());
    auto a = simulate_head_positions(obj, 7);
    auto b = simulate_head_positions(reversed, 7);
    std::reverse(b.stems.begin(), b.stems.end());
    CHECK(a == b);
}

TEST_CASE("jitter components are uniform on [-8, 8] by Kolmogorov-Smirnov") {
    HarvestObject obj{"O", "M", {}};
    for (int i = 0; i < 50000; ++i) {
        auto s = make_stem(std::to_string(i), {{Assortment::sawlog, 0.3, {}}});
        s.x = 0.0;
        s.y = 0.0;
        s.position_source = PositionSource::machine;
        obj.stems.push_back(s);
    }
    const auto out = simulate_head_positions(obj, 2024);
    std::vector<double> d;
    d.reserve(100000);
    for (const auto& s : out.stems) {
        d.push_back(s.x);
        d.push_back(s.y);
    }
    std::sort(d.begin(), d.end());
    const double n = static_cast<double>(d.size());
    double ks = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double f = (d[i] + 8.0) / 16.0;
        ks = std::max({ks, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
    }
    CHECK(d.front() >= -8.0);
    CHECK(d.back() <= 8.0);
    CHECK(ks < 0.05);
    // A correct uniform sampler sits far below the criterion at this sample size.
    CHECK(ks < 0.01);
}

TEST_CASE("tree table round-trips and carries per-stem volumes") {
    const auto obj = parse_hpr(fixtures::read_data("hpr/spruce_basic.hpr"));
    const auto trees = to_tree_records(obj);
    REQUIRE(trees.size() == 3);
    CHECK(trees[1].br_volume_m3 == doctest::Approx(0.14));
    CHECK(trees[1].total_volume_m3 == doctest::Approx(0.52));
    const auto csv = write_tree_table(trees);
    CHECK(csv.rfind("stem_id,object_id,species,dbh_cm,x,y,pos_source,total_vol_m3,br_vol_m3\n", 0) == 0);
    CHECK(read_tree_table(csv) == trees);
    CHECK_THROWS_AS(read_tree_table("a,b\n"), FormatError);
}
