#include "rotmap/harvester.hpp"

#include <expat.h>

#include <array>
#include <cstring>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "rotmap/error.hpp"
#include "rotmap/rng.hpp"
#include "rotmap/text.hpp"

namespace rotmap::harvester {

namespace {

constexpr std::array<std::pair<Assortment, std::string_view>, 6> kAssortmentCodes{{
    {Assortment::sawlog, "sawlog"},
    {Assortment::pulpwood, "pulpwood"},
    {Assortment::energy_wood, "energy_wood"},
    {Assortment::br_pulpwood, "br_pulpwood"},
    {Assortment::br_energy_wood, "br_energy_wood"},
    {Assortment::br_cutoff, "br_cutoff"},
}};

struct Units {
    double dbh_to_cm = 1.0;
    double volume_to_m3 = 1.0;
    double length_to_cm = 1.0;
};

Units parse_units(std::string_view spec) {
    Units units;
    std::size_t start = 0;
    while (start <= spec.size()) {
        auto end = spec.find(';', start);
        if (end == std::string_view::npos) end = spec.size();
        const auto item = text::trim(spec.substr(start, end - start));
        start = end + 1;
        if (item.empty()) continue;
        const auto colon = item.find(':');
        if (colon == std::string_view::npos) throw SchemaError("malformed units entry '" + std::string(item) + "'");
        const auto key = text::lower(text::trim(item.substr(0, colon)));
        const auto unit = text::lower(text::trim(item.substr(colon + 1)));
        if (key == "dbh" && unit == "mm") units.dbh_to_cm = 0.1;
        else if (key == "dbh" && unit == "cm") units.dbh_to_cm = 1.0;
        else if (key == "volume" && unit == "dm3") units.volume_to_m3 = 1e-3;
        else if (key == "volume" && unit == "m3") units.volume_to_m3 = 1.0;
        else if (key == "length" && unit == "mm") units.length_to_cm = 0.1;
        else if (key == "length" && unit == "cm") units.length_to_cm = 1.0;
        else if (key == "length" && unit == "m") units.length_to_cm = 100.0;
        else throw SchemaError("unsupported unit '" + unit + "' for '" + key + "'");
    }
    return units;
}

// The unit factors are applied as divisions where the factor is a power of
// ten below one, so that e.g. 305 mm parses to exactly 30.5 cm.
double convert(double value, double factor) {
    if (factor == 0.1) return value / 10.0;
    if (factor == 1e-3) return value / 1000.0;
    return value * factor;
}

enum class Level { root, machine, object, stem, log };

class HprReader {
public:
    explicit HprReader(XML_Parser parser) : parser_(parser) {}

    void start(const char* name, const char** attrs) {
        if (failed()) return;
        ++depth_;
        if (ignore_from_ > 0) return;
        const std::string_view element(name);
        const auto expected = next_level();
        if (!expected || element != element_name(*expected)) {
            if (is_known(element)) {
                fail("element <" + std::string(element) + "> not allowed here");
                return;
            }
            ++diagnostics_.ignored_elements;
            ignore_from_ = depth_;
            return;
        }
        levels_.push_back(*expected);
        Attributes a(attrs);
        switch (*expected) {
            case Level::root:
                try {
                    units_ = parse_units(a.get("units").value_or(""));
                } catch (const SchemaError& e) {
                    fail(e.what());
                }
                break;
            case Level::machine:
                if (seen_machine_) return fail("more than one <Machine> element");
                seen_machine_ = true;
                object_.machine_id = required(a, "machineId", "Machine");
                break;
            case Level::object:
                if (seen_object_) return fail("more than one <Object> element");
                seen_object_ = true;
                object_.object_id = required(a, "objectId", "Object");
                break;
            case Level::stem:
                read_stem(a);
                break;
            case Level::log:
                read_log(a);
                break;
        }
    }

    void end(const char*) {
        if (failed()) return;
        if (ignore_from_ > 0) {
            if (depth_ == ignore_from_) ignore_from_ = 0;
            --depth_;
            return;
        }
        --depth_;
        if (!levels_.empty()) levels_.pop_back();
    }

    void finish() {
        if (!seen_machine_) throw SchemaError("missing <Machine> element");
        if (!seen_object_) throw SchemaError("missing <Object> element");
    }

    bool failed() const { return error_.has_value(); }
    const std::optional<std::string>& error() const { return error_; }
    std::size_t error_line() const { return error_line_; }
    std::size_t error_column() const { return error_column_; }

    HarvestObject take_object() { return std::move(object_); }
    const ParseDiagnostics& diagnostics() const { return diagnostics_; }

private:
    class Attributes {
    public:
        explicit Attributes(const char** attrs) {
            for (std::size_t i = 0; attrs[i] != nullptr; i += 2) values_.emplace(attrs[i], attrs[i + 1]);
        }
        std::optional<std::string> get(const std::string& key) const {
            auto it = values_.find(key);
            if (it == values_.end()) return std::nullopt;
            return it->second;
        }

    private:
        std::map<std::string, std::string> values_;
    };

    static std::string_view element_name(Level level) {
        switch (level) {
            case Level::root: return "HarvestedProduction";
            case Level::machine: return "Machine";
            case Level::object: return "Object";
            case Level::stem: return "Stem";
            case Level::log: return "Log";
        }
        return "";
    }

    static bool is_known(std::string_view name) {
        return name == "HarvestedProduction" || name == "Machine" || name == "Object" || name == "Stem" ||
               name == "Log";
    }

    std::optional<Level> next_level() const {
        if (levels_.empty()) return depth_ == 1 ? std::optional(Level::root) : std::nullopt;
        switch (levels_.back()) {
            case Level::root: return Level::machine;
            case Level::machine: return Level::object;
            case Level::object: return Level::stem;
            case Level::stem: return Level::log;
            case Level::log: return std::nullopt;
        }
        return std::nullopt;
    }

    void fail(std::string message) {
        if (error_) return;
        error_ = std::move(message);
        error_line_ = XML_GetCurrentLineNumber(parser_);
        error_column_ = XML_GetCurrentColumnNumber(parser_) + 1;
        XML_StopParser(parser_, XML_FALSE);
    }

    std::string required(const Attributes& a, const char* key, const char* element) {
        auto value = a.get(key);
        if (!value || text::trim(*value).empty()) {
            fail("<" + std::string(element) + "> missing attribute '" + key + "'");
            return {};
        }
        return *value;
    }

    std::optional<double> number(const Attributes& a, const char* key, const char* element) {
        auto raw = required(a, key, element);
        if (failed()) return std::nullopt;
        try {
            return text::parse_double(raw, std::string(element) + "@" + key);
        } catch (const FormatError& e) {
            fail(e.what());
            return std::nullopt;
        }
    }

    void read_stem(const Attributes& a) {
        StemRecord stem;
        stem.stem_id = required(a, "stemId", "Stem");
        if (failed()) return;
        if (!stem_ids_.insert(stem.stem_id).second) return fail("duplicate stemId '" + stem.stem_id + "'");
        stem.species = Species::from_code(required(a, "species", "Stem"));
        if (failed()) return;
        const auto dbh = number(a, "dbh", "Stem");
        if (!dbh) return;
        stem.dbh_cm = convert(*dbh, units_.dbh_to_cm);
        if (!a.get("x") || !a.get("y")) return fail("stem '" + stem.stem_id + "' has no position");
        const auto x = number(a, "x", "Stem");
        const auto y = number(a, "y", "Stem");
        if (!x || !y) return;
        stem.x = *x;
        stem.y = *y;
        const auto source = required(a, "posSource", "Stem");
        if (failed()) return;
        const auto parsed_source = parse_position_source(source);
        if (!parsed_source) return fail("unknown posSource '" + source + "'");
        stem.position_source = *parsed_source;
        object_.stems.push_back(std::move(stem));
    }

    void read_log(const Attributes& a) {
        LogProduct product;
        const auto code = required(a, "assortment", "Log");
        if (failed()) return;
        const auto assortment = parse_assortment(code);
        if (!assortment) return fail("unknown assortment code '" + code + "'");
        product.assortment = *assortment;
        const auto volume = number(a, "volume", "Log");
        if (!volume) return;
        product.volume_m3 = convert(*volume, units_.volume_to_m3);
        if (!(product.volume_m3 > 0.0)) return fail("log volume must be positive");
        if (a.get("length")) {
            const auto length = number(a, "length", "Log");
            if (!length) return;
            product.length_cm = convert(*length, units_.length_to_cm);
        }
        object_.stems.back().products.push_back(product);
    }

    XML_Parser parser_;
    Units units_;
    HarvestObject object_;
    ParseDiagnostics diagnostics_;
    std::vector<Level> levels_;
    std::set<std::string> stem_ids_;
    std::size_t depth_ = 0;
    std::size_t ignore_from_ = 0;
    bool seen_machine_ = false;
    bool seen_object_ = false;
    std::optional<std::string> error_;
    std::size_t error_line_ = 0;
    std::size_t error_column_ = 0;
};

void XMLCALL on_start(void* user, const XML_Char* name, const XML_Char** attrs) {
    static_cast<HprReader*>(user)->start(name, attrs);
}

void XMLCALL on_end(void* user, const XML_Char* name) { static_cast<HprReader*>(user)->end(name); }

std::string escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string_view to_string(Assortment a) noexcept {
    for (const auto& [value, code] : kAssortmentCodes) {
        if (value == a) return code;
    }
    return "";
}

std::optional<Assortment> parse_assortment(std::string_view code) noexcept {
    for (const auto& [value, name] : kAssortmentCodes) {
        if (name == code) return value;
    }
    return std::nullopt;
}

Species Species::from_code(std::string_view code) {
    const auto c = text::lower(text::trim(code));
    if (c == "spruce") return {SpeciesKind::spruce, "spruce"};
    if (c == "pine") return {SpeciesKind::pine, "pine"};
    if (c == "birch") return {SpeciesKind::birch, "birch"};
    return {SpeciesKind::other, std::string(text::trim(code))};
}

std::string_view to_string(PositionSource s) noexcept { return s == PositionSource::head ? "head" : "machine"; }

std::optional<PositionSource> parse_position_source(std::string_view s) noexcept {
    if (s == "head") return PositionSource::head;
    if (s == "machine") return PositionSource::machine;
    return std::nullopt;
}

double StemRecord::total_volume() const noexcept {
    double total = 0.0;
    for (const auto& p : products) total += p.volume_m3;
    return total;
}

HarvestObject parse_hpr(std::string_view xml, ParseDiagnostics* diagnostics) {
    std::unique_ptr<std::remove_pointer_t<XML_Parser>, decltype(&XML_ParserFree)> parser(XML_ParserCreate(nullptr),
                                                                                        &XML_ParserFree);
    if (!parser) throw Error("cannot allocate XML parser");
    HprReader reader(parser.get());
    XML_SetUserData(parser.get(), &reader);
    XML_SetElementHandler(parser.get(), on_start, on_end);

    const auto status = XML_Parse(parser.get(), xml.data(), static_cast<int>(xml.size()), XML_TRUE);
    if (reader.failed()) throw SchemaError(*reader.error() + " (line " + std::to_string(reader.error_line()) +
                                           ", column " + std::to_string(reader.error_column()) + ")");
    if (status != XML_STATUS_OK) {
        throw ParseError(XML_ErrorString(XML_GetErrorCode(parser.get())), XML_GetCurrentLineNumber(parser.get()),
                         XML_GetCurrentColumnNumber(parser.get()) + 1);
    }
    reader.finish();
    if (diagnostics) *diagnostics = reader.diagnostics();
    return reader.take_object();
}

std::string serialize_hpr(const HarvestObject& object) {
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<HarvestedProduction units=\"dbh:cm;volume:m3;length:cm\">\n";
    out << "  <Machine machineId=\"" << escape(object.machine_id) << "\">\n";
    out << "    <Object objectId=\"" << escape(object.object_id) << "\">\n";
    for (const auto& stem : object.stems) {
        out << "      <Stem stemId=\"" << escape(stem.stem_id) << "\" species=\"" << escape(stem.species.code)
            << "\" dbh=\"" << text::shortest(stem.dbh_cm) << "\" x=\"" << text::shortest(stem.x) << "\" y=\""
            << text::shortest(stem.y) << "\" posSource=\"" << to_string(stem.position_source) << "\">\n";
        for (const auto& p : stem.products) {
            out << "        <Log assortment=\"" << to_string(p.assortment) << "\" volume=\""
                << text::shortest(p.volume_m3) << "\"";
            if (p.length_cm) out << " length=\"" << text::shortest(*p.length_cm) << "\"";
            out << "/>\n";
        }
        out << "      </Stem>\n";
    }
    out << "    </Object>\n  </Machine>\n</HarvestedProduction>\n";
    return out.str();
}

std::vector<Violation> validate(const HarvestObject& object) {
    std::vector<Violation> violations;
    for (const auto& stem : object.stems) {
        if (!(stem.dbh_cm > 0.0)) violations.push_back({stem.stem_id, std::string(kRuleNonpositiveDbh)});
        if (stem.products.empty()) violations.push_back({stem.stem_id, std::string(kRuleNoProducts)});
        const double br = stem_br_volume(stem);
        if (br > stem.total_volume()) violations.push_back({stem.stem_id, std::string(kRuleBrExceedsTotal)});
        if (br > 0.0 && !stem.species.is_spruce()) {
            violations.push_back({stem.stem_id, std::string(kRuleBrOnNonSpruce)});
        }
    }
    return violations;
}

double stem_br_volume(const StemRecord& stem) noexcept {
    double br = 0.0;
    for (const auto& p : stem.products) {
        if (is_butt_rot(p.assortment)) br += p.volume_m3;
    }
    return br;
}

HarvestObject simulate_head_positions(const HarvestObject& object, std::uint64_t seed) {
    HarvestObject out = object;
    const auto object_key = seeds::hash_label(object.object_id);
    for (auto& stem : out.stems) {
        if (stem.position_source != PositionSource::machine) continue;
        Rng rng(seeds::derive(seed, "jitter", {object_key, seeds::hash_label(stem.stem_id)}));
        stem.x += rng.uniform(-kHeadJitterHalfWidth, kHeadJitterHalfWidth);
        stem.y += rng.uniform(-kHeadJitterHalfWidth, kHeadJitterHalfWidth);
    }
    return out;
}

std::vector<TreeRecord> to_tree_records(const HarvestObject& object) {
    std::vector<TreeRecord> trees;
    trees.reserve(object.stems.size());
    for (const auto& stem : object.stems) {
        trees.push_back({stem.stem_id, object.object_id, stem.species, stem.dbh_cm, stem.x, stem.y,
                         stem.position_source, stem.total_volume(), stem_br_volume(stem)});
    }
    return trees;
}

namespace {
constexpr std::string_view kTreeHeader = "stem_id,object_id,species,dbh_cm,x,y,pos_source,total_vol_m3,br_vol_m3";
}

std::string write_tree_table(const std::vector<TreeRecord>& trees) {
    std::string out(kTreeHeader);
    out += '\n';
    for (const auto& t : trees) {
        out += t.stem_id + ',' + t.object_id + ',' + t.species.code + ',' + text::shortest(t.dbh_cm) + ',' +
               text::shortest(t.x) + ',' + text::shortest(t.y) + ',' + std::string(to_string(t.position_source)) +
               ',' + text::shortest(t.total_volume_m3) + ',' + text::shortest(t.br_volume_m3) + '\n';
    }
    return out;
}

std::vector<TreeRecord> read_tree_table(std::string_view csv) {
    std::vector<TreeRecord> trees;
    std::istringstream in{std::string(csv)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        if (line_no == 1) {
            if (text::trim(line) != kTreeHeader) throw FormatError("tree table: unexpected header '" + line + "'");
            continue;
        }
        const auto f = text::split_csv(line);
        const auto where = "tree table line " + std::to_string(line_no);
        if (f.size() != 9) throw FormatError(where + ": expected 9 fields");
        const auto source = parse_position_source(f[6]);
        if (!source) throw FormatError(where + ": bad pos_source '" + f[6] + "'");
        trees.push_back({f[0], f[1], Species::from_code(f[2]), text::parse_double(f[3], where),
                         text::parse_double(f[4], where), text::parse_double(f[5], where), *source,
                         text::parse_double(f[7], where), text::parse_double(f[8], where)});
    }
    return trees;
}

}  // namespace rotmap::harvester
