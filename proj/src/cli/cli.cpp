#include "rotmap/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rotmap/config.hpp"
#include "rotmap/error.hpp"
#include "rotmap/eval/cv.hpp"
#include "rotmap/eval/mapping.hpp"
#include "rotmap/geojson.hpp"
#include "rotmap/learn/calibration.hpp"
#include "rotmap/learn/stats.hpp"
#include "rotmap/pipeline.hpp"
#include "rotmap/synth/synth.hpp"
#include "rotmap/text.hpp"

namespace rotmap::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string error_kind(const Error& e) {
#define ROTMAP_KIND(Name) \
    if (dynamic_cast<const Name*>(&e)) return #Name
    ROTMAP_KIND(ParseError);
    ROTMAP_KIND(SchemaError);
    ROTMAP_KIND(DegenerateGeometry);
    ROTMAP_KIND(EmptyShape);
    ROTMAP_KIND(FormatError);
    ROTMAP_KIND(AlignmentError);
    ROTMAP_KIND(NoDataError);
    ROTMAP_KIND(ManifestError);
    ROTMAP_KIND(AmbiguityError);
    ROTMAP_KIND(EmptyInput);
    ROTMAP_KIND(DataError);
    ROTMAP_KIND(ClusterError);
    ROTMAP_KIND(UndefinedCorrelation);
    ROTMAP_KIND(MetricsError);
    ROTMAP_KIND(CvError);
    ROTMAP_KIND(MapError);
    ROTMAP_KIND(ModelError);
    ROTMAP_KIND(ConfigError);
    ROTMAP_KIND(IoError);
#undef ROTMAP_KIND
    return "Error";
}

/// Error raised while reading a named input; keeps the original kind in the message.
class InputError : public Error {
public:
    InputError(const fs::path& path, const Error& cause)
        : Error(path.string() + ": " + error_kind(cause) + ": " + cause.what()) {}
};

template <typename F>
auto from_file(const fs::path& path, F&& load) {
    try {
        return load(text::read_file(path));
    } catch (const InputError&) {
        throw;
    } catch (const Error& e) {
        throw InputError(path, e);
    } catch (const json::exception& e) {
        throw InputError(path, FormatError(e.what()));
    }
}

class Logger {
public:
    Logger(std::ostream& os, std::string step) : os_(os), step_(std::move(step)) {}

    void operator()(const std::string& event, json fields = json::object()) const {
        json line = {{"step", step_}, {"event", event}};
        for (auto& [k, v] : fields.items()) line[k] = v;
        os_ << line.dump() << '\n';
    }

private:
    std::ostream& os_;
    std::string step_;
};

grid::Frame frame_from_manifest(const grid::RasterManifest& manifest) {
    if (manifest.empty()) throw ManifestError("raster manifest lists no layers");
    const auto& entry = manifest.begin()->second;
    return from_file(entry.path, [&](const std::string& s) { return grid::parse_grid(s, entry.kind).frame; });
}

grid::RasterManifest load_manifest(const fs::path& path) {
    return from_file(path, [&](const std::string& s) {
        return grid::parse_manifest(s, path.has_parent_path() ? path.parent_path() : fs::path("."));
    });
}

grid::LayerSet load_predictor_layers(const fs::path& manifest_path) {
    const auto manifest = load_manifest(manifest_path);
    try {
        return grid::load_layers(manifest, raster_layer_names());
    } catch (const InputError&) {
        throw;
    } catch (const Error& e) {
        throw InputError(manifest_path, e);
    }
}

std::vector<harvester::TreeRecord> load_trees(const fs::path& p) {
    return from_file(p, [](const std::string& s) { return harvester::read_tree_table(s); });
}

std::vector<stands::StandSample> load_table(const fs::path& p) {
    return from_file(p, [](const std::string& s) { return stands::read_stand_table(s); });
}

std::vector<stands::Segment> load_segments(const fs::path& p) {
    return from_file(p, [](const std::string& s) { return stands::parse_segments(s); });
}

std::optional<std::string> crs_of(const fs::path& geojson_path) {
    return from_file(geojson_path, [](const std::string& s) -> std::optional<std::string> {
        const auto j = json::parse(s, nullptr, false);
        if (j.is_object() && j.contains("crs_name") && j["crs_name"].is_string()) return j["crs_name"].get<std::string>();
        return std::nullopt;
    });
}

learn::ForestParams forest_params(const PipelineConfig& c) {
    learn::ForestParams p;
    p.ntree = c.ntree;
    p.nodesize = c.nodesize;
    p.seed = seeds::derive(c.seed, "train");
    p.threads = c.threads;
    return p;
}

void add_common(CLI::App& sub, PipelineConfig& c) {
    sub.add_option("--seed", c.seed, "Global seed; every random stage derives its own stream");
    sub.add_option("--threads", c.threads, "Worker threads; results do not depend on this")->check(CLI::PositiveNumber);
}

void add_forest(CLI::App& sub, PipelineConfig& c) {
    sub.add_option("--ntree", c.ntree, "Trees per forest")->check(CLI::PositiveNumber);
    sub.add_option("--nodesize", c.nodesize, "Minimum node size; nodes under 2x this are leaves")
        ->check(CLI::PositiveNumber);
}

void add_delineation(CLI::App& sub, PipelineConfig& c) {
    sub.add_option("--alpha", c.alpha, "Alpha-shape radius (m)")->check(CLI::PositiveNumber);
    sub.add_option("--buffer", c.buffer_m, "Buffer around the alpha shape (m)")->check(CLI::NonNegativeNumber);
    sub.add_option("--min-area", c.min_area_ha, "Drop stands smaller than this (ha)");
    sub.add_option("--min-stems", c.min_stems, "Drop stands with fewer harvested stems");
    sub.add_option("--min-spruce", c.min_spruce_pct, "Drop stands with a lower spruce volume share (%)");
}

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
    std::vector<fs::path> files;
    for (const auto& in : inputs) {
        const fs::path p(in);
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(p)) {
                if (e.is_regular_file() && e.path().extension() == ".hpr") found.push_back(e.path());
            }
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else {
            files.push_back(p);
        }
    }
    return files;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& log) {
    CLI::App app{"Stand-level butt-rot volume mapping from harvester data"};
    app.require_subcommand(1, 1);
    app.option_defaults()->always_capture_default();
    app.get_formatter()->column_width(34);
    PipelineConfig c;

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic scenario");
    synth::ScenarioConfig sc;
    fs::path synth_out;
    synth_cmd->add_option("--out", synth_out, "Output directory")->required();
    synth_cmd->add_option("--clusters", sc.n_clusters, "Number of spatial clusters");
    synth_cmd->add_option("--stands-per-cluster", sc.stands_per_cluster, "Eligible stands per cluster");
    synth_cmd->add_option("--decoys", sc.decoy_stands, "Spruce-minority stands");
    synth_cmd->add_option("--empty-segments", sc.empty_segments_per_cluster, "Unharvested segments per cluster");
    synth_cmd->add_option("--br-target", sc.br_target_m3ha, "Mean butt-rot volume target (m3/ha)");
    synth_cmd->add_option("--cluster-sd", sc.cluster_effect_sd, "Cluster effect standard deviation (m3/ha)");
    synth_cmd->add_option("--residual-sd", sc.residual_sd, "Stand-level residual standard deviation (m3/ha)");
    synth_cmd->add_option("--maturity-effect", sc.maturity_effect, "Log-scale maturity effect on the target");
    synth_cmd->add_option("--head-share", sc.head_position_share, "Share of head-positioned stems");
    add_common(*synth_cmd, c);

    // ingest
    auto* ingest_cmd = app.add_subcommand("ingest", "Parse harvester files into a tree table");
    std::vector<std::string> inputs;
    fs::path trees_out;
    ingest_cmd->add_option("--input", inputs, "Harvester .hpr files or directories")->required();
    ingest_cmd->add_option("--out", trees_out, "Tree table CSV")->required();
    add_common(*ingest_cmd, c);

    // delineate
    auto* delineate_cmd = app.add_subcommand("delineate", "Crop segments to harvested areas and filter stands");
    fs::path stands_out, dropped_out;
    delineate_cmd->add_option("--trees", c.trees, "Tree table CSV")->required();
    delineate_cmd->add_option("--segments", c.segments, "Segments GeoJSON")->required();
    delineate_cmd->add_option("--manifest", c.manifest, "Raster manifest (defines the cell frame)")->required();
    delineate_cmd->add_option("--out", stands_out, "Stands GeoJSON")->required();
    delineate_cmd->add_option("--dropped", dropped_out, "CSV of filtered stands and reasons");
    add_delineation(*delineate_cmd, c);
    add_common(*delineate_cmd, c);

    // features
    auto* features_cmd = app.add_subcommand("features", "Assemble the stand-level modeling table");
    fs::path stands_in, table_out;
    features_cmd->add_option("--stands", stands_in, "Stands GeoJSON")->required();
    features_cmd->add_option("--trees", c.trees, "Tree table CSV")->required();
    features_cmd->add_option("--manifest", c.manifest, "Raster manifest")->required();
    features_cmd->add_option("--out", table_out, "Stand table CSV")->required();
    add_common(*features_cmd, c);

    // train
    auto* train_cmd = app.add_subcommand("train", "Fit a calibrated random forest");
    fs::path table_in, model_out;
    std::string vars = "all";
    train_cmd->add_option("--table", table_in, "Stand table CSV")->required();
    train_cmd->add_option("--vars", vars, "Variable set: all or prior")->check(CLI::IsMember({"all", "prior", "prior_to_harvest"}));
    train_cmd->add_option("--out", model_out, "Model JSON")->required();
    add_forest(*train_cmd, c);
    add_common(*train_cmd, c);

    // cv
    auto* cv_cmd = app.add_subcommand("cv", "Cross-validate the calibrated forest");
    fs::path report_out, predictions_out;
    std::string strategy = "stand";
    std::size_t k = 0;
    cv_cmd->add_option("--table", table_in, "Stand table CSV")->required();
    cv_cmd->add_option("--strategy", strategy, "stand or cluster")->check(CLI::IsMember({"stand", "cluster"}));
    cv_cmd->add_option("--vars", vars, "Variable set: all or prior")->check(CLI::IsMember({"all", "prior", "prior_to_harvest"}));
    cv_cmd->add_option("--out", report_out, "Report JSON")->required();
    cv_cmd->add_option("--predictions", predictions_out, "Per-stand predictions CSV");
    cv_cmd->add_option("--k", k, "Clusters; 0 means max(2, round(n/11))");
    cv_cmd->add_option("--min-cluster", c.min_cluster, "Minimum stands per cluster");
    add_forest(*cv_cmd, c);
    add_common(*cv_cmd, c);

    // map
    auto* map_cmd = app.add_subcommand("map", "Render segment-level predictions");
    fs::path model_in, map_out;
    map_cmd->add_option("--model", model_in, "Model JSON (prior-to-harvest variable set)")->required();
    map_cmd->add_option("--segments", c.segments, "Segments GeoJSON")->required();
    map_cmd->add_option("--manifest", c.manifest, "Raster manifest")->required();
    map_cmd->add_option("--out", map_out, "Prediction map GeoJSON")->required();
    add_common(*map_cmd, c);

    // report
    auto* report_cmd = app.add_subcommand("report", "Variable importance and Spearman correlations");
    fs::path importance_out, spearman_out;
    report_cmd->add_option("--table", table_in, "Stand table CSV")->required();
    report_cmd->add_option("--importance", importance_out, "Importance CSV (per variable per model)")->required();
    report_cmd->add_option("--spearman", spearman_out, "Spearman CSV (per numeric predictor)")->required();
    add_forest(*report_cmd, c);
    add_common(*report_cmd, c);

    // CLI11 reads config files only at the root; subcommands fall through so
    // `rotmap <sub> --config f` works. Keys live under a [<sub>] section.
    app.set_config("--config", "", "Key-value file with option defaults in [subcommand] sections; flags override it");
    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    std::vector<std::string> argv_store{"rotmap"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, log);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, log);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, log);
        return kExitUsage;
    }

    try {
        if (synth_cmd->parsed()) {
            Logger say(log, "synth");
            sc.seed = c.seed;
            const auto scenario = synth::generate_scenario(sc);
            const auto files = synth::write_scenario(scenario, synth_out);
            say("done", {{"objects", scenario.objects.size()},
                         {"segments", scenario.segments.size()},
                         {"index", files.index.generic_string()}});
        } else if (ingest_cmd->parsed()) {
            Logger say(log, "ingest");
            std::vector<harvester::HarvestObject> objects;
            std::size_t ignored = 0;
            for (const auto& file : expand_inputs(inputs)) {
                harvester::ParseDiagnostics diag;
                objects.push_back(
                    from_file(file, [&](const std::string& s) { return harvester::parse_hpr(s, &diag); }));
                ignored += diag.ignored_elements;
            }
            const auto result = pipeline::ingest(objects, c.seed);
            for (std::size_t v = 0; v < result.violations.size(); ++v) {
                say("violation", {{"object", result.violation_objects[v]},
                                  {"stem", result.violations[v].stem_id},
                                  {"rule", result.violations[v].rule}});
            }
            text::write_file(trees_out, harvester::write_tree_table(result.trees));
            say("done", {{"objects", objects.size()},
                         {"stems", result.trees.size()},
                         {"dropped_stems", result.violations.size()},
                         {"ignored_elements", ignored}});
        } else if (delineate_cmd->parsed()) {
            Logger say(log, "delineate");
            const auto trees = load_trees(c.trees);
            const auto segments = load_segments(c.segments);
            const auto frame = frame_from_manifest(load_manifest(c.manifest));
            pipeline::StandParams params;
            params.delineation = {c.alpha, c.buffer_m};
            params.filters = {c.min_area_ha, c.min_stems, c.min_spruce_pct};
            const auto result = pipeline::build_stands(trees, segments, frame, params);
            for (const auto& w : result.delineation.warnings) say("warning", {{"message", w}});
            for (const auto& d : result.filtered.dropped) say("dropped", {{"stand", d.stand.stand_id}, {"reasons", d.reasons}});
            text::write_file(stands_out, stands::stands_to_geojson(result.filtered.kept, frame).dump() + "\n");
            if (!dropped_out.empty()) {
                std::string csv = "stand_id,area_ha,n_stems,spruce_pct,reasons\n";
                for (const auto& d : result.filtered.dropped) {
                    std::string reasons;
                    for (const auto& r : d.reasons) reasons += (reasons.empty() ? "" : ";") + r;
                    csv += d.stand.stand_id + ',' + text::shortest(d.stand.area_ha) + ',' +
                           std::to_string(d.stand.stem_count()) + ',' + text::shortest(d.stand.spruce_share_pct()) +
                           ',' + reasons + '\n';
                }
                text::write_file(dropped_out, csv);
            }
            say("done", {{"stands", result.delineation.stands.size()}, {"kept", result.filtered.kept.size()}});
        } else if (features_cmd->parsed()) {
            Logger say(log, "features");
            const auto stands_list = from_file(stands_in, [](const std::string& s) {
                return stands::stands_from_geojson(json::parse(s));
            });
            const auto trees = load_trees(c.trees);
            const auto layers = load_predictor_layers(c.manifest);
            const auto frame = grid::check_alignment(layers);
            const auto result = stands::assemble_samples(stands_list, trees, layers, frame, {}, c.threads);
            for (const auto& [id, reason] : result.dropped) say("dropped", {{"stand", id}, {"reason", reason}});
            text::write_file(table_out, stands::write_stand_table(result.samples));
            say("done", {{"stands", result.samples.size()}});
        } else if (train_cmd->parsed()) {
            Logger say(log, "train");
            const auto set = parse_variable_set(vars);
            const auto table = eval::make_table(load_table(table_in), set);
            const auto model = learn::fit_calibrated_forest(table, set, forest_params(c));
            if (model.calibration.degenerate) say("warning", {{"message", "constant OOB predictions; calibration falls back to the mean"}});
            text::write_file(model_out, learn::model_to_json(model).dump() + "\n");
            say("done", {{"rows", table.rows()},
                         {"variables", table.cols()},
                         {"mtry", model.forest.mtry},
                         {"a", model.calibration.a},
                         {"b", model.calibration.b}});
        } else if (cv_cmd->parsed()) {
            Logger say(log, "cv");
            const auto set = parse_variable_set(vars);
            const auto table = eval::make_table(load_table(table_in), set);
            eval::CvOptions options;
            options.forest = forest_params(c);
            options.seed = c.seed;
            options.threads = c.threads;
            eval::CvReport report;
            json extra = json::object();
            if (eval::parse_strategy(strategy) == eval::Strategy::stand) {
                report = eval::leave_stand_out_cv(table, set, options);
            } else {
                const auto clusters =
                    eval::cluster_rows(table, k > 0 ? std::optional<std::size_t>(k) : std::nullopt, c.min_cluster, c.seed);
                report = eval::leave_cluster_out_cv(table, clusters.cluster, set, options);
                extra["clusters"] = clusters.k;
            }
            auto j = eval::to_json(report);
            j["ntree"] = c.ntree;
            j["nodesize"] = c.nodesize;
            for (auto& [key, v] : extra.items()) j[key] = v;
            text::write_file(report_out, j.dump(2) + "\n");
            if (!predictions_out.empty()) text::write_file(predictions_out, eval::to_csv(report));
            say("done", {{"folds", report.folds.size()}, {"rmse", report.metrics.rmse}, {"md", report.metrics.md},
                         {"pseudo_r2", report.metrics.pseudo_r2}});
        } else if (map_cmd->parsed()) {
            Logger say(log, "map");
            const auto model = from_file(model_in, [](const std::string& s) {
                return learn::model_from_json(json::parse(s));
            });
            const auto segments = load_segments(c.segments);
            const auto layers = load_predictor_layers(c.manifest);
            const auto result = eval::render_prediction_map(model, segments, layers, crs_of(c.segments));
            for (const auto& w : result.warnings) say("warning", {{"message", w}});
            text::write_file(map_out, result.collection.dump() + "\n");
            const auto applicable = std::count_if(result.records.begin(), result.records.end(),
                                                  [](const eval::MapRecord& r) { return r.applicable; });
            say("done", {{"segments", result.records.size()}, {"applicable", applicable}});
        } else if (report_cmd->parsed()) {
            Logger say(log, "report");
            const auto samples = load_table(table_in);
            std::string importance = "model,variable,importance,rank\n";
            for (auto set : {VariableSet::all, VariableSet::prior_to_harvest}) {
                const auto table = eval::make_table(samples, set);
                auto params = forest_params(c);
                params.seed = seeds::derive(c.seed, "report", {static_cast<std::uint64_t>(set)});
                const auto forest = learn::fit_random_forest(table, params);
                const auto scores = learn::permutation_importance(
                    forest, table, seeds::derive(c.seed, "importance", {static_cast<std::uint64_t>(set)}), c.threads);
                std::vector<std::size_t> order(scores.size());
                for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
                std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
                for (std::size_t r = 0; r < order.size(); ++r) {
                    importance += std::string(to_string(set)) + ',' + table.names[order[r]] + ',' +
                                  text::shortest(scores[order[r]]) + ',' + std::to_string(r + 1) + '\n';
                }
            }
            text::write_file(importance_out, importance);
            std::string rho = "variable,rho\n";
            std::vector<double> y;
            for (const auto& s : samples) y.push_back(s.br_vol);
            for (const auto& info : kPredictors) {
                if (info.categorical) continue;
                std::vector<double> x;
                for (const auto& s : samples) x.push_back(s.get(info.name));
                try {
                    rho += std::string(info.name) + ',' + text::shortest(learn::spearman_rho(x, y)) + '\n';
                } catch (const UndefinedCorrelation&) {
                    rho += std::string(info.name) + ",\n";
                    say("warning", {{"message", "constant input; no correlation for " + std::string(info.name)}});
                }
            }
            text::write_file(spearman_out, rho);
            say("done", {{"stands", samples.size()}});
        }
    } catch (const Error& e) {
        log << "error: " << (dynamic_cast<const InputError*>(&e) ? "" : error_kind(e) + ": ") << e.what() << '\n';
        return kExitData;
    } catch (const json::exception& e) {
        log << "error: FormatError: " << e.what() << '\n';
        return kExitData;
    }
    return kExitOk;
}

}  // namespace rotmap::cli
