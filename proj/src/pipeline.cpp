#include "rotmap/pipeline.hpp"

#include <set>

#include "rotmap/rng.hpp"

namespace rotmap::pipeline {

IngestResult ingest(std::span<const harvester::HarvestObject> objects, std::uint64_t seed) {
    IngestResult out;
    for (const auto& object : objects) {
        const auto positioned = harvester::simulate_head_positions(object, seeds::derive(seed, "jitter"));
        const auto violations = harvester::validate(positioned);
        std::set<std::string> bad;
        for (const auto& v : violations) {
            bad.insert(v.stem_id);
            out.violations.push_back(v);
            out.violation_objects.push_back(object.object_id);
        }
        for (auto& t : harvester::to_tree_records(positioned)) {
            if (!bad.contains(t.stem_id)) out.trees.push_back(std::move(t));
        }
    }
    return out;
}

StandsResult build_stands(std::span<const harvester::TreeRecord> trees, std::span<const stands::Segment> segments,
                          const grid::Frame& frame, const StandParams& params) {
    StandsResult out;
    out.delineation = stands::delineate_stands(trees, segments, frame, params.delineation, params.species);
    out.filtered = stands::filter_stands(out.delineation.stands, params.filters);
    return out;
}

CvPair run_both_cv(const learn::Table& table, VariableSet set, const eval::CvOptions& options,
                   std::optional<std::size_t> k, std::size_t min_cluster) {
    CvPair out;
    out.clusters = eval::cluster_rows(table, k, min_cluster, options.seed);
    out.stand = eval::leave_stand_out_cv(table, set, options);
    out.cluster = eval::leave_cluster_out_cv(table, out.clusters.cluster, set, options);
    return out;
}

}  // namespace rotmap::pipeline
