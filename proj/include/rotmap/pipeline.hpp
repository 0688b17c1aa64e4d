#pragma once

// In-memory composition of the workflow steps shared by the CLI and tests.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rotmap/eval/cv.hpp"
#include "rotmap/grid.hpp"
#include "rotmap/harvester.hpp"
#include "rotmap/stands.hpp"

namespace rotmap::pipeline {

struct IngestResult {
    std::vector<harvester::TreeRecord> trees;
    std::vector<harvester::Violation> violations;  // stems listed here are dropped
    std::vector<std::string> violation_objects;    // object id per violation
};

/// Jitters machine positions (stream keyed by the seed) and flattens the
/// objects into tree records, dropping stems that break a validation rule.
IngestResult ingest(std::span<const harvester::HarvestObject> objects, std::uint64_t seed);

struct StandParams {
    stands::DelineationParams delineation;
    stands::FilterParams filters;
    stands::SpeciesPolicy species;
};

struct StandsResult {
    stands::DelineationResult delineation;
    stands::FilterResult filtered;
};

StandsResult build_stands(std::span<const harvester::TreeRecord> trees, std::span<const stands::Segment> segments,
                          const grid::Frame& frame, const StandParams& params = {});

struct CvPair {
    eval::CvReport stand;
    eval::CvReport cluster;
    learn::ClusterAssignment clusters;
};

/// StandCV and ClusterCV on the same table with clusters from X/Y k-means.
CvPair run_both_cv(const learn::Table& table, VariableSet set, const eval::CvOptions& options,
                   std::optional<std::size_t> k = std::nullopt, std::size_t min_cluster = 5);

}  // namespace rotmap::pipeline
