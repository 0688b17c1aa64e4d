#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rotmap/geometry.hpp"

namespace rotmap::learn {

struct ClusterAssignment {
    std::size_t k = 0;                  // surviving clusters
    std::vector<geom::Point> centroids;  // one per surviving cluster
    std::vector<std::size_t> cluster;    // per input point, in [0, k)
    std::size_t min_size = 0;
    std::vector<double> sse_history;     // within-cluster SSE after each Lloyd iteration
};

inline constexpr std::size_t kMaxLloydIterations = 100;

/// k-means++ seeding and Lloyd iterations. Undersized clusters are then
/// dissolved smallest first, their points moved to the nearest surviving
/// centroid, and centroids recomputed once. Throws ClusterError when
/// n < min_size, k < 1 or k > n.
ClusterAssignment kmeans_cluster(std::span<const geom::Point> points, std::size_t k, std::size_t min_size,
                                 std::uint64_t seed);

/// max(2, round(n / 11)).
std::size_t default_cluster_count(std::size_t n) noexcept;

}  // namespace rotmap::learn
