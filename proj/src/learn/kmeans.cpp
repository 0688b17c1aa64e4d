#include "rotmap/learn/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rotmap/error.hpp"
#include "rotmap/rng.hpp"

namespace rotmap::learn {

namespace {

double dist2(geom::Point a, geom::Point b) {
    const double dx = a.x - b.x, dy = a.y - b.y;
    return dx * dx + dy * dy;
}

std::size_t nearest(geom::Point p, const std::vector<geom::Point>& centroids, const std::vector<bool>& alive) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        if (!alive[c]) continue;
        const double d = dist2(p, centroids[c]);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

}  // namespace

std::size_t default_cluster_count(std::size_t n) noexcept {
    return std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(static_cast<double>(n) / 11.0)));
}

ClusterAssignment kmeans_cluster(std::span<const geom::Point> points, std::size_t k, std::size_t min_size,
                                 std::uint64_t seed) {
    const std::size_t n = points.size();
    if (n < min_size) {
        throw ClusterError(std::to_string(n) + " points cannot form a cluster of at least " +
                           std::to_string(min_size));
    }
    if (k < 1 || k > n) throw ClusterError("k must lie in [1, n]");

    Rng rng(seeds::derive(seed, "kmeans"));
    std::vector<geom::Point> centroids;
    centroids.push_back(points[rng.index(n)]);
    std::vector<double> d2(n);
    while (centroids.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::numeric_limits<double>::infinity();
            for (const auto& c : centroids) d2[i] = std::min(d2[i], dist2(points[i], c));
            total += d2[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double u = rng.uniform01() * total;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                if (u < d2[i]) {
                    pick = i;
                    break;
                }
                u -= d2[i];
            }
        } else {
            pick = rng.index(n);
        }
        centroids.push_back(points[pick]);
    }

    ClusterAssignment out;
    out.min_size = min_size;
    std::vector<bool> alive(k, true);
    std::vector<std::size_t> assign(n, k);
    auto recompute = [&] {
        std::vector<geom::Point> sums(k);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sums[assign[i]].x += points[i].x;
            sums[assign[i]].y += points[i].y;
            ++counts[assign[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                centroids[c] = {sums[c].x / static_cast<double>(counts[c]), sums[c].y / static_cast<double>(counts[c])};
            }
        }
        return counts;
    };
    auto sse = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += dist2(points[i], centroids[assign[i]]);
        return s;
    };
    for (std::size_t iter = 0; iter < kMaxLloydIterations; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = nearest(points[i], centroids, alive);
            changed = changed || c != assign[i];
            assign[i] = c;
        }
        if (!changed) break;
        recompute();
        out.sse_history.push_back(sse());
    }

    // Dissolve undersized clusters, smallest first; ties by index.
    auto counts = recompute();
    for (;;) {
        std::size_t victim = k;
        for (std::size_t c = 0; c < k; ++c) {
            if (alive[c] && counts[c] < min_size && (victim == k || counts[c] < counts[victim])) victim = c;
        }
        if (victim == k) break;
        alive[victim] = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (assign[i] != victim) continue;
            const auto c = nearest(points[i], centroids, alive);
            assign[i] = c;
            ++counts[c];
        }
        counts[victim] = 0;
    }
    recompute();

    std::vector<std::size_t> relabel(k, k);
    for (std::size_t c = 0; c < k; ++c) {
        if (!alive[c]) continue;
        relabel[c] = out.centroids.size();
        out.centroids.push_back(centroids[c]);
    }
    out.k = out.centroids.size();
    out.cluster.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.cluster[i] = relabel[assign[i]];
    return out;
}

}  // namespace rotmap::learn
