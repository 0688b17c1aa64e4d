#include "rotmap/learn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rotmap/error.hpp"

namespace rotmap::learn {

double mean(std::span<const double> x) {
    if (x.empty()) throw EmptyInput("mean of an empty list");
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

std::vector<double> average_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

namespace {

void check_pair(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DataError("correlation inputs differ in length");
    if (x.size() < 2) throw DataError("correlation needs at least 2 values");
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y);
    const double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelation("correlation of a constant input");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman_rho(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y);
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    return pearson(rx, ry);
}

LineFit ols_line(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y);
    const double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0) throw DataError("regression on a constant predictor");
    const double slope = sxy / sxx;
    return {my - slope * mx, slope};
}

}  // namespace rotmap::learn
