#pragma once

#include <span>
#include <vector>

namespace rotmap::learn {

/// 1-based ranks; ties share their mean rank.
std::vector<double> average_ranks(std::span<const double> x);

/// Throws UndefinedCorrelation for a constant input, DataError for
/// mismatched lengths or fewer than 2 values.
double pearson(std::span<const double> x, std::span<const double> y);
double spearman_rho(std::span<const double> x, std::span<const double> y);

struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
};

/// Least squares y = intercept + slope * x. Throws DataError when x is constant.
LineFit ols_line(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> x);

}  // namespace rotmap::learn
