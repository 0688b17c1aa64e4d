#pragma once

// Straight-line re-derivation of the accuracy metrics used as a test
// oracle. Accumulates in reverse order and in long double so it shares no
// rounding path with the library.

#include <cmath>
#include <cstddef>
#include <vector>

namespace metrics_oracle {

struct Result {
    double mse, rmse, md, pseudo_r2, mean_observed;
};

inline Result evaluate(const std::vector<double>& y, const std::vector<double>& yhat) {
    const std::size_t n = y.size();
    long double sum_y = 0, sq_err = 0, dev = 0;
    for (std::size_t k = n; k-- > 0;) {
        sum_y += y[k];
        sq_err += (static_cast<long double>(y[k]) - yhat[k]) * (static_cast<long double>(y[k]) - yhat[k]);
        dev += static_cast<long double>(y[k]) - yhat[k];
    }
    const long double ybar = sum_y / n;
    long double ss = 0;
    for (std::size_t k = n; k-- > 0;) ss += (y[k] - ybar) * (y[k] - ybar);
    const long double mse = sq_err / n;
    const long double sample_var = ss / (n - 1);
    return {static_cast<double>(mse), static_cast<double>(std::sqrt(mse)), static_cast<double>(dev / n),
            static_cast<double>(1.0L - mse / sample_var), static_cast<double>(ybar)};
}

}  // namespace metrics_oracle
