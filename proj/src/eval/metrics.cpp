#include "rotmap/eval/metrics.hpp"

#include <cmath>

#include "rotmap/error.hpp"

namespace rotmap::eval {

MetricsReport compute_metrics(std::span<const double> observed, std::span<const double> predicted) {
    if (observed.size() != predicted.size()) throw MetricsError("observed and predicted differ in length");
    if (observed.size() < 2) throw MetricsError("metrics need at least 2 observations");
    MetricsReport m;
    m.n = observed.size();
    const double n = static_cast<double>(m.n);
    double sum = 0.0;
    for (double y : observed) sum += y;
    m.mean_observed = sum / n;
    double sq = 0.0, dev = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < m.n; ++i) {
        const double e = observed[i] - predicted[i];
        sq += e * e;
        dev += e;
        ss += (observed[i] - m.mean_observed) * (observed[i] - m.mean_observed);
    }
    if (ss == 0.0) throw MetricsError("pseudo-R2 is undefined for a constant response");
    m.mse = sq / n;
    m.rmse = std::sqrt(m.mse);
    m.md = dev / n;
    // 1 - MSE / (ss / (n - 1)) rearranged so that sq == ss gives exactly 1/n.
    m.pseudo_r2 = (n - (n - 1.0) * (sq / ss)) / n;
    if (m.mean_observed != 0.0) {
        m.rmse_pct = 100.0 * m.rmse / m.mean_observed;
        m.md_pct = 100.0 * m.md / m.mean_observed;
    }
    return m;
}

nlohmann::json to_json(const MetricsReport& m) {
    nlohmann::json j = {{"n", m.n},       {"mean_observed", m.mean_observed}, {"mse", m.mse},
                        {"rmse", m.rmse}, {"md", m.md},                       {"pseudo_r2", m.pseudo_r2}};
    j["rmse_pct"] = m.rmse_pct ? nlohmann::json(*m.rmse_pct) : nlohmann::json();
    j["md_pct"] = m.md_pct ? nlohmann::json(*m.md_pct) : nlohmann::json();
    return j;
}

}  // namespace rotmap::eval
