#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "crimeflow/common.hpp"
#include "crimeflow/panel.hpp"

namespace crimeflow::forecast {

struct Metrics {
    double mse = 0;
    double mae = 0;
    /// Undefined (nullopt) when the actual values have zero variance.
    std::optional<double> r2;
};

inline Metrics evaluate(const std::vector<double>& pred, const std::vector<double>& actual) {
    if (pred.size() != actual.size() || pred.empty())
        throw ValidationError("evaluate: predictions and actuals must have equal, non-zero length");
    const double n = static_cast<double>(actual.size());
    double mean = 0;
    for (double a : actual) mean += a;
    mean /= n;
    double sse = 0, sae = 0, sst = 0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        double e = pred[i] - actual[i];
        sse += e * e;
        sae += std::abs(e);
        sst += (actual[i] - mean) * (actual[i] - mean);
    }
    Metrics m;
    m.mse = sse / n;
    m.mae = sae / n;
    if (sst > 0) m.r2 = 1 - sse / sst;
    return m;
}

/// Percent MSE reduction relative to the historical profile.
inline double improvement(double mse_hist, double mse_model) {
    if (mse_hist == 0) return mse_model == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    return (mse_hist - mse_model) / mse_hist * 100;
}

/// Extra crimes predicted correctly over the horizon, halved to stay
/// conservative. Negative when the model is worse than the baseline.
inline long long crimes_gained(double mae_base, double mae_model, std::size_t n_tracts, int n_hours = kHoursPerWeek) {
    if (mae_base < 0 || mae_model < 0) throw ValidationError("crimes_gained: MAE must be non-negative");
    return std::llround(static_cast<double>(n_hours) * static_cast<double>(n_tracts) * (mae_base - mae_model) / 2);
}

/// The historical profile: last year's count at the same tract and hour.
inline std::vector<double> historical_baseline(const Panel& eval) { return eval.column("past_crime"); }

inline std::vector<double> squared_errors(const std::vector<double>& pred, const std::vector<double>& actual) {
    std::vector<double> e(pred.size());
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = (pred[i] - actual[i]) * (pred[i] - actual[i]);
    return e;
}

}  // namespace crimeflow::forecast
