#pragma once

#include <string>
#include <vector>

#include "crimeflow/panel.hpp"

namespace crimeflow::forecast {

/// Dense row-major predictor matrix with recorded column order.
struct FeatureMatrix {
    std::vector<std::string> names;
    std::size_t n = 0;
    std::size_t p = 0;
    std::vector<double> x;

    double at(std::size_t r, std::size_t j) const { return x[r * p + j]; }
    const double* row(std::size_t r) const { return x.data() + r * p; }

    /// Rows `idx`, in that order.
    FeatureMatrix subset(const std::vector<std::size_t>& idx) const {
        FeatureMatrix m{names, idx.size(), p, {}};
        m.x.reserve(idx.size() * p);
        for (auto r : idx) m.x.insert(m.x.end(), row(r), row(r) + p);
        return m;
    }
};

/// Mobility block of a specification: (1a) check-ins, (1b) + pass-through,
/// (2a) in/out + self-loop, (2b) + pass-through.
struct Variant {
    std::string name;
    std::vector<std::string> mobility;
};

inline std::vector<Variant> standard_variants() {
    return {{"1a", {"checkins"}},
            {"1b", {"checkins", "passthrough_flow"}},
            {"2a", {"inout_flow", "selfloop_flow"}},
            {"2b", {"inout_flow", "selfloop_flow", "passthrough_flow"}}};
}

inline Variant find_variant(const std::string& name) {
    for (auto& v : standard_variants())
        if (v.name == name) return v;
    throw ValidationError("unknown variant '" + name + "' (expected 1a, 1b, 2a or 2b)");
}

/// past_crime, the variant's mobility columns, x, y, t, weekend, then extras.
inline std::vector<std::string> feature_names(const Variant& v, const std::vector<std::string>& extra = {}) {
    std::vector<std::string> names{"past_crime"};
    names.insert(names.end(), v.mobility.begin(), v.mobility.end());
    for (const char* c : {"x", "y", "t", "weekend"}) names.emplace_back(c);
    names.insert(names.end(), extra.begin(), extra.end());
    return names;
}

/// Predictors only; the response column is never read here.
inline FeatureMatrix build_features(const Panel& panel, const std::vector<std::string>& names) {
    for (const auto& n : names)
        if (n == "crime") throw ValidationError("the response cannot be a predictor");
    FeatureMatrix m;
    m.names = names;
    m.n = panel.rows();
    m.p = names.size();
    m.x.assign(m.n * m.p, 0.0);
    for (std::size_t j = 0; j < m.p; ++j) {
        auto col = panel.column(names[j]);
        for (std::size_t r = 0; r < m.n; ++r) m.x[r * m.p + j] = col[r];
    }
    return m;
}

}  // namespace crimeflow::forecast
