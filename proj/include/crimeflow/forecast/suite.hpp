#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "crimeflow/forecast/cv.hpp"
#include "crimeflow/forecast/features.hpp"
#include "crimeflow/forecast/metrics.hpp"
#include "crimeflow/forecast/wilcoxon.hpp"
#include "crimeflow/panel.hpp"
#include "crimeflow/util/io.hpp"

namespace crimeflow::forecast {

struct ForecastConfig {
    int folds = 5;
    std::uint64_t seed = 0;
    ENGrid en;
    RFGrid rf;
    double en_tolerance = 1e-7;
    std::vector<std::string> variants{"1a", "1b", "2a", "2b"};
    std::vector<std::string> extra_features;  // e.g. the covariates for the robustness run
    bool run_elastic_net = true;
    bool run_random_forest = true;
    /// Pairs compared with the signed-rank test: (better candidate, reference).
    std::vector<std::pair<std::string, std::string>> wilcoxon_pairs{{"1b", "1a"}, {"2b", "2a"}};
    unsigned threads = 1;
};

struct ModelResult {
    std::string model;    // Historical, EN, RF
    std::string variant;  // empty for the historical profile
    std::vector<std::string> predictors;
    Metrics metrics;
    double improvement = 0;
    long long crimes_gained = 0;
    nlohmann::json hyperparameters = nlohmann::json::object();
    nlohmann::json cv = nlohmann::json::array();
    std::vector<double> predictions;

    std::string label() const { return variant.empty() ? model : model + " (" + variant + ")"; }
};

struct WilcoxonComparison {
    std::string model;
    std::string variant;
    std::string reference;
    WilcoxonResult result;
};

struct EvalReport {
    std::size_t n_tracts = 0;
    std::size_t n_train = 0;
    std::size_t n_eval = 0;
    int train_year = 0;
    int eval_year = 0;
    std::uint64_t seed = 0;
    Folds folds;
    std::vector<ModelResult> models;
    std::vector<WilcoxonComparison> comparisons;
    Diagnostics diagnostics;

    const ModelResult& find(const std::string& model, const std::string& variant = "") const {
        for (const auto& m : models)
            if (m.model == model && m.variant == variant) return m;
        throw ValidationError("no result for " + model + (variant.empty() ? "" : " (" + variant + ")"));
    }
    const WilcoxonComparison* comparison(const std::string& model, const std::string& variant) const {
        for (const auto& c : comparisons)
            if (c.model == model && c.variant == variant) return &c;
        return nullptr;
    }
};

inline nlohmann::json to_json(const MaxFeatures& mf) { return mf.to_string(); }

inline nlohmann::json to_json(const RFConfig& c) {
    return {{"n_trees", c.n_trees},
            {"max_depth", c.max_depth < 0 ? nlohmann::json(nullptr) : nlohmann::json(c.max_depth)},
            {"max_features", to_json(c.max_features)}};
}

/// Trains on `train` (response: its crime column) and scores on `eval`. The
/// evaluation panel's crime column is read only as the target of the metrics.
inline EvalReport prediction_suite(const Panel& train, const Panel& eval, const ForecastConfig& cfg) {
    if (train.tract_ids != eval.tract_ids) throw ValidationError("train and evaluation panels must share the tract set");
    if (cfg.variants.empty()) throw ValidationError("forecast: no variants configured");
    EvalReport rep;
    rep.n_tracts = train.n_tracts();
    rep.n_train = train.rows();
    rep.n_eval = eval.rows();
    rep.train_year = train.year;
    rep.eval_year = eval.year;
    rep.seed = cfg.seed;
    rep.folds = assign_folds(train.rows(), cfg.folds, derive_seed(cfg.seed, {0}));

    const auto y = train.column("crime");
    const auto actual = eval.column("crime");

    ModelResult hist;
    hist.model = "Historical";
    hist.predictors = {"past_crime"};
    hist.predictions = historical_baseline(eval);
    hist.metrics = evaluate(hist.predictions, actual);
    rep.models.push_back(hist);
    const double mse_hist = hist.metrics.mse, mae_hist = hist.metrics.mae;

    auto finish = [&](ModelResult& r) {
        r.metrics = evaluate(r.predictions, actual);
        r.improvement = improvement(mse_hist, r.metrics.mse);
        r.crimes_gained = crimes_gained(mae_hist, r.metrics.mae, rep.n_tracts);
    };

    for (std::size_t vi = 0; vi < cfg.variants.size(); ++vi) {
        const auto variant = find_variant(cfg.variants[vi]);
        const auto names = feature_names(variant, cfg.extra_features);
        const auto xtr = build_features(train, names);
        const auto xev = build_features(eval, names);

        if (cfg.run_elastic_net) {
            auto cv = cv_elastic_net(xtr, y, rep.folds, cfg.en, cfg.en_tolerance, cfg.threads, rep.diagnostics);
            ModelResult r;
            r.model = "EN";
            r.variant = variant.name;
            r.predictors = names;
            r.predictions = cv.model.predict(xev);
            r.hyperparameters = {{"lambda", cv.model.lambda},
                                 {"alpha", cv.model.alpha},
                                 {"intercept", cv.model.intercept},
                                 {"coefficients", cv.model.raw_coefficients()}};
            for (const auto& g : cv.grid)
                r.cv.push_back({{"lambda", g.lambda}, {"alpha", g.alpha}, {"mean_mse", g.mean_mse}});
            finish(r);
            rep.models.push_back(std::move(r));
        }
        if (cfg.run_random_forest) {
            const std::uint64_t seed = derive_seed(cfg.seed, {1, vi});
            auto cv = cv_random_forest(xtr, y, rep.folds, cfg.rf, seed, cfg.threads, rep.diagnostics);
            ModelResult r;
            r.model = "RF";
            r.variant = variant.name;
            r.predictors = names;
            r.predictions = fit_predict_random_forest(xtr, y, xev, cv.chosen(), seed, cfg.threads);
            r.hyperparameters = to_json(cv.chosen());
            r.hyperparameters["seed"] = seed;
            for (const auto& g : cv.grid) {
                auto j = to_json(g.config);
                j["mean_mse"] = g.mean_mse;
                r.cv.push_back(j);
            }
            finish(r);
            rep.models.push_back(std::move(r));
        }
    }

    for (const char* model : {"EN", "RF"})
        for (const auto& [cand, ref] : cfg.wilcoxon_pairs) {
            const ModelResult *a = nullptr, *b = nullptr;
            for (const auto& m : rep.models) {
                if (m.model != model) continue;
                if (m.variant == cand) a = &m;
                if (m.variant == ref) b = &m;
            }
            if (!a || !b) continue;
            rep.comparisons.push_back({model, cand, ref,
                                       wilcoxon_signed_rank(squared_errors(a->predictions, actual),
                                                            squared_errors(b->predictions, actual))});
        }
    return rep;
}

inline nlohmann::json report_to_json(const EvalReport& rep) {
    using nlohmann::json;
    json models = json::array();
    for (const auto& m : rep.models) {
        json j{{"model", m.model},
               {"variant", m.variant.empty() ? json(nullptr) : json(m.variant)},
               {"predictors", m.predictors},
               {"mse", m.metrics.mse},
               {"mae", m.metrics.mae},
               {"r2", m.metrics.r2 ? json(*m.metrics.r2) : json(nullptr)},
               {"improvement_pct", m.improvement},
               {"crimes_gained", m.crimes_gained}};
        if (m.model != "Historical") {
            j["hyperparameters"] = m.hyperparameters;
            j["cv"] = m.cv;
        }
        models.push_back(j);
    }
    json comps = json::array();
    for (const auto& c : rep.comparisons)
        comps.push_back({{"model", c.model},
                         {"variant", c.variant},
                         {"reference", c.reference},
                         {"unit", "squared_error"},
                         {"statistic", c.result.statistic},
                         {"w_plus", c.result.w_plus},
                         {"w_minus", c.result.w_minus},
                         {"n", c.result.n},
                         {"p_value", c.result.p_value},
                         {"exact", c.result.exact},
                         {"degenerate", c.result.degenerate}});
    json diag = json::object();
    for (const auto& [k, v] : rep.diagnostics.counts) diag[k] = v;
    return {{"n_tracts", rep.n_tracts},
            {"n_train", rep.n_train},
            {"n_eval", rep.n_eval},
            {"train_year", rep.train_year},
            {"eval_year", rep.eval_year},
            {"seed", rep.seed},
            {"folds", {{"k", rep.folds.k}, {"fold_of_train_row", rep.folds.fold_of}}},
            {"models", models},
            {"wilcoxon", comps},
            {"diagnostics", diag}};
}

/// Delimited table, one row per model: Model, Predictors, MSE,
/// Improvement%, MAE, R2, Wilcoxon p (against the declared reference).
inline std::string report_table(const EvalReport& rep, char delim = '\t') {
    std::ostringstream os;
    os << "Model" << delim << "Predictors" << delim << "MSE" << delim << "Improvement%" << delim << "MAE" << delim
       << "R2" << delim << "Wilcoxon p" << '\n';
    for (const auto& m : rep.models) {
        os << m.model << delim << (m.variant.empty() ? "past_crime" : m.variant) << delim
           << io::fmt_fixed(m.metrics.mse, 3) << delim << (m.model == "Historical" ? "" : io::fmt_fixed(m.improvement, 2))
           << delim << io::fmt_fixed(m.metrics.mae, 3) << delim << (m.metrics.r2 ? io::fmt_fixed(*m.metrics.r2, 3) : "NA")
           << delim;
        if (auto* c = rep.comparison(m.model, m.variant)) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.3g", c->result.p_value);
            os << buf;
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace crimeflow::forecast
