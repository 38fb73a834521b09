#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "crimeflow/common.hpp"
#include "crimeflow/forecast/elastic_net.hpp"
#include "crimeflow/forecast/random_forest.hpp"
#include "crimeflow/util/parallel.hpp"
#include "crimeflow/util/rng.hpp"

namespace crimeflow::forecast {

/// Fold of each training position after a seeded shuffle; fold sizes differ
/// by at most one.
struct Folds {
    int k = 0;
    std::vector<int> fold_of;

    std::vector<std::size_t> train(int f) const {
        std::vector<std::size_t> r;
        for (std::size_t i = 0; i < fold_of.size(); ++i)
            if (fold_of[i] != f) r.push_back(i);
        return r;
    }
    std::vector<std::size_t> test(int f) const {
        std::vector<std::size_t> r;
        for (std::size_t i = 0; i < fold_of.size(); ++i)
            if (fold_of[i] == f) r.push_back(i);
        return r;
    }
};

inline Folds assign_folds(std::size_t n, int k, std::uint64_t seed) {
    if (k < 2) throw ValidationError("need at least 2 folds");
    if (n < 2 * static_cast<std::size_t>(k)) throw ValidationError("need at least 2 rows per fold");
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(seed);
    for (std::size_t i = n - 1; i > 0; --i)
        std::swap(perm[i], perm[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i)))]);
    Folds f;
    f.k = k;
    f.fold_of.assign(n, 0);
    for (std::size_t pos = 0; pos < n; ++pos) f.fold_of[perm[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
    return f;
}

inline bool constant_on(const std::vector<double>& y, const std::vector<std::size_t>& rows) {
    for (auto r : rows)
        if (y[r] != y[rows.front()]) return false;
    return true;
}

inline double mse_on(const std::vector<double>& pred, const std::vector<double>& y, const std::vector<std::size_t>& rows) {
    double s = 0;
    for (std::size_t k = 0; k < rows.size(); ++k) s += (pred[k] - y[rows[k]]) * (pred[k] - y[rows[k]]);
    return s / static_cast<double>(rows.size());
}

// ---------------------------------------------------------------------------
// Elastic net

struct ENGrid {
    std::vector<double> lambdas{1e-4, 1e-3, 1e-2, 1e-1, 1, 10, 100};
    std::vector<double> alphas{0, 0.25, 0.5, 0.75, 1};
};

struct ENCVPoint {
    double lambda = 0;
    double alpha = 0;
    double mean_mse = 0;
};

struct ENCVResult {
    std::vector<ENCVPoint> grid;  // lambdas outer, alphas inner, as configured
    std::size_t best = 0;
    std::vector<int> skipped_folds;
    ElasticNetModel model;  // refit on all training rows at the chosen point
};

/// Grid search by k-fold CV on mean held-out MSE; ties go to the smaller
/// lambda, then the smaller alpha. Each (fold, alpha) walks lambda from
/// large to small with warm starts.
inline ENCVResult cv_elastic_net(const FeatureMatrix& m, const std::vector<double>& y, const Folds& folds,
                                 const ENGrid& grid, double tol, unsigned threads, Diagnostics& diag) {
    if (grid.lambdas.empty() || grid.alphas.empty()) throw ValidationError("elastic net grid is empty");
    if (folds.fold_of.size() != m.n) throw ValidationError("fold assignment does not match the training rows");
    const std::size_t nl = grid.lambdas.size(), na = grid.alphas.size();
    std::vector<std::size_t> lambda_order(nl);
    for (std::size_t i = 0; i < nl; ++i) lambda_order[i] = i;
    std::stable_sort(lambda_order.begin(), lambda_order.end(),
                     [&](std::size_t a, std::size_t b) { return grid.lambdas[a] > grid.lambdas[b]; });

    // mse[f][l * na + a]; NaN marks a skipped fold
    std::vector<std::vector<double>> mse(static_cast<std::size_t>(folds.k),
                                         std::vector<double>(nl * na, std::numeric_limits<double>::quiet_NaN()));
    parallel_for(static_cast<std::size_t>(folds.k), threads, [&](std::size_t f) {
        auto tr = folds.train(static_cast<int>(f)), te = folds.test(static_cast<int>(f));
        if (constant_on(y, tr)) return;
        ElasticNetProblem prob(m, y, &tr);
        std::vector<double> pred(te.size());
        for (std::size_t a = 0; a < na; ++a) {
            std::vector<double> warm;
            for (std::size_t l : lambda_order) {
                auto model = prob.solve(grid.lambdas[l], grid.alphas[a], tol, warm.empty() ? nullptr : &warm);
                warm = model.coef;
                for (std::size_t k = 0; k < te.size(); ++k) pred[k] = model.predict_row(m.row(te[k]));
                mse[f][l * na + a] = mse_on(pred, y, te);
            }
        }
    });

    ENCVResult res;
    for (int f = 0; f < folds.k; ++f)
        if (std::isnan(mse[static_cast<std::size_t>(f)][0])) {
            res.skipped_folds.push_back(f);
            diag.warn("cv_fold_skipped", "elastic net: fold " + std::to_string(f) + " has a constant training response");
        }
    for (std::size_t l = 0; l < nl; ++l)
        for (std::size_t a = 0; a < na; ++a) {
            double s = 0;
            int used = 0;
            for (const auto& row : mse)
                if (!std::isnan(row[l * na + a])) {
                    s += row[l * na + a];
                    ++used;
                }
            res.grid.push_back({grid.lambdas[l], grid.alphas[a], used ? s / used : 0.0});
        }
    for (std::size_t g = 1; g < res.grid.size(); ++g) {
        const auto &c = res.grid[g], &b = res.grid[res.best];
        if (c.mean_mse < b.mean_mse ||
            (c.mean_mse == b.mean_mse && (c.lambda < b.lambda || (c.lambda == b.lambda && c.alpha < b.alpha))))
            res.best = g;
    }
    res.model = ElasticNetProblem(m, y).solve(res.grid[res.best].lambda, res.grid[res.best].alpha, tol);
    return res;
}

// ---------------------------------------------------------------------------
// Random forest

struct RFConfig {
    int n_trees = 100;
    int max_depth = -1;
    MaxFeatures max_features;
};

struct RFGrid {
    std::vector<int> n_trees{100, 300};
    std::vector<int> max_depth{8, 16, -1};
    std::vector<MaxFeatures> max_features{{MaxFeatures::Rule::all, 0},
                                          {MaxFeatures::Rule::sqrt, 0},
                                          {MaxFeatures::Rule::third, 0}};

    /// Grid order: n_trees outer, then max_depth, then max_features.
    std::vector<RFConfig> configs() const {
        std::vector<RFConfig> c;
        for (int t : n_trees)
            for (int d : max_depth)
                for (const auto& f : max_features) c.push_back({t, d, f});
        return c;
    }
};

struct RFCVPoint {
    RFConfig config;
    double mean_mse = 0;
};

struct RFCVResult {
    std::vector<RFCVPoint> grid;
    std::size_t best = 0;
    std::vector<int> skipped_folds;
    RFConfig chosen() const { return grid[best].config; }
};

namespace detail {

/// One forest per distinct resolved max_features; every (n_trees, depth)
/// pair of the grid is read off it. Configs whose max_features resolve to
/// the same count therefore share trees and predictions.
struct ForestPlan {
    int mf = 0;
    int grow_depth = -1;
    std::vector<ForestCheckpoint> checkpoints;
    std::vector<std::size_t> config_index;
};

inline std::vector<ForestPlan> plan_forests(const std::vector<RFConfig>& configs, int p) {
    std::vector<ForestPlan> plans;
    for (std::size_t c = 0; c < configs.size(); ++c) {
        const auto& cfg = configs[c];
        if (cfg.n_trees <= 0) throw ValidationError("random forest grid: n_trees must be positive");
        if (cfg.max_depth < -1) throw ValidationError("random forest grid: max_depth must be >= 0 or none");
        int mf = cfg.max_features.resolve(p);
        auto it = std::find_if(plans.begin(), plans.end(), [&](const ForestPlan& fp) { return fp.mf == mf; });
        if (it == plans.end()) {
            plans.push_back({mf, cfg.max_depth, {}, {}});
            it = plans.end() - 1;
        }
        if (it->grow_depth >= 0 && (cfg.max_depth < 0 || cfg.max_depth > it->grow_depth)) it->grow_depth = cfg.max_depth;
        it->checkpoints.push_back({cfg.n_trees, cfg.max_depth});
        it->config_index.push_back(c);
    }
    return plans;
}

inline TreeParams plan_params(const ForestPlan& fp) {
    TreeParams tp;
    tp.max_depth = fp.grow_depth;
    tp.max_features = {MaxFeatures::Rule::fixed, fp.mf};
    return tp;
}

}  // namespace detail

/// Seed of the forest grown for fold `fold` (or the final refit, fold = -1)
/// with `mf` features per split.
inline std::uint64_t forest_seed(std::uint64_t seed, int fold, int mf) {
    return derive_seed(seed, {static_cast<std::uint64_t>(fold + 1), static_cast<std::uint64_t>(mf)});
}

/// Grid search by k-fold CV on mean held-out MSE; ties go to the first
/// config in grid order.
inline RFCVResult cv_random_forest(const FeatureMatrix& m, const std::vector<double>& y, const Folds& folds,
                                   const RFGrid& grid, std::uint64_t seed, unsigned threads, Diagnostics& diag) {
    auto configs = grid.configs();
    if (configs.empty()) throw ValidationError("random forest grid is empty");
    if (folds.fold_of.size() != m.n) throw ValidationError("fold assignment does not match the training rows");
    auto plans = detail::plan_forests(configs, static_cast<int>(m.p));

    RFCVResult res;
    std::vector<double> sum(configs.size(), 0.0);
    int used = 0;
    for (int f = 0; f < folds.k; ++f) {
        auto tr = folds.train(f), te = folds.test(f);
        if (constant_on(y, tr)) {
            res.skipped_folds.push_back(f);
            diag.warn("cv_fold_skipped", "random forest: fold " + std::to_string(f) + " has a constant training response");
            continue;
        }
        ++used;
        auto bins = make_binning(m, tr);
        for (const auto& fp : plans) {
            auto preds = forest_checkpoint_predictions(bins, y, tr, m, te, detail::plan_params(fp), fp.checkpoints,
                                                       forest_seed(seed, f, fp.mf), threads);
            for (std::size_t c = 0; c < preds.size(); ++c) sum[fp.config_index[c]] += mse_on(preds[c], y, te);
        }
    }
    for (std::size_t c = 0; c < configs.size(); ++c) res.grid.push_back({configs[c], used ? sum[c] / used : 0.0});
    for (std::size_t g = 1; g < res.grid.size(); ++g)
        if (res.grid[g].mean_mse < res.grid[res.best].mean_mse) res.best = g;
    return res;
}

/// Fits `cfg` on all rows of `train` and predicts every row of `query`.
inline std::vector<double> fit_predict_random_forest(const FeatureMatrix& train, const std::vector<double>& y,
                                                     const FeatureMatrix& query, const RFConfig& cfg,
                                                     std::uint64_t seed, unsigned threads) {
    if (train.p != query.p) throw ValidationError("random forest: train and query feature counts differ");
    std::vector<std::size_t> rows(train.n), qrows(query.n);
    for (std::size_t r = 0; r < train.n; ++r) rows[r] = r;
    for (std::size_t r = 0; r < query.n; ++r) qrows[r] = r;
    auto bins = make_binning(train, rows);
    TreeParams tp;
    tp.max_depth = cfg.max_depth;
    int mf = cfg.max_features.resolve(static_cast<int>(train.p));
    tp.max_features = {MaxFeatures::Rule::fixed, mf};
    return forest_checkpoint_predictions(bins, y, rows, query, qrows, tp, {{cfg.n_trees, cfg.max_depth}},
                                         forest_seed(seed, -1, mf), threads)
        .front();
}

}  // namespace crimeflow::forecast
