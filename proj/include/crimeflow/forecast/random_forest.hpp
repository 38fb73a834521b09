#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "crimeflow/common.hpp"
#include "crimeflow/forecast/features.hpp"
#include "crimeflow/util/parallel.hpp"
#include "crimeflow/util/rng.hpp"

namespace crimeflow::forecast {

/// Number of features examined per split.
struct MaxFeatures {
    enum class Rule { all, sqrt, third, fixed };
    Rule rule = Rule::all;
    int count = 0;

    int resolve(int p) const {
        switch (rule) {
            case Rule::all: return p;
            case Rule::sqrt: return std::max(1, static_cast<int>(std::sqrt(static_cast<double>(p))));
            case Rule::third: return std::max(1, p / 3);
            case Rule::fixed: return std::clamp(count, 1, p);
        }
        return p;
    }
    std::string to_string() const {
        switch (rule) {
            case Rule::all: return "all";
            case Rule::sqrt: return "sqrt";
            case Rule::third: return "third";
            case Rule::fixed: return std::to_string(count);
        }
        return "all";
    }
    static MaxFeatures parse(const std::string& s) {
        if (s == "all") return {Rule::all, 0};
        if (s == "sqrt") return {Rule::sqrt, 0};
        if (s == "third" || s == "1/3") return {Rule::third, 0};
        try {
            std::size_t used = 0;
            int v = std::stoi(s, &used);
            if (used == s.size() && v > 0) return {Rule::fixed, v};
        } catch (const std::exception&) {
        }
        throw ValidationError("max_features must be all, sqrt, third or a positive integer (got '" + s + "')");
    }
    friend bool operator==(const MaxFeatures&, const MaxFeatures&) = default;
};

struct TreeParams {
    int max_depth = -1;  // -1 = grow until pure or too small to split
    MaxFeatures max_features;
    int min_samples_split = 2;
};

// ---------------------------------------------------------------------------
// Feature binning

/// Per-feature split candidates derived from training rows: at most 256 bins,
/// thresholds at midpoints between adjacent distinct values (quantile cuts
/// when a feature has more distinct values than bins). Code b of a value v is
/// the number of thresholds below v, so v <= thresholds[b].
struct Binning {
    std::size_t n = 0;
    std::size_t p = 0;
    std::vector<std::vector<double>> thresholds;
    std::vector<std::uint8_t> codes;  // feature-major: codes[j * n + r]

    std::uint8_t code(std::size_t j, std::size_t r) const { return codes[j * n + r]; }
};

inline Binning make_binning(const FeatureMatrix& m, const std::vector<std::size_t>& train_rows, int max_bins = 256) {
    if (max_bins < 2 || max_bins > 256) throw ValidationError("max_bins must be in [2, 256]");
    Binning b;
    b.n = m.n;
    b.p = m.p;
    b.thresholds.resize(m.p);
    b.codes.assign(m.n * m.p, 0);
    std::vector<double> vals(train_rows.size());
    for (std::size_t j = 0; j < m.p; ++j) {
        for (std::size_t k = 0; k < train_rows.size(); ++k) vals[k] = m.at(train_rows[k], j);
        std::sort(vals.begin(), vals.end());
        std::vector<double> uniq;
        for (double v : vals)
            if (uniq.empty() || v != uniq.back()) uniq.push_back(v);
        auto& thr = b.thresholds[j];
        if (uniq.size() <= static_cast<std::size_t>(max_bins)) {
            for (std::size_t k = 0; k + 1 < uniq.size(); ++k) thr.push_back(uniq[k] + (uniq[k + 1] - uniq[k]) / 2);
        } else {
            for (int q = 1; q < max_bins; ++q) {
                double v = vals[static_cast<std::size_t>(static_cast<double>(q) / max_bins * (vals.size() - 1))];
                auto next = std::upper_bound(uniq.begin(), uniq.end(), v);
                if (next == uniq.end()) break;
                double t = v + (*next - v) / 2;
                if (thr.empty() || t > thr.back()) thr.push_back(t);
            }
        }
        for (std::size_t r = 0; r < m.n; ++r)
            b.codes[j * m.n + r] = static_cast<std::uint8_t>(
                std::lower_bound(thr.begin(), thr.end(), m.at(r, j)) - thr.begin());
    }
    return b;
}

// ---------------------------------------------------------------------------
// Regression tree

struct TreeNode {
    int feature = -1;  // -1 = leaf
    double threshold = 0;
    int left = -1;
    int right = -1;
    double value = 0;
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict(const double* x) const {
        int k = 0;
        while (nodes[k].feature >= 0) k = x[nodes[k].feature] <= nodes[k].threshold ? nodes[k].left : nodes[k].right;
        return nodes[k].value;
    }
    /// Prediction of the tree cut off at `max_depth` (-1 = no cut). Trees are
    /// grown level by level, so this equals growing with that depth limit.
    double predict(const double* x, int max_depth) const {
        int k = 0;
        for (int d = 0; nodes[k].feature >= 0 && d != max_depth; ++d)
            k = x[nodes[k].feature] <= nodes[k].threshold ? nodes[k].left : nodes[k].right;
        return nodes[k].value;
    }
    int depth() const {
        std::vector<int> d(nodes.size(), 0);
        int best = 0;
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            best = std::max(best, d[k]);
            if (nodes[k].feature >= 0) d[nodes[k].left] = d[nodes[k].right] = d[k] + 1;
        }
        return best;
    }
};

namespace detail {

struct Split {
    int feature = -1;
    int bin = -1;
    double gain = 0;
};

struct BinStat {
    double w;
    double s;
};

/// Bootstrap sample kept in node order: the samples of a node occupy a
/// contiguous range, with their codes stored row-major next to each other.
struct NodeSamples {
    std::size_t p = 0;
    std::vector<double> w, y;
    std::vector<std::uint8_t> codes;

    std::size_t size() const { return w.size(); }
    const std::uint8_t* code_row(std::size_t k) const { return codes.data() + k * p; }
    void swap_rows(std::size_t a, std::size_t b) {
        std::swap(w[a], w[b]);
        std::swap(y[a], y[b]);
        std::swap_ranges(codes.begin() + static_cast<std::ptrdiff_t>(a * p),
                         codes.begin() + static_cast<std::ptrdiff_t>((a + 1) * p),
                         codes.begin() + static_cast<std::ptrdiff_t>(b * p));
    }
};

inline constexpr std::size_t kSortBelow = 48;

/// Best threshold over a cumulative scan of per-bin sums.
inline void scan_bins(int f, const BinStat* h, int cmin, int cmax, double W, double S, Split& best) {
    const double base = S * S / W;
    double wl = 0, sl = 0;
    for (int c = cmin; c < cmax; ++c) {
        if (h[c].w == 0) continue;
        wl += h[c].w;
        sl += h[c].s;
        double wr = W - wl;
        if (wr <= 0) break;
        double sr = S - sl;
        double gain = sl * sl / wl + sr * sr / wr - base;
        if (gain > best.gain) best = {f, c, gain};
    }
}

/// Examines `features` in order over samples [lo, hi) and returns how many
/// of them were non-constant. Large nodes fill all histograms in one pass.
inline int examine_features(const NodeSamples& s, std::size_t lo, std::size_t hi, const int* features, int count,
                            double W, double S, Split& best, std::vector<BinStat>& hist,
                            std::vector<BinStat>& small, std::vector<std::pair<int, std::size_t>>& scratch) {
    int non_constant = 0;
    if (hi - lo < kSortBelow) {
        for (int q = 0; q < count; ++q) {
            const int f = features[q];
            int cmin = 255, cmax = 0;
            for (std::size_t k = lo; k < hi; ++k) {
                int c = s.code_row(k)[f];
                cmin = std::min(cmin, c);
                cmax = std::max(cmax, c);
            }
            if (cmin == cmax) continue;
            ++non_constant;
            if (static_cast<std::size_t>(cmax - cmin) <= 4 * (hi - lo)) {
                BinStat* h = hist.data() + static_cast<std::size_t>(f) * 256;
                for (std::size_t k = lo; k < hi; ++k) {
                    auto& b = h[s.code_row(k)[f]];
                    b.w += s.w[k];
                    b.s += s.w[k] * s.y[k];
                }
                scan_bins(f, h, cmin, cmax, W, S, best);
                std::fill(h + cmin, h + cmax + 1, BinStat{0, 0});
                continue;
            }
            scratch.clear();
            for (std::size_t k = lo; k < hi; ++k) scratch.emplace_back(s.code_row(k)[f], k);
            std::sort(scratch.begin(), scratch.end());
            BinStat* h = small.data();
            int nb = 0;
            for (std::size_t k = 0; k < scratch.size(); ++k) {
                if (k == 0 || scratch[k].first != scratch[k - 1].first) h[nb++] = {0, 0};
                h[nb - 1].w += s.w[scratch[k].second];
                h[nb - 1].s += s.w[scratch[k].second] * s.y[scratch[k].second];
            }
            // compact bins: index c stands for the c-th distinct code
            Split local = best;
            local.feature = -1;
            scan_bins(f, h, 0, nb - 1, W, S, local);
            if (local.feature >= 0) {
                int distinct = 0;
                for (std::size_t k = 0; k < scratch.size(); ++k) {
                    if (k > 0 && scratch[k].first != scratch[k - 1].first) ++distinct;
                    if (distinct == local.bin) {
                        local.bin = scratch[k].first;
                        break;
                    }
                }
                best = local;
            }
        }
        return non_constant;
    }
    // hist holds p zeroed blocks of 256; each block is re-zeroed over its used range
    BinStat* base[256];
    for (int q = 0; q < count; ++q) base[q] = hist.data() + static_cast<std::size_t>(features[q]) * 256;
    for (std::size_t k = lo; k < hi; ++k) {
        const std::uint8_t* row = s.code_row(k);
        const double w = s.w[k], wy = s.w[k] * s.y[k];
        for (int q = 0; q < count; ++q) {
            auto& h = base[q][row[features[q]]];
            h.w += w;
            h.s += wy;
        }
    }
    for (int q = 0; q < count; ++q) {
        BinStat* h = hist.data() + static_cast<std::size_t>(features[q]) * 256;
        int cmin = 0, cmax = 255;
        while (h[cmin].w == 0) ++cmin;
        while (h[cmax].w == 0) --cmax;
        if (cmin != cmax) {
            ++non_constant;
            scan_bins(features[q], h, cmin, cmax, W, S, best);
        }
        std::fill(h + cmin, h + cmax + 1, BinStat{0, 0});
    }
    return non_constant;
}

}  // namespace detail

/// Grows one tree on a bootstrap sample of `train_rows` (draw counts act as
/// weights). At each node the features are visited in a freshly shuffled
/// order until max_features non-constant ones have been examined; the split
/// maximising the variance reduction wins (first found on ties). Nodes are
/// expanded in level order, so every random draw for depth d happens before
/// any draw for depth d + 1.
inline Tree grow_tree(const Binning& bins, const std::vector<double>& y, const std::vector<std::size_t>& train_rows,
                      const TreeParams& params, std::uint64_t seed, bool bootstrap = true) {
    Rng rng(seed);
    const std::size_t n = train_rows.size();
    if (n == 0) throw ValidationError("random forest: empty training set");
    std::vector<double> counts(n, bootstrap ? 0.0 : 1.0);
    if (bootstrap)
        for (std::size_t k = 0; k < n; ++k) counts[static_cast<std::size_t>(uniform_int(rng, 0, std::int64_t(n) - 1))] += 1;

    const int p = static_cast<int>(bins.p);
    detail::NodeSamples s;
    s.p = bins.p;
    for (std::size_t k = 0; k < n; ++k) {
        if (counts[k] == 0) continue;
        s.w.push_back(counts[k]);
        s.y.push_back(y[train_rows[k]]);
        for (int j = 0; j < p; ++j) s.codes.push_back(bins.code(static_cast<std::size_t>(j), train_rows[k]));
    }

    const int mf = params.max_features.resolve(p);
    std::vector<int> order(p);
    std::vector<detail::BinStat> hist(static_cast<std::size_t>(p) * 256, detail::BinStat{0, 0});
    std::vector<detail::BinStat> small(detail::kSortBelow);
    std::vector<std::pair<int, std::size_t>> scratch;

    Tree tree;
    struct Task {
        int node;
        std::size_t lo, hi;
        int depth;
    };
    tree.nodes.push_back({});
    std::deque<Task> queue{{0, 0, s.size(), 0}};
    while (!queue.empty()) {
        Task t = queue.front();
        queue.pop_front();
        double W = 0, S = 0, ymin = s.y[t.lo], ymax = s.y[t.lo];
        for (std::size_t k = t.lo; k < t.hi; ++k) {
            W += s.w[k];
            S += s.w[k] * s.y[k];
            ymin = std::min(ymin, s.y[k]);
            ymax = std::max(ymax, s.y[k]);
        }
        tree.nodes[t.node].value = S / W;
        if ((params.max_depth >= 0 && t.depth >= params.max_depth) ||
            t.hi - t.lo < static_cast<std::size_t>(std::max(2, params.min_samples_split)) || ymin == ymax)
            continue;

        // lazy Fisher-Yates: only the prefix that gets examined is drawn
        for (int j = 0; j < p; ++j) order[j] = j;
        detail::Split best;
        best.gain = 1e-12 * std::max(1.0, S * S / W);
        int examined = 0, next = 0;
        while (examined < mf && next < p) {
            int count = std::min(mf - examined, p - next);
            for (int j = next; j < next + count; ++j) std::swap(order[j], order[uniform_int(rng, j, p - 1)]);
            examined += detail::examine_features(s, t.lo, t.hi, order.data() + next, count, W, S, best, hist, small, scratch);
            next += count;
        }
        if (best.feature < 0) continue;

        std::size_t a = t.lo, b = t.hi;
        const auto f = static_cast<std::size_t>(best.feature);
        while (true) {
            while (a < b && s.code_row(a)[f] <= best.bin) ++a;
            while (a < b && s.code_row(b - 1)[f] > best.bin) --b;
            if (a >= b) break;
            s.swap_rows(a, b - 1);
        }
        const std::size_t mid = a;
        int left = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes.push_back({});
        auto& node = tree.nodes[t.node];
        node.feature = best.feature;
        node.threshold = bins.thresholds[f][static_cast<std::size_t>(best.bin)];
        node.left = left;
        node.right = left + 1;
        queue.push_back({left, t.lo, mid, t.depth + 1});
        queue.push_back({left + 1, mid, t.hi, t.depth + 1});
    }
    return tree;
}

// ---------------------------------------------------------------------------
// Forest

inline std::uint64_t tree_seed(std::uint64_t forest_seed, std::size_t tree) { return derive_seed(forest_seed, {tree}); }

struct RandomForest {
    std::vector<Tree> trees;

    double predict_row(const double* x) const {
        double s = 0;
        for (const auto& t : trees) s += t.predict(x);
        return s / static_cast<double>(trees.size());
    }
    std::vector<double> predict(const FeatureMatrix& m) const {
        std::vector<double> out(m.n);
        for (std::size_t r = 0; r < m.n; ++r) out[r] = predict_row(m.row(r));
        return out;
    }
};

inline RandomForest train_random_forest(const FeatureMatrix& m, const std::vector<double>& y, int n_trees,
                                        const TreeParams& params, std::uint64_t seed, unsigned threads = 1) {
    std::vector<std::size_t> rows(m.n);
    for (std::size_t r = 0; r < m.n; ++r) rows[r] = r;
    auto bins = make_binning(m, rows);
    RandomForest f;
    f.trees.resize(static_cast<std::size_t>(n_trees));
    parallel_for(f.trees.size(), threads,
                 [&](std::size_t t) { f.trees[t] = grow_tree(bins, y, rows, params, tree_seed(seed, t)); });
    return f;
}

/// A (tree count, depth cut) pair scored from one shared forest run.
struct ForestCheckpoint {
    int n_trees = 100;
    int max_depth = -1;
};

/// Grows trees 0..max(n_trees)-1 at `params.max_depth` and returns, for each
/// checkpoint, the mean prediction of its first n_trees trees cut at its
/// depth, on `query` rows. Trees are discarded after predicting, and
/// per-tree predictions are summed in tree order so the result does not
/// depend on the thread count.
inline std::vector<std::vector<double>> forest_checkpoint_predictions(
    const Binning& bins, const std::vector<double>& y, const std::vector<std::size_t>& train_rows,
    const FeatureMatrix& query, const std::vector<std::size_t>& query_rows, const TreeParams& params,
    const std::vector<ForestCheckpoint>& checkpoints, std::uint64_t seed, unsigned threads = 1) {
    int max_trees = 0;
    std::vector<int> depths;
    for (const auto& c : checkpoints) {
        if (c.n_trees <= 0) throw ValidationError("n_trees must be positive");
        if (params.max_depth >= 0 && (c.max_depth < 0 || c.max_depth > params.max_depth))
            throw ValidationError("checkpoint depth exceeds the grown depth");
        max_trees = std::max(max_trees, c.n_trees);
        if (std::find(depths.begin(), depths.end(), c.max_depth) == depths.end()) depths.push_back(c.max_depth);
    }
    const std::size_t q = query_rows.size(), nd = depths.size();
    // sums[d][k]: running sum over trees at depth cut d
    std::vector<std::vector<double>> sums(nd, std::vector<double>(q, 0.0));
    std::vector<std::vector<double>> out(checkpoints.size());
    const std::size_t batch = std::max<std::size_t>(1, resolve_threads(threads));
    std::vector<std::vector<double>> buf(batch, std::vector<double>(q * nd));
    for (int start = 0; start < max_trees; start += static_cast<int>(batch)) {
        int count = std::min<int>(static_cast<int>(batch), max_trees - start);
        parallel_for(static_cast<std::size_t>(count), threads, [&](std::size_t b) {
            Tree t = grow_tree(bins, y, train_rows, params, tree_seed(seed, static_cast<std::size_t>(start) + b));
            for (std::size_t k = 0; k < q; ++k) {
                const double* x = query.row(query_rows[k]);
                for (std::size_t d = 0; d < nd; ++d) buf[b][k * nd + d] = t.predict(x, depths[d]);
            }
        });
        for (int b = 0; b < count; ++b) {
            for (std::size_t k = 0; k < q; ++k)
                for (std::size_t d = 0; d < nd; ++d) sums[d][k] += buf[b][k * nd + d];
            int done = start + b + 1;
            for (std::size_t c = 0; c < checkpoints.size(); ++c)
                if (checkpoints[c].n_trees == done) {
                    auto d = static_cast<std::size_t>(std::find(depths.begin(), depths.end(), checkpoints[c].max_depth) -
                                                      depths.begin());
                    out[c].resize(q);
                    for (std::size_t k = 0; k < q; ++k) out[c][k] = sums[d][k] / done;
                }
        }
    }
    return out;
}

}  // namespace crimeflow::forecast
