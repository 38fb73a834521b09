#pragma once

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "crimeflow/common.hpp"

namespace crimeflow::forecast {

struct WilcoxonResult {
    double statistic = 0;  // min(W+, W-)
    double w_plus = 0;
    double w_minus = 0;
    std::size_t n = 0;  // non-zero differences
    double p_value = 1;
    bool exact = false;
    bool degenerate = false;  // every difference was zero
};

inline constexpr std::size_t kWilcoxonExactMax = 25;

enum class WilcoxonMethod { automatic, exact, normal };

namespace detail {

/// Average ranks of |d| (1-based), ties sharing the mean rank.
inline std::vector<double> average_ranks(const std::vector<double>& absd) {
    std::vector<std::size_t> order(absd.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return absd[a] < absd[b]; });
    std::vector<double> ranks(absd.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && absd[order[j + 1]] == absd[order[i]]) ++j;
        double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace detail

/// Two-sided signed-rank test on paired samples. Zero differences are
/// dropped; n <= 25 uses the exact null distribution of W+ (computed over
/// doubled ranks so tied half-ranks stay integral), larger n the normal
/// approximation with tie-corrected variance and continuity correction.
inline WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b,
                                           WilcoxonMethod method = WilcoxonMethod::automatic) {
    if (a.size() != b.size()) throw ValidationError("wilcoxon: samples must be paired (equal length)");
    std::vector<double> d;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) d.push_back(a[i] - b[i]);
    WilcoxonResult res;
    res.n = d.size();
    if (d.empty()) {
        res.degenerate = true;
        return res;
    }
    std::vector<double> absd(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) absd[i] = std::abs(d[i]);
    auto ranks = detail::average_ranks(absd);
    for (std::size_t i = 0; i < d.size(); ++i) (d[i] > 0 ? res.w_plus : res.w_minus) += ranks[i];
    res.statistic = std::min(res.w_plus, res.w_minus);
    const double n = static_cast<double>(d.size());

    bool exact = method == WilcoxonMethod::exact ||
                 (method == WilcoxonMethod::automatic && d.size() <= kWilcoxonExactMax);
    if (exact) {
        res.exact = true;
        std::vector<int> r2(d.size());
        int total = 0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            r2[i] = static_cast<int>(std::lround(2 * ranks[i]));
            total += r2[i];
        }
        // count[s] = number of sign assignments with doubled W+ equal to s.
        std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
        count[0] = 1;
        int reach = 0;
        for (int r : r2) {
            for (int s = reach; s >= 0; --s)
                if (count[s] != 0) count[s + r] += count[s];
            reach += r;
        }
        const int obs = static_cast<int>(std::lround(2 * res.w_plus));
        double all = std::ldexp(1.0, static_cast<int>(d.size()));
        double lower = 0, upper = 0;
        for (int s = 0; s <= total; ++s) {
            if (s <= obs) lower += count[s];
            if (s >= obs) upper += count[s];
        }
        res.p_value = std::min(1.0, 2 * std::min(lower, upper) / all);
        return res;
    }

    double mean = n * (n + 1) / 4;
    double var = n * (n + 1) * (2 * n + 1) / 24;
    std::vector<double> sorted = absd;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        double t = static_cast<double>(j - i);
        var -= (t * t * t - t) / 48;
        i = j;
    }
    if (var <= 0) {
        res.p_value = 1;
        return res;
    }
    double z = std::max(0.0, std::abs(res.w_plus - mean) - 0.5) / std::sqrt(var);
    res.p_value = std::min(1.0, 2 * boost::math::cdf(boost::math::complement(boost::math::normal(), z)));
    return res;
}

}  // namespace crimeflow::forecast
