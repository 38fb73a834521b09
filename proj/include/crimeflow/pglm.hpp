#pragma once

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "crimeflow/common.hpp"
#include "crimeflow/panel.hpp"
#include "crimeflow/util/parallel.hpp"

namespace crimeflow::pglm {

// ---------------------------------------------------------------------------
// Model specification and design

struct ModelSpec {
    std::string name;
    std::string response = "crime";
    std::vector<std::string> regressors;
    bool tract_effects = true;
    bool hour_effects = true;
    /// Dropped dummy levels; defaults are the lowest tract_id and t = 0.
    std::optional<TractId> reference_tract;
    int reference_hour = 0;
    /// Drop rows of tracts/hours whose response is identically zero instead of
    /// failing (their dummies would diverge to -infinity).
    bool drop_separated = false;
    /// Exclude regressors that are constant within every tract when tract
    /// effects are on (they are absorbed by the tract dummies).
    bool absorb_tract_constant = false;
};

/// Explicit-dummy design stored by row structure: every row has the
/// intercept, at most one tract dummy, at most one hour dummy and k dense
/// regressors. Column order: intercept, tract dummies, hour dummies,
/// regressors.
struct Design {
    std::vector<std::string> names;
    std::size_t first_regressor = 0;
    std::size_t k = 0;                 // dense regressors
    std::vector<int> tract_col;        // per row, -1 = reference / no FE
    std::vector<int> hour_col;         // per row
    std::vector<double> x;             // row-major n x k
    std::vector<double> y;
    std::vector<std::size_t> panel_rows;
    std::vector<std::string> absorbed;       // regressors absorbed by tract FE
    std::vector<std::string> dropped_levels;  // separated FE levels removed

    std::size_t n() const { return y.size(); }
    std::size_t p() const { return names.size(); }
    std::vector<std::string> regressor_names() const {
        return {names.begin() + static_cast<std::ptrdiff_t>(first_regressor), names.end()};
    }
};

/// Raised for unidentifiable designs (constant or collinear columns,
/// separated fixed-effect levels, degenerate response).
class IdentificationError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

namespace detail {

inline std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& e : v) s += (s.empty() ? "" : ", ") + e;
    return s;
}

/// Visits the non-zero entries of design row r as (column, value).
template <class F>
inline void for_row(const Design& d, std::size_t r, F&& f) {
    f(std::size_t{0}, 1.0);
    if (d.tract_col[r] >= 0) f(static_cast<std::size_t>(d.tract_col[r]), 1.0);
    if (d.hour_col[r] >= 0) f(static_cast<std::size_t>(d.hour_col[r]), 1.0);
    const double* xr = d.x.data() + r * d.k;
    for (std::size_t j = 0; j < d.k; ++j) f(d.first_regressor + j, xr[j]);
}

/// X' diag(w) X exploiting row sparsity.
inline Eigen::MatrixXd weighted_gram(const Design& d, const std::vector<double>& w) {
    const std::size_t p = d.p();
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    std::vector<std::size_t> cols;
    std::vector<double> vals;
    for (std::size_t r = 0; r < d.n(); ++r) {
        cols.clear();
        vals.clear();
        for_row(d, r, [&](std::size_t c, double v) {
            cols.push_back(c);
            vals.push_back(v);
        });
        const double wr = w[r];
        for (std::size_t a = 0; a < cols.size(); ++a) {
            const double wa = wr * vals[a];
            for (std::size_t b = a; b < cols.size(); ++b) g(cols[a], cols[b]) += wa * vals[b];
        }
    }
    // Only the upper triangle by (a <= b) position was filled; columns are
    // visited in increasing order so that is the upper triangle proper.
    g.triangularView<Eigen::StrictlyLower>() = g.transpose().triangularView<Eigen::StrictlyLower>();
    return g;
}

inline Eigen::VectorXd transpose_times(const Design& d, const std::vector<double>& v) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d.p()));
    for (std::size_t r = 0; r < d.n(); ++r) for_row(d, r, [&](std::size_t c, double x) { out(c) += x * v[r]; });
    return out;
}

}  // namespace detail

/// Builds the explicit-dummy design for `spec` over `panel`.
inline Design build_design(const Panel& panel, const ModelSpec& spec) {
    if (!panel.has_column(spec.response)) throw ValidationError("response column '" + spec.response + "' not in panel");
    for (const auto& r : spec.regressors)
        if (!panel.has_column(r)) throw ValidationError("regressor '" + r + "' not in panel");
    const std::size_t n_tracts = panel.n_tracts();
    auto y_all = panel.column(spec.response);
    for (double v : y_all)
        if (v < 0 || v != std::floor(v)) throw ValidationError("response must hold non-negative counts");

    // Regressors, absorbing tract-constant ones if requested.
    std::vector<std::string> regressors;
    std::vector<std::vector<double>> reg_cols;
    Design d;
    for (const auto& name : spec.regressors) {
        auto col = panel.column(name);
        if (spec.tract_effects && spec.absorb_tract_constant) {
            bool within_constant = true;
            for (std::size_t r = 0; r < col.size() && within_constant; ++r)
                if (col[r] != col[Panel::tract_of(r) * kHoursPerWeek]) within_constant = false;
            if (within_constant) {
                d.absorbed.push_back(name);
                continue;
            }
        }
        regressors.push_back(name);
        reg_cols.push_back(std::move(col));
    }

    // Separation: fixed-effect levels whose response is identically zero.
    std::vector<bool> keep_tract(n_tracts, true), keep_hour(kHoursPerWeek, true);
    double total = 0;
    for (double v : y_all) total += v;
    if (total == 0) throw IdentificationError("response '" + spec.response + "' is identically zero");
    std::vector<std::string> separated;
    if (spec.tract_effects) {
        for (std::size_t i = 0; i < n_tracts; ++i) {
            double s = 0;
            for (int t = 0; t < kHoursPerWeek; ++t) s += y_all[i * kHoursPerWeek + t];
            if (s == 0) {
                keep_tract[i] = false;
                separated.push_back("tract[" + panel.tract_ids[i] + "]");
            }
        }
    }
    if (spec.hour_effects) {
        for (int t = 0; t < kHoursPerWeek; ++t) {
            double s = 0;
            for (std::size_t i = 0; i < n_tracts; ++i) s += y_all[i * kHoursPerWeek + t];
            if (s == 0) {
                keep_hour[t] = false;
                separated.push_back("hour[" + std::to_string(t) + "]");
            }
        }
    }
    if (!separated.empty()) {
        if (!spec.drop_separated)
            throw IdentificationError("separation: response is zero for every observation of " +
                                      detail::join(separated));
        d.dropped_levels = separated;
    }

    // Reference levels among the kept ones.
    int ref_tract = -1, ref_hour = -1;
    if (spec.tract_effects) {
        if (spec.reference_tract) {
            auto it = std::find(panel.tract_ids.begin(), panel.tract_ids.end(), *spec.reference_tract);
            if (it == panel.tract_ids.end()) throw ValidationError("unknown reference tract " + *spec.reference_tract);
            ref_tract = static_cast<int>(it - panel.tract_ids.begin());
            if (!keep_tract[ref_tract]) throw IdentificationError("reference tract is separated");
        } else {
            for (std::size_t i = 0; i < n_tracts && ref_tract < 0; ++i)
                if (keep_tract[i]) ref_tract = static_cast<int>(i);
        }
    }
    if (spec.hour_effects) {
        if (spec.reference_hour < 0 || spec.reference_hour >= kHoursPerWeek)
            throw ValidationError("reference hour out of range");
        ref_hour = spec.reference_hour;
        if (!keep_hour[ref_hour]) {
            ref_hour = -1;
            for (int t = 0; t < kHoursPerWeek && ref_hour < 0; ++t)
                if (keep_hour[t]) ref_hour = t;
        }
    }

    d.names.push_back("(intercept)");
    std::vector<int> tract_column(n_tracts, -1), hour_column(kHoursPerWeek, -1);
    if (spec.tract_effects)
        for (std::size_t i = 0; i < n_tracts; ++i)
            if (keep_tract[i] && static_cast<int>(i) != ref_tract) {
                tract_column[i] = static_cast<int>(d.names.size());
                d.names.push_back("tract[" + panel.tract_ids[i] + "]");
            }
    if (spec.hour_effects)
        for (int t = 0; t < kHoursPerWeek; ++t)
            if (keep_hour[t] && t != ref_hour) {
                hour_column[t] = static_cast<int>(d.names.size());
                d.names.push_back("hour[" + std::to_string(t) + "]");
            }
    d.first_regressor = d.names.size();
    d.k = regressors.size();
    for (const auto& r : regressors) d.names.push_back(r);

    for (std::size_t r = 0; r < y_all.size(); ++r) {
        std::size_t i = Panel::tract_of(r);
        int t = Panel::hour_of(r);
        if (!keep_tract[i] || !keep_hour[t]) continue;
        d.panel_rows.push_back(r);
        d.y.push_back(y_all[r]);
        d.tract_col.push_back(tract_column[i]);
        d.hour_col.push_back(hour_column[t]);
        for (const auto& col : reg_cols) d.x.push_back(col[r]);
    }

    // Constant regressors are unidentifiable next to the intercept.
    std::vector<std::string> constant;
    for (std::size_t j = 0; j < d.k; ++j) {
        bool same = true;
        for (std::size_t r = 1; r < d.n() && same; ++r) same = d.x[r * d.k + j] == d.x[j];
        if (same) constant.push_back(regressors[j]);
    }
    if (!constant.empty()) throw IdentificationError("constant regressor column(s): " + detail::join(constant));

    // Rank check on the scaled Gram matrix.
    std::vector<double> ones(d.n(), 1.0);
    Eigen::MatrixXd g = detail::weighted_gram(d, ones);
    Eigen::VectorXd s = g.diagonal().cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd c = s.asDiagonal() * g * s.asDiagonal();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(c);
    qr.setThreshold(1e-10);
    if (static_cast<std::size_t>(qr.rank()) < d.p()) {
        std::vector<std::string> dep;
        for (Eigen::Index i = qr.rank(); i < static_cast<Eigen::Index>(d.p()); ++i)
            dep.push_back(d.names[static_cast<std::size_t>(qr.colsPermutation().indices()(i))]);
        std::sort(dep.begin(), dep.end());
        throw IdentificationError("rank-deficient design; linearly dependent column(s): " + detail::join(dep));
    }
    return d;
}

// ---------------------------------------------------------------------------
// NB2 likelihood

namespace detail {

/// sum_{j<y} log1p((j - mu)/(theta + mu)) + lgamma-free remainder, i.e.
/// log Gamma(y+theta) - log Gamma(theta) - y log(theta+mu), stable for huge theta.
inline long double gamma_ratio_term(double y, long double theta, long double mu) {
    if (y <= 200) {
        long double s = 0;
        const long double denom = theta + mu;
        for (int j = 0; j < static_cast<int>(y); ++j) s += std::log1p((j - mu) / denom);
        return s;
    }
    return std::lgamma(static_cast<long double>(y) + theta) - std::lgamma(theta) - y * std::log(theta + mu);
}

/// psi(y+theta) - psi(theta) and psi'(y+theta) - psi'(theta).
inline std::pair<double, double> digamma_diffs(double y, double theta) {
    if (y <= 200) {
        double d1 = 0, d2 = 0;
        for (int j = 0; j < static_cast<int>(y); ++j) {
            double u = 1.0 / (theta + j);
            d1 += u;
            d2 -= u * u;
        }
        return {d1, d2};
    }
    return {boost::math::digamma(y + theta) - boost::math::digamma(theta),
            boost::math::trigamma(y + theta) - boost::math::trigamma(theta)};
}

}  // namespace detail

/// NB2 log-likelihood and derivatives over a design (variance mu + mu^2/theta,
/// log link).
class NegBinObjective {
public:
    explicit NegBinObjective(const Design& d) : d_(&d) {
        lgy_.resize(d.n());
        for (std::size_t r = 0; r < d.n(); ++r) lgy_[r] = std::lgamma(static_cast<long double>(d.y[r]) + 1);
    }

    const Design& design() const { return *d_; }

    long double eta(const std::vector<double>& beta, std::size_t r) const {
        long double e = 0;
        detail::for_row(*d_, r, [&](std::size_t c, double v) { e += static_cast<long double>(beta[c]) * v; });
        return e;
    }

    std::vector<double> mu(const std::vector<double>& beta) const {
        std::vector<double> m(d_->n());
        for (std::size_t r = 0; r < m.size(); ++r) m[r] = static_cast<double>(std::exp(eta(beta, r)));
        return m;
    }

    /// Log-likelihood as a function of the coefficients at fixed theta.
    long double loglik(const std::vector<double>& beta, double theta) const {
        long double ll = 0;
        const long double th = theta;
        for (std::size_t r = 0; r < d_->n(); ++r) {
            long double e = eta(beta, r);
            long double m = std::exp(e);
            double y = d_->y[r];
            ll += detail::gamma_ratio_term(y, th, m) - lgy_[r] - th * std::log1p(m / th) + y * e;
        }
        return ll;
    }

    /// Log-likelihood over theta given fixed means.
    long double loglik_theta(const std::vector<double>& mu, double theta) const {
        long double ll = 0;
        const long double th = theta;
        for (std::size_t r = 0; r < d_->n(); ++r) {
            long double m = mu[r];
            double y = d_->y[r];
            ll += detail::gamma_ratio_term(y, th, m) - lgy_[r] - th * std::log1p(m / th) + y * std::log(m);
        }
        return ll;
    }

    /// Analytic score d ll / d beta.
    Eigen::VectorXd score(const std::vector<double>& beta, double theta) const {
        auto m = mu(beta);
        std::vector<double> s(m.size());
        for (std::size_t r = 0; r < m.size(); ++r) s[r] = theta * (d_->y[r] - m[r]) / (theta + m[r]);
        return detail::transpose_times(*d_, s);
    }

    /// First and second derivative of ll in theta at fixed means.
    std::pair<double, double> theta_derivatives(const std::vector<double>& mu, double theta) const {
        double g = 0, h = 0;
        for (std::size_t r = 0; r < mu.size(); ++r) {
            double y = d_->y[r], m = mu[r];
            auto [d1, d2] = detail::digamma_diffs(y, theta);
            g += d1 - std::log1p(m / theta) + (m - y) / (theta + m);
            h += d2 + 1.0 / theta - 1.0 / (theta + m) - (m - y) / ((theta + m) * (theta + m));
        }
        return {g, h};
    }

private:
    const Design* d_;
    std::vector<long double> lgy_;
};

// ---------------------------------------------------------------------------
// Fitting

struct FitOptions {
    double tolerance = 1e-8;  // relative log-likelihood change
    int max_iter = 100;
    double theta_ceiling = 1e8;
    double theta_floor = 1e-8;
    bool gradient_check = false;
};

struct GradientCheck {
    double max_rel_error = 0;
    std::vector<double> analytic;
    std::vector<double> numeric;
};

struct PGLMFit {
    ModelSpec spec;
    std::vector<std::string> names;
    std::vector<double> coef;
    std::vector<double> se;
    double theta = 0;  // NB dispersion (shape)
    double theta_se = 0;
    bool poisson_limit = false;
    double log_likelihood = 0;
    double aic = 0;
    std::size_t n_obs = 0;
    bool converged = false;
    int iterations = 0;
    std::vector<double> ll_trace;
    std::vector<std::string> absorbed;
    std::vector<std::string> dropped_levels;
    std::optional<GradientCheck> gradient;
    std::string message;

    std::size_t n_coefficients() const { return names.size(); }
    std::vector<std::string> regressors() const {
        std::vector<std::string> out;
        for (const auto& n : names)
            if (n != "(intercept)" && n.rfind("tract[", 0) != 0 && n.rfind("hour[", 0) != 0) out.push_back(n);
        return out;
    }
    std::size_t index_of(const std::string& name) const {
        auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw ValidationError("coefficient '" + name + "' not in fit");
        return static_cast<std::size_t>(it - names.begin());
    }
    double coef_of(const std::string& name) const { return coef[index_of(name)]; }
    double se_of(const std::string& name) const { return se[index_of(name)]; }
};

/// Central finite differences of the log-likelihood versus the analytic
/// score. Relative error per element is |a - f| / max(1, |a|, |f|); steps are
/// scaled to each column's magnitude.
inline GradientCheck check_gradient(const NegBinObjective& obj, const std::vector<double>& beta, double theta) {
    const Design& d = obj.design();
    GradientCheck gc;
    Eigen::VectorXd a = obj.score(beta, theta);
    gc.analytic.assign(a.data(), a.data() + a.size());
    std::vector<double> scale(d.p(), 1.0);
    for (std::size_t j = 0; j < d.k; ++j)
        for (std::size_t r = 0; r < d.n(); ++r)
            scale[d.first_regressor + j] = std::max(scale[d.first_regressor + j], std::abs(d.x[r * d.k + j]));
    auto b = beta;
    for (std::size_t c = 0; c < d.p(); ++c) {
        double h = 1e-6 / scale[c];
        b[c] = beta[c] + h;
        long double up = obj.loglik(b, theta);
        b[c] = beta[c] - h;
        long double dn = obj.loglik(b, theta);
        b[c] = beta[c];
        double f = static_cast<double>((up - dn) / (2.0L * h));
        gc.numeric.push_back(f);
        double err = std::abs(gc.analytic[c] - f) / std::max({1.0, std::abs(gc.analytic[c]), std::abs(f)});
        gc.max_rel_error = std::max(gc.max_rel_error, err);
    }
    return gc;
}

namespace detail {

/// Maximises ll over phi = log(theta) at fixed means: safeguarded Newton with
/// backtracking, clamped to [floor, ceiling].
inline double optimise_theta(const NegBinObjective& obj, const std::vector<double>& mu, double theta,
                             const FitOptions& opt, long double& ll) {
    const double lo = std::log(opt.theta_floor), hi = std::log(opt.theta_ceiling);
    double phi = std::clamp(std::log(theta), lo, hi);
    ll = obj.loglik_theta(mu, std::exp(phi));
    for (int it = 0; it < 200; ++it) {
        double th = std::exp(phi);
        auto [g1, h1] = obj.theta_derivatives(mu, th);
        double g = th * g1;
        double h = th * th * h1 + th * g1;
        if (std::abs(g) < 1e-10 * std::max(1.0, static_cast<double>(std::abs(ll)) * 1e-6)) break;
        double step = h < 0 ? -g / h : (g > 0 ? 1.0 : -1.0);
        step = std::clamp(step, -2.0, 2.0);
        bool moved = false;
        for (int half = 0; half < 40; ++half) {
            double cand = std::clamp(phi + step, lo, hi);
            if (cand == phi) break;
            long double cll = obj.loglik_theta(mu, std::exp(cand));
            if (cll >= ll) {
                moved = cand != phi;
                phi = cand;
                ll = cll;
                break;
            }
            step /= 2;
        }
        if (!moved || std::abs(step) < 1e-12) break;
    }
    if (phi >= hi) return opt.theta_ceiling;
    if (phi <= lo) return opt.theta_floor;
    return std::exp(phi);
}

}  // namespace detail

/// Fits the NB2 panel GLM by alternating a Fisher-scoring (IRLS) step for the
/// coefficients with a profile-likelihood Newton update of theta. Stops when
/// the relative log-likelihood change of a full round is below tolerance on
/// two consecutive rounds, or after max_iter rounds.
inline PGLMFit fit_nb_pglm(const Design& d, const ModelSpec& spec, const FitOptions& opt = {}) {
    NegBinObjective obj(d);
    PGLMFit fit;
    fit.spec = spec;
    fit.names = d.names;
    fit.n_obs = d.n();
    fit.absorbed = d.absorbed;
    fit.dropped_levels = d.dropped_levels;

    const std::size_t p = d.p();
    std::vector<double> beta(p, 0.0);
    double ybar = 0;
    for (double v : d.y) ybar += v;
    ybar /= static_cast<double>(d.n());
    beta[0] = std::log(ybar);

    long double ll = 0;
    double theta = detail::optimise_theta(obj, obj.mu(beta), 1.0, opt, ll);
    fit.ll_trace.push_back(static_cast<double>(ll));

    int small_rounds = 0;
    int round = 0;
    for (; round < opt.max_iter; ++round) {
        const long double ll_round_start = ll;
        // Coefficient step at fixed theta.
        auto m = obj.mu(beta);
        std::vector<double> w(m.size()), s(m.size());
        for (std::size_t r = 0; r < m.size(); ++r) {
            w[r] = m[r] * theta / (theta + m[r]);
            s[r] = theta * (d.y[r] - m[r]) / (theta + m[r]);
        }
        Eigen::MatrixXd info = detail::weighted_gram(d, w);
        Eigen::VectorXd grad = detail::transpose_times(d, s);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        if (ldlt.info() != Eigen::Success) {
            fit.message = "information matrix not positive definite";
            break;
        }
        Eigen::VectorXd step = ldlt.solve(grad);
        double scale = 1.0;
        for (int half = 0; half < 40; ++half, scale /= 2) {
            std::vector<double> cand(p);
            for (std::size_t j = 0; j < p; ++j) cand[j] = beta[j] + scale * step(static_cast<Eigen::Index>(j));
            long double cll = obj.loglik(cand, theta);
            if (std::isfinite(static_cast<double>(cll)) && cll >= ll) {
                beta = std::move(cand);
                ll = cll;
                fit.ll_trace.push_back(static_cast<double>(ll));
                break;
            }
        }
        // Dispersion step at fixed means.
        long double tll = 0;
        double new_theta = detail::optimise_theta(obj, obj.mu(beta), theta, opt, tll);
        if (tll >= ll) {
            theta = new_theta;
            ll = tll;
            fit.ll_trace.push_back(static_cast<double>(ll));
        }
        long double rel = std::abs(ll - ll_round_start) / std::max<long double>(1e-300L, std::abs(ll_round_start));
        if (rel < opt.tolerance) {
            if (++small_rounds >= 2) {
                fit.converged = true;
                ++round;
                break;
            }
        } else {
            small_rounds = 0;
        }
    }
    fit.iterations = round;
    if (!fit.converged && fit.message.empty()) fit.message = "maximum iterations reached";

    fit.coef = beta;
    fit.theta = theta;
    fit.poisson_limit = theta >= opt.theta_ceiling * (1 - 1e-12);
    fit.log_likelihood = static_cast<double>(ll);
    fit.aic = -2.0 * fit.log_likelihood + 2.0 * static_cast<double>(p + 1);

    // Observed information over (beta, theta); theta is held fixed at the
    // Poisson-limit ceiling.
    auto m = obj.mu(beta);
    std::vector<double> wobs(m.size()), cross(m.size());
    for (std::size_t r = 0; r < m.size(); ++r) {
        double y = d.y[r], den = theta + m[r];
        wobs[r] = (y + theta) * m[r] * theta / (den * den);
        cross[r] = -m[r] * (y - m[r]) / (den * den);
    }
    Eigen::MatrixXd ibb = detail::weighted_gram(d, wobs);
    const auto pi = static_cast<Eigen::Index>(p);
    Eigen::MatrixXd cov;
    if (!fit.poisson_limit) {
        Eigen::MatrixXd info(pi + 1, pi + 1);
        info.topLeftCorner(pi, pi) = ibb;
        Eigen::VectorXd ibt = detail::transpose_times(d, cross);
        info.block(0, pi, pi, 1) = ibt;
        info.block(pi, 0, 1, pi) = ibt.transpose();
        info(pi, pi) = -obj.theta_derivatives(m, theta).second;
        cov = info.ldlt().solve(Eigen::MatrixXd::Identity(pi + 1, pi + 1));
        fit.theta_se = std::sqrt(std::max(0.0, cov(pi, pi)));
    } else {
        cov = ibb.ldlt().solve(Eigen::MatrixXd::Identity(pi, pi));
        if (fit.message.empty() || fit.converged)
            fit.message = "dispersion reached ceiling (Poisson limit)";
    }
    fit.se.resize(p);
    for (std::size_t j = 0; j < p; ++j) {
        double v = cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
        fit.se[j] = v > 0 ? std::sqrt(v) : std::numeric_limits<double>::quiet_NaN();
    }
    if (opt.gradient_check) fit.gradient = check_gradient(obj, beta, theta);
    return fit;
}

inline PGLMFit fit_nb_pglm(const Panel& panel, const ModelSpec& spec, const FitOptions& opt = {}) {
    return fit_nb_pglm(build_design(panel, spec), spec, opt);
}

// ---------------------------------------------------------------------------
// Inference

struct LRTest {
    double statistic = 0;
    int df = 0;
    double p_value = 1;
};

inline double chi2_sf(double x, int df) {
    if (df <= 0) return 1.0;
    if (x <= 0) return 1.0;
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), x));
}

/// Likelihood-ratio test of `nested` against `full`; the nested regressor set
/// must be a subset of the full one, on the same observations.
inline LRTest lr_test(const PGLMFit& full, const PGLMFit& nested) {
    auto fr = full.regressors();
    auto nr = nested.regressors();
    std::set<std::string> fs(fr.begin(), fr.end());
    for (const auto& r : nr)
        if (!fs.count(r)) throw ValidationError("lr_test: '" + r + "' is not in the full model (models not nested)");
    if (full.n_obs != nested.n_obs || full.spec.response != nested.spec.response ||
        full.spec.tract_effects != nested.spec.tract_effects || full.spec.hour_effects != nested.spec.hour_effects)
        throw ValidationError("lr_test: models are not fitted on the same data/fixed effects");
    if (full.n_coefficients() < nested.n_coefficients()) throw ValidationError("lr_test: models not nested");
    LRTest t;
    t.statistic = std::max(0.0, 2.0 * (full.log_likelihood - nested.log_likelihood));
    t.df = static_cast<int>(full.n_coefficients() - nested.n_coefficients());
    t.p_value = t.df == 0 ? 1.0 : chi2_sf(t.statistic, t.df);
    return t;
}

/// Percent change in expected crime per `scale` units of a regressor, with
/// 95% confidence bounds.
struct IRR {
    double percent = 0;
    double ci_low = 0;
    double ci_high = 0;
};

inline IRR irr(double coef, double se, double scale = 100) {
    return {(std::exp(scale * coef) - 1) * 100, (std::exp(scale * (coef - 1.96 * se)) - 1) * 100,
            (std::exp(scale * (coef + 1.96 * se)) - 1) * 100};
}

inline IRR irr(const PGLMFit& fit, const std::string& regressor, double scale = 100) {
    return irr(fit.coef_of(regressor), fit.se_of(regressor), scale);
}

inline double normal_two_sided_p(double z) {
    if (!std::isfinite(z)) return std::numeric_limits<double>::quiet_NaN();
    return 2 * boost::math::cdf(boost::math::complement(boost::math::normal(), std::abs(z)));
}

// ---------------------------------------------------------------------------
// Model suite

struct SuiteOptions {
    FitOptions fit;
    std::string response = "crime";
    std::vector<std::string> extra_regressors;  // e.g. covariates
    bool absorb_tract_constant = true;
    bool drop_separated = false;
    bool activity_sensitivity = false;
    unsigned threads = 1;
};

struct NamedLRTest {
    std::string full;
    std::string nested;
    LRTest test;
};

struct SuiteResult {
    std::vector<PGLMFit> fits;
    std::vector<NamedLRTest> lr_tests;

    const PGLMFit& fit(const std::string& name) const {
        for (const auto& f : fits)
            if (f.spec.name == name) return f;
        throw ValidationError("no model '" + name + "' in suite");
    }
};

/// The five nested specifications: baseline, (1a), (1b), (2a), (2b).
inline std::vector<ModelSpec> standard_specs(const SuiteOptions& opt = {}) {
    auto make = [&](std::string name, std::vector<std::string> regs) {
        ModelSpec s;
        s.name = std::move(name);
        s.response = opt.response;
        s.regressors = std::move(regs);
        for (const auto& e : opt.extra_regressors) s.regressors.push_back(e);
        s.absorb_tract_constant = opt.absorb_tract_constant;
        s.drop_separated = opt.drop_separated;
        return s;
    };
    return {make("baseline", {"past_crime"}),
            make("1a", {"past_crime", "checkins"}),
            make("1b", {"past_crime", "checkins", "passthrough_flow"}),
            make("2a", {"past_crime", "inout_flow", "selfloop_flow"}),
            make("2b", {"past_crime", "inout_flow", "selfloop_flow", "passthrough_flow"})};
}

/// Fits every spec (in parallel when threads > 1) and runs the
/// likelihood-ratio comparisons (1a) vs baseline, (1b) vs (1a), (2b) vs (2a).
inline SuiteResult model_suite(const Panel& panel, const SuiteOptions& opt = {}) {
    auto specs = standard_specs(opt);
    if (opt.activity_sensitivity) {
        if (!panel.activity) throw ValidationError("activity sensitivity needs a panel built with activity columns");
        for (auto a : kAllActivities) {
            ModelSpec s = specs[2];
            s.name = "1b[" + std::string(to_string(a)) + "]";
            s.regressors[1] = activity_column(a);
            specs.push_back(s);
        }
    }
    SuiteResult res;
    res.fits.resize(specs.size());
    parallel_for(specs.size(), opt.threads, [&](std::size_t i) { res.fits[i] = fit_nb_pglm(panel, specs[i], opt.fit); });
    for (auto [full, nested] : std::vector<std::pair<std::string, std::string>>{
             {"1a", "baseline"}, {"1b", "1a"}, {"2b", "2a"}})
        res.lr_tests.push_back({full, nested, lr_test(res.fit(full), res.fit(nested))});
    return res;
}

}  // namespace crimeflow::pglm
