#pragma once

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "crimeflow/pglm.hpp"
#include "crimeflow/util/io.hpp"

namespace crimeflow::pglm {

inline std::string stars(double p) {
    if (!(p == p)) return "";
    return p < 0.001 ? "***" : p < 0.01 ? "**" : p < 0.05 ? "*" : "";
}

inline nlohmann::json fit_to_json(const PGLMFit& f, double irr_scale = 100, bool fixed_effects = true) {
    using nlohmann::json;
    auto regs = f.regressors();
    json coefs = json::array();
    for (std::size_t k = 0; k < f.names.size(); ++k) {
        bool is_reg = std::find(regs.begin(), regs.end(), f.names[k]) != regs.end();
        if (!fixed_effects && !is_reg && f.names[k] != "(intercept)") continue;
        double z = f.coef[k] / f.se[k];
        json c{{"name", f.names[k]},
               {"coef", f.coef[k]},
               {"se", f.se[k]},
               {"z", std::isfinite(z) ? json(z) : json(nullptr)},
               {"p_value", std::isfinite(z) ? json(normal_two_sided_p(z)) : json(nullptr)},
               {"ci_low", f.coef[k] - 1.96 * f.se[k]},
               {"ci_high", f.coef[k] + 1.96 * f.se[k]}};
        if (is_reg) {
            auto r = irr(f.coef[k], f.se[k], irr_scale);
            c["irr_pct"] = r.percent;
            c["irr_ci_low"] = r.ci_low;
            c["irr_ci_high"] = r.ci_high;
        }
        coefs.push_back(c);
    }
    json j{{"name", f.spec.name},
           {"response", f.spec.response},
           {"regressors", regs},
           {"tract_effects", f.spec.tract_effects},
           {"hour_effects", f.spec.hour_effects},
           {"irr_scale", irr_scale},
           {"coefficients", coefs},
           {"theta", f.theta},
           {"theta_se", f.theta_se},
           {"poisson_limit", f.poisson_limit},
           {"log_likelihood", f.log_likelihood},
           {"aic", f.aic},
           {"n_obs", f.n_obs},
           {"n_parameters", f.n_coefficients() + 1},
           {"converged", f.converged},
           {"iterations", f.iterations},
           {"ll_trace", f.ll_trace},
           {"absorbed", f.absorbed},
           {"dropped_levels", f.dropped_levels},
           {"message", f.message}};
    if (f.gradient) j["gradient_check"] = {{"max_rel_error", f.gradient->max_rel_error}};
    return j;
}

inline nlohmann::json suite_to_json(const SuiteResult& s, double irr_scale = 100) {
    using nlohmann::json;
    json fits = json::array();
    for (const auto& f : s.fits) fits.push_back(fit_to_json(f, irr_scale));
    json tests = json::array();
    for (const auto& t : s.lr_tests)
        tests.push_back({{"full", t.full},
                         {"nested", t.nested},
                         {"statistic", t.test.statistic},
                         {"df", t.test.df},
                         {"p_value", t.test.p_value}});
    return {{"models", fits}, {"lr_tests", tests}};
}

/// Coefficient table, one column per model: "coef (se)" with significance
/// stars for the regressors, then dispersion, log-likelihood, AIC, N and the
/// likelihood-ratio p-value against the nested model.
inline std::string suite_table(const SuiteResult& s, char delim = '\t') {
    std::vector<std::string> rows;
    for (const auto& f : s.fits)
        for (const auto& r : f.regressors())
            if (std::find(rows.begin(), rows.end(), r) == rows.end()) rows.push_back(r);
    std::ostringstream os;
    os << "Variable";
    for (const auto& f : s.fits) os << delim << f.spec.name;
    os << '\n';
    char buf[96];
    for (const auto& r : rows) {
        os << r;
        for (const auto& f : s.fits) {
            os << delim;
            auto regs = f.regressors();
            if (std::find(regs.begin(), regs.end(), r) == regs.end()) continue;
            double c = f.coef_of(r), se = f.se_of(r);
            std::snprintf(buf, sizeof buf, "%.4g (%.3g)%s", c, se, stars(normal_two_sided_p(c / se)).c_str());
            os << buf;
        }
        os << '\n';
    }
    auto footer = [&](const char* label, auto&& cell) {
        os << label;
        for (const auto& f : s.fits) os << delim << cell(f);
        os << '\n';
    };
    footer("theta", [](const PGLMFit& f) { return f.poisson_limit ? std::string("Poisson limit") : io::fmt_fixed(f.theta, 4); });
    footer("Log-likelihood", [](const PGLMFit& f) { return io::fmt_fixed(f.log_likelihood, 2); });
    footer("AIC", [](const PGLMFit& f) { return io::fmt_fixed(f.aic, 2); });
    footer("N", [](const PGLMFit& f) { return std::to_string(f.n_obs); });
    footer("LR test p", [&](const PGLMFit& f) {
        for (const auto& t : s.lr_tests)
            if (t.full == f.spec.name) {
                std::snprintf(buf, sizeof buf, "%.3g vs %s", t.test.p_value, t.nested.c_str());
                return std::string(buf);
            }
        return std::string();
    });
    return os.str();
}

/// Long-format IRR table for plotting: Model, Variable, IRR%, CI low, CI high, p.
inline std::string irr_table(const SuiteResult& s, double irr_scale = 100, char delim = '\t') {
    std::ostringstream os;
    os << "Model" << delim << "Variable" << delim << "IRR%" << delim << "CI low" << delim << "CI high" << delim << "p"
       << '\n';
    for (const auto& f : s.fits)
        for (const auto& r : f.regressors()) {
            auto v = irr(f, r, irr_scale);
            os << f.spec.name << delim << r << delim << io::fmt_double(v.percent) << delim << io::fmt_double(v.ci_low)
               << delim << io::fmt_double(v.ci_high) << delim
               << io::fmt_double(normal_two_sided_p(f.coef_of(r) / f.se_of(r))) << '\n';
        }
    return os.str();
}

}  // namespace crimeflow::pglm
