#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "crimeflow/common.hpp"
#include "crimeflow/forecast/features.hpp"

namespace crimeflow::forecast {

/// Linear model on standardized features:
/// yhat = intercept + sum_j coef_j * (x_j - mean_j) / scale_j.
struct ElasticNetModel {
    double lambda = 0;
    double alpha = 0;
    std::vector<double> mean;
    std::vector<double> scale;  // 0 marks a constant feature (coefficient 0)
    std::vector<double> coef;
    double intercept = 0;
    int sweeps = 0;

    double predict_row(const double* x) const {
        double s = intercept;
        for (std::size_t j = 0; j < coef.size(); ++j)
            if (scale[j] > 0) s += coef[j] * (x[j] - mean[j]) / scale[j];
        return s;
    }
    std::vector<double> predict(const FeatureMatrix& m) const {
        std::vector<double> out(m.n);
        for (std::size_t r = 0; r < m.n; ++r) out[r] = predict_row(m.row(r));
        return out;
    }
    /// Coefficients on the original feature scale.
    std::vector<double> raw_coefficients() const {
        std::vector<double> b(coef.size(), 0.0);
        for (std::size_t j = 0; j < coef.size(); ++j)
            if (scale[j] > 0) b[j] = coef[j] / scale[j];
        return b;
    }
};

/// Sufficient statistics of a training set for covariance-update coordinate
/// descent: standardized Gram matrix G = Z'Z/n and c = Z'(y - ybar)/n.
class ElasticNetProblem {
public:
    ElasticNetProblem(const FeatureMatrix& m, const std::vector<double>& y, const std::vector<std::size_t>* rows = nullptr) {
        const std::size_t p = m.p;
        const std::size_t n = rows ? rows->size() : m.n;
        if (n < 2) throw ValidationError("elastic net needs at least two training rows");
        auto row = [&](std::size_t k) { return rows ? (*rows)[k] : k; };
        p_ = p;
        mean_.assign(p, 0.0);
        scale_.assign(p, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            const double* x = m.row(row(k));
            for (std::size_t j = 0; j < p; ++j) mean_[j] += x[j];
            ybar_ += y[row(k)];
        }
        for (auto& v : mean_) v /= static_cast<double>(n);
        ybar_ /= static_cast<double>(n);
        std::vector<double> z(n * p);
        for (std::size_t k = 0; k < n; ++k) {
            const double* x = m.row(row(k));
            for (std::size_t j = 0; j < p; ++j) {
                double c = x[j] - mean_[j];
                z[k * p + j] = c;
                scale_[j] += c * c;
            }
        }
        for (auto& s : scale_) {
            s = std::sqrt(s / static_cast<double>(n));
            if (s < 1e-12) s = 0;
        }
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t j = 0; j < p; ++j) z[k * p + j] = scale_[j] > 0 ? z[k * p + j] / scale_[j] : 0.0;
        gram_.assign(p * p, 0.0);
        c_.assign(p, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            const double* zr = z.data() + k * p;
            double yc = y[row(k)] - ybar_;
            for (std::size_t a = 0; a < p; ++a) {
                c_[a] += zr[a] * yc;
                for (std::size_t b = a; b < p; ++b) gram_[a * p + b] += zr[a] * zr[b];
            }
        }
        for (std::size_t a = 0; a < p; ++a) {
            c_[a] /= static_cast<double>(n);
            for (std::size_t b = a; b < p; ++b) {
                gram_[a * p + b] /= static_cast<double>(n);
                gram_[b * p + a] = gram_[a * p + b];
            }
        }
    }

    /// Minimises (1/2n)||y - b0 - Z beta||^2 + lambda*((1-alpha)/2 ||beta||^2 + alpha ||beta||_1)
    /// by cyclic coordinate descent until the largest coefficient change in a
    /// sweep is below tol. `warm` seeds the coefficients.
    ElasticNetModel solve(double lambda, double alpha, double tol = 1e-7, const std::vector<double>* warm = nullptr,
                          int max_sweeps = 1000000) const {
        if (lambda < 0 || alpha < 0 || alpha > 1) throw ValidationError("elastic net: need lambda >= 0, alpha in [0,1]");
        std::vector<double> beta = warm ? *warm : std::vector<double>(p_, 0.0);
        const double l1 = lambda * alpha, l2 = lambda * (1 - alpha);
        int sweep = 0;
        for (; sweep < max_sweeps; ++sweep) {
            double max_change = 0;
            for (std::size_t j = 0; j < p_; ++j) {
                if (scale_[j] == 0) {
                    beta[j] = 0;
                    continue;
                }
                const double* g = gram_.data() + j * p_;
                double r = c_[j];
                for (std::size_t k = 0; k < p_; ++k)
                    if (k != j) r -= g[k] * beta[k];
                double soft = r > l1 ? r - l1 : (r < -l1 ? r + l1 : 0.0);
                double nb = soft / (g[j] + l2);
                max_change = std::max(max_change, std::abs(nb - beta[j]));
                beta[j] = nb;
            }
            if (max_change < tol) {
                ++sweep;
                break;
            }
        }
        ElasticNetModel m;
        m.lambda = lambda;
        m.alpha = alpha;
        m.mean = mean_;
        m.scale = scale_;
        m.coef = std::move(beta);
        m.intercept = ybar_;
        m.sweeps = sweep;
        return m;
    }

    double response_mean() const { return ybar_; }

private:
    std::size_t p_ = 0;
    double ybar_ = 0;
    std::vector<double> mean_, scale_, gram_, c_;
};

inline ElasticNetModel fit_elastic_net(const FeatureMatrix& m, const std::vector<double>& y, double lambda, double alpha,
                                       double tol = 1e-7) {
    return ElasticNetProblem(m, y).solve(lambda, alpha, tol);
}

}  // namespace crimeflow::forecast
