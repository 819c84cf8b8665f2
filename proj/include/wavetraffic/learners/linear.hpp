#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "wavetraffic/learners/spec.hpp"
#include "wavetraffic/matrix.hpp"
#include "wavetraffic/random.hpp"

namespace wavetraffic {

/// prediction = weights . standardize(x) + intercept
struct LinearModel {
    LearnerSpec spec;
    std::vector<double> weights;
    double intercept = 0.0;
    std::vector<double> feature_mean;
    std::vector<double> feature_std;
    /// Training MSE after each epoch.
    std::vector<double> training_loss_curve;

    double predict_row(std::span<const double> x) const noexcept {
        double acc = intercept;
        for (std::size_t j = 0; j < weights.size(); ++j)
            acc += weights[j] * ((x[j] - feature_mean[j]) / feature_std[j]);
        return acc;
    }

    /// Coefficients on the raw (unstandardized) features.
    std::vector<double> raw_coefficients() const {
        std::vector<double> out(weights.size());
        for (std::size_t j = 0; j < weights.size(); ++j) out[j] = weights[j] / feature_std[j];
        return out;
    }

    double raw_intercept() const {
        double b = intercept;
        for (std::size_t j = 0; j < weights.size(); ++j)
            b -= weights[j] * feature_mean[j] / feature_std[j];
        return b;
    }

    friend bool operator==(const LinearModel&, const LinearModel&) = default;
};

/// Mini-batch SGD on squared loss over standardized features.
///
/// The learning rate applies per sample: a batch step moves by the summed gradient
/// times lr_e = learning_rate / sqrt(e) for epoch e = 1, 2, .... The batch step
/// is capped at 1 / (features + 1), the trace bound on the standardized Hessian, so
/// large batches with strongly correlated lags cannot diverge.
inline LinearModel fit_sgd_linear(const LearnerSpec& spec, const Matrix& X,
                                  std::span<const double> y) {
    const std::size_t n = X.rows(), d = X.cols();
    const double lr0 = spec.get("learning_rate");
    const auto batch = static_cast<std::size_t>(spec.get("batch_size"));
    const auto epochs = static_cast<std::size_t>(spec.get("epochs"));
    const double l2 = spec.get("l2");

    LinearModel m;
    m.spec = spec;
    m.weights.assign(d, 0.0);
    m.feature_mean.assign(d, 0.0);
    m.feature_std.assign(d, 1.0);
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += X(i, j);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) var += (X(i, j) - mean) * (X(i, j) - mean);
        var /= static_cast<double>(n);
        m.feature_mean[j] = mean;
        const double sd = std::sqrt(var);
        // zero-variance columns standardize to exactly 0 and never move their weight
        m.feature_std[j] = sd > 0.0 && std::isfinite(sd) ? sd : 1.0;
    }
    // starting at the target mean makes a constant target an exact fixed point
    m.intercept = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    Matrix Z(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) Z(i, j) = (X(i, j) - m.feature_mean[j]) / m.feature_std[j];

    const double step_cap = 1.0 / static_cast<double>(d + 1);
    Rng rng(derive_seed(spec.seed, 2));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> grad_w(d);
    m.training_loss_curve.reserve(epochs);
    for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
        shuffle(order, rng);
        const double lr = lr0 / std::sqrt(static_cast<double>(epoch));
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t end = std::min(n, start + batch);
            const double step = std::min(lr, step_cap / static_cast<double>(end - start));
            std::fill(grad_w.begin(), grad_w.end(), 0.0);
            double grad_b = 0.0;
            for (std::size_t k = start; k < end; ++k) {
                const auto z = Z.row(order[k]);
                double pred = m.intercept;
                for (std::size_t j = 0; j < d; ++j) pred += m.weights[j] * z[j];
                const double err = pred - y[order[k]];
                for (std::size_t j = 0; j < d; ++j) grad_w[j] += err * z[j];
                grad_b += err;
            }
            const double bsz = static_cast<double>(end - start);
            for (std::size_t j = 0; j < d; ++j)
                m.weights[j] -= step * (grad_w[j] + l2 * bsz * m.weights[j]);
            m.intercept -= step * grad_b;
        }
        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = m.predict_row(X.row(i)) - y[i];
            sse += e * e;
        }
        m.training_loss_curve.push_back(sse / static_cast<double>(n));
    }
    return m;
}

} // namespace wavetraffic
