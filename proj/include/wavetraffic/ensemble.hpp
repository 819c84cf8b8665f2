#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "wavetraffic/learners.hpp"
#include "wavetraffic/metrics.hpp"

namespace wavetraffic {

/// Stacked regressor: prediction = meta_weights . (base predictions) + intercept.
struct StackedModel {
    std::vector<Model> base_models;
    std::vector<double> meta_weights;
    double intercept = 0.0;
    std::size_t fold_count = 5;
    double lambda_meta = 1e-3;
    /// Out-of-fold WAPE of each base, in spec order.
    std::vector<double> oof_wape;
    /// Out-of-fold meta-features (n_samples x n_bases). Not serialized.
    Matrix oof_predictions;

    std::size_t n_features() const { return wavetraffic::n_features(base_models.front()); }
};

struct RidgeSolution {
    std::vector<double> weights;
    double intercept = 0.0;
};

/// Ridge regression with an unpenalized intercept. The penalty is relative:
/// lambda * trace(Pc'Pc) / m with Pc the centered m-column feature matrix, so the
/// solution does not depend on the units of the target.
inline RidgeSolution ridge_meta(const Matrix& P, std::span<const double> y, double lambda) {
    const auto n = static_cast<Eigen::Index>(P.rows());
    const auto m = static_cast<Eigen::Index>(P.cols());
    Eigen::MatrixXd A(n, m);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < m; ++j)
            A(i, j) = P(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        b(i) = y[static_cast<std::size_t>(i)];
    }
    const Eigen::RowVectorXd col_mean = A.colwise().mean();
    const double y_mean = b.mean();
    A.rowwise() -= col_mean;
    b.array() -= y_mean;
    Eigen::MatrixXd gram = A.transpose() * A;
    const double scale = gram.trace() / static_cast<double>(m);
    gram.diagonal().array() += lambda * (scale > 0.0 ? scale : 1.0);
    const Eigen::VectorXd w = gram.ldlt().solve(A.transpose() * b);
    RidgeSolution out;
    out.weights.assign(w.data(), w.data() + m);
    out.intercept = y_mean - col_mean.dot(w);
    return out;
}

/// Contiguous fold boundaries: fold j is [bounds[j], bounds[j+1]).
inline std::vector<std::size_t> fold_bounds(std::size_t n, std::size_t k) {
    std::vector<std::size_t> b(k + 1);
    for (std::size_t j = 0; j <= k; ++j) b[j] = j * n / k;
    return b;
}

/// Fits base learners on k contiguous folds, then a ridge meta-learner on their
/// out-of-fold predictions, then refits every base on all rows. Bases already fitted
/// on all rows (same specs, same data) can be supplied through `full_fits` to skip the refit.
inline StackedModel fit_stacked(const Matrix& X, std::span<const double> y,
                                const std::vector<LearnerSpec>& specs, std::size_t k = 5,
                                double lambda_meta = 1e-3, std::span<const Model> full_fits = {}) {
    if (specs.empty()) fail(ErrorCode::invalid_config, "stacking needs at least one base spec");
    if (k < 2 || X.rows() < k)
        fail(ErrorCode::too_few_samples, std::to_string(X.rows()) + " samples for " +
                                             std::to_string(k) + " folds");
    if (!full_fits.empty() && full_fits.size() != specs.size())
        fail(ErrorCode::shape_mismatch, "full_fits must match specs");
    for (const auto& s : specs) s.validate();

    const std::size_t n = X.rows(), m = specs.size();
    const auto bounds = fold_bounds(n, k);
    StackedModel model;
    model.fold_count = k;
    model.lambda_meta = lambda_meta;
    model.oof_predictions = Matrix(n, m);
    for (std::size_t fold = 0; fold < k; ++fold) {
        const std::size_t lo = bounds[fold], hi = bounds[fold + 1];
        Matrix X_train(0, 0);
        std::vector<double> y_train;
        y_train.reserve(n - (hi - lo));
        for (std::size_t i = 0; i < n; ++i) {
            if (i >= lo && i < hi) continue;
            X_train.append_row(X.row(i));
            y_train.push_back(y[i]);
        }
        const Matrix X_held = X.slice_rows(lo, hi);
        for (std::size_t b = 0; b < m; ++b) {
            const auto base = fit(specs[b], X_train, y_train);
            const auto p = predict(base, X_held);
            for (std::size_t i = lo; i < hi; ++i) model.oof_predictions(i, b) = p[i - lo];
        }
    }
    for (std::size_t b = 0; b < m; ++b) {
        const auto col = model.oof_predictions.column(b);
        model.oof_wape.push_back(wape(col, y));
    }
    auto meta = ridge_meta(model.oof_predictions, y, lambda_meta);
    model.meta_weights = std::move(meta.weights);
    model.intercept = meta.intercept;
    for (std::size_t b = 0; b < m; ++b)
        model.base_models.push_back(full_fits.empty() ? fit(specs[b], X, y) : full_fits[b]);
    return model;
}

inline StackedModel fit_stacked(const WindowedDataset& data, const std::vector<LearnerSpec>& specs,
                                std::size_t k = 5, double lambda_meta = 1e-3) {
    return fit_stacked(data.X, data.y, specs, k, lambda_meta);
}

inline std::vector<double> predict_stacked(const StackedModel& model, const Matrix& X) {
    if (model.base_models.empty() || model.meta_weights.size() != model.base_models.size())
        fail(ErrorCode::shape_mismatch, "stacked model has inconsistent meta weights");
    if (X.cols() != model.n_features())
        fail(ErrorCode::shape_mismatch, "stacked model expects " +
                                            std::to_string(model.n_features()) + " features, got " +
                                            std::to_string(X.cols()));
    std::vector<double> out(X.rows(), model.intercept);
    for (std::size_t b = 0; b < model.base_models.size(); ++b) {
        const auto p = predict(model.base_models[b], X);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += model.meta_weights[b] * p[i];
    }
    return out;
}

inline nlohmann::json to_json(const StackedModel& model) {
    nlohmann::json bases = nlohmann::json::array();
    for (const auto& b : model.base_models) bases.push_back(to_json(b));
    return {{"kind", "stacked"},
            {"fold_count", model.fold_count},
            {"lambda_meta", model.lambda_meta},
            {"meta_weights", model.meta_weights},
            {"intercept", model.intercept},
            {"oof_wape", model.oof_wape},
            {"base_models", bases}};
}

inline StackedModel stacked_from_json(const nlohmann::json& j) {
    try {
        if (j.at("kind").get<std::string>() != "stacked")
            fail(ErrorCode::schema_error, "not a stacked model");
        StackedModel m;
        m.fold_count = j.at("fold_count").get<std::size_t>();
        m.lambda_meta = j.at("lambda_meta").get<double>();
        m.meta_weights = j.at("meta_weights").get<std::vector<double>>();
        m.intercept = j.at("intercept").get<double>();
        m.oof_wape = j.at("oof_wape").get<std::vector<double>>();
        for (const auto& b : j.at("base_models")) m.base_models.push_back(model_from_json(b));
        if (m.base_models.empty() || m.base_models.size() != m.meta_weights.size() || m.fold_count < 2)
            fail(ErrorCode::schema_error, "stacked model has inconsistent meta weights");
        return m;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::schema_error, std::string("stacked model JSON: ") + e.what());
    }
}

} // namespace wavetraffic
