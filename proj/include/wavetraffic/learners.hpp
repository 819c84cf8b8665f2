#pragma once

#include <span>
#include <variant>
#include <vector>

#include <json.hpp>

#include "wavetraffic/learners/linear.hpp"
#include "wavetraffic/learners/spec.hpp"
#include "wavetraffic/learners/tree.hpp"
#include "wavetraffic/series.hpp"

namespace wavetraffic {

using Model = std::variant<TreeEnsembleModel, LinearModel>;

inline const LearnerSpec& spec_of(const Model& m) {
    return std::visit([](const auto& x) -> const LearnerSpec& { return x.spec; }, m);
}

inline std::size_t n_features(const Model& m) {
    if (const auto* t = std::get_if<TreeEnsembleModel>(&m)) return t->n_features;
    return std::get<LinearModel>(m).weights.size();
}

inline Model fit(const LearnerSpec& spec, const Matrix& X, std::span<const double> y) {
    spec.validate();
    if (X.rows() == 0 || X.rows() != y.size())
        fail(ErrorCode::empty_dataset, "dataset has " + std::to_string(X.rows()) + " rows and " +
                                           std::to_string(y.size()) + " targets");
    if (X.rows() < 2) fail(ErrorCode::empty_dataset, "at least 2 samples are required");
    if (spec.kind == LearnerKind::sgd_linear) return fit_sgd_linear(spec, X, y);
    return fit_boosting(spec, X, y);
}

inline Model fit(const LearnerSpec& spec, const WindowedDataset& data) {
    return fit(spec, data.X, data.y);
}

inline double predict_row(const Model& m, std::span<const double> x) {
    return std::visit([&](const auto& model) { return model.predict_row(x); }, m);
}

inline std::vector<double> predict(const Model& m, const Matrix& X) {
    if (X.cols() != n_features(m))
        fail(ErrorCode::shape_mismatch, "model expects " + std::to_string(n_features(m)) +
                                            " features, got " + std::to_string(X.cols()));
    std::vector<double> out(X.rows());
    std::visit(
        [&](const auto& model) {
            for (std::size_t i = 0; i < X.rows(); ++i) out[i] = model.predict_row(X.row(i));
        },
        m);
    return out;
}

inline const std::vector<double>& training_loss_curve(const Model& m) {
    return std::visit([](const auto& x) -> const std::vector<double>& { return x.training_loss_curve; },
                      m);
}

// ---- serialization -------------------------------------------------------------

inline nlohmann::json to_json(const LearnerSpec& spec) {
    return {{"kind", std::string(to_string(spec.kind))},
            {"hyperparameters", spec.hyperparameters},
            {"resolved_hyperparameters", spec.resolved()},
            {"seed", spec.seed}};
}

inline LearnerSpec learner_spec_from_json(const nlohmann::json& j) {
    LearnerSpec spec;
    spec.kind = parse_learner_kind(j.at("kind").get<std::string>());
    spec.hyperparameters = j.at("hyperparameters").get<std::map<std::string, double>>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.validate();
    return spec;
}

inline nlohmann::json to_json(const Model& model) {
    nlohmann::json j;
    if (const auto* t = std::get_if<TreeEnsembleModel>(&model)) {
        j["kind"] = to_string(t->spec.kind);
        j["spec"] = to_json(t->spec);
        j["n_features"] = t->n_features;
        j["base_score"] = t->base_score;
        j["learning_rate"] = t->learning_rate;
        auto& trees = j["trees"] = nlohmann::json::array();
        for (const auto& tree : t->trees) {
            nlohmann::json feature, threshold, left, right, value;
            for (const auto& n : tree.nodes) {
                feature.push_back(n.feature);
                threshold.push_back(n.threshold);
                left.push_back(n.left);
                right.push_back(n.right);
                value.push_back(n.value);
            }
            trees.push_back({{"feature", feature},
                             {"threshold", threshold},
                             {"left", left},
                             {"right", right},
                             {"value", value}});
        }
        j["training_loss_curve"] = t->training_loss_curve;
    } else {
        const auto& l = std::get<LinearModel>(model);
        j["kind"] = to_string(l.spec.kind);
        j["spec"] = to_json(l.spec);
        j["weights"] = l.weights;
        j["intercept"] = l.intercept;
        j["feature_mean"] = l.feature_mean;
        j["feature_std"] = l.feature_std;
        j["training_loss_curve"] = l.training_loss_curve;
    }
    return j;
}

inline Model model_from_json(const nlohmann::json& j) {
    try {
        const auto spec = learner_spec_from_json(j.at("spec"));
        if (spec.kind == LearnerKind::sgd_linear) {
            LinearModel l;
            l.spec = spec;
            l.weights = j.at("weights").get<std::vector<double>>();
            l.intercept = j.at("intercept").get<double>();
            l.feature_mean = j.at("feature_mean").get<std::vector<double>>();
            l.feature_std = j.at("feature_std").get<std::vector<double>>();
            l.training_loss_curve = j.at("training_loss_curve").get<std::vector<double>>();
            if (l.feature_mean.size() != l.weights.size() || l.feature_std.size() != l.weights.size())
                fail(ErrorCode::schema_error, "linear model vectors differ in length");
            return l;
        }
        TreeEnsembleModel t;
        t.spec = spec;
        t.n_features = j.at("n_features").get<std::size_t>();
        t.base_score = j.at("base_score").get<double>();
        t.learning_rate = j.at("learning_rate").get<double>();
        for (const auto& jt : j.at("trees")) {
            const auto feature = jt.at("feature").get<std::vector<int>>();
            const auto threshold = jt.at("threshold").get<std::vector<double>>();
            const auto left = jt.at("left").get<std::vector<int>>();
            const auto right = jt.at("right").get<std::vector<int>>();
            const auto value = jt.at("value").get<std::vector<double>>();
            const auto n = feature.size();
            if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n ||
                value.size() != n)
                fail(ErrorCode::schema_error, "tree arrays differ in length");
            RegressionTree tree;
            for (std::size_t k = 0; k < n; ++k) {
                const bool leaf = feature[k] < 0;
                if (!leaf && (feature[k] >= static_cast<int>(t.n_features) || left[k] <= static_cast<int>(k) ||
                              right[k] <= static_cast<int>(k) || left[k] >= static_cast<int>(n) ||
                              right[k] >= static_cast<int>(n)))
                    fail(ErrorCode::schema_error, "tree node " + std::to_string(k) + " is malformed");
                tree.nodes.push_back({feature[k], threshold[k], left[k], right[k], value[k]});
            }
            t.trees.push_back(std::move(tree));
        }
        t.training_loss_curve = j.at("training_loss_curve").get<std::vector<double>>();
        return t;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::schema_error, std::string("model JSON: ") + e.what());
    }
}

} // namespace wavetraffic
