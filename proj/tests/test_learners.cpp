#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "wavetraffic/learners.hpp"
#include "wavetraffic/random.hpp"

using namespace wavetraffic;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

LearnerSpec make_spec(LearnerKind kind, std::map<std::string, double> hp = {}, std::uint64_t seed = 1) {
    return {kind, std::move(hp), seed};
}

Matrix random_matrix(std::size_t n, std::size_t d, Rng& rng, double scale = 10.0) {
    Matrix X(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) X(i, j) = scale * uniform01(rng);
    return X;
}

std::vector<double> smooth_target(const Matrix& X, Rng& rng) {
    std::vector<double> y(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i)
        y[i] = std::sin(X(i, 0)) * 3.0 + 0.5 * X(i, 1) - 0.2 * X(i, 0) * X(i, 2) + 0.1 * standard_normal(rng);
    return y;
}

struct OracleSplit {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

// Exhaustive enumeration of depth-1 splits scored by the regularized second-order gain
// with squared loss (g = base - y, h = 1).
std::vector<OracleSplit> enumerate_splits(const Matrix& X, std::span<const double> y, double lambda,
                                          std::size_t min_leaf) {
    const std::size_t n = X.rows();
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(n);
    auto score = [&](double g, double h) { return g * g / (h + lambda); };
    double g_all = 0.0;
    for (double v : y) g_all += mean - v;
    std::vector<OracleSplit> out;
    for (std::size_t f = 0; f < X.cols(); ++f) {
        std::vector<double> vals = X.column(f);
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
            const double thr = vals[k] + (vals[k + 1] - vals[k]) / 2.0;
            double gl = 0.0, hl = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (X(i, f) < thr) {
                    gl += mean - y[i];
                    hl += 1.0;
                }
            const double hr = static_cast<double>(n) - hl;
            if (hl < static_cast<double>(min_leaf) || hr < static_cast<double>(min_leaf)) continue;
            const double gain = 0.5 * (score(gl, hl) + score(g_all - gl, hr) - score(g_all, static_cast<double>(n)));
            out.push_back({static_cast<int>(f), thr, gain});
        }
    }
    return out;
}

std::vector<double> least_squares(const Matrix& X, std::span<const double> y) {
    Eigen::MatrixXd A(X.rows(), X.cols() + 1);
    Eigen::VectorXd b(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) {
        for (std::size_t j = 0; j < X.cols(); ++j) A(i, j) = X(i, j);
        A(i, X.cols()) = 1.0;
        b(i) = y[i];
    }
    const Eigen::VectorXd sol = A.householderQr().solve(b);
    return {sol.data(), sol.data() + sol.size()};
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::io_error;
}

constexpr LearnerKind kBoosting[] = {LearnerKind::xgb_like, LearnerKind::lgb_like, LearnerKind::gbr_like,
                                     LearnerKind::cat_like};

} // namespace

TEST_CASE("hyperparameter validation", "[learners][error]") {
    CHECK(code_of([] { make_spec(LearnerKind::xgb_like, {{"depth", 3}}).validate(); }) ==
          ErrorCode::invalid_hyperparameter);
    CHECK(code_of([] { make_spec(LearnerKind::xgb_like, {{"learning_rate", 0.0}}).validate(); }) ==
          ErrorCode::invalid_hyperparameter);
    CHECK(code_of([] { make_spec(LearnerKind::sgd_linear, {{"batch_size", 2.5}}).validate(); }) ==
          ErrorCode::invalid_hyperparameter);
    CHECK(code_of([] { make_spec(LearnerKind::sgd_linear, {{"max_depth", 3}}).validate(); }) ==
          ErrorCode::invalid_hyperparameter);
    CHECK_NOTHROW(make_spec(LearnerKind::lgb_like, {{"max_leaves", 7}}).validate());
    CHECK(parse_learner_kind("cat_like") == LearnerKind::cat_like);
    CHECK(code_of([] { parse_learner_kind("forest"); }) == ErrorCode::invalid_config);
}

TEST_CASE("declared defaults", "[learners]") {
    const auto xgb = make_spec(LearnerKind::xgb_like);
    CHECK(xgb.get("n_trees") == 300);
    CHECK(xgb.get("learning_rate") == 0.1);
    CHECK(xgb.get("max_depth") == 6);
    CHECK(xgb.get("lambda") == 1.0);
    CHECK(xgb.get("min_samples_leaf") == 5);
    const auto lgb = make_spec(LearnerKind::lgb_like);
    CHECK(lgb.get("max_leaves") == 31);
    CHECK(lgb.get("n_bins") == 256);
    const auto sgd = make_spec(LearnerKind::sgd_linear);
    CHECK(sgd.get("learning_rate") == 0.01);
    CHECK(sgd.get("batch_size") == 32);
    CHECK(sgd.get("epochs") == 50);
}

TEST_CASE("fit rejects empty or tiny datasets", "[learners][error]") {
    Matrix X(1, 2);
    std::vector<double> y{1.0};
    CHECK(code_of([&] { fit(make_spec(LearnerKind::xgb_like), X, y); }) == ErrorCode::empty_dataset);
    CHECK(code_of([&] { fit(make_spec(LearnerKind::sgd_linear), Matrix(0, 0), {}); }) ==
          ErrorCode::empty_dataset);
}

TEST_CASE("constant targets give constant predictions", "[learners]") {
    Rng rng(4);
    const auto X = random_matrix(80, 3, rng);
    const std::vector<double> y(80, 42.5);
    for (auto kind : all_learner_kinds) {
        const auto m = fit(make_spec(kind, is_boosting(kind) ? std::map<std::string, double>{{"n_trees", 20}}
                                                              : std::map<std::string, double>{}),
                           X, y);
        INFO(to_string(kind));
        for (double p : predict(m, X)) CHECK_THAT(p, WithinAbs(42.5, 1e-9));
    }
}

TEST_CASE("a step target is split between the two plateaus", "[learners]") {
    Matrix X(0, 0);
    std::vector<double> y;
    for (int r = 0; r < 4; ++r)
        for (int v = 0; v < 10; ++v) {
            X.append_row(std::vector<double>{static_cast<double>(v), static_cast<double>((v * 7 + r) % 5)});
            y.push_back(v < 5 ? 0.0 : 10.0);
        }
    const auto m = fit(make_spec(LearnerKind::xgb_like,
                                 {{"n_trees", 1}, {"max_depth", 1}, {"lambda", 0.0}, {"min_samples_leaf", 1}}),
                       X, y);
    const auto& t = std::get<TreeEnsembleModel>(m);
    REQUIRE(t.trees.size() == 1);
    const auto& root = t.trees[0].nodes[0];
    CHECK(root.feature == 0);
    CHECK(root.threshold > 4.0);
    CHECK(root.threshold <= 5.0);
    CHECK(t.base_score == 5.0);
    const auto p = predict(m, X);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK_THAT(p[i], WithinAbs(y[i] < 5 ? 4.5 : 5.5, 1e-12));
}

TEST_CASE("depth-1 xgb_like picks the brute-force best split", "[learners][oracle]") {
    Rng rng(2024);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 8 + uniform_index(rng, 57);
        const std::size_t d = 1 + uniform_index(rng, 4);
        Matrix X(n, d);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) X(i, j) = static_cast<double>(uniform_index(rng, 12));
        std::vector<double> y(n);
        for (auto& v : y) v = 5.0 * standard_normal(rng);
        const double lambda = trial % 2 == 0 ? 1.0 : 0.0;
        const std::size_t min_leaf = 1 + uniform_index(rng, 3);
        const auto m = fit(make_spec(LearnerKind::xgb_like, {{"n_trees", 1},
                                                             {"max_depth", 1},
                                                             {"lambda", lambda},
                                                             {"min_samples_leaf", static_cast<double>(min_leaf)}}),
                           X, y);
        const auto& root = std::get<TreeEnsembleModel>(m).trees[0].nodes[0];
        const auto splits = enumerate_splits(X, y, lambda, min_leaf);
        OracleSplit best;
        for (const auto& s : splits)
            if (s.gain > best.gain * (1 + 1e-12) + 1e-12) best = s;
        INFO("trial " << trial);
        if (best.feature < 0) {
            CHECK(root.is_leaf());
            continue;
        }
        REQUIRE_FALSE(root.is_leaf());
        const auto chosen = std::find_if(splits.begin(), splits.end(), [&](const OracleSplit& s) {
            return s.feature == root.feature && s.threshold == root.threshold;
        });
        REQUIRE(chosen != splits.end());
        CHECK_THAT(chosen->gain, WithinRel(best.gain, 1e-9));
        CHECK(chosen->feature == best.feature);
        CHECK(chosen->threshold == best.threshold);
    }
}

TEST_CASE("boosting training loss never increases", "[learners][property]") {
    Rng rng(99);
    const auto X = random_matrix(300, 4, rng);
    const auto y = smooth_target(X, rng);
    for (auto kind : kBoosting) {
        const auto m = fit(make_spec(kind, {{"n_trees", 60}}), X, y);
        const auto& curve = training_loss_curve(m);
        REQUIRE(curve.size() == 60);
        INFO(to_string(kind));
        for (std::size_t t = 1; t < curve.size(); ++t) CHECK(curve[t] <= curve[t - 1]);
        CHECK(curve.back() < curve.front());
    }
}

TEST_CASE("fitting is deterministic", "[learners][property]") {
    Rng rng(5);
    const auto X = random_matrix(150, 3, rng);
    const auto y = smooth_target(X, rng);
    for (auto kind : all_learner_kinds) {
        std::map<std::string, double> hp;
        if (is_boosting(kind)) hp = {{"n_trees", 25}, {"subsample", 0.7}};
        const auto a = fit(make_spec(kind, hp, 77), X, y);
        const auto b = fit(make_spec(kind, hp, 77), X, y);
        INFO(to_string(kind));
        CHECK(to_json(a).dump() == to_json(b).dump());
    }
}

TEST_CASE("models round-trip through JSON exactly", "[learners]") {
    Rng rng(6);
    const auto X = random_matrix(120, 3, rng);
    const auto y = smooth_target(X, rng);
    for (auto kind : all_learner_kinds) {
        std::map<std::string, double> hp;
        if (is_boosting(kind)) hp = {{"n_trees", 15}};
        const auto m = fit(make_spec(kind, hp), X, y);
        const auto back = model_from_json(nlohmann::json::parse(to_json(m).dump()));
        INFO(to_string(kind));
        CHECK(back == m);
        CHECK(predict(back, X) == predict(m, X));
    }
}

TEST_CASE("malformed model JSON is rejected", "[learners][error]") {
    Rng rng(8);
    const auto X = random_matrix(40, 2, rng);
    const auto y = smooth_target(X, rng);
    auto j = to_json(fit(make_spec(LearnerKind::xgb_like, {{"n_trees", 2}}), X, y));
    j["trees"][0]["left"] = nlohmann::json::array();
    CHECK(code_of([&] { model_from_json(j); }) == ErrorCode::schema_error);
    CHECK(code_of([&] { model_from_json(nlohmann::json{{"kind", "xgb_like"}}); }) == ErrorCode::schema_error);
}

TEST_CASE("predict checks the feature count", "[learners][error]") {
    Rng rng(9);
    const auto X = random_matrix(40, 3, rng);
    const auto y = smooth_target(X, rng);
    const auto m = fit(make_spec(LearnerKind::gbr_like, {{"n_trees", 3}}), X, y);
    CHECK(code_of([&] { predict(m, random_matrix(2, 4, rng)); }) == ErrorCode::shape_mismatch);
}

TEST_CASE("tree predictions equal a manual walk", "[learners]") {
    Rng rng(10);
    const auto X = random_matrix(100, 3, rng);
    const auto y = smooth_target(X, rng);
    const auto m = fit(make_spec(LearnerKind::xgb_like, {{"n_trees", 5}, {"max_depth", 3}}), X, y);
    const auto& t = std::get<TreeEnsembleModel>(m);
    for (std::size_t i = 0; i < 10; ++i) {
        double sum = 0.0;
        for (const auto& tree : t.trees) {
            std::size_t k = 0;
            while (tree.nodes[k].feature >= 0)
                k = static_cast<std::size_t>(X(i, static_cast<std::size_t>(tree.nodes[k].feature)) <
                                                     tree.nodes[k].threshold
                                                 ? tree.nodes[k].left
                                                 : tree.nodes[k].right);
            sum += tree.nodes[k].value;
        }
        CHECK(predict_row(m, X.row(i)) == t.base_score + t.learning_rate * sum);
    }
}

TEST_CASE("level-wise leaves respect min_samples_leaf and max_depth", "[learners][property]") {
    Rng rng(12);
    const auto X = random_matrix(200, 3, rng);
    const auto y = smooth_target(X, rng);
    const auto m = fit(make_spec(LearnerKind::xgb_like, {{"n_trees", 1}, {"max_depth", 4}, {"min_samples_leaf", 9}}),
                       X, y);
    const auto& tree = std::get<TreeEnsembleModel>(m).trees[0];
    std::vector<std::size_t> count(tree.nodes.size(), 0);
    for (std::size_t i = 0; i < X.rows(); ++i) {
        std::size_t k = 0;
        while (!tree.nodes[k].is_leaf())
            k = static_cast<std::size_t>(X(i, static_cast<std::size_t>(tree.nodes[k].feature)) <
                                                 tree.nodes[k].threshold
                                             ? tree.nodes[k].left
                                             : tree.nodes[k].right);
        ++count[k];
    }
    const auto depth = tree.depths();
    for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
        CHECK(depth[k] <= 4);
        if (tree.nodes[k].is_leaf()) CHECK(count[k] >= 9);
    }
}

TEST_CASE("lgb_like trees stay within max_leaves", "[learners][property]") {
    Rng rng(13);
    const auto X = random_matrix(400, 4, rng);
    const auto y = smooth_target(X, rng);
    const auto m = fit(make_spec(LearnerKind::lgb_like, {{"n_trees", 10}, {"max_leaves", 7}}), X, y);
    for (const auto& tree : std::get<TreeEnsembleModel>(m).trees) {
        std::size_t leaves = 0;
        for (const auto& n : tree.nodes) leaves += n.is_leaf();
        CHECK(leaves <= 7);
        CHECK(leaves >= 2);
    }
}

TEST_CASE("cat_like trees are oblivious", "[learners][property]") {
    Rng rng(14);
    const auto X = random_matrix(300, 4, rng);
    const auto y = smooth_target(X, rng);
    const auto m = fit(make_spec(LearnerKind::cat_like, {{"n_trees", 20}, {"max_depth", 4}}), X, y);
    for (const auto& tree : std::get<TreeEnsembleModel>(m).trees) {
        const auto depth = tree.depths();
        std::map<int, std::pair<int, double>> per_depth;
        for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
            if (tree.nodes[k].is_leaf()) continue;
            const auto key = std::pair{tree.nodes[k].feature, tree.nodes[k].threshold};
            auto [it, inserted] = per_depth.emplace(depth[k], key);
            if (!inserted) CHECK(it->second == key);
        }
    }
}

TEST_CASE("sgd_linear recovers y = 2 x_last + 1", "[learners][oracle]") {
    Rng rng(15);
    const auto X = random_matrix(200, 3, rng);
    std::vector<double> y(200);
    for (std::size_t i = 0; i < 200; ++i) y[i] = 2.0 * X(i, 2) + 1.0;
    const auto oracle = least_squares(X, y);
    REQUIRE_THAT(oracle[2], WithinAbs(2.0, 1e-9));
    const auto m = std::get<LinearModel>(fit(make_spec(LearnerKind::sgd_linear), X, y));
    const auto coef = m.raw_coefficients();
    CHECK(std::abs(coef[2] - oracle[2]) <= 0.05);
    CHECK(std::abs(coef[0]) <= 0.05);
    CHECK(std::abs(coef[1]) <= 0.05);
    CHECK(std::abs(m.raw_intercept() - oracle[3]) <= 0.5);
}

TEST_CASE("sgd_linear is invariant to feature scaling", "[learners][property]") {
    Rng rng(16);
    const auto X = random_matrix(150, 4, rng);
    const auto y = smooth_target(X, rng);
    Matrix Xk = X;
    for (std::size_t i = 0; i < X.rows(); ++i)
        for (std::size_t j = 0; j < X.cols(); ++j) Xk(i, j) = 8.0 * X(i, j);
    const auto a = fit(make_spec(LearnerKind::sgd_linear), X, y);
    const auto b = fit(make_spec(LearnerKind::sgd_linear), Xk, y);
    const auto pa = predict(a, X), pb = predict(b, Xk);
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK_THAT(pb[i], WithinAbs(pa[i], 1e-8));
}

TEST_CASE("zero-variance features keep a zero contribution", "[learners]") {
    Rng rng(17);
    auto X = random_matrix(100, 3, rng);
    for (std::size_t i = 0; i < X.rows(); ++i) X(i, 1) = 7.0;
    const auto y = smooth_target(X, rng);
    const auto m = std::get<LinearModel>(fit(make_spec(LearnerKind::sgd_linear), X, y));
    CHECK(m.feature_std[1] == 1.0);
    CHECK(m.weights[1] == 0.0);
}

TEST_CASE("boosting learners fit a smooth target well", "[learners]") {
    Rng rng(18);
    const auto X = random_matrix(500, 3, rng);
    const auto y = smooth_target(X, rng);
    double var = 0.0, mean = 0.0;
    for (double v : y) mean += v / static_cast<double>(y.size());
    for (double v : y) var += (v - mean) * (v - mean) / static_cast<double>(y.size());
    for (auto kind : kBoosting) {
        const auto m = fit(make_spec(kind, {{"n_trees", 100}}), X, y);
        INFO(to_string(kind));
        CHECK(training_loss_curve(m).back() < 0.1 * var);
    }
}
