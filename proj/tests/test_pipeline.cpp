#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "wavetraffic/pipeline.hpp"
#include "wavetraffic/random.hpp"
#include "wavetraffic/synth.hpp"

using namespace wavetraffic;
using Catch::Matchers::WithinAbs;

namespace {

const std::map<LearnerKind, std::map<std::string, double>> kQuick{
    {LearnerKind::xgb_like, {{"n_trees", 30}}},
    {LearnerKind::lgb_like, {{"n_trees", 30}}},
    {LearnerKind::gbr_like, {{"n_trees", 30}}},
    {LearnerKind::cat_like, {{"n_trees", 30}}},
};

ModelRecipe quick(const std::string& label, std::uint64_t seed = 7) { return make_recipe(label, seed, kQuick); }

std::vector<double> noisy_series(std::size_t n, std::uint64_t seed) {
    SynthConfig c;
    c.length = n;
    c.daily_period = 48;
    c.weekly_period = 336;
    return synth_gen(c, seed).values();
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

HybridSettings settings(const std::string& wavelet, TrainDecomposition d = TrainDecomposition::trailing,
                        HybridMode mode = HybridMode::per_component) {
    HybridSettings h;
    h.wavelet = wavelet;
    h.train_decomposition = d;
    h.mode = mode;
    return h;
}

std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("wavetraffic_pipeline_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace

TEST_CASE("standalone linear forecaster continues a ramp", "[pipeline]") {
    std::vector<double> ramp(300);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = 10.0 + 0.5 * static_cast<double>(i);
    const TimeSeries train("ramp", std::vector<double>(ramp.begin(), ramp.begin() + 250));
    const std::vector<double> test(ramp.begin() + 250, ramp.end());
    const auto f = train_standalone(train, 6, quick("sgd_linear"));
    const auto pred = walk_forward(f, train.values(), test);
    REQUIRE(pred.size() == test.size());
    for (std::size_t i = 0; i < pred.size(); ++i) CHECK_THAT(pred[i], WithinAbs(test[i], 0.5));
}

TEST_CASE("one-step forecast after the ramp 1..100", "[pipeline]") {
    std::vector<double> ramp(100);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i + 1);
    const TimeSeries train("ramp", ramp);
    const auto f = train_standalone(train, 6, quick("sgd_linear"));
    const auto pred = walk_forward(f, ramp, std::vector<double>{101.0});
    REQUIRE(pred.size() == 1);
    CHECK_THAT(pred[0], WithinAbs(101.0, 0.5));
}

TEST_CASE("every model predicts a constant series exactly", "[pipeline]") {
    const TimeSeries train("flat", std::vector<double>(200, 42.5));
    const std::vector<double> test(20, 42.5);
    for (const auto* label : {"xgb_like", "lgb_like", "sgd_linear", "gbr_like", "cat_like", "stacked"}) {
        INFO(label);
        const auto f = train_standalone(train, 6, quick(label));
        for (double p : walk_forward(f, train.values(), test)) CHECK_THAT(p, WithinAbs(42.5, 1e-9));
    }
}

TEST_CASE("window longer than the training series is rejected", "[pipeline][errors]") {
    const TimeSeries train("short", std::vector<double>{1, 2, 3, 4, 5});
    CHECK(code_of([&] { train_standalone(train, 5, quick("sgd_linear")); }) == ErrorCode::window_too_large);
    CHECK(code_of([&] { train_standalone(train, 9, quick("sgd_linear")); }) == ErrorCode::window_too_large);
    CHECK(code_of([&] {
              prepare_training_components(train.values(), settings("haar", TrainDecomposition::whole), 5);
          }) == ErrorCode::window_too_large);
}

TEST_CASE("hybrid rejects too many levels and short training series", "[pipeline][errors]") {
    const auto x = noisy_series(200, 1);
    auto h = settings("dmey", TrainDecomposition::whole);
    h.levels = 3;  // dmey needs 488 samples for three levels
    CHECK(code_of([&] { prepare_training_components(x, h, 6); }) == ErrorCode::too_many_levels);
    h.train_decomposition = TrainDecomposition::trailing;
    CHECK(code_of([&] { prepare_training_components(x, h, 6); }) == ErrorCode::insufficient_history);
    h.levels = 0;
    CHECK(code_of([&] { prepare_training_components(x, h, 6); }) == ErrorCode::too_many_levels);
}

TEST_CASE("minimum decomposition length is the smallest admissible one", "[pipeline]") {
    for (const auto* name : {"haar", "dmey", "bior3.7"}) {
        const auto& bank = filter_bank(name);
        for (int L = 1; L <= 4; ++L) {
            const auto n = min_decomposition_len(bank, L);
            CHECK(max_level(n, bank.filter_len()) >= L);
            CHECK(max_level(n - 1, bank.filter_len()) < L);
            CHECK_NOTHROW(mra(noisy_series(n, 3), bank, L));
        }
    }
    CHECK(min_decomposition_len(filter_bank("dmey"), 3) == 488);
}

TEST_CASE("per-component predictions sum to the hybrid forecast", "[pipeline][hybrid]") {
    const auto x = noisy_series(1400, 2);
    const std::span<const double> train(x.data(), 1000), test(x.data() + 1000, 400);
    for (auto d : {TrainDecomposition::whole, TrainDecomposition::trailing}) {
        const auto f = train_hybrid(TimeSeries("train", {train.begin(), train.end()}), settings("bior3.7", d), 9,
                                    quick("xgb_like"));
        REQUIRE(f.models.size() == 4);
        const auto r = walk_forward_detailed(f, train, test);
        REQUIRE(r.component_predictions.size() == 4);
        for (std::size_t i = 0; i < test.size(); ++i) {
            double sum = 0.0;
            for (const auto& c : r.component_predictions) sum += c[i];
            CHECK(sum == r.predictions[i]);
        }
    }
}

TEST_CASE("walk-forward is causal for standalone and every wavelet", "[pipeline][causality]") {
    const auto x = noisy_series(1300, 5);
    const std::span<const double> history(x.data(), 900);
    const std::vector<double> test(x.begin() + 900, x.end());
    std::vector<Forecaster> fs;
    fs.push_back(train_standalone(TimeSeries("h", {history.begin(), history.end()}), 6, quick("lgb_like")));
    for (const auto* w : {"haar", "dmey", "bior3.7"})
        for (auto mode : {HybridMode::per_component, HybridMode::concat_features})
            fs.push_back(train_hybrid(TimeSeries("h", {history.begin(), history.end()}),
                                      settings(w, TrainDecomposition::trailing, mode), 6, quick("sgd_linear")));
    for (const auto& f : fs) {
        INFO((f.hybrid ? f.settings.wavelet + " " + std::string(to_string(f.settings.mode)) : "standalone"));
        const auto full = walk_forward(f, history, test);
        for (std::size_t cut : {1u, 57u, 200u, 399u}) {
            const auto part = walk_forward(f, history, std::span<const double>(test.data(), cut));
            REQUIRE(part.size() == cut);
            for (std::size_t i = 0; i < cut; ++i) REQUIRE(part[i] == full[i]);
        }
        // corrupting the future leaves earlier predictions alone
        auto changed = test;
        for (std::size_t i = 150; i < changed.size(); ++i) changed[i] += 1000.0;
        const auto alt = walk_forward(f, history, changed);
        for (std::size_t i = 0; i <= 150; ++i) REQUIRE(alt[i] == full[i]);
    }
}

TEST_CASE("leaky decomposition sees the future", "[pipeline][leaky]") {
    const auto x = noisy_series(1300, 6);
    const TimeSeries history("h", std::vector<double>(x.begin(), x.begin() + 900));
    std::vector<double> test(x.begin() + 900, x.end());
    auto h = settings("dmey", TrainDecomposition::whole);
    h.leaky = true;
    const auto leaky = train_hybrid(history, h, 6, quick("sgd_linear"));
    h.leaky = false;
    const auto causal = train_hybrid(history, h, 6, quick("sgd_linear"));
    CHECK(walk_forward(leaky, history.values(), test) != walk_forward(causal, history.values(), test));

    const auto before = walk_forward(leaky, history.values(), test);
    test.back() += 500.0;
    const auto after = walk_forward(leaky, history.values(), test);
    CHECK(before[test.size() - 40] != after[test.size() - 40]);
}

TEST_CASE("trailing training rows match the walk-forward view", "[pipeline][hybrid]") {
    const auto x = noisy_series(900, 8);
    const auto h = settings("haar");
    const auto tc = prepare_training_components(x, h, 9);
    const std::size_t first = tc.feature_tails.first_end;
    REQUIRE(first == 9);
    for (std::size_t r : {0u, 100u, 500u}) {
        const std::size_t end = first + r;
        const auto view = walk_forward_tails(std::span<const double>(x.data(), end),
                                             std::span<const double>(x.data() + end, 1), h, 9);
        for (std::size_t k = 0; k < 4; ++k)
            for (std::size_t j = 0; j < 9; ++j) CHECK(view.tails[k](0, j) == tc.feature_tails.tails[k](r, j));
        // component targets sum to the raw target
        double sum = 0.0;
        for (std::size_t k = 0; k < 4; ++k) sum += tc.component_targets[k][r];
        CHECK_THAT(sum, WithinAbs(x[end], 1e-9));
    }
    const auto ds = concat_dataset(tc, 6);
    CHECK(ds.X.cols() == 24);
    CHECK(ds.size() == x.size() - first);
    CHECK(ds.y.front() == x[first]);
}

TEST_CASE("empty test range gives empty predictions", "[pipeline]") {
    const auto x = noisy_series(700, 9);
    const TimeSeries train("t", x);
    const auto s = train_standalone(train, 6, quick("sgd_linear"));
    const auto hy = train_hybrid(train, settings("haar"), 6, quick("sgd_linear"));
    CHECK(walk_forward(s, x, std::span<const double>{}).empty());
    CHECK(walk_forward(hy, x, std::span<const double>{}).empty());
}

TEST_CASE("walk-forward needs enough history", "[pipeline][errors]") {
    const auto x = noisy_series(700, 10);
    const TimeSeries train("t", x);
    const auto s = train_standalone(train, 6, quick("sgd_linear"));
    const auto hy = train_hybrid(train, settings("dmey"), 6, quick("sgd_linear"));
    const std::vector<double> short_hist(x.begin(), x.begin() + 4), test(x.begin() + 4, x.begin() + 10);
    CHECK(code_of([&] { walk_forward(s, short_hist, test); }) == ErrorCode::insufficient_history);
    CHECK(code_of([&] { walk_forward(hy, std::span<const double>(x.data(), 100), test); }) ==
          ErrorCode::insufficient_history);
}

TEST_CASE("training is deterministic for a fixed seed", "[pipeline][determinism]") {
    const auto x = noisy_series(1100, 11);
    const TimeSeries train("t", std::vector<double>(x.begin(), x.begin() + 800));
    const std::vector<double> test(x.begin() + 800, x.end());
    for (const auto* label : {"xgb_like", "cat_like", "stacked"}) {
        INFO(label);
        const auto a = train_hybrid(train, settings("bior3.7"), 6, quick(label, 3));
        const auto b = train_hybrid(train, settings("bior3.7"), 6, quick(label, 3));
        CHECK(to_json(a).dump() == to_json(b).dump());
        CHECK(walk_forward(a, train.values(), test) == walk_forward(b, train.values(), test));
    }
    const auto a = train_standalone(train, 6, quick("lgb_like", 3));
    const auto c = train_standalone(train, 6, quick("lgb_like", 4));
    CHECK(to_json(a).dump() != to_json(c).dump());
}

TEST_CASE("forecaster bundles round-trip", "[pipeline][serialization]") {
    const auto x = noisy_series(1100, 12);
    const TimeSeries train("t", std::vector<double>(x.begin(), x.begin() + 800));
    const std::vector<double> test(x.begin() + 800, x.end());
    const auto dir = temp_dir("bundles");
    std::vector<Forecaster> fs{
        train_standalone(train, 9, quick("gbr_like")),
        train_standalone(train, 6, quick("stacked")),
        train_hybrid(train, settings("dmey"), 6, quick("cat_like")),
        train_hybrid(train, settings("haar", TrainDecomposition::whole, HybridMode::concat_features), 12,
                     quick("sgd_linear")),
    };
    for (std::size_t i = 0; i < fs.size(); ++i) {
        const auto path = dir / ("f" + std::to_string(i) + ".json");
        save_forecaster(fs[i], path);
        const auto back = load_forecaster(path);
        CHECK(back.hybrid == fs[i].hybrid);
        CHECK(back.window == fs[i].window);
        CHECK(back.settings == fs[i].settings);
        CHECK(back.recipe == fs[i].recipe);
        CHECK(back.train_len == 800);
        CHECK(walk_forward(back, train.values(), test) == walk_forward(fs[i], train.values(), test));
    }
}

TEST_CASE("malformed forecaster bundles are schema errors", "[pipeline][serialization][errors]") {
    const auto x = noisy_series(600, 13);
    const auto good = to_json(train_hybrid(TimeSeries("t", x), settings("haar"), 6, quick("sgd_linear")));
    auto j = good;
    j["format"] = "something-else";
    CHECK(code_of([&] { forecaster_from_json(j); }) == ErrorCode::schema_error);
    j = good;
    j["models"].erase(0);
    CHECK(code_of([&] { forecaster_from_json(j); }) == ErrorCode::schema_error);
    j = good;
    j["window"] = 7;
    CHECK(code_of([&] { forecaster_from_json(j); }) == ErrorCode::schema_error);
    j = good;
    j.erase("recipe");
    CHECK(code_of([&] { forecaster_from_json(j); }) == ErrorCode::schema_error);

    const auto dir = temp_dir("malformed");
    std::ofstream(dir / "bad.json") << "{ not json";
    CHECK(code_of([&] { load_forecaster(dir / "bad.json"); }) == ErrorCode::schema_error);
    CHECK(code_of([&] { load_forecaster(dir / "missing.json"); }) == ErrorCode::file_not_found);
}

TEST_CASE("hybrid settings parse and print", "[pipeline]") {
    CHECK(parse_hybrid_mode("per-component") == HybridMode::per_component);
    CHECK(parse_hybrid_mode("concat-features") == HybridMode::concat_features);
    CHECK(parse_train_decomposition("whole") == TrainDecomposition::whole);
    CHECK(code_of([] { parse_hybrid_mode("sum"); }) == ErrorCode::invalid_config);
    CHECK(code_of([] { parse_train_decomposition("all"); }) == ErrorCode::invalid_config);
    auto h = settings("bior3.7", TrainDecomposition::whole, HybridMode::concat_features);
    h.levels = 2;
    h.decomp_window = 0;
    h.ext_mode = ExtensionMode::periodic;
    CHECK(hybrid_settings_from_json(to_json(h)) == h);
}

TEST_CASE("unknown model labels are rejected", "[pipeline][errors]") {
    CHECK(code_of([] { make_recipe("random_forest", 1); }) == ErrorCode::invalid_config);
    CHECK(make_recipe("stacked", 1).bases.size() == 5);
}
