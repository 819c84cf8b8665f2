#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "wavetraffic/ensemble.hpp"
#include "wavetraffic/learners.hpp"
#include "wavetraffic/series.hpp"
#include "wavetraffic/wavelet.hpp"

namespace wavetraffic {

// ---- model recipes -------------------------------------------------------------

/// What to fit on one feature matrix: a single learner or a stacked ensemble.
struct ModelRecipe {
    std::string label;
    bool stacked = false;
    LearnerSpec spec;
    std::vector<LearnerSpec> bases;
    std::size_t folds = 5;
    double lambda_meta = 1e-3;

    /// Copy with every seed replaced by derive_seed(seed, salt).
    ModelRecipe reseeded(std::uint64_t salt) const {
        ModelRecipe r = *this;
        r.spec.seed = derive_seed(spec.seed, salt);
        for (auto& b : r.bases) b.seed = derive_seed(b.seed, salt);
        return r;
    }

    friend bool operator==(const ModelRecipe&, const ModelRecipe&) = default;
};

inline constexpr std::string_view kStackedLabel = "stacked";

/// Recipe for a learner kind name or "stacked" (all five kinds as bases), with
/// per-kind hyperparameter overrides.
inline ModelRecipe make_recipe(const std::string& label, std::uint64_t seed,
                               const std::map<LearnerKind, std::map<std::string, double>>& overrides = {}) {
    auto spec_for = [&](LearnerKind kind) {
        LearnerSpec s{kind, {}, seed};
        if (auto it = overrides.find(kind); it != overrides.end()) s.hyperparameters = it->second;
        s.validate();
        return s;
    };
    ModelRecipe r;
    r.label = label;
    if (label == kStackedLabel) {
        r.stacked = true;
        for (auto kind : all_learner_kinds) r.bases.push_back(spec_for(kind));
        return r;
    }
    r.spec = spec_for(parse_learner_kind(label));
    return r;
}

struct Regressor {
    std::variant<Model, StackedModel> impl;

    bool is_stacked() const noexcept { return std::holds_alternative<StackedModel>(impl); }
    std::size_t n_features() const {
        if (const auto* s = std::get_if<StackedModel>(&impl)) return s->n_features();
        return wavetraffic::n_features(std::get<Model>(impl));
    }
};

inline Regressor fit_regressor(const ModelRecipe& recipe, const Matrix& X, std::span<const double> y) {
    if (recipe.stacked) return {fit_stacked(X, y, recipe.bases, recipe.folds, recipe.lambda_meta)};
    return {fit(recipe.spec, X, y)};
}

inline std::vector<double> predict(const Regressor& r, const Matrix& X) {
    if (const auto* s = std::get_if<StackedModel>(&r.impl)) return predict_stacked(*s, X);
    return predict(std::get<Model>(r.impl), X);
}

inline nlohmann::json to_json(const Regressor& r) {
    if (const auto* s = std::get_if<StackedModel>(&r.impl)) return to_json(*s);
    return to_json(std::get<Model>(r.impl));
}

inline Regressor regressor_from_json(const nlohmann::json& j) {
    if (j.is_object() && j.value("kind", "") == kStackedLabel) return {stacked_from_json(j)};
    return {model_from_json(j)};
}

inline nlohmann::json to_json(const ModelRecipe& r) {
    nlohmann::json j{{"label", r.label}, {"stacked", r.stacked}};
    if (r.stacked) {
        auto& bases = j["bases"] = nlohmann::json::array();
        for (const auto& b : r.bases) bases.push_back(to_json(b));
        j["folds"] = r.folds;
        j["lambda_meta"] = r.lambda_meta;
    } else {
        j["spec"] = to_json(r.spec);
    }
    return j;
}

inline ModelRecipe recipe_from_json(const nlohmann::json& j) {
    ModelRecipe r;
    r.label = j.at("label").get<std::string>();
    r.stacked = j.at("stacked").get<bool>();
    if (r.stacked) {
        for (const auto& b : j.at("bases")) r.bases.push_back(learner_spec_from_json(b));
        r.folds = j.at("folds").get<std::size_t>();
        r.lambda_meta = j.at("lambda_meta").get<double>();
    } else {
        r.spec = learner_spec_from_json(j.at("spec"));
    }
    return r;
}

// ---- hybrid settings -----------------------------------------------------------

enum class HybridMode { per_component, concat_features };

inline std::string_view to_string(HybridMode m) {
    return m == HybridMode::per_component ? "per-component" : "concat-features";
}

inline HybridMode parse_hybrid_mode(std::string_view s) {
    if (s == "per-component") return HybridMode::per_component;
    if (s == "concat-features") return HybridMode::concat_features;
    fail(ErrorCode::invalid_config,
         "hybrid_mode '" + std::string(s) + "' (valid: per-component, concat-features)");
}

/// How training components are produced.
///  - whole: one MRA of the whole training series, windowed per component.
///  - trailing: every training row is cut from an MRA of the trailing decomp_window
///    samples that precede its target, the same view walk_forward has at test time.
enum class TrainDecomposition { whole, trailing };

inline std::string_view to_string(TrainDecomposition d) {
    return d == TrainDecomposition::whole ? "whole" : "trailing";
}

inline TrainDecomposition parse_train_decomposition(std::string_view s) {
    if (s == "whole") return TrainDecomposition::whole;
    if (s == "trailing") return TrainDecomposition::trailing;
    fail(ErrorCode::invalid_config, "train_decomposition '" + std::string(s) + "' (valid: whole, trailing)");
}

struct HybridSettings {
    std::string wavelet = "dmey";
    int levels = 3;
    ExtensionMode ext_mode = ExtensionMode::symmetric;
    HybridMode mode = HybridMode::per_component;
    TrainDecomposition train_decomposition = TrainDecomposition::whole;
    /// Trailing samples re-decomposed at each walk-forward step; 0 means all history.
    std::size_t decomp_window = 512;
    /// Decompose history and test together once. Uses future values; comparison only.
    bool leaky = false;

    friend bool operator==(const HybridSettings&, const HybridSettings&) = default;
};

/// Samples a decomposition segment needs for `levels` levels of `bank`.
inline std::size_t min_decomposition_len(const FilterBank& bank, int levels) {
    if (levels < 1 || levels > 40) fail(ErrorCode::too_many_levels, "levels " + std::to_string(levels));
    std::size_t n = std::max(bank.filter_len(), (bank.filter_len() - 1) << levels);
    while (max_level(n, bank.filter_len()) < levels) ++n;
    return n;
}

inline nlohmann::json to_json(const HybridSettings& h) {
    return {{"wavelet", h.wavelet},
            {"levels", h.levels},
            {"ext_mode", std::string(to_string(h.ext_mode))},
            {"mode", std::string(to_string(h.mode))},
            {"train_decomposition", std::string(to_string(h.train_decomposition))},
            {"decomp_window", h.decomp_window},
            {"leaky", h.leaky}};
}

inline HybridSettings hybrid_settings_from_json(const nlohmann::json& j) {
    HybridSettings h;
    h.wavelet = j.at("wavelet").get<std::string>();
    h.levels = j.at("levels").get<int>();
    h.ext_mode = parse_extension_mode(j.at("ext_mode").get<std::string>());
    h.mode = parse_hybrid_mode(j.at("mode").get<std::string>());
    h.train_decomposition = parse_train_decomposition(j.at("train_decomposition").get<std::string>());
    h.decomp_window = j.at("decomp_window").get<std::size_t>();
    h.leaky = j.at("leaky").get<bool>();
    return h;
}

// ---- component features --------------------------------------------------------

/// The trailing tail of every MRA component for a run of observation end points.
/// tails[k] row r holds the last `tail` values of component k (oldest first) of the MRA
/// of x[max(0, e - decomp_window), e) with e = first_end + r.
struct ComponentTails {
    std::vector<Matrix> tails;
    std::size_t first_end = 0;
    std::size_t tail = 0;

    std::size_t rows() const noexcept { return tails.empty() ? 0 : tails.front().rows(); }
};

inline ComponentTails trailing_tails(std::span<const double> x, const HybridSettings& h,
                                     std::size_t first_end, std::size_t last_end, std::size_t tail) {
    const auto& bank = filter_bank(h.wavelet);
    const std::size_t need = std::max(min_decomposition_len(bank, h.levels), tail);
    const auto n_comp = static_cast<std::size_t>(h.levels) + 1;
    ComponentTails out;
    out.first_end = first_end;
    out.tail = tail;
    const std::size_t rows = last_end >= first_end ? last_end - first_end + 1 : 0;
    out.tails.assign(n_comp, Matrix(rows, tail));
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t end = first_end + r;
        const std::size_t begin = h.decomp_window == 0 || end <= h.decomp_window ? 0 : end - h.decomp_window;
        if (end - begin < need)
            fail(ErrorCode::insufficient_history,
                 std::to_string(end - begin) + " observations, " + h.wavelet + " with " +
                     std::to_string(h.levels) + " levels and window " + std::to_string(tail) +
                     " needs " + std::to_string(need));
        const auto set = mra(x.subspan(begin, end - begin), bank, h.levels, h.ext_mode);
        const auto comps = set.ordered();
        for (std::size_t k = 0; k < n_comp; ++k) {
            const auto& c = comps[k];
            auto row = out.tails[k].row(r);
            std::copy(c.end() - static_cast<std::ptrdiff_t>(tail), c.end(), row.begin());
        }
    }
    return out;
}

/// Training material for hybrid models, shared by every feature window up to max_window.
struct TrainingComponents {
    HybridSettings settings;
    std::size_t max_window = 0;
    std::vector<double> raw;
    /// whole: full-length MRA components of the training series.
    std::vector<std::vector<double>> components;
    /// trailing: observation tails ending before each target, and each component's
    /// value at the target from the MRA that ends on it.
    ComponentTails feature_tails;
    std::vector<std::vector<double>> component_targets;
};

inline TrainingComponents prepare_training_components(std::span<const double> train, const HybridSettings& h,
                                                      std::size_t max_window) {
    TrainingComponents tc;
    tc.settings = h;
    tc.max_window = max_window;
    tc.raw.assign(train.begin(), train.end());
    const auto& bank = filter_bank(h.wavelet);
    if (h.train_decomposition == TrainDecomposition::whole) {
        if (train.size() <= max_window)
            fail(ErrorCode::window_too_large, "window " + std::to_string(max_window) + " needs more than " +
                                                  std::to_string(train.size()) + " training points");
        tc.components = mra(train, bank, h.levels, h.ext_mode).ordered();
        return tc;
    }
    const std::size_t first = std::max(min_decomposition_len(bank, h.levels), max_window);
    if (train.size() < first + 2)
        fail(ErrorCode::insufficient_history, std::to_string(train.size()) + " training points; " +
                                                  std::to_string(first + 2) + " needed");
    // ends first .. n: rows 0 .. n-1-first are features, rows 1 .. n-first give targets
    const auto all = trailing_tails(train, h, first, train.size(), max_window);
    const std::size_t n_rows = all.rows() - 1;
    const auto n_comp = all.tails.size();
    tc.feature_tails.first_end = first;
    tc.feature_tails.tail = max_window;
    tc.component_targets.assign(n_comp, std::vector<double>(n_rows));
    for (std::size_t k = 0; k < n_comp; ++k) {
        tc.feature_tails.tails.push_back(all.tails[k].slice_rows(0, n_rows));
        for (std::size_t r = 0; r < n_rows; ++r) tc.component_targets[k][r] = all.tails[k](r + 1, max_window - 1);
    }
    return tc;
}

namespace detail {

inline void append_tail(std::vector<double>& row, const Matrix& tails, std::size_t r, std::size_t w) {
    const auto full = tails.row(r);
    row.insert(row.end(), full.end() - static_cast<std::ptrdiff_t>(w), full.end());
}

inline Matrix tail_features(const Matrix& tails, std::size_t w) {
    Matrix X(tails.rows(), w);
    for (std::size_t r = 0; r < tails.rows(); ++r) {
        const auto full = tails.row(r);
        std::copy(full.end() - static_cast<std::ptrdiff_t>(w), full.end(), X.row(r).begin());
    }
    return X;
}

inline Matrix concat_tail_features(const ComponentTails& ct, std::size_t w) {
    Matrix X(ct.rows(), w * ct.tails.size());
    std::vector<double> row;
    for (std::size_t r = 0; r < ct.rows(); ++r) {
        row.clear();
        for (const auto& t : ct.tails) append_tail(row, t, r, w);
        std::copy(row.begin(), row.end(), X.row(r).begin());
    }
    return X;
}

} // namespace detail

/// Supervised data for component k (per-component mode) at feature window w.
inline WindowedDataset component_dataset(const TrainingComponents& tc, std::size_t k, std::size_t w) {
    if (w < 1 || w > tc.max_window) fail(ErrorCode::window_too_large, "window " + std::to_string(w));
    if (tc.settings.train_decomposition == TrainDecomposition::whole)
        return make_windows(tc.components[k], w, "component " + std::to_string(k));
    return {detail::tail_features(tc.feature_tails.tails[k], w), tc.component_targets[k], w,
            "component " + std::to_string(k)};
}

/// Supervised data for concat-features mode: all component windows side by side, raw target.
inline WindowedDataset concat_dataset(const TrainingComponents& tc, std::size_t w) {
    if (w < 1 || w > tc.max_window) fail(ErrorCode::window_too_large, "window " + std::to_string(w));
    if (tc.settings.train_decomposition == TrainDecomposition::whole) {
        const std::size_t n = tc.raw.size();
        if (n <= w) fail(ErrorCode::window_too_large, "window " + std::to_string(w));
        WindowedDataset ds{Matrix(n - w, w * tc.components.size()), std::vector<double>(n - w), w, "concat"};
        for (std::size_t i = 0; i < n - w; ++i) {
            auto row = ds.X.row(i);
            for (std::size_t k = 0; k < tc.components.size(); ++k)
                std::copy_n(tc.components[k].begin() + static_cast<std::ptrdiff_t>(i), w,
                            row.begin() + static_cast<std::ptrdiff_t>(k * w));
            ds.y[i] = tc.raw[i + w];
        }
        return ds;
    }
    const std::size_t first = tc.feature_tails.first_end;
    std::vector<double> y(tc.raw.begin() + static_cast<std::ptrdiff_t>(first), tc.raw.end());
    return {detail::concat_tail_features(tc.feature_tails, w), std::move(y), w, "concat"};
}

// ---- forecasters ---------------------------------------------------------------

struct Forecaster {
    bool hybrid = false;
    std::size_t window = 6;
    HybridSettings settings;
    /// One model for standalone and concat-features, levels + 1 for per-component.
    std::vector<Regressor> models;
    ModelRecipe recipe;
    std::string train_name;
    std::size_t train_len = 0;

    std::size_t n_components() const { return static_cast<std::size_t>(settings.levels) + 1; }
};

inline Forecaster train_standalone(const TimeSeries& train, std::size_t w, const ModelRecipe& recipe) {
    const auto ds = make_windows(train, w);
    Forecaster f;
    f.window = w;
    f.recipe = recipe;
    f.train_name = train.name();
    f.train_len = train.size();
    f.models.push_back(fit_regressor(recipe, ds.X, ds.y));
    return f;
}

/// Per-component models cloned from one recipe; clone k is reseeded with salt k + 1.
inline Forecaster train_hybrid(const TrainingComponents& tc, std::size_t w, const ModelRecipe& recipe,
                               const std::string& train_name = "train") {
    Forecaster f;
    f.hybrid = true;
    f.window = w;
    f.settings = tc.settings;
    f.recipe = recipe;
    f.train_name = train_name;
    f.train_len = tc.raw.size();
    if (tc.settings.mode == HybridMode::concat_features) {
        const auto ds = concat_dataset(tc, w);
        f.models.push_back(fit_regressor(recipe, ds.X, ds.y));
        return f;
    }
    for (std::size_t k = 0; k < f.n_components(); ++k) {
        const auto ds = component_dataset(tc, k, w);
        f.models.push_back(fit_regressor(recipe.reseeded(k + 1), ds.X, ds.y));
    }
    return f;
}

inline Forecaster train_hybrid(const TimeSeries& train, const HybridSettings& h, std::size_t w,
                               const ModelRecipe& recipe) {
    return train_hybrid(prepare_training_components(train.values(), h, w), w, recipe, train.name());
}

// ---- walk-forward --------------------------------------------------------------

struct WalkForwardResult {
    std::vector<double> predictions;
    /// Per-component predictions (per-component hybrids only); they sum to predictions.
    std::vector<std::vector<double>> component_predictions;
};

/// Observation views for a hybrid walk-forward over `test`, shared across windows <= tail.
inline ComponentTails walk_forward_tails(std::span<const double> history, std::span<const double> test,
                                         const HybridSettings& h, std::size_t tail) {
    std::vector<double> all(history.begin(), history.end());
    all.insert(all.end(), test.begin(), test.end());
    if (test.empty()) return {std::vector<Matrix>(static_cast<std::size_t>(h.levels) + 1, Matrix(0, tail)),
                              history.size(), tail};
    if (!h.leaky) return trailing_tails(all, h, history.size(), history.size() + test.size() - 1, tail);

    const auto& bank = filter_bank(h.wavelet);
    if (history.size() < tail)
        fail(ErrorCode::insufficient_history, std::to_string(history.size()) + " observations for window " +
                                                  std::to_string(tail));
    const auto comps = mra(all, bank, h.levels, h.ext_mode).ordered();
    ComponentTails out;
    out.first_end = history.size();
    out.tail = tail;
    for (const auto& c : comps) {
        Matrix m(test.size(), tail);
        for (std::size_t r = 0; r < test.size(); ++r)
            std::copy_n(c.begin() + static_cast<std::ptrdiff_t>(history.size() + r - tail), tail, m.row(r).begin());
        out.tails.push_back(std::move(m));
    }
    return out;
}

/// One-step-ahead predictions for every test point from precomputed observation tails.
inline WalkForwardResult walk_forward(const Forecaster& f, const ComponentTails& ct) {
    WalkForwardResult res;
    const std::size_t steps = ct.rows();
    if (!f.hybrid) fail(ErrorCode::invalid_config, "component tails given to a standalone forecaster");
    if (ct.tails.size() != f.n_components() || ct.tail < f.window)
        fail(ErrorCode::shape_mismatch, "component tails do not match the forecaster");
    if (steps == 0) return res;
    if (f.settings.mode == HybridMode::concat_features) {
        res.predictions = predict(f.models[0], detail::concat_tail_features(ct, f.window));
        return res;
    }
    res.predictions.assign(steps, 0.0);
    for (std::size_t k = 0; k < f.n_components(); ++k) {
        auto p = predict(f.models[k], detail::tail_features(ct.tails[k], f.window));
        for (std::size_t i = 0; i < steps; ++i) res.predictions[i] += p[i];
        res.component_predictions.push_back(std::move(p));
    }
    return res;
}

/// One-step-ahead walk-forward: the prediction for test[t] sees history and test[0, t) only
/// (unless the forecaster is leaky).
inline WalkForwardResult walk_forward_detailed(const Forecaster& f, std::span<const double> history,
                                               std::span<const double> test) {
    if (test.empty()) return {};
    if (f.hybrid) return walk_forward(f, walk_forward_tails(history, test, f.settings, f.window));
    if (history.size() < f.window)
        fail(ErrorCode::insufficient_history, std::to_string(history.size()) + " observations for window " +
                                                  std::to_string(f.window));
    std::vector<double> all(history.end() - static_cast<std::ptrdiff_t>(f.window), history.end());
    all.insert(all.end(), test.begin(), test.end());
    const auto ds = make_windows(all, f.window);
    return {predict(f.models[0], ds.X), {}};
}

inline std::vector<double> walk_forward(const Forecaster& f, const TimeSeries& history, const TimeSeries& test) {
    return walk_forward_detailed(f, history.values(), test.values()).predictions;
}

inline std::vector<double> walk_forward(const Forecaster& f, std::span<const double> history,
                                        std::span<const double> test) {
    return walk_forward_detailed(f, history, test).predictions;
}

// ---- serialization -------------------------------------------------------------

inline nlohmann::json to_json(const Forecaster& f) {
    nlohmann::json models = nlohmann::json::array();
    for (const auto& m : f.models) models.push_back(to_json(m));
    nlohmann::json j{{"format", "wavetraffic-forecaster"},
                     {"version", 1},
                     {"architecture", f.hybrid ? "hybrid" : "standalone"},
                     {"window", f.window},
                     {"recipe", to_json(f.recipe)},
                     {"train_name", f.train_name},
                     {"train_len", f.train_len},
                     {"models", models}};
    if (f.hybrid) j["hybrid"] = to_json(f.settings);
    return j;
}

inline Forecaster forecaster_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "wavetraffic-forecaster")
            fail(ErrorCode::schema_error, "not a forecaster bundle");
        Forecaster f;
        const auto arch = j.at("architecture").get<std::string>();
        if (arch != "hybrid" && arch != "standalone") fail(ErrorCode::schema_error, "architecture " + arch);
        f.hybrid = arch == "hybrid";
        f.window = j.at("window").get<std::size_t>();
        f.recipe = recipe_from_json(j.at("recipe"));
        f.train_name = j.at("train_name").get<std::string>();
        f.train_len = j.at("train_len").get<std::size_t>();
        if (f.hybrid) f.settings = hybrid_settings_from_json(j.at("hybrid"));
        for (const auto& m : j.at("models")) f.models.push_back(regressor_from_json(m));
        const std::size_t expected =
            f.hybrid && f.settings.mode == HybridMode::per_component ? f.n_components() : 1;
        if (f.models.size() != expected)
            fail(ErrorCode::schema_error, std::to_string(f.models.size()) + " models, expected " +
                                              std::to_string(expected));
        const std::size_t width =
            f.hybrid && f.settings.mode == HybridMode::concat_features ? f.window * f.n_components() : f.window;
        for (const auto& m : f.models)
            if (m.n_features() != width) fail(ErrorCode::schema_error, "model width does not match window");
        return f;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::schema_error, std::string("forecaster JSON: ") + e.what());
    }
}

inline void save_forecaster(const Forecaster& f, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) fail(ErrorCode::io_error, "cannot write " + path.string());
    out << to_json(f).dump(1) << '\n';
}

inline Forecaster load_forecaster(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::file_not_found, path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::schema_error, path.string() + ": " + e.what());
    }
    return forecaster_from_json(j);
}

} // namespace wavetraffic
