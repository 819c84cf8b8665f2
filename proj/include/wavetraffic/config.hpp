#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "wavetraffic/grid.hpp"
#include "wavetraffic/synth.hpp"

namespace wavetraffic {

inline constexpr std::string_view kSynthPrefix = "synth:";

/// A run configuration. On disk it is a flat "key = value" file; list values are
/// comma-separated, '#' starts a comment, and "<kind>.<hyperparameter> = value" lines
/// override learner defaults.
struct RunConfig {
    std::string train = "synth:source";
    std::vector<std::string> tests{"synth:shift-level", "synth:shift-scale", "synth:shift-trend",
                                   "synth:shift-regime"};
    std::string value_column = "value";
    std::string timestamp_column;
    std::vector<std::string> models{"xgb_like", "lgb_like", "sgd_linear", "gbr_like", "cat_like", "stacked"};
    std::vector<std::string> wavelets{"none", "dmey", "haar", "bior3.7"};
    std::vector<std::size_t> windows{6, 9, 12, 15};
    int levels = 3;
    double split_ratio = 0.7;
    std::uint64_t seed = 42;
    std::string output_dir = "runs/default";
    bool leaky_decomposition = false;
    HybridMode hybrid_mode = HybridMode::per_component;
    TrainDecomposition train_decomposition = TrainDecomposition::trailing;
    std::size_t decomp_window = 512;
    ExtensionMode ext_mode = ExtensionMode::symmetric;
    std::size_t ood_warmup = kOodWarmup;
    std::size_t jobs = 1;
    bool save_models = true;
    std::size_t folds = 5;
    double lambda_meta = 1e-3;
    std::map<LearnerKind, std::map<std::string, double>> overrides;

    GridAxes axes() const { return {models, wavelets, windows}; }

    HybridSettings hybrid_settings() const {
        HybridSettings h;
        h.levels = levels;
        h.ext_mode = ext_mode;
        h.mode = hybrid_mode;
        h.train_decomposition = train_decomposition;
        h.decomp_window = decomp_window;
        h.leaky = leaky_decomposition;
        return h;
    }

    GridOptions grid_options() const {
        GridOptions o;
        o.seed = seed;
        o.hybrid = hybrid_settings();
        o.split_ratio = split_ratio;
        o.ood_warmup = ood_warmup;
        o.jobs = jobs;
        o.overrides = overrides;
        o.folds = folds;
        o.lambda_meta = lambda_meta;
        return o;
    }

    /// Checks everything that can be checked without reading data.
    void validate() const {
        auto bad = [](const std::string& what) { fail(ErrorCode::invalid_config, what); };
        axes().validate();
        if (levels < 1 || levels > 16) bad("levels must be in [1, 16]");
        if (!(split_ratio > 0.0 && split_ratio < 1.0)) bad("split_ratio must be in (0, 1)");
        if (train.empty()) bad("train must be set");
        if (output_dir.empty()) bad("output_dir must be set");
        if (jobs < 1) bad("jobs must be at least 1");
        if (folds < 2) bad("folds must be at least 2");
        if (!(lambda_meta >= 0.0)) bad("lambda_meta must be non-negative");
        for (const auto& src : tests)
            if (src.empty()) bad("empty entry in tests");
        for (const auto& src : std::vector<std::string>{train})
            if (src.starts_with(kSynthPrefix)) synth_preset(src.substr(kSynthPrefix.size()));
        for (const auto& src : tests)
            if (src.starts_with(kSynthPrefix)) synth_preset(src.substr(kSynthPrefix.size()));
        for (const auto& [kind, hp] : overrides) LearnerSpec{kind, hp, seed}.validate();
        std::set<std::string> names;
        for (const auto& src : tests)
            if (!names.insert(src).second) bad("tests contains duplicates");
    }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(v);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    fail(ErrorCode::invalid_config, key + ": expected true or false, got '" + v + "'");
}

inline double parse_number(const std::string& key, const std::string& v) {
    const auto d = parse_double(v);
    if (!d || !std::isfinite(*d)) fail(ErrorCode::invalid_config, key + ": '" + v + "' is not a number");
    return *d;
}

inline std::uint64_t parse_count(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || ptr != end)
        fail(ErrorCode::invalid_config, key + ": '" + v + "' is not a non-negative integer");
    return out;
}

} // namespace detail

/// Applies one key = value pair. Throws InvalidConfig for unknown keys.
inline void set_config_value(RunConfig& c, const std::string& key, const std::string& value) {
    using namespace detail;
    if (key == "train") c.train = value;
    else if (key == "tests") c.tests = split_list(value);
    else if (key == "value_column") c.value_column = value;
    else if (key == "timestamp_column") c.timestamp_column = value;
    else if (key == "models") c.models = split_list(value);
    else if (key == "wavelets") c.wavelets = split_list(value);
    else if (key == "windows") {
        c.windows.clear();
        for (const auto& w : split_list(value)) c.windows.push_back(parse_count(key, w));
    } else if (key == "levels") c.levels = static_cast<int>(parse_count(key, value));
    else if (key == "split_ratio") c.split_ratio = parse_number(key, value);
    else if (key == "seed") c.seed = parse_count(key, value);
    else if (key == "output_dir") c.output_dir = value;
    else if (key == "leaky_decomposition") c.leaky_decomposition = parse_bool(key, value);
    else if (key == "hybrid_mode") c.hybrid_mode = parse_hybrid_mode(value);
    else if (key == "train_decomposition") c.train_decomposition = parse_train_decomposition(value);
    else if (key == "decomp_window") c.decomp_window = parse_count(key, value);
    else if (key == "ext_mode") {
        try {
            c.ext_mode = parse_extension_mode(value);
        } catch (const Error& e) {
            fail(ErrorCode::invalid_config, e.what());
        }
    } else if (key == "ood_warmup") c.ood_warmup = parse_count(key, value);
    else if (key == "jobs") c.jobs = parse_count(key, value);
    else if (key == "save_models") c.save_models = parse_bool(key, value);
    else if (key == "folds") c.folds = parse_count(key, value);
    else if (key == "lambda_meta") c.lambda_meta = parse_number(key, value);
    else if (auto dot = key.find('.'); dot != std::string::npos) {
        const auto kind = parse_learner_kind(key.substr(0, dot));
        c.overrides[kind][key.substr(dot + 1)] = parse_number(key, value);
    } else {
        fail(ErrorCode::invalid_config, "unknown key '" + key + "'");
    }
}

inline RunConfig parse_config(std::istream& in, const std::string& origin = "config") {
    RunConfig c;
    std::string line;
    std::size_t row = 0;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        ++row;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(ErrorCode::invalid_config, origin + " line " + std::to_string(row) + ": expected key = value");
        const auto key = detail::trim(std::string_view(line).substr(0, eq));
        const auto value = detail::trim(std::string_view(line).substr(eq + 1));
        if (!seen.insert(key).second)
            fail(ErrorCode::invalid_config, origin + " line " + std::to_string(row) + ": duplicate key '" + key + "'");
        try {
            set_config_value(c, key, value);
        } catch (const Error& e) {
            fail(ErrorCode::invalid_config, origin + " line " + std::to_string(row) + ": " + e.what());
        }
    }
    c.validate();
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::file_not_found, path.string());
    return parse_config(in, path.string());
}

/// Canonical text form; parse_config(format_config(c)) reproduces c.
inline std::string format_config(const RunConfig& c) {
    using detail::format_double;
    std::ostringstream out;
    std::vector<std::string> windows;
    for (auto w : c.windows) windows.push_back(std::to_string(w));
    out << "train = " << c.train << "\n"
        << "tests = " << detail::join(c.tests) << "\n"
        << "value_column = " << c.value_column << "\n"
        << "timestamp_column = " << c.timestamp_column << "\n"
        << "models = " << detail::join(c.models) << "\n"
        << "wavelets = " << detail::join(c.wavelets) << "\n"
        << "windows = " << detail::join(windows) << "\n"
        << "levels = " << c.levels << "\n"
        << "split_ratio = " << format_double(c.split_ratio) << "\n"
        << "seed = " << c.seed << "\n"
        << "output_dir = " << c.output_dir << "\n"
        << "leaky_decomposition = " << (c.leaky_decomposition ? "true" : "false") << "\n"
        << "hybrid_mode = " << to_string(c.hybrid_mode) << "\n"
        << "train_decomposition = " << to_string(c.train_decomposition) << "\n"
        << "decomp_window = " << c.decomp_window << "\n"
        << "ext_mode = " << to_string(c.ext_mode) << "\n"
        << "ood_warmup = " << c.ood_warmup << "\n"
        << "jobs = " << c.jobs << "\n"
        << "save_models = " << (c.save_models ? "true" : "false") << "\n"
        << "folds = " << c.folds << "\n"
        << "lambda_meta = " << format_double(c.lambda_meta) << "\n";
    for (const auto& [kind, hp] : c.overrides)
        for (const auto& [k, v] : hp) out << to_string(kind) << "." << k << " = " << format_double(v) << "\n";
    return out.str();
}

/// Loads a data source: "synth:<preset>" (generated with `seed`) or a CSV path.
inline TimeSeries load_source(const std::string& source, const RunConfig& c, std::uint64_t seed) {
    if (source.starts_with(kSynthPrefix)) {
        const auto name = source.substr(kSynthPrefix.size());
        // shifted presets draw from their own stream so they are not copies of the source noise
        const std::uint64_t s = name == "source" ? seed : derive_seed(seed, hash_name(name));
        return synth_gen(synth_preset(name), s);
    }
    const std::filesystem::path p(source);
    std::optional<std::string> ts;
    if (!c.timestamp_column.empty()) ts = c.timestamp_column;
    return load_csv(p, c.value_column, ts, p.stem().string());
}

} // namespace wavetraffic
