#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wavetraffic/config.hpp"
#include "wavetraffic/metrics.hpp"
#include "wavetraffic/report.hpp"
#include "wavetraffic/shift.hpp"
#include "wavetraffic/synth.hpp"

namespace fs = std::filesystem;
using namespace wavetraffic;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitAllCellsFailed = 3;
constexpr int kExitInternal = 1;

std::string exit_code_table() {
    std::string out = "Exit codes:\n  0   success\n  1   unexpected internal error\n"
                      "  2   command-line usage error\n  3   run finished but every grid cell failed\n";
    for (int c = 10; c < 70; ++c) {
        const auto name = to_string(static_cast<ErrorCode>(c));
        if (name == "Unknown") continue;
        char line[64];
        std::snprintf(line, sizeof line, "  %-3d %s\n", c, std::string(name).c_str());
        out += line;
    }
    return out;
}

struct SeriesInput {
    std::string path;
    std::string value_column = "value";
    std::string timestamp_column;

    void add_to(CLI::App* cmd, const std::string& flag, const std::string& what) {
        cmd->add_option(flag, path, what)->required();
        cmd->add_option("--value-column", value_column, "Name of the value column")->capture_default_str();
        cmd->add_option("--timestamp-column", timestamp_column, "Optional timestamp column");
    }

    TimeSeries load() const {
        std::optional<std::string> ts;
        if (!timestamp_column.empty()) ts = timestamp_column;
        const fs::path p(path);
        return load_csv(p, value_column, ts, p.stem().string());
    }
};

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) fail(ErrorCode::io_error, "cannot write " + path.string());
    return out;
}

void write_text(const fs::path& path, const std::string& text) { open_out(path) << text; }

// ---- ingest --------------------------------------------------------------------

struct IngestArgs {
    SeriesInput input;
    std::string out;
};

int cmd_ingest(const IngestArgs& a) {
    const auto ts = a.input.load();
    write_csv(ts, a.out);
    std::cerr << "ingested " << ts.size() << " rows from " << a.input.path << " (" << ts.filled_rows()
              << " forward-filled)\n";
    return 0;
}

// ---- decompose -----------------------------------------------------------------

struct DecomposeArgs {
    SeriesInput input;
    std::string wavelet = "dmey";
    int levels = 3;
    std::string ext_mode = "symmetric";
    std::string out;
};

int cmd_decompose(const DecomposeArgs& a) {
    const auto& bank = filter_bank(a.wavelet);
    const auto mode = parse_extension_mode(a.ext_mode);
    const auto ts = a.input.load();
    const auto comps = mra(ts.values(), bank, a.levels, mode).ordered();
    auto out = open_out(a.out);
    out << "index,approx";
    for (int k = 1; k <= a.levels; ++k) out << ",d" << k;
    out << '\n';
    for (std::size_t i = 0; i < ts.size(); ++i) {
        out << i;
        for (const auto& c : comps) out << ',' << detail::format_double(c[i]);
        out << '\n';
    }
    std::cerr << "decomposed " << ts.size() << " points into " << comps.size() << " components with "
              << bank.name << "\n";
    return 0;
}

// ---- synth ---------------------------------------------------------------------

struct SynthArgs {
    std::vector<std::string> presets;
    std::uint64_t seed = 42;
    std::string out;
    std::string out_dir;
};

int cmd_synth(const SynthArgs& a) {
    auto presets = a.presets.empty() ? synth_preset_names() : a.presets;
    for (const auto& p : presets) synth_preset(p);
    if (!a.out.empty() && presets.size() != 1)
        fail(ErrorCode::invalid_config, "--out takes exactly one preset; use --out-dir for several");
    if (a.out.empty() && a.out_dir.empty()) fail(ErrorCode::invalid_config, "give --out or --out-dir");
    const RunConfig defaults;
    for (const auto& p : presets) {
        const auto ts = load_source(std::string(kSynthPrefix) + p, defaults, a.seed);
        const fs::path path = a.out.empty() ? fs::path(a.out_dir) / (p + ".csv") : fs::path(a.out);
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        write_csv(ts, path);
        std::cerr << "wrote " << ts.size() << " points to " << path.string() << "\n";
    }
    return 0;
}

// ---- shared run plumbing -------------------------------------------------------

struct ConfigArgs {
    std::string config;
    std::string output_dir;
    std::size_t jobs = 0;

    void add_to(CLI::App* cmd) {
        cmd->add_option("config", config, "Run configuration file")->required();
        cmd->add_option("-o,--output-dir", output_dir, "Override output_dir from the config");
        cmd->add_option("-j,--jobs", jobs, "Override jobs from the config");
    }

    RunConfig load() const {
        auto c = load_config(config);
        if (!output_dir.empty()) c.output_dir = output_dir;
        if (jobs > 0) c.jobs = jobs;
        c.validate();
        return c;
    }
};

struct LoadedData {
    TimeSeries train;
    std::vector<TimeSeries> tests;
};

LoadedData load_data(const RunConfig& c) {
    LoadedData d{load_source(c.train, c, c.seed), {}};
    for (const auto& t : c.tests) d.tests.push_back(load_source(t, c, c.seed));
    return d;
}

nlohmann::json series_summary(const TimeSeries& ts, const std::string& source) {
    return {{"name", ts.name()}, {"source", source}, {"length", ts.size()}, {"filled_rows", ts.filled_rows()}};
}

// ---- run -----------------------------------------------------------------------

int cmd_run(const ConfigArgs& a) {
    const auto start = std::chrono::steady_clock::now();
    const auto cfg = a.load();
    const auto data = load_data(cfg);
    const fs::path out(cfg.output_dir);

    auto opt = cfg.grid_options();
    if (cfg.save_models) opt.model_dir = out / "models";
    opt.progress = [](std::size_t done, std::size_t total) {
        std::fprintf(stderr, "\r[%zu/%zu] grid jobs", done, total);
        if (done == total) std::fputc('\n', stderr);
    };
    fs::create_directories(out);
    write_text(out / "config.cfg", format_config(cfg));
    const auto grid = run_grid(data.train, data.tests, cfg.axes(), opt);
    write_grid_csv(grid, out / "grid.csv");
    write_reports(grid, out / "reports");

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    nlohmann::json datasets = nlohmann::json::array();
    datasets.push_back(series_summary(data.train, cfg.train));
    for (std::size_t i = 0; i < data.tests.size(); ++i) datasets.push_back(series_summary(data.tests[i], cfg.tests[i]));
    const nlohmann::json manifest{{"tool", "wavetraffic"},
                                  {"version", WAVETRAFFIC_VERSION},
                                  {"seed", cfg.seed},
                                  {"config", format_config(cfg)},
                                  {"datasets", datasets},
                                  {"cells", grid.cells.size()},
                                  {"error_cells", grid.error_count()},
                                  {"wall_time_seconds", wall}};
    write_text(out / "manifest.json", manifest.dump(2) + "\n");
    std::cerr << "grid: " << grid.cells.size() << " cells, " << grid.error_count() << " failed; wrote "
              << out.string() << "\n";
    for (const auto& c : grid.cells)
        if (c.ok() && c.accuracy < 0.0)
            std::cerr << "warning: negative accuracy for " << c.model << "/" << c.wavelet << "/w" << c.window
                      << " on " << c.dataset << "\n";
    return grid.error_count() == grid.cells.size() ? kExitAllCellsFailed : 0;
}

// ---- train / predict -----------------------------------------------------------

std::string entry_name(const std::string& model, const std::string& wavelet, std::size_t w) {
    return detail::safe_file_name(model + "_" + wavelet + "_w" + std::to_string(w));
}

int cmd_train(const ConfigArgs& a, const std::string& bundle_arg) {
    const auto cfg = a.load();
    const auto data = load_data(cfg);
    const auto split = split_holdout(data.train, cfg.split_ratio);
    const fs::path bundle = bundle_arg.empty() ? fs::path(cfg.output_dir) / "bundle" : fs::path(bundle_arg);
    const auto axes = cfg.axes();
    const std::size_t max_w = *std::max_element(axes.windows.begin(), axes.windows.end());

    std::vector<std::pair<std::string, Forecaster>> trained;
    for (const auto& wavelet : axes.wavelets) {
        std::optional<TrainingComponents> tc;
        if (wavelet != kNoWavelet) {
            auto h = cfg.hybrid_settings();
            h.wavelet = wavelet;
            tc = prepare_training_components(split.train.values(), h, max_w);
        }
        for (const auto& model : axes.models)
            for (auto w : axes.windows) {
                auto recipe = make_recipe(model, cfg.seed, cfg.overrides);
                recipe.folds = cfg.folds;
                recipe.lambda_meta = cfg.lambda_meta;
                trained.emplace_back(entry_name(model, wavelet, w),
                                     tc ? train_hybrid(*tc, w, recipe, split.train.name())
                                        : train_standalone(split.train, w, recipe));
                std::cerr << "trained " << trained.back().first << "\n";
            }
    }

    fs::create_directories(bundle);
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& [name, f] : trained) {
        save_forecaster(f, bundle / (name + ".json"));
        entries.push_back({{"name", name},
                           {"file", name + ".json"},
                           {"model", f.recipe.label},
                           {"wavelet", f.hybrid ? f.settings.wavelet : std::string(kNoWavelet)},
                           {"window", f.window}});
    }
    // observations preceding the holdout, so predict can continue from the end of training
    const std::size_t tail = cfg.decomp_window == 0 || cfg.leaky_decomposition
                                 ? split.train.size()
                                 : std::min(split.train.size(), cfg.decomp_window + max_w);
    write_csv(split.train.slice(split.train.size() - tail, split.train.size()), bundle / "history.csv");
    write_text(bundle / "config.cfg", format_config(cfg));
    const nlohmann::json index{{"format", "wavetraffic-bundle"},
                               {"version", WAVETRAFFIC_VERSION},
                               {"seed", cfg.seed},
                               {"train", series_summary(data.train, cfg.train)},
                               {"train_points", split.train.size()},
                               {"history_file", "history.csv"},
                               {"forecasters", entries}};
    write_text(bundle / "bundle.json", index.dump(2) + "\n");
    std::cerr << "wrote " << trained.size() << " forecasters to " << bundle.string() << "\n";
    return 0;
}

struct PredictArgs {
    std::string bundle;
    std::string model;
    SeriesInput input;
    std::string history;
    std::string out;
};

int cmd_predict(const PredictArgs& a) {
    const fs::path bundle(a.bundle);
    std::ifstream in(bundle / "bundle.json");
    if (!in) fail(ErrorCode::file_not_found, (bundle / "bundle.json").string());
    nlohmann::json index;
    try {
        in >> index;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::schema_error, "bundle.json: " + std::string(e.what()));
    }
    if (index.value("format", "") != "wavetraffic-bundle") fail(ErrorCode::schema_error, "not a model bundle");
    const auto& entries = index.at("forecasters");
    std::string file;
    std::vector<std::string> names;
    for (const auto& e : entries) {
        names.push_back(e.at("name").get<std::string>());
        if (names.back() == a.model || (a.model.empty() && entries.size() == 1)) file = e.at("file");
    }
    if (file.empty())
        fail(ErrorCode::invalid_config, (a.model.empty() ? std::string("bundle holds several forecasters")
                                                          : "no forecaster '" + a.model + "' in bundle") +
                                            "; choose --model from: " + detail::join(names));
    const auto f = load_forecaster(bundle / file);
    const auto test = a.input.load();
    const fs::path hist_path = a.history.empty() ? bundle / index.value("history_file", "history.csv")
                                                 : fs::path(a.history);
    const auto history = load_csv(hist_path, "value", std::nullopt, hist_path.stem().string());
    const auto pred = walk_forward(f, history.values(), test.values());
    auto out = open_out(a.out);
    out << "index,actual,predicted\n";
    for (std::size_t i = 0; i < pred.size(); ++i)
        out << i << ',' << detail::format_double(test[i]) << ',' << detail::format_double(pred[i]) << '\n';
    std::cerr << "predicted " << pred.size() << " points with " << file << "\n";
    return 0;
}

// ---- evaluate ------------------------------------------------------------------

struct EvaluateArgs {
    std::string predictions;
    std::string reference;
    std::string target;
    std::string value_column = "value";
    std::string out;
    std::string shift_out;
};

int cmd_evaluate(const EvaluateArgs& a) {
    if (a.predictions.empty() && (a.reference.empty() || a.target.empty()))
        fail(ErrorCode::invalid_config, "give --predictions, or --reference with --target");
    nlohmann::json report;
    if (!a.predictions.empty()) {
        const auto actual = load_csv(a.predictions, "actual", std::nullopt, "actual");
        const auto predicted = load_csv(a.predictions, "predicted", std::nullopt, "predicted");
        const double w = wape(predicted.values(), actual.values());
        report["predictions"] = a.predictions;
        report["n_test"] = actual.size();
        report["wape"] = w;
        report["accuracy"] = accuracy_from_wape(w);
        report["negative_accuracy"] = accuracy_from_wape(w) < 0.0;
        std::cerr << "WAPE " << detail::format_double(w) << "%, accuracy "
                  << detail::format_double(accuracy_from_wape(w)) << "% over " << actual.size() << " points\n";
        if (accuracy_from_wape(w) < 0.0) std::cerr << "warning: accuracy is negative (WAPE above 100)\n";
    }
    if (!a.reference.empty() && !a.target.empty()) {
        const auto ref = load_csv(a.reference, a.value_column, std::nullopt, fs::path(a.reference).stem().string());
        const auto tgt = load_csv(a.target, a.value_column, std::nullopt, fs::path(a.target).stem().string());
        const auto s = shift_report(ref, tgt);
        report["shift"] = {{"reference", s.reference_name},
                           {"target", s.target_name},
                           {"wasserstein1", s.wasserstein1},
                           {"ks_statistic", s.ks_statistic}};
        if (!a.shift_out.empty()) {
            if (fs::path(a.shift_out).has_parent_path()) fs::create_directories(fs::path(a.shift_out).parent_path());
            write_shift_csv(s, a.shift_out);
        }
        std::cerr << "shift " << s.reference_name << " -> " << s.target_name << ": W1 "
                  << detail::format_double(s.wasserstein1) << ", KS " << detail::format_double(s.ks_statistic)
                  << "\n";
    }
    if (!a.out.empty()) write_text(a.out, report.dump(2) + "\n");
    return 0;
}

// ---- report --------------------------------------------------------------------

int cmd_report(const std::string& grid_path, const std::string& out) {
    const auto grid = read_grid_csv(grid_path);
    write_reports(grid, out);
    std::cerr << "wrote reports for " << grid.cells.size() << " cells to " << out << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wavelet-hybrid traffic forecasting: decompose, train, evaluate and report"};
    app.footer(exit_code_table());
    app.require_subcommand(0, 1);
    bool print_defaults = false;
    app.add_flag("--print-defaults", print_defaults, "Print the default run configuration and exit");

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Validate a CSV series and write it back in canonical form");
    ingest.input.add_to(c_ingest, "--input", "Input CSV");
    c_ingest->add_option("--out", ingest.out, "Output CSV")->required();

    DecomposeArgs decompose;
    auto* c_dec = app.add_subcommand("decompose", "Write the multiresolution components of a series");
    decompose.input.add_to(c_dec, "--input", "Input CSV");
    c_dec->add_option("--wavelet", decompose.wavelet, "haar, dmey or bior3.7")->capture_default_str();
    c_dec->add_option("--levels", decompose.levels, "Decomposition levels")->capture_default_str();
    c_dec->add_option("--ext-mode", decompose.ext_mode, "symmetric, zero or periodic")->capture_default_str();
    c_dec->add_option("--out", decompose.out, "Output CSV: index, approx, d1..dL")->required();

    SynthArgs synth;
    auto* c_synth = app.add_subcommand("synth", "Generate synthetic traffic series");
    c_synth->add_option("--preset", synth.presets, "Preset name(s); all presets when omitted");
    c_synth->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();
    c_synth->add_option("--out", synth.out, "Output CSV for a single preset");
    c_synth->add_option("--out-dir", synth.out_dir, "Directory for <preset>.csv files");

    ConfigArgs run;
    auto* c_run = app.add_subcommand("run", "Run the full model x wavelet x window grid from a config");
    run.add_to(c_run);

    ConfigArgs train;
    std::string bundle_out;
    auto* c_train = app.add_subcommand("train", "Train every configured forecaster into a model bundle");
    train.add_to(c_train);
    c_train->add_option("--bundle", bundle_out, "Bundle directory (default <output_dir>/bundle)");

    PredictArgs predict;
    auto* c_pred = app.add_subcommand("predict", "Walk-forward predictions from a model bundle");
    c_pred->add_option("--bundle", predict.bundle, "Bundle directory")->required();
    c_pred->add_option("--model", predict.model, "Forecaster name, e.g. xgb_like_dmey_w6");
    predict.input.add_to(c_pred, "--input", "Test CSV");
    c_pred->add_option("--history", predict.history, "History CSV (default: the bundle's history.csv)");
    c_pred->add_option("--out", predict.out, "Output CSV: index, actual, predicted")->required();

    EvaluateArgs evaluate;
    auto* c_eval = app.add_subcommand("evaluate", "WAPE of a predictions CSV and/or a shift report");
    c_eval->add_option("--predictions", evaluate.predictions, "CSV with actual and predicted columns");
    c_eval->add_option("--reference", evaluate.reference, "Reference series CSV");
    c_eval->add_option("--target", evaluate.target, "Target series CSV");
    c_eval->add_option("--value-column", evaluate.value_column, "Value column of the series")->capture_default_str();
    c_eval->add_option("--out", evaluate.out, "JSON report");
    c_eval->add_option("--shift-out", evaluate.shift_out, "Histogram CSV for the shift report");

    std::string grid_in, report_out;
    auto* c_report = app.add_subcommand("report", "Pivot tables and gap summaries from a grid CSV");
    c_report->add_option("grid", grid_in, "Grid CSV")->required();
    c_report->add_option("--out", report_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (print_defaults) {
            std::cout << format_config(RunConfig{});
            return 0;
        }
        if (c_ingest->parsed()) return cmd_ingest(ingest);
        if (c_dec->parsed()) return cmd_decompose(decompose);
        if (c_synth->parsed()) return cmd_synth(synth);
        if (c_run->parsed()) return cmd_run(run);
        if (c_train->parsed()) return cmd_train(train, bundle_out);
        if (c_pred->parsed()) return cmd_predict(predict);
        if (c_eval->parsed()) return cmd_evaluate(evaluate);
        if (c_report->parsed()) return cmd_report(grid_in, report_out);
        std::cerr << app.help();
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInternal;
    }
}
