#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "wavetraffic/metrics.hpp"
#include "wavetraffic/pipeline.hpp"
#include "wavetraffic/shift.hpp"

namespace wavetraffic {

inline constexpr std::string_view kNoWavelet = "none";

struct GridAxes {
    std::vector<std::string> models;
    std::vector<std::string> wavelets;
    std::vector<std::size_t> windows;

    /// Throws InvalidConfig for empty axes, duplicates, unknown names or window 0.
    void validate() const {
        auto check = [](const auto& axis, const char* name) {
            if (axis.empty()) fail(ErrorCode::invalid_config, std::string(name) + " must not be empty");
            std::set<typename std::decay_t<decltype(axis)>::value_type> seen(axis.begin(), axis.end());
            if (seen.size() != axis.size())
                fail(ErrorCode::invalid_config, std::string(name) + " contains duplicates");
        };
        check(models, "models");
        check(wavelets, "wavelets");
        check(windows, "windows");
        for (const auto& m : models)
            if (m != kStackedLabel) parse_learner_kind(m);
        for (const auto& w : wavelets)
            if (w != kNoWavelet) filter_bank(w);
        for (auto w : windows)
            if (w == 0) fail(ErrorCode::invalid_config, "windows must be positive");
    }
};

/// One forecasting evaluation: walk forward over `test` after observing `history`.
struct EvalCase {
    std::string dataset;
    std::vector<double> history;
    std::vector<double> test;
};

struct GridCell {
    std::string model;
    std::string wavelet;
    std::size_t window = 0;
    std::string dataset;
    double wape = 0.0;
    double accuracy = 0.0;
    std::size_t n_test = 0;
    /// Empty unless the cell failed; then the metrics are not meaningful.
    std::string error;

    bool ok() const noexcept { return error.empty(); }
    friend bool operator==(const GridCell&, const GridCell&) = default;
};

struct ResultsGrid {
    std::vector<GridCell> cells;
    std::vector<ShiftReport> shifts;
    std::string in_distribution;

    std::size_t error_count() const {
        std::size_t n = 0;
        for (const auto& c : cells) n += !c.ok();
        return n;
    }
};

struct GridOptions {
    std::uint64_t seed = 42;
    /// Shared hybrid settings; the wavelet is taken from the axis.
    HybridSettings hybrid;
    double split_ratio = 0.7;
    /// Samples at the head of each OOD series used as history only.
    std::size_t ood_warmup = 512;
    std::size_t jobs = 1;
    std::map<LearnerKind, std::map<std::string, double>> overrides;
    std::size_t folds = 5;
    double lambda_meta = 1e-3;
    /// When set, every trained forecaster is written here as JSON.
    std::filesystem::path model_dir;
    /// Called after each finished (model, wavelet, window) job, from a worker thread.
    std::function<void(std::size_t done, std::size_t total)> progress;
};

namespace detail {

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; results must be written by index.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (std::size_t t = 0; t < jobs; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

inline std::string safe_file_name(std::string s) {
    for (auto& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-' && c != '_') c = '_';
    return s;
}

} // namespace detail

/// Evaluation cases: the held-out tail of `source` and each OOD series after its warm-up.
inline std::vector<EvalCase> build_eval_cases(const TimeSeries& source, const std::vector<TimeSeries>& tests,
                                              const GridOptions& opt, TimeSeries* train_out = nullptr) {
    const auto split = split_holdout(source, opt.split_ratio);
    if (train_out) *train_out = split.train;
    std::vector<EvalCase> cases{{source.name(), split.train.values(), split.test.values()}};
    for (const auto& t : tests) {
        EvalCase c;
        c.dataset = t.name();
        const std::size_t warm = std::min(opt.ood_warmup, t.size());
        c.history.assign(t.values().begin(), t.values().begin() + static_cast<std::ptrdiff_t>(warm));
        c.test.assign(t.values().begin() + static_cast<std::ptrdiff_t>(warm), t.values().end());
        cases.push_back(std::move(c));
    }
    return cases;
}

/// Trains every (model, wavelet, window) combination on the first case's history and
/// walks forward over every case. Failures become error cells.
inline ResultsGrid run_grid_cases(const std::string& train_name, const std::vector<EvalCase>& cases,
                                  const GridAxes& axes, const GridOptions& opt) {
    axes.validate();
    if (cases.empty()) fail(ErrorCode::invalid_config, "no evaluation cases");
    const auto& train = cases.front().history;
    const std::size_t max_w = *std::max_element(axes.windows.begin(), axes.windows.end());

    // decompositions shared across models and windows
    struct WaveletPrep {
        std::optional<TrainingComponents> training;
        std::string training_error;
        std::vector<std::optional<ComponentTails>> tails;
        std::vector<std::string> tail_errors;
    };
    std::vector<WaveletPrep> preps(axes.wavelets.size());
    for (auto& p : preps) {
        p.tails.resize(cases.size());
        p.tail_errors.resize(cases.size());
    }
    auto settings_for = [&](const std::string& wavelet) {
        HybridSettings h = opt.hybrid;
        h.wavelet = wavelet;
        return h;
    };
    const std::size_t n_prep = axes.wavelets.size() * (cases.size() + 1);
    detail::parallel_for(n_prep, opt.jobs, [&](std::size_t i) {
        const std::size_t wi = i / (cases.size() + 1), ci = i % (cases.size() + 1);
        if (axes.wavelets[wi] == kNoWavelet) return;
        const auto h = settings_for(axes.wavelets[wi]);
        auto& p = preps[wi];
        try {
            if (ci == 0)
                p.training = prepare_training_components(train, h, max_w);
            else
                p.tails[ci - 1] = walk_forward_tails(cases[ci - 1].history, cases[ci - 1].test, h, max_w);
        } catch (const std::exception& e) {
            (ci == 0 ? p.training_error : p.tail_errors[ci - 1]) = e.what();
        }
    });

    struct Job {
        std::size_t model, wavelet, window;
    };
    std::vector<Job> jobs;
    for (std::size_t m = 0; m < axes.models.size(); ++m)
        for (std::size_t w = 0; w < axes.wavelets.size(); ++w)
            for (std::size_t k = 0; k < axes.windows.size(); ++k) jobs.push_back({m, w, k});

    ResultsGrid grid;
    grid.in_distribution = train_name;
    grid.cells.resize(jobs.size() * cases.size());
    std::atomic<std::size_t> done{0};
    detail::parallel_for(jobs.size(), opt.jobs, [&](std::size_t j) {
        const auto& job = jobs[j];
        const auto& model = axes.models[job.model];
        const auto& wavelet = axes.wavelets[job.wavelet];
        const std::size_t w = axes.windows[job.window];
        const bool hybrid = wavelet != kNoWavelet;
        auto cell_at = [&](std::size_t c) -> GridCell& { return grid.cells[j * cases.size() + c]; };
        for (std::size_t c = 0; c < cases.size(); ++c)
            cell_at(c) = {model, wavelet, w, cases[c].dataset, 0.0, 0.0, 0, {}};

        std::optional<Forecaster> f;
        std::string train_error;
        try {
            auto recipe = make_recipe(model, opt.seed, opt.overrides);
            recipe.folds = opt.folds;
            recipe.lambda_meta = opt.lambda_meta;
            if (!hybrid) {
                f = train_standalone(TimeSeries(train_name, train), w, recipe);
            } else {
                const auto& p = preps[job.wavelet];
                if (!p.training) fail(ErrorCode::insufficient_history, p.training_error);
                f = train_hybrid(*p.training, w, recipe, train_name);
            }
            if (!opt.model_dir.empty())
                save_forecaster(*f, opt.model_dir / detail::safe_file_name(model + "_" + wavelet + "_w" +
                                                                            std::to_string(w) + ".json"));
        } catch (const std::exception& e) {
            train_error = e.what();
        }
        for (std::size_t c = 0; c < cases.size(); ++c) {
            auto& cell = cell_at(c);
            try {
                if (!f) throw std::runtime_error(train_error);
                std::vector<double> pred;
                if (hybrid) {
                    const auto& tails = preps[job.wavelet].tails[c];
                    if (!tails) throw std::runtime_error(preps[job.wavelet].tail_errors[c]);
                    pred = walk_forward(*f, *tails).predictions;
                } else {
                    pred = walk_forward(*f, cases[c].history, cases[c].test);
                }
                cell.wape = wape(pred, cases[c].test);
                cell.accuracy = accuracy_from_wape(cell.wape);
                cell.n_test = pred.size();
            } catch (const std::exception& e) {
                cell.error = e.what();
                if (cell.error.empty()) cell.error = "unknown error";
            }
        }
        if (opt.progress) opt.progress(++done, jobs.size());
    });
    return grid;
}

inline ResultsGrid run_grid(const TimeSeries& source, const std::vector<TimeSeries>& tests, const GridAxes& axes,
                            const GridOptions& opt) {
    axes.validate();
    const auto cases = build_eval_cases(source, tests, opt);
    auto grid = run_grid_cases(source.name(), cases, axes, opt);
    for (const auto& t : tests) grid.shifts.push_back(shift_report(source, t));
    return grid;
}

// ---- grid CSV ------------------------------------------------------------------

inline const std::vector<std::string>& grid_csv_columns() {
    static const std::vector<std::string> cols{"model", "wavelet", "window", "dataset",
                                               "wape",  "accuracy", "n_test", "error"};
    return cols;
}

namespace detail {

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' || c == '\r' ? ' ' : c;
    }
    return out + "\"";
}

} // namespace detail

inline void write_grid_csv(const ResultsGrid& grid, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::io_error, "cannot write " + path.string());
    const auto& cols = grid_csv_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const auto& c : grid.cells) {
        out << detail::csv_escape(c.model) << ',' << detail::csv_escape(c.wavelet) << ',' << c.window << ','
            << detail::csv_escape(c.dataset) << ',';
        if (c.ok())
            out << detail::format_double(c.wape) << ',' << detail::format_double(c.accuracy) << ',' << c.n_test;
        else
            out << ",,";
        out << ',' << detail::csv_escape(c.error) << '\n';
    }
}

/// Reads a grid CSV; the first dataset listed is taken as the in-distribution one.
inline ResultsGrid read_grid_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::file_not_found, path.string());
    std::string line;
    if (!std::getline(in, line)) fail(ErrorCode::schema_error, path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split_csv_line(line);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < header.size(); ++i) index[detail::trim(header[i])] = i;
    for (const auto& c : grid_csv_columns())
        if (!index.count(c)) fail(ErrorCode::schema_error, path.string() + ": missing column '" + c + "'");
    ResultsGrid grid;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        auto bad = [&](const std::string& what) {
            fail(ErrorCode::schema_error, path.string() + " row " + std::to_string(row) + ": " + what);
        };
        if (f.size() != header.size()) bad("expected " + std::to_string(header.size()) + " fields");
        auto get = [&](const char* c) { return detail::trim(f[index.at(c)]); };
        GridCell cell;
        cell.model = get("model");
        cell.wavelet = get("wavelet");
        cell.dataset = get("dataset");
        cell.error = get("error");
        if (cell.model.empty() || cell.wavelet.empty() || cell.dataset.empty()) bad("empty key field");
        const auto window = detail::parse_double(get("window"));
        if (!window || *window < 1 || *window != std::floor(*window)) bad("invalid window");
        cell.window = static_cast<std::size_t>(*window);
        if (cell.ok()) {
            const auto w = detail::parse_double(get("wape"));
            const auto a = detail::parse_double(get("accuracy"));
            const auto n = detail::parse_double(get("n_test"));
            if (!w || !a || !n || *n < 1) bad("invalid metrics");
            cell.wape = *w;
            cell.accuracy = *a;
            cell.n_test = static_cast<std::size_t>(*n);
        }
        if (grid.in_distribution.empty()) grid.in_distribution = cell.dataset;
        grid.cells.push_back(std::move(cell));
    }
    return grid;
}

} // namespace wavetraffic
