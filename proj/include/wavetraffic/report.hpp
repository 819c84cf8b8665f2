#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "wavetraffic/grid.hpp"

namespace wavetraffic {

namespace detail {

template <typename Key>
void push_unique(std::vector<Key>& order, const Key& k) {
    if (std::find(order.begin(), order.end(), k) == order.end()) order.push_back(k);
}

inline std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

struct GridIndex {
    std::vector<std::string> models, wavelets, datasets;
    std::vector<std::size_t> windows;
    std::map<std::tuple<std::string, std::string, std::size_t, std::string>, const GridCell*> cells;

    explicit GridIndex(const ResultsGrid& g) {
        for (const auto& c : g.cells) {
            push_unique(models, c.model);
            push_unique(wavelets, c.wavelet);
            push_unique(windows, c.window);
            push_unique(datasets, c.dataset);
            cells[{c.model, c.wavelet, c.window, c.dataset}] = &c;
        }
    }

    const GridCell* find(const std::string& m, const std::string& wv, std::size_t w, const std::string& d) const {
        auto it = cells.find({m, wv, w, d});
        return it == cells.end() ? nullptr : it->second;
    }
};

} // namespace detail

/// Mean accuracy over the windows with a successful cell; false when there are none.
inline bool mean_accuracy_over_windows(const ResultsGrid& grid, const std::string& model, const std::string& wavelet,
                                       const std::string& dataset, double& out) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& c : grid.cells)
        if (c.ok() && c.model == model && c.wavelet == wavelet && c.dataset == dataset) {
            sum += c.accuracy;
            ++n;
        }
    if (n == 0) return false;
    out = sum / static_cast<double>(n);
    return true;
}

/// Accuracy table for one dataset: one row per model, one column per (wavelet, window).
inline std::string pivot_table(const ResultsGrid& grid, const std::string& dataset) {
    const detail::GridIndex idx(grid);
    std::ostringstream out;
    std::size_t n_test = 0;
    for (const auto& c : grid.cells)
        if (c.dataset == dataset && c.ok()) n_test = std::max(n_test, c.n_test);
    out << "Accuracy (%) on " << dataset;
    if (dataset == grid.in_distribution) out << " (in-distribution)";
    out << ", n_test=" << n_test << "\n";
    std::size_t label_w = 10;
    for (const auto& m : idx.models) label_w = std::max(label_w, m.size() + 2);
    auto pad = [](std::string s, std::size_t w) {
        if (s.size() < w) s.append(w - s.size(), ' ');
        return s;
    };
    std::size_t cell_w = 8;
    for (const auto& wv : idx.wavelets) {
        const std::size_t name_w = (wv == kNoWavelet ? 10 : wv.size()) + 1;
        cell_w = std::max(cell_w, (name_w + idx.windows.size() - 1) / idx.windows.size());
    }
    std::string l1 = pad("", label_w), l2 = pad("model", label_w);
    for (const auto& wv : idx.wavelets) {
        l1 += "| " + pad(wv == kNoWavelet ? "No Wavelet" : wv, cell_w * idx.windows.size());
        l2 += "| ";
        for (auto w : idx.windows) l2 += pad("w=" + std::to_string(w), cell_w);
    }
    out << l1 << "\n" << l2 << "\n" << std::string(l2.size(), '-') << "\n";
    for (const auto& m : idx.models) {
        std::string line = pad(m, label_w);
        for (const auto& wv : idx.wavelets) {
            line += "| ";
            for (auto w : idx.windows) {
                const auto* c = idx.find(m, wv, w, dataset);
                line += pad(!c ? "" : c->ok() ? detail::fixed2(c->accuracy) : "ERR", cell_w);
            }
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out << line << "\n";
    }
    return out.str();
}

struct GapRow {
    std::string model;
    std::string wavelet;
    std::string dataset;
    double standalone_accuracy = 0.0;
    double hybrid_accuracy = 0.0;
    /// hybrid - standalone accuracy on the OOD dataset.
    double delta = 0.0;
    /// in-distribution minus OOD accuracy.
    double standalone_gap = 0.0;
    double hybrid_gap = 0.0;
};

/// Per model, wavelet and OOD dataset, using accuracies averaged over windows.
inline std::vector<GapRow> gap_summary(const ResultsGrid& grid) {
    const detail::GridIndex idx(grid);
    std::vector<GapRow> rows;
    for (const auto& m : idx.models)
        for (const auto& wv : idx.wavelets) {
            if (wv == kNoWavelet) continue;
            for (const auto& d : idx.datasets) {
                if (d == grid.in_distribution) continue;
                GapRow r{m, wv, d};
                double s_in = 0, h_in = 0;
                if (!mean_accuracy_over_windows(grid, m, kNoWavelet.data(), d, r.standalone_accuracy) ||
                    !mean_accuracy_over_windows(grid, m, wv, d, r.hybrid_accuracy) ||
                    !mean_accuracy_over_windows(grid, m, kNoWavelet.data(), grid.in_distribution, s_in) ||
                    !mean_accuracy_over_windows(grid, m, wv, grid.in_distribution, h_in))
                    continue;
                r.delta = r.hybrid_accuracy - r.standalone_accuracy;
                r.standalone_gap = s_in - r.standalone_accuracy;
                r.hybrid_gap = h_in - r.hybrid_accuracy;
                rows.push_back(r);
            }
        }
    return rows;
}

/// Writes pivots.txt, one pivot_<dataset>.txt per dataset, averages.csv, gap_summary.csv
/// and, when present, shift_<dataset>.csv histograms.
inline void write_reports(const ResultsGrid& grid, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const detail::GridIndex idx(grid);
    auto open = [&](const std::string& name) {
        std::ofstream out(dir / name);
        if (!out) fail(ErrorCode::io_error, "cannot write " + (dir / name).string());
        return out;
    };
    {
        auto all = open("pivots.txt");
        for (const auto& d : idx.datasets) {
            const auto table = pivot_table(grid, d);
            all << table << "\n";
            open("pivot_" + detail::safe_file_name(d) + ".txt") << table;
        }
    }
    {
        auto out = open("averages.csv");
        out << "model,wavelet,dataset,mean_accuracy,windows\n";
        for (const auto& d : idx.datasets)
            for (const auto& m : idx.models)
                for (const auto& wv : idx.wavelets) {
                    double mean = 0.0;
                    std::size_t n = 0;
                    for (auto w : idx.windows)
                        if (const auto* c = idx.find(m, wv, w, d); c && c->ok()) ++n;
                    if (!mean_accuracy_over_windows(grid, m, wv, d, mean)) continue;
                    out << detail::csv_escape(m) << ',' << detail::csv_escape(wv) << ',' << detail::csv_escape(d)
                        << ',' << detail::format_double(mean) << ',' << n << '\n';
                }
    }
    {
        auto out = open("gap_summary.csv");
        out << "model,wavelet,dataset,standalone_accuracy,hybrid_accuracy,delta,standalone_gap,hybrid_gap\n";
        for (const auto& r : gap_summary(grid))
            out << detail::csv_escape(r.model) << ',' << detail::csv_escape(r.wavelet) << ','
                << detail::csv_escape(r.dataset) << ',' << detail::format_double(r.standalone_accuracy) << ','
                << detail::format_double(r.hybrid_accuracy) << ',' << detail::format_double(r.delta) << ','
                << detail::format_double(r.standalone_gap) << ',' << detail::format_double(r.hybrid_gap) << '\n';
    }
    {
        auto out = open("accuracy_by_window.csv");
        out << "dataset,model,wavelet,window,accuracy\n";
        for (const auto& c : grid.cells)
            if (c.ok())
                out << detail::csv_escape(c.dataset) << ',' << detail::csv_escape(c.model) << ','
                    << detail::csv_escape(c.wavelet) << ',' << c.window << ','
                    << detail::format_double(c.accuracy) << '\n';
    }
    for (const auto& s : grid.shifts)
        write_shift_csv(s, dir / ("shift_" + detail::safe_file_name(s.target_name) + ".csv"));
    if (!grid.shifts.empty()) {
        auto out = open("shift_summary.csv");
        out << "reference,target,wasserstein1,ks_statistic\n";
        for (const auto& s : grid.shifts)
            out << detail::csv_escape(s.reference_name) << ',' << detail::csv_escape(s.target_name) << ','
                << detail::format_double(s.wasserstein1) << ',' << detail::format_double(s.ks_statistic) << '\n';
    }
}

} // namespace wavetraffic
