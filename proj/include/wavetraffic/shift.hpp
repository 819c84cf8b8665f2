#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "wavetraffic/series.hpp"

namespace wavetraffic {

/// Two samples binned on one shared grid.
struct HistogramPair {
    std::vector<double> edges;  // bins + 1 edges
    std::vector<double> reference_density;
    std::vector<double> target_density;
};

struct ShiftReport {
    std::string reference_name;
    std::string target_name;
    double wasserstein1 = 0.0;
    double ks_statistic = 0.0;
    HistogramPair histograms;
};

/// Empirical 1-D earth mover's distance: the integral of |F_a - F_b| over the line.
inline double wasserstein1(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) fail(ErrorCode::empty_series, "wasserstein1 needs two non-empty samples");
    std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
    std::size_t i = 0, j = 0;
    double prev = std::min(x.front(), y.front()), total = 0.0;
    while (i < x.size() || j < y.size()) {
        const double next = j == y.size() || (i < x.size() && x[i] <= y[j]) ? x[i] : y[j];
        total += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - prev);
        while (i < x.size() && x[i] == next) ++i;
        while (j < y.size() && y[j] == next) ++j;
        prev = next;
    }
    return total;
}

/// Two-sample Kolmogorov-Smirnov statistic: sup |F_a - F_b|.
inline double ks_statistic(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) fail(ErrorCode::empty_series, "ks_statistic needs two non-empty samples");
    std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < x.size() || j < y.size()) {
        const double next = j == y.size() || (i < x.size() && x[i] <= y[j]) ? x[i] : y[j];
        while (i < x.size() && x[i] == next) ++i;
        while (j < y.size() && y[j] == next) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

inline HistogramPair aligned_histograms(std::span<const double> a, std::span<const double> b,
                                        std::size_t bins = 64) {
    double lo = std::min(*std::min_element(a.begin(), a.end()), *std::min_element(b.begin(), b.end()));
    double hi = std::max(*std::max_element(a.begin(), a.end()), *std::max_element(b.begin(), b.end()));
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    HistogramPair h;
    const double width = (hi - lo) / static_cast<double>(bins);
    for (std::size_t k = 0; k <= bins; ++k) h.edges.push_back(lo + width * static_cast<double>(k));
    h.edges.back() = hi;
    auto fill = [&](std::span<const double> s) {
        std::vector<double> d(bins, 0.0);
        for (double v : s) {
            auto k = static_cast<std::size_t>((v - lo) / width);
            d[std::min(k, bins - 1)] += 1.0;
        }
        for (auto& c : d) c /= static_cast<double>(s.size()) * width;
        return d;
    };
    h.reference_density = fill(a);
    h.target_density = fill(b);
    return h;
}

inline ShiftReport shift_report(const TimeSeries& reference, const TimeSeries& target, std::size_t bins = 64) {
    ShiftReport r;
    r.reference_name = reference.name();
    r.target_name = target.name();
    r.wasserstein1 = wasserstein1(reference.values(), target.values());
    r.ks_statistic = ks_statistic(reference.values(), target.values());
    r.histograms = aligned_histograms(reference.values(), target.values(), bins);
    return r;
}

/// Columns: bin_left, bin_right, reference_density, target_density.
inline void write_shift_csv(const ShiftReport& r, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::io_error, "cannot write " + path.string());
    out << "# reference=" << r.reference_name << " target=" << r.target_name
        << " wasserstein1=" << detail::format_double(r.wasserstein1)
        << " ks=" << detail::format_double(r.ks_statistic) << '\n';
    out << "bin_left,bin_right,reference_density,target_density\n";
    const auto& h = r.histograms;
    for (std::size_t k = 0; k + 1 < h.edges.size(); ++k)
        out << detail::format_double(h.edges[k]) << ',' << detail::format_double(h.edges[k + 1]) << ','
            << detail::format_double(h.reference_density[k]) << ','
            << detail::format_double(h.target_density[k]) << '\n';
}

} // namespace wavetraffic
