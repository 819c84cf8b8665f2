#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wavetraffic/error.hpp"
#include "wavetraffic/filter_tables.hpp"

namespace wavetraffic {

enum class ExtensionMode { symmetric, periodic, zero };

inline std::string_view to_string(ExtensionMode mode) {
    switch (mode) {
    case ExtensionMode::symmetric: return "symmetric";
    case ExtensionMode::periodic: return "periodic";
    case ExtensionMode::zero: return "zero";
    }
    return "symmetric";
}

inline ExtensionMode parse_extension_mode(std::string_view s) {
    if (s == "symmetric") return ExtensionMode::symmetric;
    if (s == "periodic") return ExtensionMode::periodic;
    if (s == "zero") return ExtensionMode::zero;
    fail(ErrorCode::invalid_config,
         "unknown extension mode '" + std::string(s) + "' (valid: symmetric, periodic, zero)");
}

inline constexpr std::array<std::string_view, 3> supported_wavelets{"haar", "dmey", "bior3.7"};

/// Analysis and synthesis filters of one mother wavelet.
///
/// Convention: dec_lo is the time reverse of rec_lo and dec_hi[k] = (-1)^(k+1) rec_lo[k]
/// reversed, so for haar dec_hi = [-1/sqrt2, 1/sqrt2] and the detail of (a, b) is (a - b)/sqrt2.
struct FilterBank {
    std::string name;
    std::vector<double> dec_lo;
    std::vector<double> dec_hi;
    std::vector<double> rec_lo;
    std::vector<double> rec_hi;
    bool orthogonal = false;
    /// Max abs round-trip error accepted by the reconstruction probe.
    double pr_tolerance = 1e-10;

    std::size_t filter_len() const noexcept { return dec_lo.size(); }
};

/// Decimated coefficients of an L-level decomposition. details[0] is the finest band.
struct CoefficientPyramid {
    int levels = 0;
    std::vector<std::vector<double>> details;
    std::vector<double> approx;
    ExtensionMode ext_mode = ExtensionMode::symmetric;
    std::size_t original_len = 0;
};

/// Full-length multiresolution components: approx + sum(details) reproduces the signal.
struct ComponentSet {
    std::vector<double> approx_mra;
    std::vector<std::vector<double>> details_mra;
    int levels = 0;
    std::string bank_name;

    /// Components in the order [approx, d1, ..., dL].
    std::vector<std::vector<double>> ordered() const {
        std::vector<std::vector<double>> out;
        out.reserve(details_mra.size() + 1);
        out.push_back(approx_mra);
        for (const auto& d : details_mra) out.push_back(d);
        return out;
    }

    std::vector<double> sum() const {
        std::vector<double> out = approx_mra;
        for (const auto& d : details_mra)
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += d[i];
        return out;
    }
};

/// Coefficient count after one analysis step on a signal of length n.
inline std::size_t dwt_output_len(std::size_t n, std::size_t filter_len, ExtensionMode mode) {
    if (mode == ExtensionMode::periodic) return (n + 1) / 2;
    return (n + filter_len - 1) / 2;
}

/// Deepest level at which at least one coefficient escapes boundary effects.
inline int max_level(std::size_t n, std::size_t filter_len) {
    if (filter_len < 2 || n < filter_len - 1) return 0;
    return static_cast<int>(
        std::floor(std::log2(static_cast<double>(n) / static_cast<double>(filter_len - 1))));
}

namespace detail {

inline double extended(std::span<const double> x, std::ptrdiff_t i, ExtensionMode mode) {
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    if (i >= 0 && i < n) return x[static_cast<std::size_t>(i)];
    switch (mode) {
    case ExtensionMode::zero: return 0.0;
    case ExtensionMode::periodic: {
        std::ptrdiff_t m = i % n;
        if (m < 0) m += n;
        return x[static_cast<std::size_t>(m)];
    }
    case ExtensionMode::symmetric: {
        // half-sample reflection: x[-1] = x[0], x[n] = x[n-1]
        const std::ptrdiff_t period = 2 * n;
        std::ptrdiff_t m = i % period;
        if (m < 0) m += period;
        if (m >= n) m = period - 1 - m;
        return x[static_cast<std::size_t>(m)];
    }
    }
    return 0.0;
}

/// Odd-length input under periodic extension is padded by repeating its last sample.
inline std::vector<double> periodic_even(std::span<const double> x) {
    std::vector<double> v(x.begin(), x.end());
    if (v.size() % 2 == 1) v.push_back(v.back());
    return v;
}

inline void analysis(std::span<const double> x, std::span<const double> filter,
                     ExtensionMode mode, std::span<double> out) {
    const auto f_len = static_cast<std::ptrdiff_t>(filter.size());
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    // phase: coefficient o is centred on input index 2o + offset
    const std::ptrdiff_t offset = mode == ExtensionMode::periodic ? f_len / 2 : 1;
    for (std::size_t o = 0; o < out.size(); ++o) {
        const std::ptrdiff_t i = 2 * static_cast<std::ptrdiff_t>(o) + offset;
        double acc = 0.0;
        if (i - (f_len - 1) >= 0 && i < n) {
            for (std::ptrdiff_t j = 0; j < f_len; ++j)
                acc += filter[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(i - j)];
        } else {
            for (std::ptrdiff_t j = 0; j < f_len; ++j)
                acc += filter[static_cast<std::size_t>(j)] * extended(x, i - j, mode);
        }
        out[o] = acc;
    }
}

/// Adds the synthesis of one band into out (the transpose of analysis with the rec filter).
inline void synthesis_add(std::span<const double> coeffs, std::span<const double> rec,
                          ExtensionMode mode, std::span<double> out) {
    const auto f_len = static_cast<std::ptrdiff_t>(rec.size());
    const auto n_out = static_cast<std::ptrdiff_t>(out.size());
    if (mode == ExtensionMode::periodic) {
        const std::ptrdiff_t offset = f_len / 2;
        for (std::size_t o = 0; o < coeffs.size(); ++o) {
            const double c = coeffs[o];
            if (c == 0.0) continue;
            for (std::ptrdiff_t j = 0; j < f_len; ++j) {
                std::ptrdiff_t idx = (2 * static_cast<std::ptrdiff_t>(o) + offset - j) % n_out;
                if (idx < 0) idx += n_out;
                out[static_cast<std::size_t>(idx)] += c * rec[static_cast<std::size_t>(f_len - 1 - j)];
            }
        }
        return;
    }
    // out[k] += sum_o c[o] * rec[k + F - 2 - 2o], over taps inside the filter
    for (std::ptrdiff_t k = 0; k < n_out; ++k) {
        const std::ptrdiff_t base = k + f_len - 2;
        const std::ptrdiff_t lowest = base - (f_len - 1);
        const std::ptrdiff_t o_lo = lowest > 0 ? (lowest + 1) / 2 : 0;
        const std::ptrdiff_t o_hi =
            std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(coeffs.size()) - 1, base / 2);
        double acc = 0.0;
        for (std::ptrdiff_t o = o_lo; o <= o_hi; ++o)
            acc += coeffs[static_cast<std::size_t>(o)] *
                   rec[static_cast<std::size_t>(base - 2 * o)];
        out[static_cast<std::size_t>(k)] += acc;
    }
}

} // namespace detail

/// One analysis step: (approximation, detail) coefficients.
inline std::pair<std::vector<double>, std::vector<double>>
dwt_level(std::span<const double> signal, const FilterBank& bank,
          ExtensionMode mode = ExtensionMode::symmetric) {
    if (signal.size() < bank.filter_len() || signal.size() < 2)
        fail(ErrorCode::signal_too_short,
             "signal of length " + std::to_string(signal.size()) + " is shorter than the " +
                 std::to_string(bank.filter_len()) + "-tap " + bank.name + " filter");
    std::vector<double> padded;
    std::span<const double> x = signal;
    if (mode == ExtensionMode::periodic && signal.size() % 2 == 1) {
        padded = detail::periodic_even(signal);
        x = padded;
    }
    const std::size_t n_out = dwt_output_len(x.size(), bank.filter_len(), mode);
    std::vector<double> ca(n_out), cd(n_out);
    detail::analysis(x, bank.dec_lo, mode, ca);
    detail::analysis(x, bank.dec_hi, mode, cd);
    return {std::move(ca), std::move(cd)};
}

/// One synthesis step. Either band may be empty, meaning all zeros. The result has
/// length out_len, the length of the signal that produced the coefficients.
inline std::vector<double> idwt_level(std::span<const double> ca, std::span<const double> cd,
                                      const FilterBank& bank, ExtensionMode mode,
                                      std::size_t out_len) {
    const std::size_t n_coeffs = ca.empty() ? cd.size() : ca.size();
    if (!ca.empty() && !cd.empty() && ca.size() != cd.size())
        fail(ErrorCode::shape_mismatch, "approximation and detail bands differ in length");
    const std::size_t f_len = bank.filter_len();
    std::size_t full_len = mode == ExtensionMode::periodic ? 2 * n_coeffs
                                                           : 2 * n_coeffs + 2 - f_len;
    if (2 * n_coeffs + 2 < f_len || full_len < out_len)
        fail(ErrorCode::shape_mismatch, "coefficient band too short for " + bank.name);
    std::vector<double> out(full_len, 0.0);
    if (!ca.empty()) detail::synthesis_add(ca, bank.rec_lo, mode, out);
    if (!cd.empty()) detail::synthesis_add(cd, bank.rec_hi, mode, out);
    out.resize(out_len);
    return out;
}

namespace detail {

/// Signal lengths entering each level: lens[0] = N, lens[i] = length of Ca_i.
inline std::vector<std::size_t> level_lengths(std::size_t n, std::size_t f_len, int levels,
                                              ExtensionMode mode) {
    std::vector<std::size_t> lens{n};
    for (int i = 0; i < levels; ++i) {
        std::size_t len = lens.back();
        if (mode == ExtensionMode::periodic && len % 2 == 1) ++len;
        lens.push_back(dwt_output_len(len, f_len, mode));
    }
    return lens;
}

} // namespace detail

inline CoefficientPyramid wavedec(std::span<const double> signal, const FilterBank& bank,
                                  int levels, ExtensionMode mode = ExtensionMode::symmetric) {
    if (levels < 1) fail(ErrorCode::too_many_levels, "levels must be at least 1");
    const int allowed = max_level(signal.size(), bank.filter_len());
    if (levels > allowed) throw TooManyLevels(levels, allowed);
    CoefficientPyramid pyr{levels, {}, {}, mode, signal.size()};
    std::vector<double> approx(signal.begin(), signal.end());
    for (int i = 0; i < levels; ++i) {
        auto [ca, cd] = dwt_level(approx, bank, mode);
        pyr.details.push_back(std::move(cd));
        approx = std::move(ca);
    }
    pyr.approx = std::move(approx);
    return pyr;
}

namespace detail {

inline void check_pyramid(const CoefficientPyramid& pyr, const FilterBank& bank) {
    if (pyr.levels < 1 || pyr.details.size() != static_cast<std::size_t>(pyr.levels))
        fail(ErrorCode::shape_mismatch, "pyramid level count does not match its detail bands");
    const auto lens = level_lengths(pyr.original_len, bank.filter_len(), pyr.levels, pyr.ext_mode);
    for (int i = 0; i < pyr.levels; ++i)
        if (pyr.details[static_cast<std::size_t>(i)].size() != lens[static_cast<std::size_t>(i) + 1])
            fail(ErrorCode::shape_mismatch,
                 "detail band " + std::to_string(i + 1) + " has length " +
                     std::to_string(pyr.details[static_cast<std::size_t>(i)].size()) +
                     ", expected " + std::to_string(lens[static_cast<std::size_t>(i) + 1]) +
                     " for " + bank.name);
    if (pyr.approx.size() != lens.back())
        fail(ErrorCode::shape_mismatch, "approximation band has length " +
                                            std::to_string(pyr.approx.size()) + ", expected " +
                                            std::to_string(lens.back()));
}

/// Reconstruction from level `top` downwards, with every band above `top` treated as zero.
/// `approx` may be empty (zero); detail bands flagged off in `keep` are treated as zero.
inline std::vector<double> reconstruct_from(const CoefficientPyramid& pyr, const FilterBank& bank,
                                            int top, std::span<const double> approx,
                                            const std::vector<bool>& keep) {
    const auto lens = level_lengths(pyr.original_len, bank.filter_len(), pyr.levels, pyr.ext_mode);
    std::vector<double> a(approx.begin(), approx.end());
    for (int i = top; i >= 1; --i) {
        const auto& d = pyr.details[static_cast<std::size_t>(i - 1)];
        const bool use_d = keep[static_cast<std::size_t>(i - 1)];
        if (a.empty() && !use_d) continue;
        std::size_t out_len = lens[static_cast<std::size_t>(i - 1)];
        if (pyr.ext_mode == ExtensionMode::periodic && out_len % 2 == 1) ++out_len;
        a = idwt_level(a, use_d ? std::span<const double>(d) : std::span<const double>{}, bank,
                       pyr.ext_mode, out_len);
        a.resize(lens[static_cast<std::size_t>(i - 1)]);
    }
    if (a.empty()) a.assign(pyr.original_len, 0.0);
    return a;
}

} // namespace detail

inline std::vector<double> waverec(const CoefficientPyramid& pyr, const FilterBank& bank) {
    detail::check_pyramid(pyr, bank);
    return detail::reconstruct_from(pyr, bank, pyr.levels, pyr.approx,
                                    std::vector<bool>(static_cast<std::size_t>(pyr.levels), true));
}

/// Multiresolution analysis: each band reconstructed alone to full length.
inline ComponentSet mra(std::span<const double> signal, const FilterBank& bank, int levels,
                        ExtensionMode mode = ExtensionMode::symmetric) {
    const auto pyr = wavedec(signal, bank, levels, mode);
    ComponentSet set;
    set.levels = levels;
    set.bank_name = bank.name;
    const auto n_levels = static_cast<std::size_t>(levels);
    set.approx_mra = detail::reconstruct_from(pyr, bank, levels, pyr.approx,
                                              std::vector<bool>(n_levels, false));
    for (int k = 1; k <= levels; ++k) {
        std::vector<bool> keep(n_levels, false);
        keep[static_cast<std::size_t>(k - 1)] = true;
        set.details_mra.push_back(detail::reconstruct_from(pyr, bank, k, {}, keep));
    }
    return set;
}

namespace detail {

/// Round trip on a fixed white-noise probe; throws if the bank misses its tolerance.
inline void verify_perfect_reconstruction(const FilterBank& bank) {
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> noise;
    std::vector<double> probe(std::max<std::size_t>(512, 8 * bank.filter_len()));
    for (auto& v : probe) v = noise(rng);
    for (auto mode : {ExtensionMode::symmetric, ExtensionMode::periodic}) {
        const auto rec = waverec(wavedec(probe, bank, 1, mode), bank);
        double err = 0.0;
        for (std::size_t i = 0; i < probe.size(); ++i) err = std::max(err, std::abs(rec[i] - probe[i]));
        if (!(err <= bank.pr_tolerance))
            fail(ErrorCode::invalid_filter_table,
                 bank.name + " fails the reconstruction probe (max error " + std::to_string(err) +
                     ", tolerance " + std::to_string(bank.pr_tolerance) + ")");
    }
}

inline FilterBank make_bank(std::string name, std::span<const double> dec_lo,
                            std::span<const double> dec_hi, std::span<const double> rec_lo,
                            std::span<const double> rec_hi, bool orthogonal, double tol) {
    FilterBank bank{std::move(name),
                    {dec_lo.begin(), dec_lo.end()},
                    {dec_hi.begin(), dec_hi.end()},
                    {rec_lo.begin(), rec_lo.end()},
                    {rec_hi.begin(), rec_hi.end()},
                    orthogonal,
                    tol};
    const auto f = bank.dec_lo.size();
    if (f < 2 || bank.dec_hi.size() != f || bank.rec_lo.size() != f || bank.rec_hi.size() != f)
        fail(ErrorCode::invalid_filter_table, bank.name + ": filters must share one length >= 2");
    verify_perfect_reconstruction(bank);
    return bank;
}

inline FilterBank build_haar() {
    const double s = 1.0 / std::sqrt(2.0);
    const std::array<double, 2> lo{s, s}, dec_hi{-s, s}, rec_hi{s, -s};
    return make_bank("haar", lo, dec_hi, lo, rec_hi, true, 1e-10);
}

} // namespace detail

inline double default_tolerance(std::string_view name) { return name == "dmey" ? 1e-6 : 1e-10; }

/// Embedded filter bank by name. Tables are verified on first use.
inline const FilterBank& filter_bank(std::string_view name) {
    if (name == "haar") {
        static const FilterBank bank = detail::build_haar();
        return bank;
    }
    if (name == "dmey") {
        static const FilterBank bank =
            detail::make_bank("dmey", tables::dmey_dec_lo, tables::dmey_dec_hi,
                              tables::dmey_rec_lo, tables::dmey_rec_hi, true, 1e-6);
        return bank;
    }
    if (name == "bior3.7") {
        static const FilterBank bank =
            detail::make_bank("bior3.7", tables::bior3_7_dec_lo, tables::bior3_7_dec_hi,
                              tables::bior3_7_rec_lo, tables::bior3_7_rec_hi, false, 1e-10);
        return bank;
    }
    fail(ErrorCode::unknown_wavelet,
         "'" + std::string(name) + "' (valid: haar, dmey, bior3.7)");
}

/// Reads a bank from a directory holding dec_lo.txt, dec_hi.txt, rec_lo.txt and
/// rec_hi.txt, one decimal coefficient per line.
inline FilterBank load_filter_bank(const std::filesystem::path& dir, std::string name,
                                   bool orthogonal, double tolerance) {
    auto read = [&](const char* file) {
        const auto path = dir / file;
        std::ifstream in(path);
        if (!in) fail(ErrorCode::file_not_found, path.string());
        std::vector<double> coeffs;
        std::string line;
        std::size_t row = 0;
        while (std::getline(in, line)) {
            ++row;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                std::size_t used = 0;
                coeffs.push_back(std::stod(line, &used));
                if (line.find_first_not_of(" \t\r", used) != std::string::npos) throw 0;
            } catch (...) {
                fail(ErrorCode::invalid_filter_table, path.string() + " line " + std::to_string(row));
            }
        }
        return coeffs;
    };
    const auto dl = read("dec_lo.txt"), dh = read("dec_hi.txt");
    const auto rl = read("rec_lo.txt"), rh = read("rec_hi.txt");
    return detail::make_bank(std::move(name), dl, dh, rl, rh, orthogonal, tolerance);
}

} // namespace wavetraffic
