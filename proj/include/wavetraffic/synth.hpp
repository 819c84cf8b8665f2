#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "wavetraffic/random.hpp"
#include "wavetraffic/series.hpp"

namespace wavetraffic {

/// Post-generation transform: base + scale * (x - base) + level_offset + trend * t.
struct SynthShift {
    double level_offset = 0.0;
    double scale = 1.0;
    double trend = 0.0;

    friend bool operator==(const SynthShift&, const SynthShift&) = default;
};

/// Two sinusoids (daily and weekly cycle) on a base level plus AR(1) noise, then a shift.
/// Periods are in samples; the defaults assume five-minute sampling.
struct SynthConfig {
    std::string name = "synthetic";
    std::size_t length = 8563;
    double base_level = 100.0;
    double daily_period = 288.0;
    double daily_amplitude = 40.0;
    double daily_phase = 0.0;
    double weekly_period = 2016.0;
    double weekly_amplitude = 12.0;
    double weekly_phase = 0.0;
    double noise_std = 3.0;
    double ar_coeff = 0.6;
    SynthShift shift;

    void validate() const {
        auto bad = [](const std::string& what) { fail(ErrorCode::invalid_config, "synth: " + what); };
        if (length < 2) bad("length must be at least 2");
        if (!(daily_period >= 2.0) || !(weekly_period >= 2.0)) bad("periods must be at least 2");
        if (!(std::abs(ar_coeff) < 1.0)) bad("|ar_coeff| must be below 1");
        if (!(noise_std >= 0.0)) bad("noise_std must be non-negative");
        for (double v : {base_level, daily_amplitude, daily_phase, weekly_amplitude, weekly_phase,
                         shift.level_offset, shift.scale, shift.trend})
            if (!std::isfinite(v)) bad("parameters must be finite");
    }

    friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

/// Noise-free part of the signal at index t, before the shift.
inline double synth_clean_value(const SynthConfig& cfg, std::size_t t) {
    const double x = static_cast<double>(t);
    return cfg.base_level +
           cfg.daily_amplitude * std::sin(2.0 * std::numbers::pi * x / cfg.daily_period + cfg.daily_phase) +
           cfg.weekly_amplitude * std::sin(2.0 * std::numbers::pi * x / cfg.weekly_period + cfg.weekly_phase);
}

inline TimeSeries synth_gen(const SynthConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(derive_seed(seed, 0x5e71));
    std::vector<double> v(cfg.length);
    // start the noise in its stationary distribution
    const double stationary_sd = cfg.noise_std / std::sqrt(1.0 - cfg.ar_coeff * cfg.ar_coeff);
    double e = cfg.noise_std > 0.0 ? stationary_sd * standard_normal(rng) : 0.0;
    for (std::size_t t = 0; t < cfg.length; ++t) {
        if (t > 0) e = cfg.ar_coeff * e + (cfg.noise_std > 0.0 ? cfg.noise_std * standard_normal(rng) : 0.0);
        const double x = synth_clean_value(cfg, t) + e;
        const double shifted = cfg.base_level + cfg.shift.scale * (x - cfg.base_level) +
                               cfg.shift.level_offset + cfg.shift.trend * static_cast<double>(t);
        v[t] = std::max(0.0, shifted);
    }
    std::vector<double> stamps(cfg.length);
    for (std::size_t t = 0; t < cfg.length; ++t) stamps[t] = 1.6e9 + 300.0 * static_cast<double>(t);
    return TimeSeries(cfg.name, std::move(v), std::move(stamps), "Mbps");
}

/// Samples kept in front of every OOD preset so decompositions have enough history.
inline constexpr std::size_t kOodWarmup = 512;

inline const std::vector<std::string>& synth_preset_names() {
    static const std::vector<std::string> names{"source",      "shift-level", "shift-scale",
                                                "shift-trend", "shift-regime"};
    return names;
}

/// Named configurations: the long source series and four shifted analogues of it.
/// Each shifted preset has kOodWarmup warm-up samples plus about 360 evaluated samples.
inline SynthConfig synth_preset(const std::string& name) {
    SynthConfig c;
    c.name = name;
    if (name == "source") return c;
    c.daily_phase = 1.3;
    c.weekly_phase = 2.1;
    if (name == "shift-level") {
        c.length = kOodWarmup + 363;
        c.shift.level_offset = 35.0;
    } else if (name == "shift-scale") {
        c.length = kOodWarmup + 369;
        c.shift.scale = 1.6;
    } else if (name == "shift-trend") {
        c.length = kOodWarmup + 358;
        c.shift.trend = 0.06;
    } else if (name == "shift-regime") {
        c.length = kOodWarmup + 360;
        c.daily_period = 192.0;
        c.daily_amplitude = 55.0;
        c.noise_std = 4.5;
        c.ar_coeff = 0.75;
    } else {
        fail(ErrorCode::invalid_config, "unknown synth preset '" + name +
                                            "' (valid: source, shift-level, shift-scale, shift-trend, "
                                            "shift-regime)");
    }
    return c;
}

} // namespace wavetraffic
