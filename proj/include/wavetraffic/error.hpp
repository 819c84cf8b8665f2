#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wavetraffic {

/// Error categories. Each maps to a distinct process exit status in the CLI.
enum class ErrorCode {
    file_not_found = 10,
    parse_error,
    empty_series,
    non_monotonic_timestamps,
    degenerate_split,
    window_too_large,
    unknown_wavelet = 20,
    signal_too_short,
    too_many_levels,
    shape_mismatch,
    invalid_filter_table,
    empty_dataset = 30,
    invalid_hyperparameter,
    too_few_samples,
    insufficient_history = 40,
    length_mismatch = 50,
    zero_denominator,
    invalid_config = 60,
    schema_error,
    io_error,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::file_not_found: return "FileNotFound";
    case ErrorCode::parse_error: return "ParseError";
    case ErrorCode::empty_series: return "EmptySeries";
    case ErrorCode::non_monotonic_timestamps: return "NonMonotonicTimestamps";
    case ErrorCode::degenerate_split: return "DegenerateSplit";
    case ErrorCode::window_too_large: return "WindowTooLarge";
    case ErrorCode::unknown_wavelet: return "UnknownWavelet";
    case ErrorCode::signal_too_short: return "SignalTooShort";
    case ErrorCode::too_many_levels: return "TooManyLevels";
    case ErrorCode::shape_mismatch: return "ShapeMismatch";
    case ErrorCode::invalid_filter_table: return "InvalidFilterTable";
    case ErrorCode::empty_dataset: return "EmptyDataset";
    case ErrorCode::invalid_hyperparameter: return "InvalidHyperparameter";
    case ErrorCode::too_few_samples: return "TooFewSamples";
    case ErrorCode::insufficient_history: return "InsufficientHistory";
    case ErrorCode::length_mismatch: return "LengthMismatch";
    case ErrorCode::zero_denominator: return "ZeroDenominator";
    case ErrorCode::invalid_config: return "InvalidConfig";
    case ErrorCode::schema_error: return "SchemaError";
    case ErrorCode::io_error: return "IOError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Like Error, but carries the maximum level that would have been accepted.
class TooManyLevels : public Error {
public:
    TooManyLevels(int requested, int max_allowed)
        : Error(ErrorCode::too_many_levels,
                "requested " + std::to_string(requested) + " levels, max_allowed=" +
                    std::to_string(max_allowed)),
          max_allowed_(max_allowed) {}

    int max_allowed() const noexcept { return max_allowed_; }

private:
    int max_allowed_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace wavetraffic
