#pragma once

#include <cmath>
#include <span>

#include "wavetraffic/error.hpp"

namespace wavetraffic {

/// Weighted average percentage error: 100 * sum|p - o| / sum|o|.
inline double wape(std::span<const double> pred, std::span<const double> actual) {
    if (pred.size() != actual.size())
        fail(ErrorCode::length_mismatch, std::to_string(pred.size()) + " predictions for " +
                                             std::to_string(actual.size()) + " actuals");
    if (pred.empty()) fail(ErrorCode::length_mismatch, "no values to compare");
    double err = 0.0, denom = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        err += std::abs(pred[i] - actual[i]);
        denom += std::abs(actual[i]);
    }
    if (!(denom > 0.0)) fail(ErrorCode::zero_denominator, "sum of |actual| is zero");
    return 100.0 * err / denom;
}

/// 100 - WAPE, unclipped: negative whenever WAPE exceeds 100.
inline double accuracy_from_wape(double wape_pct) { return 100.0 - wape_pct; }

inline double accuracy(std::span<const double> pred, std::span<const double> actual) {
    return accuracy_from_wape(wape(pred, actual));
}

} // namespace wavetraffic
