#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "wavetraffic/error.hpp"
#include "wavetraffic/matrix.hpp"

namespace wavetraffic {

/// A validated univariate traffic series: finite values, at least two points, and
/// strictly increasing timestamps when timestamps are present.
class TimeSeries {
public:
    TimeSeries() = default;

    TimeSeries(std::string name, std::vector<double> values,
               std::vector<double> timestamps = {}, std::string unit = {})
        : name_(std::move(name)), values_(std::move(values)), timestamps_(std::move(timestamps)),
          unit_(std::move(unit)) {
        validate();
    }

    const std::string& name() const noexcept { return name_; }
    const std::vector<double>& values() const noexcept { return values_; }
    /// Seconds since the epoch (or raw numeric stamps); empty if the source had none.
    const std::vector<double>& timestamps() const noexcept { return timestamps_; }
    bool has_timestamps() const noexcept { return !timestamps_.empty(); }
    const std::string& unit() const noexcept { return unit_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

    /// Rows forward-filled during ingestion.
    std::size_t filled_rows() const noexcept { return filled_rows_; }
    void set_filled_rows(std::size_t n) noexcept { filled_rows_ = n; }

    /// Points [begin, end) as a new series with the same name and unit.
    TimeSeries slice(std::size_t begin, std::size_t end) const {
        std::vector<double> v(values_.begin() + static_cast<std::ptrdiff_t>(begin),
                              values_.begin() + static_cast<std::ptrdiff_t>(end));
        std::vector<double> t;
        if (has_timestamps())
            t.assign(timestamps_.begin() + static_cast<std::ptrdiff_t>(begin),
                     timestamps_.begin() + static_cast<std::ptrdiff_t>(end));
        return TimeSeries(name_, std::move(v), std::move(t), unit_);
    }

    friend bool operator==(const TimeSeries& a, const TimeSeries& b) {
        return a.name_ == b.name_ && a.values_ == b.values_ && a.timestamps_ == b.timestamps_;
    }

private:
    void validate() const {
        if (values_.size() < 2)
            fail(ErrorCode::empty_series, "series '" + name_ + "' has fewer than 2 points");
        for (std::size_t i = 0; i < values_.size(); ++i)
            if (!std::isfinite(values_[i]))
                fail(ErrorCode::parse_error, "non-finite value at index " + std::to_string(i));
        if (!timestamps_.empty()) {
            if (timestamps_.size() != values_.size())
                fail(ErrorCode::shape_mismatch, "timestamp and value counts differ");
            for (std::size_t i = 1; i < timestamps_.size(); ++i)
                if (!(timestamps_[i] > timestamps_[i - 1]))
                    fail(ErrorCode::non_monotonic_timestamps,
                         "timestamp at index " + std::to_string(i) + " does not increase");
        }
    }

    std::string name_;
    std::vector<double> values_;
    std::vector<double> timestamps_;
    std::string unit_;
    std::size_t filled_rows_ = 0;
};

/// Supervised view of a series: row i of X is series[i, i+w), y[i] is series[i+w].
struct WindowedDataset {
    Matrix X;
    std::vector<double> y;
    std::size_t window_len = 0;
    std::string source_name;

    std::size_t size() const noexcept { return y.size(); }
};

struct SplitPair {
    TimeSeries train;
    TimeSeries test;
    double ratio = 0.0;
};

namespace detail {

inline std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (c == '"') {
            if (quoted && i + 1 < line.size() && line[i + 1] == '"') {
                field.push_back('"');
                ++i;
            } else {
                quoted = !quoted;
            }
        } else if (c == ',' && !quoted) {
            out.push_back(trim(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    out.push_back(trim(field));
    return out;
}

inline std::optional<double> parse_double(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline bool is_missing(std::string_view s) {
    return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "null" || s == "-";
}

// Howard Hinnant's days-from-civil.
inline std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

/// Numeric stamps pass through; "YYYY-MM-DD[ T]HH:MM[:SS][Z]" becomes epoch seconds.
inline std::optional<double> parse_timestamp(const std::string& s) {
    if (auto v = parse_double(s)) return v;
    int y = 0, mo = 0, d = 0, h = 0, mi = 0;
    double sec = 0.0;
    char sep = 0;
    int n = std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%lf", &y, &mo, &d, &sep, &h, &mi, &sec);
    if (n < 3 || mo < 1 || mo > 12 || d < 1 || d > 31) return std::nullopt;
    if (n > 3 && sep != 'T' && sep != ' ') return std::nullopt;
    if (n > 3 && n < 6) return std::nullopt;
    return static_cast<double>(days_from_civil(y, static_cast<unsigned>(mo),
                                               static_cast<unsigned>(d))) * 86400.0 +
           h * 3600.0 + mi * 60.0 + sec;
}

inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

} // namespace detail

/// Reads a traffic series from a CSV file with a header row.
///
/// Missing value cells (empty, NA, NaN, null) are forward-filled from the previous
/// observation; leading missing rows have nothing to fill from and are dropped. The
/// number of filled rows is available through TimeSeries::filled_rows().
inline TimeSeries load_csv(const std::filesystem::path& path, const std::string& value_column,
                           const std::optional<std::string>& timestamp_column = std::nullopt,
                           const std::string& name = {}) {
    if (!std::filesystem::exists(path))
        fail(ErrorCode::file_not_found, path.string());
    std::ifstream in(path);
    if (!in) fail(ErrorCode::file_not_found, path.string());

    std::string line;
    if (!std::getline(in, line)) fail(ErrorCode::empty_series, path.string() + " has no header");
    const auto header = detail::split_csv_line(line);
    auto find_column = [&](const std::string& col) -> std::size_t {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == col) return i;
        fail(ErrorCode::parse_error, "row 1: column '" + col + "' not found in header");
    };
    const std::size_t vcol = find_column(value_column);
    const std::optional<std::size_t> tcol =
        timestamp_column ? std::optional(find_column(*timestamp_column)) : std::nullopt;

    std::vector<double> values, stamps;
    std::size_t filled = 0;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv_line(line);
        const std::string vfield = vcol < fields.size() ? fields[vcol] : std::string{};
        std::optional<double> value;
        if (!detail::is_missing(vfield)) {
            value = detail::parse_double(vfield);
            if (!value || !std::isfinite(*value))
                fail(ErrorCode::parse_error,
                     "row " + std::to_string(row) + ", column '" + value_column + "'");
        }
        if (!value) {
            if (values.empty()) continue;
            value = values.back();
            ++filled;
        }
        if (tcol) {
            const std::string tfield = *tcol < fields.size() ? fields[*tcol] : std::string{};
            auto ts = detail::parse_timestamp(tfield);
            if (!ts)
                fail(ErrorCode::parse_error,
                     "row " + std::to_string(row) + ", column '" + *timestamp_column + "'");
            if (!stamps.empty() && !(*ts > stamps.back()))
                fail(ErrorCode::non_monotonic_timestamps,
                     "row " + std::to_string(row) + " is not after the previous row");
            stamps.push_back(*ts);
        }
        values.push_back(*value);
    }
    if (values.size() < 2)
        fail(ErrorCode::empty_series,
             path.string() + " has " + std::to_string(values.size()) + " usable rows");

    TimeSeries ts(name.empty() ? path.stem().string() : name, std::move(values), std::move(stamps));
    ts.set_filled_rows(filled);
    return ts;
}

/// Writes a series so that load_csv(path, "value", "timestamp") reads it back exactly.
inline void write_csv(const TimeSeries& ts, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::io_error, "cannot write " + path.string());
    out << (ts.has_timestamps() ? "timestamp,value\n" : "value\n");
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (ts.has_timestamps()) out << detail::format_double(ts.timestamps()[i]) << ',';
        out << detail::format_double(ts[i]) << '\n';
    }
}

/// Chronological holdout: train is the first floor(ratio * N) points.
inline SplitPair split_holdout(const TimeSeries& ts, double ratio) {
    if (!(ratio > 0.0 && ratio < 1.0))
        fail(ErrorCode::degenerate_split, "ratio must lie in (0, 1)");
    const auto n = ts.size();
    const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n)));
    // each side is itself a TimeSeries and needs at least two points
    if (n_train < 2 || n - n_train < 2)
        fail(ErrorCode::degenerate_split, "split of " + std::to_string(n) + " points at ratio " +
                                              detail::format_double(ratio) + " leaves a side empty");
    return {ts.slice(0, n_train), ts.slice(n_train, n), ratio};
}

inline WindowedDataset make_windows(std::span<const double> series, std::size_t w,
                                    std::string source_name = {}) {
    if (w < 1) fail(ErrorCode::window_too_large, "window length must be at least 1");
    if (series.size() <= w)
        fail(ErrorCode::window_too_large, "series of length " + std::to_string(series.size()) +
                                              " cannot form windows of length " + std::to_string(w));
    const std::size_t n = series.size() - w;
    WindowedDataset ds{Matrix(n, w), std::vector<double>(n), w, std::move(source_name)};
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(series.begin() + static_cast<std::ptrdiff_t>(i), w, ds.X.row(i).begin());
        ds.y[i] = series[i + w];
    }
    return ds;
}

inline WindowedDataset make_windows(const TimeSeries& ts, std::size_t w) {
    return make_windows(ts.values(), w, ts.name());
}

} // namespace wavetraffic
