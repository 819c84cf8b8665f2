#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "wavetraffic/random.hpp"
#include "wavetraffic/series.hpp"

using namespace wavetraffic;
namespace fs = std::filesystem;

namespace {

fs::path write_file(const std::string& name, const std::string& content) {
    const auto dir = fs::temp_directory_path() / "wavetraffic_series_test";
    fs::create_directories(dir);
    const auto path = dir / name;
    std::ofstream(path) << content;
    return path;
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::io_error;
}

TimeSeries iota_series(std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(i + 1);
    return TimeSeries("s", v);
}

} // namespace

TEST_CASE("load_csv reads the value column", "[series]") {
    const auto path = write_file("basic.csv", "time,bits\nt0,100\nt1,110\nt2,120\n");
    const auto ts = load_csv(path, "bits");
    CHECK(ts.values() == std::vector<double>{100, 110, 120});
    CHECK(ts.filled_rows() == 0);
    CHECK_FALSE(ts.has_timestamps());
}

TEST_CASE("load_csv forward-fills missing values", "[series]") {
    const auto path = write_file("gap.csv", "time,bits\nt0,100\nt1,\nt2,120\n");
    const auto ts = load_csv(path, "bits");
    CHECK(ts.values() == std::vector<double>{100, 100, 120});
    CHECK(ts.filled_rows() == 1);
}

TEST_CASE("load_csv error paths", "[series][error]") {
    CHECK(code_of([] { load_csv("/nonexistent/file.csv", "v"); }) == ErrorCode::file_not_found);
    const auto one = write_file("one.csv", "v\n5\n");
    CHECK(code_of([&] { load_csv(one, "v"); }) == ErrorCode::empty_series);
    const auto bad = write_file("bad.csv", "v\n5\nabc\n7\n");
    try {
        load_csv(bad, "v");
        FAIL("expected ParseError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::parse_error);
        CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    }
    const auto unordered = write_file("order.csv", "ts,v\n2021-01-01 00:10:00,1\n2021-01-01 00:05:00,2\n");
    CHECK(code_of([&] { load_csv(unordered, "v", "ts"); }) == ErrorCode::non_monotonic_timestamps);
    CHECK(code_of([&] { load_csv(unordered, "missing_column"); }) == ErrorCode::parse_error);
}

TEST_CASE("load_csv parses ISO timestamps at five-minute cadence", "[series]") {
    const auto path = write_file("iso.csv", "ts,v\n2021-03-01T00:00:00,1\n2021-03-01T00:05:00,2\n");
    const auto ts = load_csv(path, "v", std::string("ts"));
    REQUIRE(ts.has_timestamps());
    CHECK(ts.timestamps()[1] - ts.timestamps()[0] == 300.0);
}

TEST_CASE("write_csv then load_csv reproduces the series bit-exactly", "[series][property]") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + uniform_index(rng, 50);
        std::vector<double> v(n), t(n);
        double stamp = 1.6e9;
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = std::exp(10 * uniform01(rng)) * uniform01(rng);
            stamp += 300.0 * (1 + uniform_index(rng, 3));
            t[i] = stamp;
        }
        const TimeSeries ts("x", v, t);
        const auto path = write_file("rt.csv", "");
        write_csv(ts, path);
        const auto back = load_csv(path, "value", std::string("timestamp"), "x");
        CHECK(back == ts);
    }
}

TEST_CASE("split_holdout is chronological with a floor rule", "[series]") {
    const auto s = split_holdout(iota_series(10), 0.7);
    CHECK(s.train.size() == 7);
    CHECK(s.test.size() == 3);
    CHECK(s.test[0] == 8.0);

    const auto big = split_holdout(iota_series(8563), 0.7);
    CHECK(big.train.size() == 5994);
    CHECK(big.test.size() == 2569);

    CHECK(code_of([] { split_holdout(iota_series(10), 1.0); }) == ErrorCode::degenerate_split);
    CHECK(code_of([] { split_holdout(iota_series(10), 0.0); }) == ErrorCode::degenerate_split);
}

TEST_CASE("split_holdout concatenation reproduces the input", "[series][property]") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 4 + uniform_index(rng, 200);
        const double ratio = 0.05 + 0.9 * uniform01(rng);
        const auto ts = iota_series(n);
        try {
            const auto s = split_holdout(ts, ratio);
            std::vector<double> joined = s.train.values();
            joined.insert(joined.end(), s.test.values().begin(), s.test.values().end());
            CHECK(joined == ts.values());
            CHECK(s.train.size() == static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n))));
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::degenerate_split);
        }
    }
}

TEST_CASE("make_windows builds lagged rows", "[series]") {
    const auto ds = make_windows(iota_series(8), 3);
    REQUIRE(ds.size() == 5);
    CHECK(ds.X.row(0)[0] == 1.0);
    CHECK(ds.X.row(0)[2] == 3.0);
    CHECK(ds.y[0] == 4.0);
    CHECK(ds.X.row(4)[0] == 5.0);
    CHECK(ds.X.row(4)[2] == 7.0);
    CHECK(ds.y[4] == 8.0);

    CHECK(make_windows(iota_series(100), 15).size() == 85);
    CHECK(code_of([] { make_windows(iota_series(3), 3); }) == ErrorCode::window_too_large);
    CHECK(code_of([] { make_windows(iota_series(3), 0); }) == ErrorCode::window_too_large);
}

TEST_CASE("windows cover every contiguous (w+1)-subsequence once", "[series][property]") {
    Rng rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 3 + uniform_index(rng, 60);
        const std::size_t w = 1 + uniform_index(rng, n - 1);
        std::vector<double> v(n);
        for (auto& x : v) x = uniform01(rng);
        const auto ds = make_windows(std::span<const double>(v), w);
        REQUIRE(ds.size() == n - w);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            for (std::size_t j = 0; j < w; ++j) CHECK(ds.X(i, j) == v[i + j]);
            CHECK(ds.y[i] == v[i + w]);
        }
    }
}
