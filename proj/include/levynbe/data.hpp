#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

#include "levynbe/deepsets.hpp"
#include "levynbe/error.hpp"
#include "levynbe/levy_models.hpp"
#include "levynbe/random.hpp"

namespace levynbe {

// ---------------------------------------------------------------------------
// Text helpers

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line, char delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(delim, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::optional<double> parse_double(std::string_view s) {
    double v = 0.0;
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline bool parse_fixed_int(std::string_view s, int& out) {
    if (s.empty()) return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

// "YYYY-MM-DD", optionally followed by 'T' or ' ' and "HH:MM[:SS]", and an
// optional 'Z' or "+00:00". Returns UTC epoch seconds.
inline std::optional<std::int64_t> parse_iso_datetime(std::string_view s) {
    if (s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    int y, mo, d, h = 0, mi = 0, sec = 0;
    if (!parse_fixed_int(s.substr(0, 4), y) || !parse_fixed_int(s.substr(5, 2), mo) ||
        !parse_fixed_int(s.substr(8, 2), d))
        return std::nullopt;
    std::string_view rest = s.substr(10);
    if (!rest.empty() && rest.back() == 'Z') rest.remove_suffix(1);
    if (rest.size() >= 6 && rest.substr(rest.size() - 6) == "+00:00") rest.remove_suffix(6);
    if (!rest.empty()) {
        if ((rest[0] != 'T' && rest[0] != ' ') || (rest.size() != 6 && rest.size() != 9) || rest[3] != ':')
            return std::nullopt;
        if (!parse_fixed_int(rest.substr(1, 2), h) || !parse_fixed_int(rest.substr(4, 2), mi)) return std::nullopt;
        if (rest.size() == 9 && (rest[6] != ':' || !parse_fixed_int(rest.substr(7, 2), sec))) return std::nullopt;
    }
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || sec > 60 || h < 0 || mi < 0 || sec < 0) return std::nullopt;
    const auto days = sys_days{ymd}.time_since_epoch().count();
    return static_cast<std::int64_t>(days) * 86400 + h * 3600 + mi * 60 + sec;
}

inline std::string format_date(std::int64_t epoch_seconds) {
    using namespace std::chrono;
    const auto day_index = epoch_seconds >= 0 ? epoch_seconds / 86400 : -((-epoch_seconds + 86399) / 86400);
    const year_month_day ymd{sys_days{days{day_index}}};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    const std::int64_t q = a / b;
    return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

}  // namespace detail

// Shortest text that reads back to the same double: 17 significant digits.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Increment datasets on disk

// CSV with header "increment" and one value per line.
inline void write_increments_csv(const IncrementSeries& data, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out << "increment\n";
    for (double v : data.values()) out << format_double(v) << '\n';
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

inline IncrementSeries read_increments_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open data file '" + path.string() + "'");
    std::string line;
    std::size_t row = 0;
    std::vector<double> values;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++row;
        const auto field = detail::trim(line);
        if (field.empty()) continue;
        if (!header_seen) {
            header_seen = true;
            if (field == "increment") continue;
        }
        const auto v = detail::parse_double(field);
        if (!v || !std::isfinite(*v)) throw ParseError(row, "increment", "not a finite number: '" + std::string(field) + "'");
        values.push_back(*v);
    }
    if (values.empty()) throw EmptyInput("data file '" + path.string() + "' holds no increments");
    return IncrementSeries(std::move(values));
}

// Binary container: magic "LVYDS001", u64 count, count little-endian
// float64 values, u32 CRC32 of the value bytes.
inline constexpr char dataset_magic[8] = {'L', 'V', 'Y', 'D', 'S', '0', '0', '1'};

inline void write_increments_binary(const IncrementSeries& data, const std::filesystem::path& path) {
    static_assert(std::endian::native == std::endian::little, "binary datasets assume a little-endian host");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    const std::uint64_t n = data.size();
    const auto* bytes = reinterpret_cast<const char*>(data.values().data());
    const auto crc = static_cast<std::uint32_t>(
        ::crc32(::crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(bytes), static_cast<uInt>(8 * n)));
    out.write(dataset_magic, 8);
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(bytes, static_cast<std::streamsize>(8 * n));
    out.write(reinterpret_cast<const char*>(&crc), 4);
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

inline IncrementSeries read_increments_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open data file '" + path.string() + "'");
    char magic[8];
    std::uint64_t n = 0;
    if (!in.read(magic, 8) || std::memcmp(magic, dataset_magic, 8) != 0)
        throw CorruptArtifact("'" + path.string() + "' is not a binary increment dataset");
    if (!in.read(reinterpret_cast<char*>(&n), 8) || n > (std::uint64_t{1} << 40))
        throw CorruptArtifact("binary dataset header truncated");
    std::vector<double> values(n);
    std::uint32_t crc = 0;
    if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(8 * n)) ||
        !in.read(reinterpret_cast<char*>(&crc), 4))
        throw CorruptArtifact("binary dataset truncated");
    const auto expect = static_cast<std::uint32_t>(::crc32(::crc32(0L, Z_NULL, 0),
                                                            reinterpret_cast<const Bytef*>(values.data()),
                                                            static_cast<uInt>(8 * n)));
    if (crc != expect) throw CorruptArtifact("binary dataset checksum mismatch");
    for (double v : values)
        if (!std::isfinite(v)) throw CorruptArtifact("binary dataset holds non-finite values");
    return IncrementSeries(std::move(values));
}

// Reads either container, chosen by the magic bytes.
inline IncrementSeries read_increments(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    char magic[8] = {};
    if (in.read(magic, 8) && std::memcmp(magic, dataset_magic, 8) == 0) return read_increments_binary(path);
    return read_increments_csv(path);
}

// Parameter list "v1,v2,..." for the given model.
inline ParamVector parse_param_list(const ModelSpec& model, std::string_view text) {
    std::vector<double> values;
    for (auto field : detail::split(text, ',')) {
        const auto v = detail::parse_double(field);
        if (!v) throw InvalidArgument("bad parameter value '" + std::string(field) + "'");
        values.push_back(*v);
    }
    return ParamVector(model, std::move(values));
}

// ---------------------------------------------------------------------------
// Prices and returns

struct PriceFormat {
    std::string timestamp_column = "timestamp";
    std::string price_column = "close";
    char delimiter = ',';
};

struct PriceSeries {
    std::vector<std::int64_t> timestamps;  // epoch seconds, strictly increasing
    std::vector<double> prices;            // > 0
    bool dated = false;                    // timestamps were ISO dates

    std::size_t size() const noexcept { return prices.size(); }
};

// Rows are numbered from 1 with the header as row 1.
inline PriceSeries parse_prices(std::istream& in, const PriceFormat& fmt = {}) {
    std::string line;
    std::size_t row = 0;
    std::optional<std::size_t> ts_col, px_col;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        const auto header = detail::split(line, fmt.delimiter);
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (header[c] == fmt.timestamp_column) ts_col = c;
            if (header[c] == fmt.price_column) px_col = c;
        }
        break;
    }
    if (row == 0) throw EmptyInput("price file is empty");
    if (!ts_col) throw ParseError(row, fmt.timestamp_column, "column missing from header");
    if (!px_col) throw ParseError(row, fmt.price_column, "column missing from header");

    PriceSeries out;
    std::optional<bool> dated;
    const std::size_t need = std::max(*ts_col, *px_col) + 1;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split(line, fmt.delimiter);
        if (fields.size() < need)
            throw ParseError(row, fields.size() <= *ts_col ? fmt.timestamp_column : fmt.price_column, "missing field");

        const auto ts_text = fields[*ts_col];
        std::int64_t ts = 0;
        const bool looks_dated = ts_text.size() >= 10 && ts_text[4] == '-';
        if (dated && *dated != looks_dated)
            throw ParseError(row, fmt.timestamp_column, "mixed date and numeric timestamps");
        dated = looks_dated;
        if (looks_dated) {
            const auto t = detail::parse_iso_datetime(ts_text);
            if (!t) throw ParseError(row, fmt.timestamp_column, "unreadable date '" + std::string(ts_text) + "'");
            ts = *t;
        } else {
            const auto t = detail::parse_double(ts_text);
            if (!t || !std::isfinite(*t) || std::abs(*t) > 9e15)
                throw ParseError(row, fmt.timestamp_column, "unreadable timestamp '" + std::string(ts_text) + "'");
            ts = std::llround(*t);
        }

        const auto px = detail::parse_double(fields[*px_col]);
        if (!px || std::isnan(*px) || std::isinf(*px))
            throw ParseError(row, fmt.price_column, "not a finite number: '" + std::string(fields[*px_col]) + "'");
        if (!(*px > 0.0)) throw NonPositivePrice(row);
        if (!out.timestamps.empty() && ts <= out.timestamps.back()) throw NonMonotoneTimestamps(row);
        out.timestamps.push_back(ts);
        out.prices.push_back(*px);
    }
    out.dated = dated.value_or(false);
    return out;
}

inline PriceSeries load_prices(const std::filesystem::path& path, const PriceFormat& fmt = {}) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open price file '" + path.string() + "'");
    return parse_prices(in, fmt);
}

enum class Alignment { Auto, Calendar, Index };

inline Alignment parse_alignment(std::string_view s) {
    if (s == "auto") return Alignment::Auto;
    if (s == "calendar") return Alignment::Calendar;
    if (s == "index") return Alignment::Index;
    throw InvalidArgument("unknown alignment '" + std::string(s) + "' (expected auto, calendar, index)");
}

// Log returns on the regular grid origin + k * step. Slot k holds
// ln(p(origin + (k+1) step) / p(origin + k step)) when both prices exist.
struct ReturnGrid {
    std::int64_t origin = 0;
    std::int64_t step = 0;
    bool calendar = false;  // origin is a UTC midnight and windows are named by date
    std::vector<double> increments;  // 0 where masked
    std::vector<bool> observed;

    std::size_t size() const noexcept { return increments.size(); }
};

inline constexpr std::int64_t seconds_per_day = 86400;

// Calendar alignment starts the grid at the last UTC midnight at or before
// the first price and ends it at the first midnight at or after the last.
// Index alignment spans exactly the first to the last timestamp. Prices off
// the grid are ignored.
inline ReturnGrid log_returns(const PriceSeries& series, std::int64_t step, Alignment align = Alignment::Auto) {
    if (step <= 0) throw InvalidArgument("log_returns: step must be positive");
    if (series.size() < 2) throw EmptyInput("log_returns: need at least two prices");
    ReturnGrid g;
    g.step = step;
    g.calendar = align == Alignment::Calendar || (align == Alignment::Auto && series.dated);
    std::int64_t end;
    if (g.calendar) {
        g.origin = detail::floor_div(series.timestamps.front(), seconds_per_day) * seconds_per_day;
        end = -detail::floor_div(-series.timestamps.back(), seconds_per_day) * seconds_per_day;
    } else {
        g.origin = series.timestamps.front();
        end = series.timestamps.back();
    }
    const auto points = static_cast<std::size_t>((end - g.origin) / step) + 1;
    std::vector<double> log_price(points, 0.0);
    std::vector<bool> have(points, false);
    for (std::size_t i = 0; i < series.size(); ++i) {
        const std::int64_t off = series.timestamps[i] - g.origin;
        if (off % step != 0) continue;
        const auto k = static_cast<std::size_t>(off / step);
        if (k >= points) continue;
        log_price[k] = std::log(series.prices[i]);
        have[k] = true;
    }
    const std::size_t slots = points - 1;
    g.increments.assign(slots, 0.0);
    g.observed.assign(slots, false);
    for (std::size_t k = 0; k < slots; ++k) {
        if (have[k] && have[k + 1]) {
            g.increments[k] = log_price[k + 1] - log_price[k];
            g.observed[k] = true;
        }
    }
    return g;
}

struct ReturnWindow {
    std::string window_id;  // "YYYY-MM-DD" for calendar grids, else the window index
    IncrementSeries increments;
    double fill_fraction = 0.0;
    double scale = 0.0;     // sample SD of the filled window
    bool flagged = false;   // fill_fraction > 0.5
};

inline constexpr double fill_flag_threshold = 0.5;

inline double sample_sd(std::span<const double> x) {
    if (x.size() < 2) return 0.0;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

// Consecutive disjoint windows of n_t slots; trailing partial slots are
// dropped. Masked slots are drawn with replacement from the same window's
// observed increments.
inline std::vector<ReturnWindow> make_windows(const ReturnGrid& grid, std::size_t n_t, SeedSpec seed) {
    if (n_t < 1) throw InvalidArgument("make_windows: n_t must be positive");
    const std::size_t count = grid.size() / n_t;
    std::vector<ReturnWindow> out;
    out.reserve(count);
    std::vector<double> pool, values(n_t);
    for (std::size_t w = 0; w < count; ++w) {
        pool.clear();
        for (std::size_t k = w * n_t; k < (w + 1) * n_t; ++k)
            if (grid.observed[k]) pool.push_back(grid.increments[k]);
        if (pool.empty()) throw EmptyWindow(w);
        Rng rng(seed.child({stream_tag::gap_fill, w}));
        std::size_t filled = 0;
        for (std::size_t i = 0; i < n_t; ++i) {
            const std::size_t k = w * n_t + i;
            if (grid.observed[k]) {
                values[i] = grid.increments[k];
            } else {
                values[i] = pool[rng.below(pool.size())];
                ++filled;
            }
        }
        ReturnWindow win;
        const std::int64_t start = grid.origin + static_cast<std::int64_t>(w * n_t) * grid.step;
        win.window_id = grid.calendar ? detail::format_date(start) : std::to_string(w);
        win.fill_fraction = static_cast<double>(filled) / static_cast<double>(n_t);
        win.flagged = win.fill_fraction > fill_flag_threshold;
        win.scale = sample_sd(values);
        win.increments = IncrementSeries(values);
        out.push_back(std::move(win));
    }
    return out;
}

enum class RescaleMode { Variance, StdDev };

inline RescaleMode parse_rescale(std::string_view s) {
    if (s == "var") return RescaleMode::Variance;
    if (s == "sd") return RescaleMode::StdDev;
    throw InvalidArgument("unknown rescale mode '" + std::string(s) + "' (expected var, sd)");
}

inline std::string to_string(RescaleMode m) { return m == RescaleMode::Variance ? "var" : "sd"; }

// Multiplier mapping a unit-scale estimate of coordinate i back to data scale.
inline double rescale_factor(const ModelSpec& model, std::size_t i, double scale, RescaleMode mode) {
    const int power = model.scale_power(i);
    if (power == 0) return 1.0;
    if (mode == RescaleMode::StdDev) return scale;
    return power == 1 ? scale : std::pow(scale, power);
}

inline ParamVector rescale_params(const ParamVector& unit_scale, double scale, RescaleMode mode) {
    std::vector<double> v = unit_scale.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] *= rescale_factor(unit_scale.model(), i, scale, mode);
    return {unit_scale.model(), std::move(v)};
}

inline IncrementSeries standardize(const ReturnWindow& window) {
    if (!(window.scale > 0.0) || !std::isfinite(window.scale)) throw ZeroScale("window " + window.window_id + " has zero scale");
    std::vector<double> v = window.increments.values();
    for (double& x : v) x /= window.scale;
    return IncrementSeries(std::move(v));
}

// Estimates on data divided by its scale, mapped back to the data scale.
inline ParamVector rescaled_estimate(const DeepSetsEstimator& est, const ReturnWindow& window,
                                     RescaleMode mode = RescaleMode::Variance) {
    if (window.increments.size() != est.input_len())
        throw InputLengthMismatch(est.input_len(), window.increments.size());
    return rescale_params(est.forward(standardize(window)), window.scale, mode);
}

}  // namespace levynbe
