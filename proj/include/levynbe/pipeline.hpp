#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "levynbe/data.hpp"
#include "levynbe/deepsets.hpp"
#include "levynbe/error.hpp"
#include "levynbe/report_io.hpp"
#include "levynbe/uq.hpp"

namespace levynbe {

// Interval method for the pipeline: "none", "bootstrap:<B>" or "quantile".
struct UqSpec {
    enum class Kind { None, Bootstrap, Quantile };
    Kind kind = Kind::None;
    std::size_t replicates = default_bootstrap_replicates;

    static UqSpec parse(std::string_view s) {
        if (s == "none") return {Kind::None, 0};
        if (s == "quantile") return {Kind::Quantile, 0};
        if (s == "bootstrap") return {Kind::Bootstrap, default_bootstrap_replicates};
        if (s.starts_with("bootstrap:")) {
            const std::string rest(s.substr(10));
            std::size_t used = 0;
            unsigned long long b = 0;
            try {
                b = std::stoull(rest, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != rest.size()) throw InvalidArgument("bad bootstrap count in '" + std::string(s) + "'");
            if (b < 100) throw InvalidArgument("bootstrap needs B >= 100");
            return {Kind::Bootstrap, static_cast<std::size_t>(b)};
        }
        throw InvalidArgument("unknown uq method '" + std::string(s) + "' (expected bootstrap:<B>, quantile, none)");
    }

    std::string to_string() const {
        switch (kind) {
            case Kind::None: return "none";
            case Kind::Bootstrap: return "bootstrap:" + std::to_string(replicates);
            case Kind::Quantile: return "quantile";
        }
        return "?";
    }
};

struct PipelineOptions {
    std::int64_t step = 60;
    std::size_t n_t = 1440;
    Alignment align = Alignment::Auto;
    UqSpec uq{};
    double level = 0.9;
    RescaleMode rescale = RescaleMode::Variance;
    SeedSpec seed{};
};

struct WindowResult {
    std::string window_id;
    double fill_fraction = 0.0;
    double scale = 0.0;
    bool flagged = false;
    ParamVector estimate;
    std::optional<IntervalSet> interval;
};

struct PipelineResult {
    std::vector<WindowResult> windows;
    std::size_t total_slots = 0;
    std::size_t observed_slots = 0;
    double estimate_time = 0.0;  // seconds
    double uq_time = 0.0;        // seconds
};

namespace detail {
inline IntervalSet rescale_interval(const IntervalSet& s, double scale, RescaleMode mode) {
    IntervalSet out = s;
    out.point = rescale_params(s.point, scale, mode);
    out.lower = rescale_params(s.lower, scale, mode);
    out.upper = rescale_params(s.upper, scale, mode);
    return out;
}
}  // namespace detail

// Per-window point estimates (and intervals) on standardized data, mapped
// back to the data scale.
inline PipelineResult run_pipeline(const DeepSetsEstimator& est, const PriceSeries& prices, const PipelineOptions& opt,
                                   const QuantileBundle* bundle = nullptr) {
    if (est.input_len() != opt.n_t) throw InputLengthMismatch(est.input_len(), opt.n_t);
    if (opt.uq.kind == UqSpec::Kind::Quantile) {
        if (bundle == nullptr) throw InvalidArgument("quantile intervals need a quantile bundle");
        bundle->validate();
        if (bundle->point_est.input_len() != opt.n_t) throw InputLengthMismatch(opt.n_t, bundle->point_est.input_len());
    }
    const ReturnGrid grid = log_returns(prices, opt.step, opt.align);
    const auto windows = make_windows(grid, opt.n_t, opt.seed);

    PipelineResult out;
    out.total_slots = grid.size();
    for (bool b : grid.observed) out.observed_slots += b ? 1 : 0;

    std::vector<IncrementSeries> standardized;
    standardized.reserve(windows.size());
    for (const auto& w : windows) standardized.push_back(standardize(w));

    auto t0 = std::chrono::steady_clock::now();
    const auto unit_estimates = est.forward_many(standardized);
    out.estimate_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    t0 = std::chrono::steady_clock::now();
    for (std::size_t w = 0; w < windows.size(); ++w) {
        WindowResult r;
        r.window_id = windows[w].window_id;
        r.fill_fraction = windows[w].fill_fraction;
        r.scale = windows[w].scale;
        r.flagged = windows[w].flagged;
        r.estimate = rescale_params(unit_estimates[w], r.scale, opt.rescale);
        if (opt.uq.kind == UqSpec::Kind::Bootstrap) {
            const auto s = bootstrap_interval(est, standardized[w], opt.uq.replicates, opt.level,
                                              opt.seed.child({stream_tag::bootstrap, w}));
            r.interval = detail::rescale_interval(s, r.scale, opt.rescale);
        } else if (opt.uq.kind == UqSpec::Kind::Quantile) {
            r.interval = detail::rescale_interval(credible_interval(*bundle, standardized[w]), r.scale, opt.rescale);
        }
        out.windows.push_back(std::move(r));
    }
    out.uq_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

inline std::string pipeline_estimates_csv(const PipelineResult& r) {
    std::string out = "window_id,param,value\n";
    for (const auto& w : r.windows) {
        const auto names = w.estimate.model().param_names();
        for (std::size_t i = 0; i < names.size(); ++i)
            out += w.window_id + "," + names[i] + "," + format_double(w.estimate[i]) + "\n";
    }
    return out;
}

inline std::string pipeline_intervals_csv(const PipelineResult& r) {
    std::string out = interval_csv_header();
    for (const auto& w : r.windows)
        if (w.interval) out += interval_csv_rows(w.window_id, *w.interval);
    return out;
}

inline Json pipeline_report_json(const PipelineResult& r, const PipelineOptions& opt, const std::string& model) {
    Json windows = Json::array();
    std::size_t flagged = 0, crossings = 0;
    for (const auto& w : r.windows) {
        windows.push_back({{"window_id", w.window_id},
                           {"fill_fraction", w.fill_fraction},
                           {"scale", w.scale},
                           {"flagged", w.flagged}});
        flagged += w.flagged ? 1 : 0;
        if (w.interval) crossings += w.interval->crossings;
    }
    return {{"model", model},
            {"window_count", r.windows.size()},
            {"flagged_windows", flagged},
            {"total_slots", r.total_slots},
            {"observed_slots", r.observed_slots},
            {"interval_crossings", crossings},
            {"step_s", opt.step},
            {"n_t", opt.n_t},
            {"uq", opt.uq.to_string()},
            {"level", opt.level},
            {"rescale", to_string(opt.rescale)},
            {"seed", opt.seed.root_seed},
            {"windows", windows}};
}

// Writes estimates.csv, intervals.csv and report.json into `dir`. Timings
// are left out so the files are identical across reruns.
inline void write_pipeline_outputs(const PipelineResult& r, const PipelineOptions& opt, const std::string& model,
                                   const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_text_file(dir / "estimates.csv", pipeline_estimates_csv(r));
    write_text_file(dir / "intervals.csv", pipeline_intervals_csv(r));
    write_text_file(dir / "report.json", pipeline_report_json(r, opt, model).dump(2) + "\n");
}

}  // namespace levynbe
