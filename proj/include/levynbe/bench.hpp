#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "levynbe/classical.hpp"
#include "levynbe/deepsets.hpp"
#include "levynbe/ecf.hpp"
#include "levynbe/error.hpp"
#include "levynbe/levy_models.hpp"
#include "levynbe/random.hpp"
#include "levynbe/train.hpp"

namespace levynbe {

struct MetricRow {
    std::string param_name;
    double rmse = 0.0;
    double bias = 0.0;
    double sd = 0.0;
    double nrmse = 0.0;
    std::optional<double> mape;  // absent when some |truth| < 1e-12
};

inline constexpr double mape_guard = 1e-12;

inline std::vector<MetricRow> metrics(std::span<const ParamVector> estimates, std::span<const ParamVector> truths,
                                      const PriorBox& prior) {
    if (estimates.empty() || truths.empty()) throw EmptyInput("metrics: no estimates");
    if (estimates.size() != truths.size()) throw InvalidArgument("metrics: estimate and truth counts differ");
    for (std::size_t k = 0; k < estimates.size(); ++k)
        if (!(estimates[k].model() == prior.model()) || !(truths[k].model() == prior.model()))
            throw ModelMismatch("metrics: parameter model differs from the prior box");

    const auto n = static_cast<double>(estimates.size());
    const auto names = prior.model().param_names();
    std::vector<MetricRow> rows;
    for (std::size_t i = 0; i < prior.size(); ++i) {
        double sq = 0.0, err = 0.0, rel = 0.0;
        bool mape_ok = true;
        for (std::size_t k = 0; k < estimates.size(); ++k) {
            const double e = estimates[k][i] - truths[k][i];
            sq += e * e;
            err += e;
            if (std::abs(truths[k][i]) < mape_guard) mape_ok = false;
            else rel += std::abs(e) / std::abs(truths[k][i]);
        }
        MetricRow row;
        row.param_name = names[i];
        row.rmse = std::sqrt(sq / n);
        row.bias = err / n;
        row.sd = std::sqrt(std::max(0.0, row.rmse * row.rmse - row.bias * row.bias));
        row.nrmse = row.rmse / prior.width(i);
        if (mape_ok) row.mape = rel / n;
        rows.push_back(std::move(row));
    }
    return rows;
}

// Trapezoidal quadrature nodes for l2f_distance. Zero is allowed here.
inline std::vector<double> l2f_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi > lo)) throw InvalidArgument("l2f_grid: need lo < hi and step > 0");
    const auto count = static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
    std::vector<double> w(count);
    for (std::size_t k = 0; k < count; ++k) w[k] = lo + step * static_cast<double>(k);
    return w;
}

inline const std::vector<double>& default_l2f_grid() {
    static const std::vector<double> grid = l2f_grid(0.05, 20.0, 0.05);
    return grid;
}

// sqrt of the trapezoidal integral of |phi(w, a) - phi(w, b)|^2.
inline double l2f_distance(const ParamVector& a, const ParamVector& b, std::span<const double> omegas) {
    if (!(a.model() == b.model())) throw ModelMismatch("l2f_distance: models differ");
    if (omegas.size() < 2) throw InvalidArgument("l2f_distance: grid needs at least 2 points");
    for (std::size_t k = 1; k < omegas.size(); ++k)
        if (!(omegas[k] > omegas[k - 1])) throw InvalidArgument("l2f_distance: grid must be strictly increasing");
    auto f = [&](double w) { return std::norm(char_fn(a, w) - char_fn(b, w)); };
    double total = 0.0, prev = f(omegas[0]);
    for (std::size_t k = 1; k < omegas.size(); ++k) {
        const double cur = f(omegas[k]);
        total += 0.5 * (omegas[k] - omegas[k - 1]) * (prev + cur);
        prev = cur;
    }
    return std::sqrt(total);
}

inline double l2f_distance(const ParamVector& a, const ParamVector& b, const FrequencyGrid& grid) {
    return l2f_distance(a, b, std::span<const double>(grid.omegas()));
}

inline double l2f_distance(const ParamVector& a, const ParamVector& b) {
    return l2f_distance(a, b, std::span<const double>(default_l2f_grid()));
}

enum class BenchMethod { NBE, LSQ, MELE };

inline std::string to_string(BenchMethod m) {
    switch (m) {
        case BenchMethod::NBE: return "nbe";
        case BenchMethod::LSQ: return "lsq";
        case BenchMethod::MELE: return "mele";
    }
    return "?";
}

inline BenchMethod parse_bench_method(std::string_view s) {
    if (s == "nbe") return BenchMethod::NBE;
    if (s == "lsq") return BenchMethod::LSQ;
    if (s == "mele") return BenchMethod::MELE;
    throw InvalidArgument("unknown method '" + std::string(s) + "' (expected nbe, lsq, mele)");
}

struct ScaleConfig {
    std::size_t n_test = 200;
    std::size_t n_t = 250;  // increments per test set; overrides train.n_t
    TrainConfig train{};    // NBE only
    std::size_t grid_count = default_lsq_grid_count;
    int restarts = default_lsq_restarts;
    std::size_t mele_grid_count = default_mele_grid_count;
    int mele_lsq_restarts = 3;
    std::size_t mele_budget = 0;  // evaluate only this many test sets; 0 evaluates all
};

struct BenchmarkReport {
    ModelSpec model;
    BenchMethod method = BenchMethod::NBE;
    std::vector<MetricRow> rows;
    double est_time = 0.0;                // seconds, estimation loop only
    std::optional<double> train_time;     // NBE only
    bool est_time_extrapolated = false;   // MELE budget in effect
    std::size_t n_evaluated = 0;
    ScaleConfig config;
    PriorBox prior;
    std::uint64_t seed_root = 0, seed_stream = 0;
    std::vector<ParamVector> truths;
    std::vector<ParamVector> estimates;
};

struct TestSets {
    std::vector<ParamVector> truths;
    std::vector<IncrementSeries> datasets;
    std::size_t underflow_retries = 0;
    std::size_t redraws = 0;
};

// Prior-drawn test sets with the same underflow policy as the training
// pool. Depends only on (prior, count, n_t, seed).
inline TestSets simulate_test_sets(const PriorBox& prior, std::size_t count, std::size_t n_t, SeedSpec seed) {
    if (count == 0) throw EmptyInput("no test sets requested");
    if (n_t < 1) throw InvalidArgument("test sets need n_t >= 1");
    const SeedSpec base = seed.child({stream_tag::test_set});
    TestSets out;
    out.truths = sample_prior(prior, count, base.child({stream_tag::prior}));
    for (std::size_t k = 0; k < count; ++k) {
        for (int redraw = 0;; ++redraw) {
            bool done = false;
            for (int attempt = 0; attempt < pool_dataset_retries && !done; ++attempt) {
                try {
                    out.datasets.push_back(simulate_increments(
                        out.truths[k], n_t + 1,
                        base.child({stream_tag::simulate, k, static_cast<std::uint64_t>(attempt),
                                    static_cast<std::uint64_t>(redraw)})));
                    done = true;
                } catch (const GammaShapeUnderflow&) {
                    ++out.underflow_retries;
                }
            }
            if (done) break;
            if (redraw >= pool_max_redraws) throw GammaShapeUnderflow(0.0);
            ++out.redraws;
            out.truths[k] = sample_prior(prior, 1, base.child({stream_tag::redraw, k,
                                                               static_cast<std::uint64_t>(redraw)}))[0];
        }
    }
    return out;
}

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline BenchmarkReport finish_report(const ModelSpec& model, const PriorBox& prior, BenchMethod method,
                                     const ScaleConfig& cfg, SeedSpec seed, std::vector<ParamVector> truths,
                                     std::vector<ParamVector> estimates) {
    BenchmarkReport rep;
    rep.model = model;
    rep.method = method;
    rep.config = cfg;
    rep.prior = prior;
    rep.seed_root = seed.root_seed;
    rep.seed_stream = seed.stream_id;
    rep.n_evaluated = estimates.size();
    truths.resize(estimates.size());
    rep.rows = metrics(estimates, truths, prior);
    rep.truths = std::move(truths);
    rep.estimates = std::move(estimates);
    return rep;
}

}  // namespace detail

// Benchmarks a trained estimator on the test sets for (prior, cfg, seed).
inline BenchmarkReport run_benchmark_with(const DeepSetsEstimator& est, const PriorBox& prior, const ScaleConfig& cfg,
                                          SeedSpec seed, std::optional<double> train_time = std::nullopt) {
    if (!(est.output_box() == prior)) throw ModelMismatch("run_benchmark: estimator prior box differs");
    if (est.input_len() != cfg.n_t) throw InputLengthMismatch(est.input_len(), cfg.n_t);
    auto tests = simulate_test_sets(prior, cfg.n_test, cfg.n_t, seed);
    const auto t0 = std::chrono::steady_clock::now();
    auto estimates = est.forward_many(tests.datasets);
    const double est_time = detail::seconds_since(t0);
    auto rep = detail::finish_report(prior.model(), prior, BenchMethod::NBE, cfg, seed, std::move(tests.truths),
                                     std::move(estimates));
    rep.est_time = est_time;
    rep.train_time = train_time;
    return rep;
}

inline BenchmarkReport run_benchmark(const ModelSpec& model, const PriorBox& prior, BenchMethod method,
                                     const ScaleConfig& cfg, SeedSpec seed) {
    if (!(prior.model() == model)) throw ModelMismatch("run_benchmark: prior box model differs");
    if (cfg.n_test == 0) throw EmptyInput("run_benchmark: zero test sets");

    if (method == BenchMethod::NBE) {
        TrainConfig tc = cfg.train;
        tc.n_t = cfg.n_t;
        auto trained = train(model, prior, tc);
        return run_benchmark_with(trained.estimator, prior, cfg, seed,
                                  trained.report.wall_time + trained.report.simulation_time);
    }

    auto tests = simulate_test_sets(prior, cfg.n_test, cfg.n_t, seed);
    std::size_t count = tests.datasets.size();
    if (method == BenchMethod::MELE && cfg.mele_budget > 0) count = std::min(count, cfg.mele_budget);

    std::vector<ParamVector> estimates;
    estimates.reserve(count);
    const SeedSpec fit_seed = seed.child({stream_tag::restart});
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t k = 0; k < count; ++k) {
        const auto& data = tests.datasets[k];
        if (method == BenchMethod::LSQ) {
            const auto grid = default_grid(data, cfg.grid_count);
            estimates.push_back(lsq_fit(data, model, prior, grid, cfg.restarts, fit_seed.child({k})).estimate);
        } else {
            const auto grid = default_grid(data, cfg.mele_grid_count);
            MeleOptions opt;
            opt.lsq_restarts = cfg.mele_lsq_restarts;
            estimates.push_back(mele_fit(data, model, prior, grid, fit_seed.child({k}), opt).estimate);
        }
    }
    double est_time = detail::seconds_since(t0);
    auto rep = detail::finish_report(model, prior, method, cfg, seed, std::move(tests.truths), std::move(estimates));
    if (count < cfg.n_test) {
        est_time *= static_cast<double>(cfg.n_test) / static_cast<double>(count);
        rep.est_time_extrapolated = true;
    }
    rep.est_time = est_time;
    return rep;
}

enum class SweepAxis { InputLen, PriorDraws, Aggregation, Activation };

inline SweepAxis parse_sweep_axis(std::string_view s) {
    if (s == "nt") return SweepAxis::InputLen;
    if (s == "k") return SweepAxis::PriorDraws;
    if (s == "agg") return SweepAxis::Aggregation;
    if (s == "act") return SweepAxis::Activation;
    throw InvalidArgument("unknown sweep axis '" + std::string(s) + "' (expected nt, k, agg, act)");
}

inline std::string to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::InputLen: return "nt";
        case SweepAxis::PriorDraws: return "k";
        case SweepAxis::Aggregation: return "agg";
        case SweepAxis::Activation: return "act";
    }
    return "?";
}

// Applies one sweep value to a copy of the base config.
inline ScaleConfig apply_sweep_value(ScaleConfig cfg, SweepAxis axis, const std::string& value) {
    auto as_count = [&](const std::string& v) {
        std::size_t used = 0;
        unsigned long long x = 0;
        try {
            x = std::stoull(v, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != v.size() || x == 0)
            throw InvalidArgument("sweep value '" + v + "' is not a positive integer");
        return static_cast<std::size_t>(x);
    };
    switch (axis) {
        case SweepAxis::InputLen: cfg.n_t = as_count(value); break;
        case SweepAxis::PriorDraws: cfg.train.K = as_count(value); break;
        case SweepAxis::Aggregation: cfg.train.arch.aggregation = parse_aggregation(value); break;
        case SweepAxis::Activation: cfg.train.arch.activation = parse_activation(value); break;
    }
    return cfg;
}

// One NBE report per axis value. Training and test seeds are shared, so
// reports differ only in the swept setting.
inline std::vector<BenchmarkReport> sweep(const ModelSpec& model, const PriorBox& prior, SweepAxis axis,
                                          const std::vector<std::string>& values, const ScaleConfig& base,
                                          SeedSpec seed) {
    if (values.size() < 2) throw InvalidArgument("sweep needs at least 2 values on the axis");
    std::vector<ScaleConfig> configs;
    for (const auto& v : values) configs.push_back(apply_sweep_value(base, axis, v));
    std::vector<BenchmarkReport> out;
    for (const auto& cfg : configs) out.push_back(run_benchmark(model, prior, BenchMethod::NBE, cfg, seed));
    return out;
}

// Pearson correlation of two equally long samples.
inline double correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("correlation needs two equal samples of size >= 2");
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace levynbe
