#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "levynbe/deepsets.hpp"
#include "levynbe/error.hpp"
#include "levynbe/levy_models.hpp"
#include "levynbe/random.hpp"
#include "levynbe/train.hpp"

namespace levynbe {

enum class IntervalMethod { Bootstrap, PosteriorQuantile };

inline std::string to_string(IntervalMethod m) {
    return m == IntervalMethod::Bootstrap ? "bootstrap" : "quantile";
}

// Elementwise interval around a point estimate; lower <= upper, all inside
// the prior box.
struct IntervalSet {
    ParamVector point;
    ParamVector lower;
    ParamVector upper;
    double level = 0.9;
    IntervalMethod method = IntervalMethod::Bootstrap;
    std::size_t crossings = 0;  // coordinates swapped because lower > upper
};

// Type-7 (linear interpolation) empirical quantile of sorted values.
inline double quantile_type7(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw EmptyInput("quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("quantile probability must lie in [0, 1]");
    const double h = static_cast<double>(sorted.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

inline constexpr std::size_t default_bootstrap_replicates = 400;

// Nonparametric bootstrap over increments. Embeddings are computed once for
// the observed data; each replicate aggregates the embeddings of its
// resampled indices, which equals a forward pass on the resampled series.
inline IntervalSet bootstrap_interval(const DeepSetsEstimator& est, const IncrementSeries& data, std::size_t B,
                                      double level, SeedSpec seed) {
    if (data.size() != est.input_len()) throw InputLengthMismatch(est.input_len(), data.size());
    if (B < 100) throw InvalidArgument("bootstrap needs B >= 100");
    if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("interval level must lie in (0, 1)");

    const Eigen::MatrixXd emb = est.embed(data.values());
    const auto n = emb.cols();
    const auto m = emb.rows();
    const Eigen::MatrixXd point_unit = est.unit_from_summary(est.aggregate(emb));

    Rng rng(seed.child({stream_tag::bootstrap}));
    Eigen::MatrixXd resampled(m, n);
    Eigen::MatrixXd stats(m, static_cast<Eigen::Index>(B));
    for (std::size_t b = 0; b < B; ++b) {
        for (Eigen::Index i = 0; i < n; ++i) resampled.col(i) = emb.col(static_cast<Eigen::Index>(rng.below(n)));
        stats.col(static_cast<Eigen::Index>(b)) = est.aggregate(resampled);
    }
    const Eigen::MatrixXd unit = est.unit_from_summary(stats);

    const std::size_t d = est.output_box().size();
    std::vector<double> lo(d), hi(d), column(B);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t b = 0; b < B; ++b)
            column[b] = unit(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b));
        std::sort(column.begin(), column.end());
        lo[i] = quantile_type7(column, (1.0 - level) / 2.0);
        hi[i] = quantile_type7(column, (1.0 + level) / 2.0);
    }
    const Eigen::Map<const Eigen::VectorXd> lo_unit(lo.data(), static_cast<Eigen::Index>(d));
    const Eigen::Map<const Eigen::VectorXd> hi_unit(hi.data(), static_cast<Eigen::Index>(d));
    return {est.to_params(point_unit.col(0)), est.to_params(lo_unit), est.to_params(hi_unit), level,
            IntervalMethod::Bootstrap, 0};
}

struct QuantileBundle {
    DeepSetsEstimator lower_est;
    DeepSetsEstimator upper_est;
    DeepSetsEstimator point_est;
    double level = 0.9;

    void validate() const {
        if (!(lower_est.output_box() == upper_est.output_box()) || !(lower_est.output_box() == point_est.output_box()))
            throw ModelMismatch("quantile bundle members disagree on model or prior box");
        if (lower_est.input_len() != upper_est.input_len() || lower_est.input_len() != point_est.input_len())
            throw InvalidArgument("quantile bundle members disagree on input length");
        if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("interval level must lie in (0, 1)");
    }
};

struct QuantileBundleResult {
    QuantileBundle bundle;
    TrainReport lower_report;
    TrainReport upper_report;
    TrainReport point_report;
};

inline std::pair<double, double> quantile_levels(double level) {
    if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("interval level must lie in (0, 1)");
    return {(1.0 - level) / 2.0, (1.0 + level) / 2.0};
}

// Trains point, lower and upper estimators on one shared simulation pool.
inline QuantileBundleResult train_quantile_bundle_on_pool(const TrainingPool& pool, const TrainConfig& cfg,
                                                          double level) {
    const auto [a_lo, a_hi] = quantile_levels(level);
    TrainConfig lo_cfg = cfg, hi_cfg = cfg;
    lo_cfg.loss = LossKind::linlin(a_lo);
    hi_cfg.loss = LossKind::linlin(a_hi);
    auto point = train_on_pool(pool, cfg);
    auto lower = train_on_pool(pool, lo_cfg);
    auto upper = train_on_pool(pool, hi_cfg);
    return {{std::move(lower.estimator), std::move(upper.estimator), std::move(point.estimator), level},
            std::move(lower.report),
            std::move(upper.report),
            std::move(point.report)};
}

inline QuantileBundleResult train_quantile_bundle(const ModelSpec& model, const PriorBox& prior, const TrainConfig& cfg,
                                                  double level) {
    if (!(prior.model() == model)) throw ModelMismatch("train_quantile_bundle: prior box model differs");
    quantile_levels(level);
    return train_quantile_bundle_on_pool(simulate_pool(prior, cfg), cfg, level);
}

// Lower/upper quantile estimates before any swap; used for crossing rates.
struct RawQuantiles {
    ParamVector lower;
    ParamVector upper;
};

inline RawQuantiles raw_quantiles(const QuantileBundle& bundle, const IncrementSeries& data) {
    return {bundle.lower_est.forward(data), bundle.upper_est.forward(data)};
}

inline IntervalSet credible_interval(const QuantileBundle& bundle, const IncrementSeries& data) {
    bundle.validate();
    auto raw = raw_quantiles(bundle, data);
    std::vector<double> lo = raw.lower.values(), hi = raw.upper.values();
    std::size_t crossings = 0;
    for (std::size_t i = 0; i < lo.size(); ++i) {
        if (lo[i] > hi[i]) {
            std::swap(lo[i], hi[i]);
            ++crossings;
        }
    }
    const ModelSpec& model = bundle.point_est.model();
    return {bundle.point_est.forward(data), ParamVector(model, std::move(lo)), ParamVector(model, std::move(hi)),
            bundle.level, IntervalMethod::PosteriorQuantile, crossings};
}

// True where the closed intervals do not intersect.
inline std::vector<bool> intervals_disjoint(const IntervalSet& a, const IntervalSet& b) {
    if (!(a.lower.model() == b.lower.model())) throw ModelMismatch("intervals_disjoint: models differ");
    if (a.level != b.level) throw InvalidArgument("intervals_disjoint: levels differ");
    std::vector<bool> out(a.lower.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.upper[i] < b.lower[i] || b.upper[i] < a.lower[i];
    return out;
}

}  // namespace levynbe
