#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "levynbe/uq.hpp"

using namespace levynbe;

namespace {

const ModelSpec cp = ModelSpec::compound_poisson();

DeepSetsEstimator random_estimator(const PriorBox& box, std::size_t n, std::uint64_t seed,
                                   Aggregation agg = Aggregation::Mean) {
    Architecture arch;
    arch.embed_dim = 8;
    arch.hidden_width = 8;
    arch.hidden_layers = 2;
    arch.aggregation = agg;
    auto est = DeepSetsEstimator::create(box, n, arch);
    est.init_weights(SeedSpec{seed, 0});
    return est;
}

IntervalSet make_interval(std::vector<double> lo, std::vector<double> hi, double level = 0.9) {
    ParamVector l(cp, lo), u(cp, hi);
    return {l, l, u, level, IntervalMethod::Bootstrap, 0};
}

}  // namespace

TEST(Quantile, Type7MatchesLinearInterpolation) {
    const std::vector<double> v{1.0, 2.0, 4.0, 8.0};
    EXPECT_DOUBLE_EQ(quantile_type7(v, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(quantile_type7(v, 1.0), 8.0);
    EXPECT_DOUBLE_EQ(quantile_type7(v, 0.5), 3.0);
    EXPECT_DOUBLE_EQ(quantile_type7(v, 0.25), 1.75);
    EXPECT_DOUBLE_EQ(quantile_type7(v, 0.9), 6.8);
    const std::vector<double> one{5.0};
    EXPECT_DOUBLE_EQ(quantile_type7(one, 0.3), 5.0);
    EXPECT_THROW(quantile_type7(std::vector<double>{}, 0.5), EmptyInput);
    EXPECT_THROW(quantile_type7(v, 1.5), InvalidArgument);
}

TEST(Bootstrap, ConstantDataGivesZeroWidthAtPoint) {
    const auto box = PriorBox::standard(cp);
    const auto est = random_estimator(box, 50, 3);
    const IncrementSeries data(std::vector<double>(50, 0.013));
    const auto iv = bootstrap_interval(est, data, 200, 0.9, SeedSpec{1, 0});
    const auto point = est.forward(data);
    for (std::size_t i = 0; i < box.size(); ++i) {
        EXPECT_NEAR(iv.lower[i], iv.upper[i], 1e-14);
        EXPECT_NEAR(iv.lower[i], point[i], 1e-14);
        EXPECT_NEAR(iv.point[i], point[i], 1e-14);
    }
}

TEST(Bootstrap, DeterministicAndSeedSensitive) {
    const auto box = PriorBox::standard(cp);
    const auto est = random_estimator(box, 100, 4);
    const auto data = simulate_increments(ParamVector(cp, {0.6, 0.1, 0.05}), 101, SeedSpec{5, 0});
    const auto a = bootstrap_interval(est, data, 300, 0.9, SeedSpec{7, 0});
    const auto b = bootstrap_interval(est, data, 300, 0.9, SeedSpec{7, 0});
    const auto c = bootstrap_interval(est, data, 300, 0.9, SeedSpec{8, 0});
    EXPECT_EQ(a.lower, b.lower);
    EXPECT_EQ(a.upper, b.upper);
    EXPECT_NE(a.lower, c.lower);
}

TEST(Bootstrap, EqualsForwardPassesOnResampledSeries) {
    const auto box = PriorBox::standard(ModelSpec::merton());
    for (auto agg : {Aggregation::Mean, Aggregation::Max, Aggregation::Product}) {
        const auto est = random_estimator(box, 40, 6, agg);
        const auto data = simulate_increments(ParamVector(ModelSpec::merton(), {0.0, 0.04, 1.0, 0.0, 0.02}), 41,
                                              SeedSpec{9, 0});
        const SeedSpec seed{11, 2};
        const std::size_t B = 150;
        const double level = 0.8;

        Rng rng(seed.child({stream_tag::bootstrap}));
        std::vector<std::vector<double>> per_param(box.size());
        for (std::size_t b = 0; b < B; ++b) {
            std::vector<double> v(data.size());
            for (auto& x : v) x = data[rng.below(data.size())];
            const auto est_b = est.forward(IncrementSeries(v));
            for (std::size_t i = 0; i < box.size(); ++i) per_param[i].push_back(est_b[i]);
        }
        const auto iv = bootstrap_interval(est, data, B, level, seed);
        for (std::size_t i = 0; i < box.size(); ++i) {
            std::sort(per_param[i].begin(), per_param[i].end());
            const double tol = 1e-10 * box.width(i);
            EXPECT_NEAR(iv.lower[i], quantile_type7(per_param[i], 0.1), tol) << to_string(agg);
            EXPECT_NEAR(iv.upper[i], quantile_type7(per_param[i], 0.9), tol) << to_string(agg);
        }
    }
}

TEST(Bootstrap, IntervalsOrderedInsideBoxAndContainPoint) {
    const auto box = PriorBox::standard(cp);
    const auto est = random_estimator(box, 200, 12);
    for (std::uint64_t t = 0; t < 20; ++t) {
        const auto truth = sample_prior(box, 1, SeedSpec{t, 5})[0];
        const auto data = simulate_increments(truth, 201, SeedSpec{t, 6});
        const auto iv = bootstrap_interval(est, data, 400, 0.9, SeedSpec{t, 7});
        for (std::size_t i = 0; i < box.size(); ++i) {
            EXPECT_LE(iv.lower[i], iv.upper[i]);
            EXPECT_TRUE(box.contains(iv.lower));
            EXPECT_TRUE(box.contains(iv.upper));
            EXPECT_LE(iv.lower[i], iv.point[i]);
            EXPECT_GE(iv.upper[i], iv.point[i]);
        }
    }
}

TEST(Bootstrap, WidensWeaklyWithLevel) {
    const auto box = PriorBox::standard(cp);
    const auto est = random_estimator(box, 120, 13);
    const auto data = simulate_increments(ParamVector(cp, {1.0, -0.2, 0.3}), 121, SeedSpec{2, 0});
    std::vector<double> widths_prev(box.size(), 0.0);
    for (double level : {0.5, 0.8, 0.9, 0.95, 0.99}) {
        const auto iv = bootstrap_interval(est, data, 200, level, SeedSpec{3, 0});
        for (std::size_t i = 0; i < box.size(); ++i) {
            const double w = iv.upper[i] - iv.lower[i];
            EXPECT_GE(w, widths_prev[i]);
            widths_prev[i] = w;
        }
    }
}

TEST(Bootstrap, RejectsBadArguments) {
    const auto est = random_estimator(PriorBox::standard(cp), 30, 1);
    const IncrementSeries ok(std::vector<double>(30, 0.1)), bad(std::vector<double>(29, 0.1));
    EXPECT_THROW(bootstrap_interval(est, bad, 200, 0.9, SeedSpec{}), InputLengthMismatch);
    EXPECT_THROW(bootstrap_interval(est, ok, 99, 0.9, SeedSpec{}), InvalidArgument);
    EXPECT_THROW(bootstrap_interval(est, ok, 200, 1.0, SeedSpec{}), InvalidArgument);
}

TEST(QuantileBundle, LevelsAreSymmetricTails) {
    const auto [lo, hi] = quantile_levels(0.9);
    EXPECT_NEAR(lo, 0.05, 1e-15);
    EXPECT_NEAR(hi, 0.95, 1e-15);
    EXPECT_THROW(quantile_levels(0.0), InvalidArgument);
    EXPECT_THROW(quantile_levels(1.0), InvalidArgument);
}

TEST(QuantileBundle, CrossingsAreSwappedAndCounted) {
    const auto box = PriorBox::standard(cp);
    auto high = DeepSetsEstimator::create(box, 10, Architecture{});
    auto low = high;
    high.inference().biases().back()[0] = 2.0;   // coordinate 0: "lower" estimator sits high
    low.inference().biases().back()[0] = -2.0;
    high.inference().biases().back()[1] = -1.0;  // coordinate 1 stays ordered
    low.inference().biases().back()[1] = 1.0;
    const QuantileBundle bundle{high, low, DeepSetsEstimator::create(box, 10, Architecture{}), 0.9};
    const IncrementSeries data(std::vector<double>(10, 0.0));
    const auto raw = raw_quantiles(bundle, data);
    EXPECT_GT(raw.lower[0], raw.upper[0]);
    const auto iv = credible_interval(bundle, data);
    EXPECT_EQ(iv.crossings, 1u);
    EXPECT_EQ(iv.method, IntervalMethod::PosteriorQuantile);
    EXPECT_EQ(iv.lower[0], raw.upper[0]);
    EXPECT_EQ(iv.upper[0], raw.lower[0]);
    EXPECT_EQ(iv.lower[1], raw.lower[1]);
    EXPECT_EQ(iv.upper[1], raw.upper[1]);
    EXPECT_TRUE(box.contains(iv.lower) && box.contains(iv.upper));
    EXPECT_THROW(credible_interval(bundle, IncrementSeries(std::vector<double>(9, 0.0))), InputLengthMismatch);
}

TEST(QuantileBundle, MembersMustAgree) {
    const auto a = DeepSetsEstimator::create(PriorBox::standard(cp), 10, Architecture{});
    const auto b = DeepSetsEstimator::create(PriorBox::standard(cp), 11, Architecture{});
    const auto c = DeepSetsEstimator::create(PriorBox::standard(ModelSpec::variance_gamma()), 10, Architecture{});
    EXPECT_THROW((QuantileBundle{a, b, a, 0.9}.validate()), InvalidArgument);
    EXPECT_THROW((QuantileBundle{a, c, a, 0.9}.validate()), ModelMismatch);
    EXPECT_NO_THROW((QuantileBundle{a, a, a, 0.9}.validate()));
}

TEST(QuantileBundle, MembersTrainOnOneSharedPool) {
    const auto box = PriorBox::standard(cp);
    TrainConfig cfg;
    cfg.K = 60;
    cfg.J = 2;
    cfg.n_t = 30;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    cfg.arch.embed_dim = 8;
    cfg.arch.hidden_width = 8;
    cfg.arch.hidden_layers = 1;
    cfg.seed = SeedSpec{21, 0};
    const auto res = train_quantile_bundle(cp, box, cfg, 0.8);
    EXPECT_EQ(res.bundle.level, 0.8);

    const auto pool = simulate_pool(box, cfg);
    EXPECT_TRUE(train_on_pool(pool, cfg).estimator == res.bundle.point_est);
    const auto [a_lo, a_hi] = quantile_levels(0.8);
    auto lo_cfg = cfg;
    lo_cfg.loss = LossKind::linlin(a_lo);
    EXPECT_TRUE(train_on_pool(pool, lo_cfg).estimator == res.bundle.lower_est);
    auto hi_cfg = cfg;
    hi_cfg.loss = LossKind::linlin(a_hi);
    EXPECT_TRUE(train_on_pool(pool, hi_cfg).estimator == res.bundle.upper_est);
    EXPECT_THROW(train_quantile_bundle(cp, PriorBox::standard(ModelSpec::merton()), cfg, 0.8), ModelMismatch);
}

TEST(Disjoint, ClosedIntervalConvention) {
    const auto a = make_interval({0.2, 0.0, 0.1}, {0.4, 0.1, 0.2});
    EXPECT_EQ(intervals_disjoint(a, a), (std::vector<bool>{false, false, false}));
    const auto b = make_interval({0.5, 0.1, 0.05}, {0.6, 0.2, 0.15});
    // Coordinate 0 separated, coordinate 1 touches at 0.1, coordinate 2 overlaps.
    EXPECT_EQ(intervals_disjoint(a, b), (std::vector<bool>{true, false, false}));
    EXPECT_EQ(intervals_disjoint(b, a), (std::vector<bool>{true, false, false}));
}

TEST(Disjoint, RequiresMatchingModelAndLevel) {
    const auto a = make_interval({0.2, 0.0, 0.1}, {0.4, 0.1, 0.2});
    const auto other_level = make_interval({0.2, 0.0, 0.1}, {0.4, 0.1, 0.2}, 0.95);
    EXPECT_THROW(intervals_disjoint(a, other_level), InvalidArgument);
    const ParamVector v(ModelSpec::variance_gamma(), {0.0, 0.5, 0.5});
    const IntervalSet vg{v, v, v, 0.9, IntervalMethod::Bootstrap, 0};
    EXPECT_THROW(intervals_disjoint(a, vg), ModelMismatch);
}
