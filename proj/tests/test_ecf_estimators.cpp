#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "levynbe/classical.hpp"
#include "levynbe/ecf.hpp"
#include "levynbe/nelder_mead.hpp"

using namespace levynbe;

namespace {

const ModelSpec cp = ModelSpec::compound_poisson();

}  // namespace

TEST(FrequencyGrid, ValidatesEntries) {
    EXPECT_THROW(FrequencyGrid({0.0, 1.0}), InvalidArgument);
    EXPECT_THROW(FrequencyGrid({1.0, 1.0}), InvalidArgument);
    EXPECT_THROW(FrequencyGrid({2.0, 1.0}), InvalidArgument);
    EXPECT_THROW(FrequencyGrid({1.0, std::numeric_limits<double>::infinity()}), InvalidArgument);
    EXPECT_NO_THROW(FrequencyGrid({-1.0, 0.5, 3.0}));
}

TEST(Ecf, ZeroDataGivesUnitValues) {
    const IncrementSeries zeros(std::vector<double>(50, 0.0));
    const auto t = ecf(zeros, FrequencyGrid({0.5, 3.0, 40.0}));
    for (const auto& v : t.values) EXPECT_EQ(v, ComplexValue(1.0, 0.0));
}

TEST(Ecf, SingleIncrementIsOnePhasor) {
    const double x = 0.37, w = 2.9;
    const auto t = ecf(IncrementSeries({x}), FrequencyGrid({w}));
    EXPECT_DOUBLE_EQ(t.values[0].real(), std::cos(w * x));
    EXPECT_DOUBLE_EQ(t.values[0].imag(), std::sin(w * x));
}

TEST(Ecf, MonteCarloAgreementAtUnitFrequency) {
    const ParamVector p(cp, {0.5, 0.2, 0.04});
    const auto data = simulate_increments(p, 1000001, SeedSpec{101, 0});
    const auto t = ecf(data, FrequencyGrid({1.0}));
    EXPECT_LT(std::abs(t.values[0] - char_fn(p, 1.0)), 0.005);
}

TEST(Ecf, ModulusBoundedAndEmptyRejected) {
    const auto data = simulate_increments(ParamVector(cp, {1.0, 0.3, 0.1}), 2000, SeedSpec{1, 0});
    const auto t = ecf(data, FrequencyGrid::equally_spaced(50.0, 40));
    for (const auto& v : t.values) EXPECT_LE(std::abs(v), 1.0 + 1e-12);
    EXPECT_THROW(ecf(IncrementSeries(std::vector<double>{}), FrequencyGrid({1.0})), EmptyInput);
}

TEST(LsqObjective, SelfMatchIsExactlyZero) {
    for (const auto& m : {cp, ModelSpec::merton(), ModelSpec::variance_gamma(), ModelSpec::deep_variance_gamma(2)}) {
        for (const auto& p : sample_prior(PriorBox::standard(m), 20, SeedSpec{5, 0})) {
            const auto grid = FrequencyGrid::equally_spaced(25.0, 17);
            EXPECT_EQ(lsq_objective(p, cf_table(p, grid)), 0.0);
        }
    }
}

TEST(LsqObjective, InvariantToJointPermutation) {
    const ParamVector truth(cp, {0.6, 0.1, 0.05}), other(cp, {0.9, -0.1, 0.1});
    const auto data = simulate_increments(truth, 3000, SeedSpec{8, 0});
    const auto grid = FrequencyGrid::equally_spaced(30.0, 12);
    const auto table = ecf(data, grid);
    // Same pairs, reversed order; FrequencyGrid forbids unsorted grids, so
    // mirror the frequencies to negative values and conjugate.
    std::vector<double> w;
    std::vector<ComplexValue> v;
    for (std::size_t k = grid.size(); k-- > 0;) {
        w.push_back(-grid[k]);
        v.push_back(std::conj(table.values[k]));
    }
    const EcfTable mirrored{FrequencyGrid(w), v};
    EXPECT_NEAR(lsq_objective(other, table), lsq_objective(other, mirrored), 1e-12);

    // A true reordering of the summands.
    double forward = 0.0, backward = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) forward += std::norm(char_fn(other, grid[k]) - table.values[k]);
    for (std::size_t k = grid.size(); k-- > 0;) backward += std::norm(char_fn(other, grid[k]) - table.values[k]);
    EXPECT_NEAR(forward, backward, 1e-14);
    EXPECT_NEAR(lsq_objective(other, table), forward, 1e-14);
}

TEST(LsqObjective, TruthBeatsDoubledIntensity) {
    const ParamVector truth(cp, {0.6, 0.1, 0.05}), doubled(cp, {1.2, 0.1, 0.05});
    int wins = 0;
    for (std::uint64_t t = 0; t < 100; ++t) {
        const auto data = simulate_increments(truth, 50001, SeedSpec{t, 17});
        const auto table = ecf(data, default_grid(data, default_lsq_grid_count));
        wins += lsq_objective(truth, table) < lsq_objective(doubled, table);
    }
    EXPECT_GE(wins, 95);
}

TEST(DefaultGrid, SpacingAndCap) {
    const IncrementSeries tiny(std::vector<double>(100, 1e-6));
    const auto g = default_grid(tiny, 2);
    ASSERT_EQ(g.size(), 2u);
    EXPECT_DOUBLE_EQ(g[1], 200.0);
    EXPECT_DOUBLE_EQ(g[0], 100.0);
    EXPECT_THROW(default_grid(tiny, 1), InvalidArgument);
}

TEST(DefaultGrid, MatchesScalarScanOracle) {
    const auto data = simulate_increments(ParamVector(cp, {0.5, 0.2, 0.04}), 100001, SeedSpec{3, 3});
    double oracle = 200.0;
    for (int k = 1; k <= 400; ++k) {
        const double w = 0.5 * k;
        double re = 0.0, im = 0.0;
        for (double x : data.values()) {
            re += std::cos(w * x);
            im += std::sin(w * x);
        }
        if (std::hypot(re, im) / static_cast<double>(data.size()) < 0.05) {
            oracle = std::clamp(w, 1.0, 200.0);
            break;
        }
    }
    EXPECT_EQ(ecf_decay_frequency(data), oracle);
    EXPECT_DOUBLE_EQ(default_grid(data, 4).omegas().back(), oracle);
}

TEST(DefaultGrid, DecayingEcfStopsEarly) {
    const auto data = simulate_increments(ParamVector(ModelSpec::variance_gamma(), {0.0, 1.0, 0.5}), 20001,
                                          SeedSpec{4, 0});
    const double w = ecf_decay_frequency(data);
    EXPECT_GE(w, 1.0);
    EXPECT_LT(w, 20.0);
}

TEST(NelderMead, MinimizesRosenbrock) {
    auto rosen = [](const std::vector<double>& x) {
        return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
    };
    NelderMeadOptions opt;
    opt.diameter_tol = 1e-10;
    opt.max_iterations = 20000;
    const auto r = nelder_mead(rosen, {-1.2, 1.0}, opt);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.x[0], 1.0, 1e-4);
    EXPECT_NEAR(r.x[1], 1.0, 1e-4);
}

TEST(NelderMead, StallReportsNotConverged) {
    auto bowl = [](const std::vector<double>& x) { return x[0] * x[0] + 3.0 * x[1] * x[1]; };
    NelderMeadOptions opt;
    opt.max_iterations = 3;
    const auto r = nelder_mead(bowl, {4.0, -2.0}, opt);
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.iterations, 3);
    EXPECT_TRUE(std::isfinite(r.value));
}

TEST(BoxTransform, RoundTripsInteriorPoints) {
    const auto box = PriorBox::standard(ModelSpec::merton());
    const BoxTransform t(box);
    for (const auto& p : sample_prior(box, 50, SeedSpec{2, 2})) {
        const auto back = t.to_box(t.to_unconstrained(p));
        for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(back[i], p[i], 1e-9 * box.width(i));
    }
    const auto edge = t.to_box({1e6, -1e6, 1e6, -1e6, 0.0});
    EXPECT_TRUE(box.contains(edge));
}

TEST(LsqFit, DeterministicAndInsideBox) {
    const auto box = PriorBox::standard(cp);
    const auto data = simulate_increments(ParamVector(cp, {0.6, 0.1, 0.05}), 2001, SeedSpec{12, 0});
    const auto grid = default_grid(data, 32);
    const auto a = lsq_fit(data, cp, box, grid, 3, SeedSpec{1, 0});
    const auto b = lsq_fit(data, cp, box, grid, 3, SeedSpec{1, 0});
    EXPECT_EQ(a.estimate, b.estimate);
    EXPECT_EQ(a.objective, b.objective);
    EXPECT_EQ(a.iterations, b.iterations);
    EXPECT_TRUE(box.contains(a.estimate));
    EXPECT_GE(a.objective, 0.0);
}

TEST(LsqFit, SingleIncrementStillReturnsBoxPoint) {
    const auto box = PriorBox::standard(cp);
    const auto data = simulate_increments(ParamVector(cp, {0.6, 0.1, 0.05}), 2, SeedSpec{12, 0});
    const auto r = lsq_fit(data, cp, box, default_grid(data, 8), 2, SeedSpec{1, 0});
    EXPECT_TRUE(box.contains(r.estimate));
}

TEST(LsqFit, RejectsBadArguments) {
    const auto box = PriorBox::standard(cp);
    const auto data = simulate_increments(ParamVector(cp, {0.6, 0.1, 0.05}), 200, SeedSpec{12, 0});
    const auto grid = default_grid(data, 8);
    EXPECT_THROW(lsq_fit(data, cp, box, grid, 0, SeedSpec{}), InvalidArgument);
    EXPECT_THROW(lsq_fit(data, cp, box, FrequencyGrid{}, 1, SeedSpec{}), InvalidArgument);
    EXPECT_THROW(lsq_fit(data, ModelSpec::variance_gamma(), box, grid, 1, SeedSpec{}), ModelMismatch);
}

// Reference LSQ RMSE scale: lambda 0.058, mu 0.23, sigma2 0.13.
TEST(LsqFit, WithinThreeTimesReferenceRmseInNinetyOfHundredTrials) {
    const auto box = PriorBox::standard(cp);
    const ParamVector truth(cp, {0.6, 0.1, 0.05});
    const double band[3] = {3 * 0.058, 3 * 0.23, 3 * 0.13};
    int ok[3] = {0, 0, 0};
    for (std::uint64_t t = 0; t < 100; ++t) {
        const auto data = simulate_increments(truth, 5001, SeedSpec{t, 1});
        const auto r = lsq_fit(data, cp, box, default_grid(data, default_lsq_grid_count), 5, SeedSpec{t, 2});
        for (int i = 0; i < 3; ++i) ok[i] += std::abs(r.estimate[i] - truth[i]) < band[i];
    }
    for (int i = 0; i < 3; ++i) EXPECT_GE(ok[i], 90) << "parameter " << i;
}

TEST(ElDual, WeightsSumToOneAndSatisfyConditions) {
    const ParamVector truth(cp, {0.5, 0.2, 0.04});
    const auto data = simulate_increments(truth, 3001, SeedSpec{21, 0});
    const auto grid = default_grid(data, 5);
    const auto g = MomentTable(data, grid).conditions(truth);
    const auto res = el_dual(g);
    ASSERT_TRUE(res.feasible);
    const double total = std::accumulate(res.weights.begin(), res.weights.end(), 0.0);
    EXPECT_NEAR(total, 1.0, 1e-10);
    Eigen::VectorXd moment = Eigen::VectorXd::Zero(g.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
        const double p = res.weights[static_cast<std::size_t>(i)];
        EXPECT_GT(p, 0.0);
        EXPECT_LT(p, 1.0);
        moment += p * g.row(i).transpose();
    }
    EXPECT_LT(moment.cwiseAbs().maxCoeff(), 1e-6);
}

TEST(ElDual, OriginOutsideHullIsInfeasible) {
    Eigen::MatrixXd g(20, 2);
    for (int i = 0; i < 20; ++i) {
        g(i, 0) = 1.0 + 0.1 * i;
        g(i, 1) = std::sin(i);
    }
    EXPECT_FALSE(el_dual(g).feasible);
}

TEST(ElDual, BalancedConditionsGiveUniformWeights) {
    Eigen::MatrixXd g(4, 1);
    g << -1.0, 1.0, -2.0, 2.0;
    const auto res = el_dual(g);
    ASSERT_TRUE(res.feasible);
    for (double p : res.weights) EXPECT_NEAR(p, 0.25, 1e-14);
    EXPECT_NEAR(res.statistic, 0.0, 1e-14);
}

TEST(ElProfile, WilksCalibrationAtTruth) {
    const ParamVector truth(cp, {0.5, 0.2, 0.04});
    const std::size_t k_omega = 5;
    const boost::math::chi_squared chi2(2.0 * k_omega);
    const double cutoff = boost::math::quantile(chi2, 0.99);
    int pass = 0;
    for (std::uint64_t t = 0; t < 100; ++t) {
        const auto data = simulate_increments(truth, 10001, SeedSpec{t, 55});
        const auto res = el_profile(data, truth, default_grid(data, k_omega));
        pass += res.feasible && res.statistic < cutoff;
    }
    EXPECT_GE(pass, 95);
}

TEST(MeleFit, WeightsAtEstimateAndContracts) {
    const auto box = PriorBox::standard(cp);
    const auto data = simulate_increments(ParamVector(cp, {0.6, 0.1, 0.05}), 1001, SeedSpec{31, 0});
    const auto grid = default_grid(data, 5);
    const auto r = mele_fit(data, cp, box, grid, SeedSpec{4, 0});
    EXPECT_TRUE(box.contains(r.estimate));
    const auto dual = el_profile(data, r.estimate, grid);
    ASSERT_TRUE(dual.feasible);
    EXPECT_NEAR(std::accumulate(dual.weights.begin(), dual.weights.end(), 0.0), 1.0, 1e-10);
    for (double p : dual.weights) EXPECT_GT(p, 0.0);
    EXPECT_NEAR(dual.statistic, r.objective, 1e-9 * (1.0 + r.objective));

    const auto again = mele_fit(data, cp, box, grid, SeedSpec{4, 0});
    EXPECT_EQ(again.estimate, r.estimate);

    const IncrementSeries short_data(std::vector<double>(10, 0.1));
    EXPECT_THROW(mele_fit(short_data, cp, box, FrequencyGrid::equally_spaced(5.0, 5), SeedSpec{}), InvalidArgument);
}
