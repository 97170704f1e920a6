#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "levynbe/bench.hpp"
#include "levynbe/report_io.hpp"

using namespace levynbe;

namespace {

const ModelSpec cp = ModelSpec::compound_poisson();

// Composite Simpson rule on a uniform grid, independent of the trapezoid
// implementation under test.
double simpson_l2f(const ParamVector& a, const ParamVector& b, double lo, double hi, std::size_t intervals) {
    const double h = (hi - lo) / static_cast<double>(intervals);
    double s = 0.0;
    for (std::size_t k = 0; k <= intervals; ++k) {
        const double w = lo + h * static_cast<double>(k);
        const std::complex<double> d = char_fn(a, w) - char_fn(b, w);
        const double f = d.real() * d.real() + d.imag() * d.imag();
        const double c = (k == 0 || k == intervals) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        s += c * f;
    }
    return std::sqrt(s * h / 3.0);
}

ScaleConfig small_classical_config() {
    ScaleConfig cfg;
    cfg.n_test = 4;
    cfg.n_t = 300;
    cfg.grid_count = 16;
    cfg.restarts = 2;
    cfg.mele_grid_count = 3;
    cfg.mele_lsq_restarts = 1;
    return cfg;
}

}  // namespace

TEST(Metrics, SinglePairClosedForm) {
    const ModelSpec vg = ModelSpec::variance_gamma();
    // Widths of the standard VG box differ, so build one with unit width.
    const PriorBox box(vg, {0.5, 0.5, 0.5}, {1.5, 1.5, 1.5});
    const std::vector<ParamVector> est{ParamVector(vg, {1.1, 1.1, 1.1})}, truth{ParamVector(vg, {1.0, 1.0, 1.0})};
    const auto rows = metrics(est, truth, box);
    ASSERT_EQ(rows.size(), 3u);
    for (const auto& r : rows) {
        EXPECT_NEAR(r.rmse, 0.1, 1e-12);
        EXPECT_NEAR(r.bias, 0.1, 1e-12);
        EXPECT_NEAR(r.sd, 0.0, 1e-6);
        EXPECT_NEAR(r.nrmse, 0.1, 1e-12);
        ASSERT_TRUE(r.mape.has_value());
        EXPECT_NEAR(*r.mape, 0.1, 1e-12);
    }
    EXPECT_EQ(rows[0].param_name, vg.param_names()[0]);
}

TEST(Metrics, IdentityGivesZeroErrors) {
    const auto box = PriorBox::standard(ModelSpec::merton());
    const auto draws = sample_prior(box, 50, SeedSpec{1, 0});
    for (const auto& r : metrics(draws, draws, box)) {
        EXPECT_EQ(r.rmse, 0.0);
        EXPECT_EQ(r.bias, 0.0);
        EXPECT_EQ(r.sd, 0.0);
    }
}

TEST(Metrics, DecompositionAndSdOracle) {
    const auto box = PriorBox::standard(cp);
    const auto truths = sample_prior(box, 300, SeedSpec{2, 0});
    const auto ests = sample_prior(box, 300, SeedSpec{3, 0});
    const auto rows = metrics(ests, truths, box);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        EXPECT_NEAR(r.rmse * r.rmse, r.bias * r.bias + r.sd * r.sd, 1e-9);
        // Population SD of the errors.
        double m = 0.0, v = 0.0;
        for (std::size_t k = 0; k < truths.size(); ++k) m += ests[k][i] - truths[k][i];
        m /= 300.0;
        for (std::size_t k = 0; k < truths.size(); ++k) v += std::pow(ests[k][i] - truths[k][i] - m, 2);
        EXPECT_NEAR(r.sd, std::sqrt(v / 300.0), 1e-10);
        EXPECT_NEAR(r.nrmse, r.rmse / box.width(i), 1e-15);
        EXPECT_GE(r.rmse, 0.0);
    }
}

TEST(Metrics, MapeGuardAndErrors) {
    const auto box = PriorBox::standard(cp);
    const std::vector<ParamVector> truth{ParamVector(cp, {0.5, 0.0, 0.2})}, est{ParamVector(cp, {0.6, 0.1, 0.3})};
    const auto rows = metrics(est, truth, box);
    EXPECT_TRUE(rows[0].mape.has_value());
    EXPECT_FALSE(rows[1].mape.has_value());
    EXPECT_TRUE(rows[2].mape.has_value());
    EXPECT_THROW(metrics(std::vector<ParamVector>{}, std::vector<ParamVector>{}, box), EmptyInput);
    EXPECT_THROW(metrics(est, std::vector<ParamVector>{truth[0], truth[0]}, box), InvalidArgument);
    const std::vector<ParamVector> vg{ParamVector(ModelSpec::variance_gamma(), {0.0, 0.5, 0.5})};
    EXPECT_THROW(metrics(vg, vg, box), ModelMismatch);
}

TEST(L2f, ZeroAndSymmetryExactly) {
    const auto box = PriorBox::standard(ModelSpec::deep_variance_gamma(2));
    const auto draws = sample_prior(box, 20, SeedSpec{4, 0});
    for (std::size_t k = 0; k + 1 < draws.size(); ++k) {
        EXPECT_EQ(l2f_distance(draws[k], draws[k]), 0.0);
        EXPECT_EQ(l2f_distance(draws[k], draws[k + 1]), l2f_distance(draws[k + 1], draws[k]));
        EXPECT_GT(l2f_distance(draws[k], draws[k + 1]), 0.0);
    }
}

TEST(L2f, TriangleInequalityOnRandomTriples) {
    for (const auto& m : {cp, ModelSpec::merton(), ModelSpec::variance_gamma(), ModelSpec::deep_variance_gamma(3)}) {
        const auto draws = sample_prior(PriorBox::standard(m), 90, SeedSpec{5, 0});
        for (std::size_t k = 0; k + 2 < draws.size(); k += 3) {
            const double ab = l2f_distance(draws[k], draws[k + 1]);
            const double bc = l2f_distance(draws[k + 1], draws[k + 2]);
            const double ac = l2f_distance(draws[k], draws[k + 2]);
            EXPECT_LE(ac, ab + bc + 1e-12);
        }
    }
}

TEST(L2f, MatchesRefinedQuadratureForDvgExample) {
    const ModelSpec dvg = ModelSpec::deep_variance_gamma(2);
    const ParamVector a(dvg, {1.0, 1.0, 1.0}), b(dvg, {1.2, 1.0, 1.0});
    const double coarse = l2f_distance(a, b, l2f_grid(0.0, 20.0, 0.05));
    const double fine = simpson_l2f(a, b, 0.0, 20.0, 20000);
    EXPECT_NEAR(coarse / fine, 1.0, 1e-3);
}

TEST(L2f, MatchesRefinedQuadratureOnRandomDvgPairs) {
    const auto box = PriorBox::standard(ModelSpec::deep_variance_gamma(2));
    const auto draws = sample_prior(box, 40, SeedSpec{6, 0});
    for (std::size_t k = 0; k < draws.size(); k += 2) {
        const double coarse = l2f_distance(draws[k], draws[k + 1]);
        const double fine = simpson_l2f(draws[k], draws[k + 1], 0.05, 20.0, 19950);
        EXPECT_NEAR(coarse / fine, 1.0, 1e-3);
    }
}

TEST(L2f, GridAndArgumentChecks) {
    const auto g = default_l2f_grid();
    ASSERT_EQ(g.size(), 400u);
    EXPECT_DOUBLE_EQ(g.front(), 0.05);
    EXPECT_DOUBLE_EQ(g.back(), 20.0);
    EXPECT_THROW(l2f_grid(1.0, 1.0, 0.1), InvalidArgument);
    const ParamVector a(cp, {0.5, 0.0, 0.2});
    const ParamVector v(ModelSpec::variance_gamma(), {0.0, 0.5, 0.5});
    EXPECT_THROW(l2f_distance(a, v), ModelMismatch);
    EXPECT_THROW(l2f_distance(a, a, std::vector<double>{1.0}), InvalidArgument);
    EXPECT_THROW(l2f_distance(a, a, std::vector<double>{1.0, 0.5}), InvalidArgument);
}

TEST(Benchmark, ZeroTestSetsIsEmptyInput) {
    auto cfg = small_classical_config();
    cfg.n_test = 0;
    EXPECT_THROW(run_benchmark(cp, PriorBox::standard(cp), BenchMethod::LSQ, cfg, SeedSpec{1, 0}), EmptyInput);
    EXPECT_THROW(simulate_test_sets(PriorBox::standard(cp), 0, 10, SeedSpec{}), EmptyInput);
}

TEST(Benchmark, LsqDeterministicExceptTiming) {
    const auto box = PriorBox::standard(cp);
    const auto a = run_benchmark(cp, box, BenchMethod::LSQ, small_classical_config(), SeedSpec{3, 1});
    const auto b = run_benchmark(cp, box, BenchMethod::LSQ, small_classical_config(), SeedSpec{3, 1});
    ASSERT_EQ(a.estimates.size(), 4u);
    EXPECT_EQ(a.estimates, b.estimates);
    EXPECT_EQ(a.truths, b.truths);
    for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_EQ(a.rows[i].rmse, b.rows[i].rmse);
    EXPECT_GE(a.est_time, 0.0);
    EXPECT_FALSE(a.train_time.has_value());
    for (const auto& e : a.estimates) EXPECT_TRUE(box.contains(e));
}

TEST(Benchmark, MeleBudgetExtrapolatesTiming) {
    const auto box = PriorBox::standard(cp);
    auto cfg = small_classical_config();
    cfg.n_test = 6;
    cfg.mele_budget = 2;
    const auto rep = run_benchmark(cp, box, BenchMethod::MELE, cfg, SeedSpec{4, 0});
    EXPECT_EQ(rep.n_evaluated, 2u);
    EXPECT_TRUE(rep.est_time_extrapolated);
    EXPECT_EQ(rep.truths.size(), 2u);
}

TEST(Benchmark, TestSetsDependOnlyOnSeed) {
    const auto box = PriorBox::standard(ModelSpec::variance_gamma());
    const auto a = simulate_test_sets(box, 5, 50, SeedSpec{9, 0});
    const auto b = simulate_test_sets(box, 5, 50, SeedSpec{9, 0});
    EXPECT_EQ(a.truths, b.truths);
    for (std::size_t k = 0; k < 5; ++k) {
        EXPECT_EQ(a.datasets[k].values(), b.datasets[k].values());
        EXPECT_EQ(a.datasets[k].size(), 50u);
    }
}

TEST(Benchmark, NbeWithTrainedEstimatorReportsTimes) {
    const auto box = PriorBox::standard(cp);
    ScaleConfig cfg;
    cfg.n_test = 20;
    cfg.n_t = 40;
    cfg.train.K = 40;
    cfg.train.J = 2;
    cfg.train.epochs = 1;
    cfg.train.arch.embed_dim = 4;
    cfg.train.arch.hidden_width = 4;
    cfg.train.arch.hidden_layers = 1;
    const auto rep = run_benchmark(cp, box, BenchMethod::NBE, cfg, SeedSpec{2, 0});
    EXPECT_EQ(rep.method, BenchMethod::NBE);
    ASSERT_TRUE(rep.train_time.has_value());
    EXPECT_GE(*rep.train_time, 0.0);
    EXPECT_EQ(rep.rows.size(), 3u);
    EXPECT_EQ(rep.n_evaluated, 20u);

    const auto wrong_len = DeepSetsEstimator::create(box, 41, Architecture{});
    EXPECT_THROW(run_benchmark_with(wrong_len, box, cfg, SeedSpec{}), InputLengthMismatch);
}

TEST(Sweep, NeedsTwoValuesAndParsesAxes) {
    const auto box = PriorBox::standard(cp);
    EXPECT_THROW(sweep(cp, box, SweepAxis::InputLen, {"250"}, ScaleConfig{}, SeedSpec{}), InvalidArgument);
    EXPECT_EQ(parse_sweep_axis("nt"), SweepAxis::InputLen);
    EXPECT_EQ(parse_sweep_axis("agg"), SweepAxis::Aggregation);
    EXPECT_THROW(parse_sweep_axis("depth"), InvalidArgument);
    const auto cfg = apply_sweep_value(ScaleConfig{}, SweepAxis::InputLen, "500");
    EXPECT_EQ(cfg.n_t, 500u);
    EXPECT_EQ(apply_sweep_value(ScaleConfig{}, SweepAxis::Aggregation, "sum").train.arch.aggregation,
              Aggregation::Sum);
    EXPECT_THROW(apply_sweep_value(ScaleConfig{}, SweepAxis::PriorDraws, "0"), InvalidArgument);
    EXPECT_THROW(apply_sweep_value(ScaleConfig{}, SweepAxis::InputLen, "12x"), InvalidArgument);
}

TEST(Sweep, OneReportPerValueOnSharedTestSeed) {
    const auto box = PriorBox::standard(cp);
    ScaleConfig cfg;
    cfg.n_test = 10;
    cfg.n_t = 30;
    cfg.train.K = 30;
    cfg.train.J = 1;
    cfg.train.epochs = 1;
    cfg.train.arch.embed_dim = 4;
    cfg.train.arch.hidden_width = 4;
    cfg.train.arch.hidden_layers = 1;
    const auto reps = sweep(cp, box, SweepAxis::Aggregation, {"mean", "sum"}, cfg, SeedSpec{5, 0});
    ASSERT_EQ(reps.size(), 2u);
    EXPECT_EQ(reps[0].truths, reps[1].truths);
    EXPECT_EQ(reps[0].config.train.arch.aggregation, Aggregation::Mean);
    EXPECT_EQ(reps[1].config.train.arch.aggregation, Aggregation::Sum);
}

TEST(Correlation, KnownValues) {
    const std::vector<double> x{1, 2, 3, 4}, y{2, 4, 6, 8}, z{4, 3, 2, 1};
    EXPECT_NEAR(correlation(x, y), 1.0, 1e-15);
    EXPECT_NEAR(correlation(x, z), -1.0, 1e-15);
    EXPECT_THROW(correlation(std::vector<double>{1.0}, std::vector<double>{1.0}), InvalidArgument);
}

TEST(ReportIo, TableCellsAndJsonFields) {
    const auto box = PriorBox::standard(cp);
    const auto rep = run_benchmark(cp, box, BenchMethod::LSQ, small_classical_config(), SeedSpec{3, 1});
    const auto j = benchmark_json(rep);
    EXPECT_EQ(j.at("method"), "lsq");
    ASSERT_EQ(j.at("rows").size(), 3u);
    EXPECT_EQ(j.at("rows")[0].at("rmse").get<double>(), rep.rows[0].rmse);
    const auto md = benchmark_markdown({rep});
    const std::string cell = detail::short_num(rep.rows[0].rmse) + " (" + detail::short_num(rep.rows[0].bias) +
                             ") [" + detail::short_num(rep.rows[0].sd) + "]";
    EXPECT_NE(md.find(cell), std::string::npos) << md;
    const auto csv = benchmark_csv({rep});
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
    const auto back = scale_config_from_json(scale_config_json(rep.config), ScaleConfig{});
    EXPECT_EQ(back.n_test, rep.config.n_test);
    EXPECT_EQ(back.grid_count, rep.config.grid_count);
}
