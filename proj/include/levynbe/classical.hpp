#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "levynbe/ecf.hpp"
#include "levynbe/error.hpp"
#include "levynbe/levy_models.hpp"
#include "levynbe/nelder_mead.hpp"
#include "levynbe/random.hpp"

namespace levynbe {

struct FitResult {
    ParamVector estimate;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    double wall_time = 0.0;  // seconds
};

// Defaults for grid size and restarts used by the CLI and the benchmarks.
inline constexpr std::size_t default_lsq_grid_count = 32;
inline constexpr std::size_t default_mele_grid_count = 5;
inline constexpr int default_lsq_restarts = 5;

struct LsqOptions {
    NelderMeadOptions simplex{};
};

// Least-squares characteristic-function fit: Nelder-Mead from `restarts`
// uniform starts in logit coordinates, best terminal point wins (ties go to
// the lower restart index).
inline FitResult lsq_fit(const IncrementSeries& data, const ModelSpec& model, const PriorBox& box,
                         const FrequencyGrid& grid, int restarts, SeedSpec seed, const LsqOptions& opt = {}) {
    if (grid.empty()) throw InvalidArgument("lsq_fit: empty frequency grid");
    if (restarts < 1) throw InvalidArgument("lsq_fit: restarts must be at least 1");
    if (!(box.model() == model)) throw ModelMismatch("lsq_fit: box model differs from requested model");
    const auto t0 = std::chrono::steady_clock::now();

    const EcfTable table = ecf(data, grid);
    const BoxTransform transform(box);
    auto objective = [&](const std::vector<double>& u) { return lsq_objective(transform.to_box(u), table); };

    const auto starts = sample_prior(box, static_cast<std::size_t>(restarts), seed.child({stream_tag::restart}));
    NelderMeadResult best;
    for (const auto& start : starts) {
        auto r = nelder_mead(objective, transform.to_unconstrained(start), opt.simplex);
        if (best.x.empty() || r.value < best.value) best = std::move(r);
    }

    FitResult out;
    out.estimate = transform.to_box(best.x);
    out.objective = best.value;
    out.iterations = best.iterations;
    out.converged = best.converged;
    out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

// Convex dual of the empirical-likelihood inner problem.
struct ElDualResult {
    Eigen::VectorXd multiplier;
    std::vector<double> weights;  // p_i = 1 / (n (1 + lambda' g_i))
    double statistic = std::numeric_limits<double>::infinity();  // -2 sum log(n p_i)
    int iterations = 0;
    bool feasible = false;
};

// Rows of g are the moment vectors g_i. Maximizes the concave
// sum_i log(1 + lambda' g_i) by damped Newton, halving steps to keep every
// 1 + lambda' g_i above 1/n. Reports infeasible when the origin is not in
// the convex hull of the rows (the multiplier diverges or stalls).
inline ElDualResult el_dual(const Eigen::MatrixXd& g, int max_iterations = 100) {
    const auto n = static_cast<double>(g.rows());
    const Eigen::Index q = g.cols();
    ElDualResult res;
    res.multiplier = Eigen::VectorXd::Zero(q);

    Eigen::VectorXd w = Eigen::VectorXd::Ones(g.rows());
    double h = 0.0;
    bool converged = false;
    int it = 0;
    for (; it < max_iterations; ++it) {
        const Eigen::VectorXd inv_w = w.cwiseInverse();
        const Eigen::VectorXd grad = g.transpose() * inv_w;
        const double grad_scale = grad.cwiseAbs().maxCoeff() / n;
        if (grad_scale <= 1e-14) {
            converged = true;
            break;
        }
        const Eigen::MatrixXd hess = g.transpose() * inv_w.cwiseAbs2().asDiagonal() * g;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
        const Eigen::VectorXd step = ldlt.solve(grad);
        if (!step.allFinite()) break;

        double t = 1.0;
        bool accepted = false;
        while (t > 1e-14) {
            const Eigen::VectorXd cand = res.multiplier + t * step;
            const Eigen::VectorXd wc = Eigen::VectorXd::Ones(g.rows()) + g * cand;
            if (wc.minCoeff() > 1.0 / n) {
                const double hc = wc.array().log().sum();
                if (hc >= h - 1e-12 * (1.0 + std::abs(h))) {
                    res.multiplier = cand;
                    w = wc;
                    h = hc;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if (!accepted) {
            // Roundoff floor: accept if the moment conditions already hold.
            converged = grad_scale <= 1e-9;
            break;
        }
        if (res.multiplier.norm() > 1e10) break;
    }
    if (!converged && it == max_iterations) {
        const Eigen::VectorXd grad = g.transpose() * w.cwiseInverse();
        converged = grad.cwiseAbs().maxCoeff() / n <= 1e-9;
    }
    res.iterations = it;
    res.feasible = converged;
    if (!converged) return res;

    res.weights.resize(static_cast<std::size_t>(g.rows()));
    for (Eigen::Index i = 0; i < g.rows(); ++i) res.weights[static_cast<std::size_t>(i)] = 1.0 / (n * w[i]);
    res.statistic = 2.0 * w.array().log().sum();
    return res;
}

// cos/sin of omega_k x_i, shared by every theta evaluated on one dataset.
class MomentTable {
public:
    MomentTable(const IncrementSeries& data, const FrequencyGrid& grid)
        : grid_(grid), base_(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(2 * grid.size())) {
        for (Eigen::Index i = 0; i < base_.rows(); ++i)
            for (std::size_t k = 0; k < grid.size(); ++k) {
                const double a = grid[k] * data[static_cast<std::size_t>(i)];
                base_(i, static_cast<Eigen::Index>(2 * k)) = std::cos(a);
                base_(i, static_cast<Eigen::Index>(2 * k + 1)) = std::sin(a);
            }
    }

    // Rows g_i(theta): real and imaginary parts of exp(i w_k x_i) - phi(w_k, theta).
    Eigen::MatrixXd conditions(const ParamVector& params) const {
        Eigen::RowVectorXd shift(base_.cols());
        for (std::size_t k = 0; k < grid_.size(); ++k) {
            const ComplexValue phi = char_fn(params, grid_[k]);
            shift[static_cast<Eigen::Index>(2 * k)] = phi.real();
            shift[static_cast<Eigen::Index>(2 * k + 1)] = phi.imag();
        }
        return base_.rowwise() - shift;
    }

private:
    FrequencyGrid grid_;
    Eigen::MatrixXd base_;
};

inline ElDualResult el_profile(const IncrementSeries& data, const ParamVector& params, const FrequencyGrid& grid) {
    return el_dual(MomentTable(data, grid).conditions(params));
}

struct MeleOptions {
    NelderMeadOptions simplex{};
    int lsq_restarts = 3;   // restarts of the warm-start LSQ fit
    int uniform_starts = 1; // additional uniform starts from the box
};

// Maximum empirical likelihood: minimizes the profile statistic
// -2 sum log(n p_i(theta)) over theta, warm-started from the LSQ estimate.
// Candidate thetas whose dual is infeasible score +inf.
inline FitResult mele_fit(const IncrementSeries& data, const ModelSpec& model, const PriorBox& box,
                          const FrequencyGrid& grid, SeedSpec seed, const MeleOptions& opt = {}) {
    if (grid.empty()) throw InvalidArgument("mele_fit: empty frequency grid");
    if (2 * grid.size() >= data.size())
        throw InvalidArgument("mele_fit: need more increments than 2 x grid length (" +
                              std::to_string(2 * grid.size()) + " >= " + std::to_string(data.size()) + ")");
    if (!(box.model() == model)) throw ModelMismatch("mele_fit: box model differs from requested model");
    const auto t0 = std::chrono::steady_clock::now();

    const MomentTable moments(data, grid);
    const BoxTransform transform(box);
    auto objective = [&](const std::vector<double>& u) {
        const auto dual = el_dual(moments.conditions(transform.to_box(u)));
        return dual.feasible ? dual.statistic : std::numeric_limits<double>::infinity();
    };

    std::vector<ParamVector> starts;
    starts.push_back(lsq_fit(data, model, box, grid, opt.lsq_restarts, seed).estimate);
    if (opt.uniform_starts > 0) {
        auto extra = sample_prior(box, static_cast<std::size_t>(opt.uniform_starts),
                                  seed.child({stream_tag::restart, 1}));
        starts.insert(starts.end(), extra.begin(), extra.end());
    }

    NelderMeadResult best;
    for (const auto& start : starts) {
        auto r = nelder_mead(objective, transform.to_unconstrained(start), opt.simplex);
        if (best.x.empty() || r.value < best.value) best = std::move(r);
    }

    FitResult out;
    out.estimate = transform.to_box(best.x);
    out.objective = best.value;
    out.iterations = best.iterations;
    out.converged = best.converged && std::isfinite(best.value);
    out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

}  // namespace levynbe
