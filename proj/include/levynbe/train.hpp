#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "levynbe/deepsets.hpp"
#include "levynbe/error.hpp"
#include "levynbe/levy_models.hpp"
#include "levynbe/loss.hpp"
#include "levynbe/random.hpp"

namespace levynbe {

struct TrainConfig {
    std::size_t K = 2000;        // parameter draws from the prior
    std::size_t J = 5;           // replicate datasets per draw
    std::size_t n_t = 250;       // increments per dataset
    std::size_t epochs = 50;
    std::size_t batch_size = 128;  // datasets per minibatch
    double learning_rate = 1e-3;
    Architecture arch{};
    LossKind loss = LossKind::msle();
    double val_fraction = 0.2;
    std::size_t patience = 0;    // stop after this many epochs without improvement; 0 disables
    SeedSpec seed{};

    void validate() const {
        if (K < 2 || J < 1 || n_t < 1 || epochs < 1 || batch_size < 1)
            throw InvalidArgument("train config: K >= 2 and J, n_t, epochs, batch_size >= 1 required");
        if (arch.embed_dim < 1 || arch.hidden_width < 1) throw InvalidArgument("train config: bad architecture");
        if (!(val_fraction > 0.0 && val_fraction < 0.5))
            throw InvalidArgument("train config: val_fraction must lie in (0, 0.5)");
        if (!(learning_rate > 0.0)) throw InvalidArgument("train config: learning rate must be positive");
    }
};

struct TrainReport {
    std::vector<double> epoch_train_risk;
    std::vector<double> epoch_val_risk;
    double initial_val_risk = 0.0;
    // 0 means the initialization was never improved on; e >= 1 refers to
    // epoch_val_risk[e - 1].
    std::size_t best_epoch = 0;
    double best_val_risk = 0.0;
    double wall_time = 0.0;        // seconds, optimization only
    double simulation_time = 0.0;  // seconds spent building the pool
    std::size_t underflow_retries = 0;
    std::size_t redraws = 0;
};

// The K x J simulated datasets and their truths. Dataset (k, j) is column
// k * J + j of `data`.
struct TrainingPool {
    PriorBox prior;
    std::size_t K = 0, J = 0, n_t = 0;
    std::vector<ParamVector> draws;
    Eigen::MatrixXd data;        // n_t x (K * J)
    Eigen::MatrixXd truth_unit;  // d x K, box-normalized
    std::size_t underflow_retries = 0;
    std::size_t redraws = 0;
    double simulation_time = 0.0;
};

inline constexpr int pool_dataset_retries = 3;
inline constexpr int pool_max_redraws = 1000;

// Datasets hitting GammaShapeUnderflow are resimulated on a fresh stream a
// few times; if that keeps failing the parameter draw itself is replaced by
// a fresh prior draw. Both events are counted.
inline TrainingPool simulate_pool(const PriorBox& prior, const TrainConfig& cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    TrainingPool pool;
    pool.prior = prior;
    pool.K = cfg.K;
    pool.J = cfg.J;
    pool.n_t = cfg.n_t;
    pool.draws = sample_prior(prior, cfg.K, cfg.seed.child({stream_tag::prior}));
    pool.data.resize(static_cast<Eigen::Index>(cfg.n_t), static_cast<Eigen::Index>(cfg.K * cfg.J));
    pool.truth_unit.resize(static_cast<Eigen::Index>(prior.size()), static_cast<Eigen::Index>(cfg.K));

    for (std::size_t k = 0; k < cfg.K; ++k) {
        for (int redraw = 0;; ++redraw) {
            bool ok = true;
            for (std::size_t j = 0; j < cfg.J && ok; ++j) {
                bool done = false;
                for (int attempt = 0; attempt < pool_dataset_retries && !done; ++attempt) {
                    const SeedSpec s = cfg.seed.child({stream_tag::simulate, k, j, static_cast<std::uint64_t>(attempt),
                                                       static_cast<std::uint64_t>(redraw)});
                    try {
                        const auto series = simulate_increments(pool.draws[k], cfg.n_t + 1, s);
                        pool.data.col(static_cast<Eigen::Index>(k * cfg.J + j)) =
                            Eigen::Map<const Eigen::VectorXd>(series.values().data(),
                                                              static_cast<Eigen::Index>(cfg.n_t));
                        done = true;
                    } catch (const GammaShapeUnderflow&) {
                        ++pool.underflow_retries;
                    }
                }
                ok = done;
            }
            if (ok) break;
            if (redraw >= pool_max_redraws)
                throw GammaShapeUnderflow(0.0);
            ++pool.redraws;
            pool.draws[k] = sample_prior(prior, 1, cfg.seed.child({stream_tag::redraw, k,
                                                                    static_cast<std::uint64_t>(redraw)}))[0];
        }
        for (std::size_t i = 0; i < prior.size(); ++i)
            pool.truth_unit(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                prior.normalize(i, pool.draws[k][i]);
    }
    pool.simulation_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return pool;
}

namespace detail {

inline std::vector<std::size_t> permutation(std::size_t n, SeedSpec seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    return idx;
}

struct Adam {
    double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<double> m, v;
    long step = 0;

    Adam(double learning_rate, std::size_t n) : lr(learning_rate), m(n, 0.0), v(n, 0.0) {}

    void update(std::vector<double>& params, const std::vector<double>& grad) {
        ++step;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

// Mean loss of the estimator over the listed pool columns.
inline double pool_risk(const DeepSetsEstimator& est, const TrainingPool& pool, const std::vector<std::size_t>& cols,
                        const LossKind& loss, std::size_t chunk = 256) {
    const auto n = static_cast<Eigen::Index>(pool.n_t);
    const std::size_t d = pool.prior.size();
    double total = 0.0;
    std::vector<double> t(d), e(d);
    for (std::size_t start = 0; start < cols.size(); start += chunk) {
        const std::size_t count = std::min(chunk, cols.size() - start);
        Eigen::MatrixXd x(n, static_cast<Eigen::Index>(count));
        for (std::size_t j = 0; j < count; ++j)
            x.col(static_cast<Eigen::Index>(j)) = pool.data.col(static_cast<Eigen::Index>(cols[start + j]));
        const Eigen::MatrixXd unit = est.unit_outputs(x);
        for (std::size_t j = 0; j < count; ++j) {
            const auto k = static_cast<Eigen::Index>(cols[start + j] / pool.J);
            for (std::size_t i = 0; i < d; ++i) {
                e[i] = unit(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                t[i] = pool.truth_unit(static_cast<Eigen::Index>(i), k);
            }
            total += unit_loss(loss, e, t);
        }
    }
    return total / static_cast<double>(cols.size());
}

}  // namespace detail

struct TrainResult {
    DeepSetsEstimator estimator;
    TrainReport report;
};

// Minimizes the Monte Carlo Bayes risk over the pool with Adam. The split
// into training and validation happens at the parameter-draw level, and the
// weights from the epoch with the lowest validation risk are returned.
inline TrainResult train_on_pool(const TrainingPool& pool, const TrainConfig& cfg) {
    cfg.validate();
    if (pool.K != cfg.K || pool.J != cfg.J || pool.n_t != cfg.n_t)
        throw InvalidArgument("train_on_pool: pool shape does not match the config");
    const auto t0 = std::chrono::steady_clock::now();

    const auto draw_order = detail::permutation(pool.K, cfg.seed.child({stream_tag::split}));
    const auto n_val = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(pool.K))), 1, pool.K - 1);
    std::vector<std::size_t> val_cols, train_cols;
    for (std::size_t r = 0; r < pool.K; ++r) {
        auto& dest = r < n_val ? val_cols : train_cols;
        for (std::size_t j = 0; j < pool.J; ++j) dest.push_back(draw_order[r] * pool.J + j);
    }
    std::sort(val_cols.begin(), val_cols.end());
    std::sort(train_cols.begin(), train_cols.end());

    TrainResult out{DeepSetsEstimator::create(pool.prior, pool.n_t, cfg.arch), {}};
    DeepSetsEstimator& est = out.estimator;
    TrainReport& rep = out.report;
    est.init_weights(cfg.seed);
    rep.underflow_retries = pool.underflow_retries;
    rep.redraws = pool.redraws;
    rep.simulation_time = pool.simulation_time;

    std::vector<double> params = flatten_parameters(est);
    std::vector<double> best_params = params;
    detail::Adam adam(cfg.learning_rate, params.size());

    rep.initial_val_risk = detail::pool_risk(est, pool, val_cols, cfg.loss);
    rep.best_val_risk = rep.initial_val_risk;
    rep.best_epoch = 0;

    const auto n = static_cast<Eigen::Index>(pool.n_t);
    const auto d = static_cast<Eigen::Index>(pool.prior.size());
    EstimatorGrad grad = est.zero_grad();
    BackwardWorkspace ws;
    std::size_t since_best = 0;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto order = detail::permutation(train_cols.size(), cfg.seed.child({stream_tag::shuffle, epoch}));
        double risk_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, order.size() - start);
            Eigen::MatrixXd x(n, static_cast<Eigen::Index>(count));
            Eigen::MatrixXd t(d, static_cast<Eigen::Index>(count));
            for (std::size_t j = 0; j < count; ++j) {
                const std::size_t col = train_cols[order[start + j]];
                x.col(static_cast<Eigen::Index>(j)) = pool.data.col(static_cast<Eigen::Index>(col));
                t.col(static_cast<Eigen::Index>(j)) = pool.truth_unit.col(static_cast<Eigen::Index>(col / pool.J));
            }
            grad.set_zero();
            risk_sum += backward_batch(est, x, t, cfg.loss, grad, ws) * static_cast<double>(count);
            adam.update(params, flatten_gradient(grad));
            assign_parameters(est, params);
        }
        rep.epoch_train_risk.push_back(risk_sum / static_cast<double>(order.size()));
        const double val = detail::pool_risk(est, pool, val_cols, cfg.loss);
        rep.epoch_val_risk.push_back(val);
        if (val < rep.best_val_risk) {
            rep.best_val_risk = val;
            rep.best_epoch = epoch;
            best_params = params;
            since_best = 0;
        } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
            break;
        }
    }
    assign_parameters(est, best_params);
    rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

inline TrainResult train(const ModelSpec& model, const PriorBox& prior, const TrainConfig& cfg) {
    if (!(prior.model() == model)) throw ModelMismatch("train: prior box model differs from requested model");
    return train_on_pool(simulate_pool(prior, cfg), cfg);
}

}  // namespace levynbe
