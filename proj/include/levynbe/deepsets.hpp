#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "levynbe/dense_net.hpp"
#include "levynbe/error.hpp"
#include "levynbe/levy_models.hpp"
#include "levynbe/loss.hpp"
#include "levynbe/random.hpp"

namespace levynbe {

enum class Aggregation { Mean, Sum, Max, Min, Product };

inline std::string to_string(Aggregation a) {
    switch (a) {
        case Aggregation::Mean: return "mean";
        case Aggregation::Sum: return "sum";
        case Aggregation::Max: return "max";
        case Aggregation::Min: return "min";
        case Aggregation::Product: return "product";
    }
    return "?";
}

inline Aggregation parse_aggregation(std::string_view s) {
    if (s == "mean") return Aggregation::Mean;
    if (s == "sum") return Aggregation::Sum;
    if (s == "max") return Aggregation::Max;
    if (s == "min") return Aggregation::Min;
    if (s == "product") return Aggregation::Product;
    throw InvalidArgument("unknown aggregation '" + std::string(s) + "' (expected mean, sum, max, min, product)");
}

struct Architecture {
    int embed_dim = 32;
    int hidden_width = 32;
    int hidden_layers = 3;
    Activation activation = Activation::LeakyReLU;
    Aggregation aggregation = Aggregation::Mean;
};

struct EstimatorGrad {
    DenseGrad summary;
    DenseGrad inference;

    void set_zero() {
        summary.set_zero();
        inference.set_zero();
    }
};

inline double sigmoid(double r) { return 1.0 / (1.0 + std::exp(-r)); }

namespace detail {

// Reduce each group of `group` consecutive columns of `emb` to one column.
inline Eigen::MatrixXd aggregate(const Eigen::MatrixXd& emb, Eigen::Index group, Aggregation agg) {
    const Eigen::Index m = emb.rows();
    const Eigen::Index count = emb.cols() / group;
    Eigen::MatrixXd out(m, count);
    for (Eigen::Index j = 0; j < count; ++j) {
        const auto block = emb.middleCols(j * group, group);
        switch (agg) {
            case Aggregation::Mean: {
                // Left-to-right accumulation over the stored order.
                Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
                for (Eigen::Index c = 0; c < group; ++c) acc += block.col(c);
                out.col(j) = acc / static_cast<double>(group);
                break;
            }
            case Aggregation::Sum: {
                Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
                for (Eigen::Index c = 0; c < group; ++c) acc += block.col(c);
                out.col(j) = acc;
                break;
            }
            case Aggregation::Max: out.col(j) = block.rowwise().maxCoeff(); break;
            case Aggregation::Min: out.col(j) = block.rowwise().minCoeff(); break;
            case Aggregation::Product: {
                Eigen::VectorXd acc = Eigen::VectorXd::Ones(m);
                for (Eigen::Index c = 0; c < group; ++c) acc = acc.cwiseProduct(block.col(c));
                out.col(j) = acc;
                break;
            }
        }
    }
    return out;
}

// d(loss)/d(embeddings) from d(loss)/d(aggregate). Max/Min route the whole
// gradient to the first extremal element.
inline void aggregate_backward(const Eigen::MatrixXd& emb, const Eigen::MatrixXd& d_agg, Eigen::Index group,
                               Aggregation agg, Eigen::MatrixXd& d_emb) {
    const Eigen::Index m = emb.rows();
    d_emb.resize(m, emb.cols());
    for (Eigen::Index j = 0; j < d_agg.cols(); ++j) {
        auto out = d_emb.middleCols(j * group, group);
        const auto block = emb.middleCols(j * group, group);
        switch (agg) {
            case Aggregation::Mean:
                out = d_agg.col(j).replicate(1, group) / static_cast<double>(group);
                break;
            case Aggregation::Sum: out = d_agg.col(j).replicate(1, group); break;
            case Aggregation::Max:
            case Aggregation::Min: {
                out.setZero();
                for (Eigen::Index r = 0; r < m; ++r) {
                    Eigen::Index arg = 0;
                    double best = block(r, 0);
                    for (Eigen::Index c = 1; c < group; ++c) {
                        const double v = block(r, c);
                        if (agg == Aggregation::Max ? v > best : v < best) {
                            best = v;
                            arg = c;
                        }
                    }
                    out(r, arg) = d_agg(r, j);
                }
                break;
            }
            case Aggregation::Product: {
                // prod_{i != c} e_i via prefix and suffix products (exact with zeros).
                Eigen::VectorXd suffix(group + 1);
                for (Eigen::Index r = 0; r < m; ++r) {
                    suffix[group] = 1.0;
                    for (Eigen::Index c = group; c-- > 0;) suffix[c] = suffix[c + 1] * block(r, c);
                    double prefix = 1.0;
                    for (Eigen::Index c = 0; c < group; ++c) {
                        out(r, c) = d_agg(r, j) * prefix * suffix[c + 1];
                        prefix *= block(r, c);
                    }
                }
                break;
            }
        }
    }
}

}  // namespace detail

// DeepSets estimator: per-increment summary network, symmetric
// aggregation, inference network, then a scaled sigmoid into the prior box.
class DeepSetsEstimator {
public:
    DeepSetsEstimator() = default;

    DeepSetsEstimator(DenseNet summary, Aggregation aggregation, DenseNet inference, PriorBox output_box,
                      std::size_t input_len)
        : summary_(std::move(summary)),
          aggregation_(aggregation),
          inference_(std::move(inference)),
          box_(std::move(output_box)),
          input_len_(input_len) {
        if (summary_.input_dim() != 1) throw InvalidArgument("summary network must take one increment");
        if (summary_.output_dim() != inference_.input_dim())
            throw InvalidArgument("summary output dim must equal inference input dim");
        if (static_cast<std::size_t>(inference_.output_dim()) != box_.size())
            throw InvalidArgument("inference output dim must equal the parameter dimension");
        if (input_len_ < 1) throw InvalidArgument("input length must be positive");
    }

    // Zero-initialized estimator with the given architecture.
    static DeepSetsEstimator create(const PriorBox& box, std::size_t input_len, const Architecture& arch) {
        if (arch.hidden_layers < 0) throw InvalidArgument("hidden layer count must be non-negative");
        std::vector<int> sdims{1}, idims{arch.embed_dim};
        for (int l = 0; l < arch.hidden_layers; ++l) {
            sdims.push_back(arch.hidden_width);
            idims.push_back(arch.hidden_width);
        }
        sdims.push_back(arch.embed_dim);
        idims.push_back(static_cast<int>(box.size()));
        return {DenseNet(sdims, arch.activation, true), arch.aggregation, DenseNet(idims, arch.activation, false),
                box, input_len};
    }

    void init_weights(SeedSpec seed) {
        Rng rng(seed.child({stream_tag::init}));
        summary_.init_uniform(rng);
        inference_.init_uniform(rng);
    }

    const DenseNet& summary() const noexcept { return summary_; }
    const DenseNet& inference() const noexcept { return inference_; }
    DenseNet& summary() noexcept { return summary_; }
    DenseNet& inference() noexcept { return inference_; }
    Aggregation aggregation() const noexcept { return aggregation_; }
    const PriorBox& output_box() const noexcept { return box_; }
    const ModelSpec& model() const noexcept { return box_.model(); }
    std::size_t input_len() const noexcept { return input_len_; }
    int embed_dim() const { return summary_.output_dim(); }

    EstimatorGrad zero_grad() const { return {summary_.zero_grad(), inference_.zero_grad()}; }

    // Summary-network embeddings, one column per increment.
    Eigen::MatrixXd embed(std::span<const double> increments) const {
        const Eigen::Map<const Eigen::MatrixXd> row(increments.data(), 1, static_cast<Eigen::Index>(increments.size()));
        return summary_.forward(row);
    }

    Eigen::MatrixXd aggregate(const Eigen::MatrixXd& embeddings) const {
        return detail::aggregate(embeddings, embeddings.cols(), aggregation_);
    }

    // Unit-cube outputs sigmoid(phi(T)) for summary statistics T (m x B).
    Eigen::MatrixXd unit_from_summary(const Eigen::MatrixXd& stats) const {
        return inference_.forward(stats).unaryExpr([](double r) { return sigmoid(r); });
    }

    // Unit-cube outputs for datasets stored as columns of `data` (n x B).
    Eigen::MatrixXd unit_outputs(const Eigen::MatrixXd& data) const {
        if (static_cast<std::size_t>(data.rows()) != input_len_)
            throw InputLengthMismatch(input_len_, static_cast<std::size_t>(data.rows()));
        const Eigen::Map<const Eigen::MatrixXd> row(data.data(), 1, data.size());
        const Eigen::MatrixXd emb = summary_.forward(row);
        return unit_from_summary(detail::aggregate(emb, data.rows(), aggregation_));
    }

    // Maps unit outputs into the box, strictly inside it.
    ParamVector to_params(const Eigen::Ref<const Eigen::VectorXd>& unit) const {
        std::vector<double> v(box_.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double lo = box_.lower()[i], hi = box_.upper()[i];
            double x = box_.denormalize(i, unit[static_cast<Eigen::Index>(i)]);
            if (x >= hi) x = std::nextafter(hi, lo);
            if (x <= lo) x = std::nextafter(lo, hi);
            v[i] = x;
        }
        return {box_.model(), std::move(v)};
    }

    ParamVector forward(const IncrementSeries& data) const {
        if (data.size() != input_len_) throw InputLengthMismatch(input_len_, data.size());
        const Eigen::Map<const Eigen::MatrixXd> col(data.values().data(), static_cast<Eigen::Index>(data.size()), 1);
        return to_params(unit_outputs(col).col(0));
    }

    // Batched forward pass; identical results to calling forward() per series.
    std::vector<ParamVector> forward_many(std::span<const IncrementSeries> datasets, std::size_t chunk = 64) const {
        std::vector<ParamVector> out;
        out.reserve(datasets.size());
        const auto n = static_cast<Eigen::Index>(input_len_);
        for (std::size_t start = 0; start < datasets.size(); start += chunk) {
            const std::size_t count = std::min(chunk, datasets.size() - start);
            Eigen::MatrixXd x(n, static_cast<Eigen::Index>(count));
            for (std::size_t j = 0; j < count; ++j) {
                const auto& ds = datasets[start + j];
                if (ds.size() != input_len_) throw InputLengthMismatch(input_len_, ds.size());
                x.col(static_cast<Eigen::Index>(j)) =
                    Eigen::Map<const Eigen::VectorXd>(ds.values().data(), n);
            }
            const Eigen::MatrixXd unit = unit_outputs(x);
            for (Eigen::Index j = 0; j < unit.cols(); ++j) out.push_back(to_params(unit.col(j)));
        }
        return out;
    }

    friend bool operator==(const DeepSetsEstimator&, const DeepSetsEstimator&) = default;

private:
    DenseNet summary_;
    Aggregation aggregation_ = Aggregation::Mean;
    DenseNet inference_;
    PriorBox box_;
    std::size_t input_len_ = 0;
};

// Reusable buffers for repeated backward passes.
struct BackwardWorkspace {
    DenseCache summary;
    DenseCache inference;
    Eigen::MatrixXd stats;
    Eigen::MatrixXd d_emb;
};

// Mean loss over the columns of `data` (n x B) against unit-scale truths
// (d x B); accumulates exact gradients of that mean into `grad`.
inline double backward_batch(const DeepSetsEstimator& est, const Eigen::MatrixXd& data,
                             const Eigen::MatrixXd& truth_unit, const LossKind& loss, EstimatorGrad& grad,
                             BackwardWorkspace& ws) {
    if (static_cast<std::size_t>(data.rows()) != est.input_len())
        throw InputLengthMismatch(est.input_len(), static_cast<std::size_t>(data.rows()));
    const Eigen::Index batch = data.cols();
    const Eigen::Index d = truth_unit.rows();

    const Eigen::Map<const Eigen::MatrixXd> row(data.data(), 1, data.size());
    const Eigen::MatrixXd& emb = est.summary().forward(row, ws.summary);
    ws.stats = detail::aggregate(emb, data.rows(), est.aggregation());
    const Eigen::MatrixXd& raw = est.inference().forward(ws.stats, ws.inference);

    Eigen::MatrixXd d_raw(d, batch);
    std::vector<double> unit(static_cast<std::size_t>(d)), g(static_cast<std::size_t>(d));
    double risk = 0.0;
    for (Eigen::Index j = 0; j < batch; ++j) {
        for (Eigen::Index i = 0; i < d; ++i) unit[static_cast<std::size_t>(i)] = sigmoid(raw(i, j));
        const double* t = truth_unit.col(j).data();
        risk += unit_loss(loss, unit, std::span<const double>(t, static_cast<std::size_t>(d)), g);
        for (Eigen::Index i = 0; i < d; ++i) {
            const double p = unit[static_cast<std::size_t>(i)];
            d_raw(i, j) = g[static_cast<std::size_t>(i)] * p * (1.0 - p) / static_cast<double>(batch);
        }
    }

    const Eigen::MatrixXd d_stats = est.inference().backward(ws.inference, std::move(d_raw), grad.inference, true);
    detail::aggregate_backward(emb, d_stats, data.rows(), est.aggregation(), ws.d_emb);
    est.summary().backward(ws.summary, ws.d_emb, grad.summary, false);
    return risk / static_cast<double>(batch);
}

struct BackwardResult {
    EstimatorGrad grad;
    double risk = 0.0;
};

// Gradient of the mean batch loss for (dataset, truth) pairs.
inline BackwardResult backward(const DeepSetsEstimator& est,
                               std::span<const std::pair<IncrementSeries, ParamVector>> batch,
                               const LossKind& loss) {
    if (batch.empty()) throw EmptyInput("backward: empty batch");
    const auto n = static_cast<Eigen::Index>(est.input_len());
    const auto& box = est.output_box();
    Eigen::MatrixXd data(n, static_cast<Eigen::Index>(batch.size()));
    Eigen::MatrixXd truth(static_cast<Eigen::Index>(box.size()), static_cast<Eigen::Index>(batch.size()));
    for (std::size_t j = 0; j < batch.size(); ++j) {
        const auto& [series, theta] = batch[j];
        if (series.size() != est.input_len()) throw InputLengthMismatch(est.input_len(), series.size());
        if (!box.contains(theta)) throw OutOfBox("backward: truth outside the prior box");
        data.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(series.values().data(), n);
        for (std::size_t i = 0; i < box.size(); ++i)
            truth(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = box.normalize(i, theta[i]);
    }
    BackwardResult out{est.zero_grad(), 0.0};
    BackwardWorkspace ws;
    out.risk = backward_batch(est, data, truth, loss, out.grad, ws);
    return out;
}

// Flat views of all weights and biases: summary layers then inference
// layers, each as column-major W followed by b.
namespace detail {
template <typename Net, typename F>
void visit_net(Net& net, F&& f) {
    for (std::size_t l = 0; l < net.weights().size(); ++l) {
        f(net.weights()[l].data(), static_cast<std::size_t>(net.weights()[l].size()));
        f(net.biases()[l].data(), static_cast<std::size_t>(net.biases()[l].size()));
    }
}
template <typename F>
void visit_grad(DenseGrad& g, F&& f) {
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
        f(g.weights[l].data(), static_cast<std::size_t>(g.weights[l].size()));
        f(g.biases[l].data(), static_cast<std::size_t>(g.biases[l].size()));
    }
}
}  // namespace detail

inline std::vector<double> flatten_parameters(const DeepSetsEstimator& est) {
    std::vector<double> out;
    auto push = [&](const double* p, std::size_t n) { out.insert(out.end(), p, p + n); };
    detail::visit_net(est.summary(), push);
    detail::visit_net(est.inference(), push);
    return out;
}

inline void assign_parameters(DeepSetsEstimator& est, std::span<const double> flat) {
    std::size_t pos = 0;
    auto pull = [&](double* p, std::size_t n) {
        if (pos + n > flat.size()) throw InvalidArgument("assign_parameters: flat vector too short");
        std::copy_n(flat.data() + pos, n, p);
        pos += n;
    };
    detail::visit_net(est.summary(), pull);
    detail::visit_net(est.inference(), pull);
    if (pos != flat.size()) throw InvalidArgument("assign_parameters: flat vector too long");
}

inline std::vector<double> flatten_gradient(EstimatorGrad grad) {
    std::vector<double> out;
    auto push = [&](const double* p, std::size_t n) { out.insert(out.end(), p, p + n); };
    detail::visit_grad(grad.summary, push);
    detail::visit_grad(grad.inference, push);
    return out;
}

}  // namespace levynbe
