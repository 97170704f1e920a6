#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "levynbe/error.hpp"
#include "levynbe/random.hpp"

namespace levynbe {

enum class Activation { LeakyReLU, ReLU, Tanh, Identity };

inline constexpr double leaky_relu_slope = 0.01;

inline std::string to_string(Activation a) {
    switch (a) {
        case Activation::LeakyReLU: return "lrelu";
        case Activation::ReLU: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Identity: return "identity";
    }
    return "?";
}

inline Activation parse_activation(std::string_view s) {
    if (s == "lrelu" || s == "leakyrelu") return Activation::LeakyReLU;
    if (s == "relu") return Activation::ReLU;
    if (s == "tanh") return Activation::Tanh;
    if (s == "identity") return Activation::Identity;
    throw InvalidArgument("unknown activation '" + std::string(s) + "' (expected lrelu, relu, tanh)");
}

namespace detail {

inline void activate(Eigen::MatrixXd& z, Activation a) {
    switch (a) {
        case Activation::LeakyReLU: z = z.cwiseMax(leaky_relu_slope * z); break;
        case Activation::ReLU: z = z.cwiseMax(0.0); break;
        case Activation::Tanh: z = z.array().tanh().matrix(); break;
        case Activation::Identity: break;
    }
}

// d(out) -> d(pre) given the pre-activation z and activation output y.
inline void activation_backward(Eigen::MatrixXd& d, const Eigen::MatrixXd& z, const Eigen::MatrixXd& y,
                                Activation a) {
    switch (a) {
        case Activation::LeakyReLU:
            d = (z.array() > 0.0).select(d.array(), leaky_relu_slope * d.array()).matrix();
            break;
        case Activation::ReLU: d = (z.array() > 0.0).select(d.array(), 0.0).matrix(); break;
        case Activation::Tanh: d = d.cwiseProduct((1.0 - y.array().square()).matrix()); break;
        case Activation::Identity: break;
    }
}

}  // namespace detail

// Gradient storage shaped like a DenseNet.
struct DenseGrad {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    void set_zero() {
        for (auto& w : weights) w.setZero();
        for (auto& b : biases) b.setZero();
    }
};

// Per-layer values kept from a forward pass for the backward pass.
struct DenseCache {
    std::vector<Eigen::MatrixXd> pre;   // W a + b, per layer
    std::vector<Eigen::MatrixXd> post;  // post[0] is the input; post[l+1] = act(pre[l])
};

// Fully connected network. Columns of the input are independent samples.
// Hidden layers use `activation`; the last layer does too only when
// `activate_output` is set.
class DenseNet {
public:
    DenseNet() = default;
    DenseNet(std::vector<int> layer_dims, Activation activation, bool activate_output)
        : dims_(std::move(layer_dims)), activation_(activation), activate_output_(activate_output) {
        if (dims_.size() < 2) throw InvalidArgument("DenseNet needs at least input and output dims");
        for (int d : dims_)
            if (d < 1) throw InvalidArgument("DenseNet layer widths must be positive");
        for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
            weights_.push_back(Eigen::MatrixXd::Zero(dims_[l + 1], dims_[l]));
            biases_.push_back(Eigen::VectorXd::Zero(dims_[l + 1]));
        }
    }

    // Weights and biases uniform on +-1/sqrt(fan_in).
    void init_uniform(Rng& rng) {
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            const double limit = 1.0 / std::sqrt(static_cast<double>(dims_[l]));
            for (Eigen::Index j = 0; j < weights_[l].cols(); ++j)
                for (Eigen::Index i = 0; i < weights_[l].rows(); ++i) weights_[l](i, j) = rng.uniform(-limit, limit);
            for (Eigen::Index i = 0; i < biases_[l].size(); ++i) biases_[l][i] = rng.uniform(-limit, limit);
        }
    }

    const std::vector<int>& layer_dims() const noexcept { return dims_; }
    Activation activation() const noexcept { return activation_; }
    bool activate_output() const noexcept { return activate_output_; }
    int input_dim() const { return dims_.front(); }
    int output_dim() const { return dims_.back(); }
    std::size_t layer_count() const noexcept { return weights_.size(); }

    std::vector<Eigen::MatrixXd>& weights() noexcept { return weights_; }
    std::vector<Eigen::VectorXd>& biases() noexcept { return biases_; }
    const std::vector<Eigen::MatrixXd>& weights() const noexcept { return weights_; }
    const std::vector<Eigen::VectorXd>& biases() const noexcept { return biases_; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
        return n;
    }

    DenseGrad zero_grad() const {
        DenseGrad g;
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            g.weights.push_back(Eigen::MatrixXd::Zero(weights_[l].rows(), weights_[l].cols()));
            g.biases.push_back(Eigen::VectorXd::Zero(biases_[l].size()));
        }
        return g;
    }

    Activation layer_activation(std::size_t l) const {
        return (l + 1 < weights_.size() || activate_output_) ? activation_ : Activation::Identity;
    }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& input) const {
        Eigen::MatrixXd a = input;
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            Eigen::MatrixXd z(weights_[l].rows(), a.cols());
            z.noalias() = weights_[l] * a;
            z.colwise() += biases_[l];
            detail::activate(z, layer_activation(l));
            a.swap(z);
        }
        return a;
    }

    const Eigen::MatrixXd& forward(const Eigen::MatrixXd& input, DenseCache& cache) const {
        cache.pre.resize(weights_.size());
        cache.post.resize(weights_.size() + 1);
        cache.post[0] = input;
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            auto& z = cache.pre[l];
            z.resize(weights_[l].rows(), input.cols());
            z.noalias() = weights_[l] * cache.post[l];
            z.colwise() += biases_[l];
            cache.post[l + 1] = z;
            detail::activate(cache.post[l + 1], layer_activation(l));
        }
        return cache.post.back();
    }

    // Accumulates parameter gradients into `grad` given d(loss)/d(output).
    // Returns d(loss)/d(input) when `need_input_grad` is set.
    Eigen::MatrixXd backward(const DenseCache& cache, Eigen::MatrixXd d_out, DenseGrad& grad,
                             bool need_input_grad) const {
        for (std::size_t l = weights_.size(); l-- > 0;) {
            detail::activation_backward(d_out, cache.pre[l], cache.post[l + 1], layer_activation(l));
            grad.weights[l].noalias() += d_out * cache.post[l].transpose();
            grad.biases[l] += d_out.rowwise().sum();
            if (l == 0 && !need_input_grad) return {};
            Eigen::MatrixXd d_in(weights_[l].cols(), d_out.cols());
            d_in.noalias() = weights_[l].transpose() * d_out;
            d_out.swap(d_in);
        }
        return d_out;
    }

    friend bool operator==(const DenseNet& a, const DenseNet& b) {
        if (a.dims_ != b.dims_ || a.activation_ != b.activation_ || a.activate_output_ != b.activate_output_)
            return false;
        for (std::size_t l = 0; l < a.weights_.size(); ++l)
            if (a.weights_[l] != b.weights_[l] || a.biases_[l] != b.biases_[l]) return false;
        return true;
    }

private:
    std::vector<int> dims_;
    Activation activation_ = Activation::LeakyReLU;
    bool activate_output_ = false;
    std::vector<Eigen::MatrixXd> weights_;
    std::vector<Eigen::VectorXd> biases_;
};

}  // namespace levynbe
