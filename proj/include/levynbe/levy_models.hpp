#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "levynbe/error.hpp"
#include "levynbe/random.hpp"

namespace levynbe {

using ComplexValue = std::complex<double>;

enum class ModelKind { CompoundPoisson, Merton, VarianceGamma, DeepVarianceGamma };

// Which Levy model, plus the subordination depth for the deep variance gamma.
class ModelSpec {
public:
    constexpr ModelSpec() = default;

    static ModelSpec compound_poisson() { return ModelSpec(ModelKind::CompoundPoisson, 0); }
    static ModelSpec merton() { return ModelSpec(ModelKind::Merton, 0); }
    static ModelSpec variance_gamma() { return ModelSpec(ModelKind::VarianceGamma, 0); }
    static ModelSpec deep_variance_gamma(int levels) {
        if (levels < 1) throw InvalidArgument("deep variance gamma needs at least one level");
        return ModelSpec(ModelKind::DeepVarianceGamma, levels);
    }

    // Accepts "cp", "merton", "vg" and "dvg:<L>".
    static ModelSpec parse(std::string_view text) {
        if (text == "cp") return compound_poisson();
        if (text == "merton") return merton();
        if (text == "vg") return variance_gamma();
        if (text.starts_with("dvg:")) {
            const std::string rest(text.substr(4));
            std::size_t used = 0;
            int levels = 0;
            try {
                levels = std::stoi(rest, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != rest.size() || rest.empty())
                throw InvalidArgument("bad model level in '" + std::string(text) + "'");
            return deep_variance_gamma(levels);
        }
        throw InvalidArgument("unknown model '" + std::string(text) + "' (expected cp, merton, vg, dvg:<L>)");
    }

    ModelKind kind() const noexcept { return kind_; }
    int levels() const noexcept { return levels_; }

    std::size_t dimension() const noexcept {
        switch (kind_) {
            case ModelKind::CompoundPoisson: return 3;
            case ModelKind::Merton: return 5;
            case ModelKind::VarianceGamma: return 3;
            case ModelKind::DeepVarianceGamma: return 1 + static_cast<std::size_t>(levels_);
        }
        return 0;
    }

    std::vector<std::string> param_names() const {
        switch (kind_) {
            case ModelKind::CompoundPoisson: return {"lambda", "mu", "sigma2"};
            case ModelKind::Merton: return {"mu", "sigma2", "lambda", "mu_j", "sigma2_j"};
            case ModelKind::VarianceGamma: return {"gamma", "sigma2", "alpha"};
            case ModelKind::DeepVarianceGamma: {
                std::vector<std::string> names{"sigma2"};
                for (int k = 1; k <= levels_; ++k) names.push_back("alpha" + std::to_string(k));
                return names;
            }
        }
        return {};
    }

    // Coordinates that must be strictly positive.
    bool is_positive(std::size_t i) const noexcept {
        switch (kind_) {
            case ModelKind::CompoundPoisson: return i == 0 || i == 2;
            case ModelKind::Merton: return i == 1 || i == 2 || i == 4;
            case ModelKind::VarianceGamma: return i == 1 || i == 2;
            case ModelKind::DeepVarianceGamma: return true;
        }
        return false;
    }

    // How a coordinate transforms when the data are multiplied by c:
    // it is multiplied by c^power. 0 = scale free, 1 = location, 2 = variance.
    int scale_power(std::size_t i) const noexcept {
        switch (kind_) {
            case ModelKind::CompoundPoisson: return i == 0 ? 0 : static_cast<int>(i);
            case ModelKind::Merton: {
                constexpr int powers[] = {1, 2, 0, 1, 2};
                return powers[i];
            }
            case ModelKind::VarianceGamma: {
                constexpr int powers[] = {1, 2, 0};
                return powers[i];
            }
            case ModelKind::DeepVarianceGamma: return i == 0 ? 2 : 0;
        }
        return 0;
    }

    std::string to_string() const {
        switch (kind_) {
            case ModelKind::CompoundPoisson: return "cp";
            case ModelKind::Merton: return "merton";
            case ModelKind::VarianceGamma: return "vg";
            case ModelKind::DeepVarianceGamma: return "dvg:" + std::to_string(levels_);
        }
        return "?";
    }

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;

private:
    constexpr ModelSpec(ModelKind kind, int levels) : kind_(kind), levels_(levels) {}

    ModelKind kind_ = ModelKind::CompoundPoisson;
    int levels_ = 0;
};

class ParamVector {
public:
    ParamVector() = default;
    ParamVector(ModelSpec model, std::vector<double> values) : model_(model), values_(std::move(values)) {
        if (values_.size() != model_.dimension())
            throw InvalidArgument("parameter vector for " + model_.to_string() + " needs " +
                                  std::to_string(model_.dimension()) + " values, got " +
                                  std::to_string(values_.size()));
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i])) throw InvalidArgument("non-finite parameter value");
            if (model_.is_positive(i) && !(values_[i] > 0.0))
                throw InvalidArgument("parameter '" + model_.param_names()[i] + "' must be positive");
        }
    }

    const ModelSpec& model() const noexcept { return model_; }
    const std::vector<double>& values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }

    friend bool operator==(const ParamVector&, const ParamVector&) = default;

private:
    ModelSpec model_;
    std::vector<double> values_;
};

// Independent uniform prior, one interval per parameter.
class PriorBox {
public:
    PriorBox() = default;
    PriorBox(ModelSpec model, std::vector<double> lower, std::vector<double> upper)
        : model_(model), lower_(std::move(lower)), upper_(std::move(upper)) {
        const std::size_t d = model_.dimension();
        if (lower_.size() != d || upper_.size() != d)
            throw InvalidArgument("prior box dimension does not match model " + model_.to_string());
        for (std::size_t i = 0; i < d; ++i) {
            if (!std::isfinite(lower_[i]) || !std::isfinite(upper_[i]) || !(lower_[i] < upper_[i]))
                throw InvalidArgument("prior box needs lower < upper for every parameter");
            if (model_.is_positive(i) && lower_[i] < 0.0)
                throw InvalidArgument("prior lower bound of positive parameter '" +
                                      model_.param_names()[i] + "' is negative");
        }
    }

    // Uniform priors used for the benchmark models.
    static PriorBox standard(ModelSpec model) {
        switch (model.kind()) {
            case ModelKind::CompoundPoisson: return {model, {0.1, -0.6, 1e-3}, {1.3, 0.6, 0.3}};
            case ModelKind::Merton:
                return {model, {-0.8, 1e-3, 0.1, -1.5, 0.1}, {0.8, 1.0, 1.5, 1.5, 1.7}};
            case ModelKind::VarianceGamma: return {model, {-1.5, 1e-4, 0.1}, {1.5, 2.0, 3.0}};
            case ModelKind::DeepVarianceGamma: {
                std::vector<double> lo{1e-6}, hi{3.0};
                for (int k = 0; k < model.levels(); ++k) {
                    lo.push_back(1e-6);
                    hi.push_back(25.0);
                }
                return {model, lo, hi};
            }
        }
        throw InvalidArgument("unknown model");
    }

    const ModelSpec& model() const noexcept { return model_; }
    const std::vector<double>& lower() const noexcept { return lower_; }
    const std::vector<double>& upper() const noexcept { return upper_; }
    std::size_t size() const noexcept { return lower_.size(); }
    double width(std::size_t i) const { return upper_[i] - lower_[i]; }

    bool contains(const ParamVector& p) const {
        if (!(p.model() == model_)) return false;
        for (std::size_t i = 0; i < p.size(); ++i)
            if (p[i] < lower_[i] || p[i] > upper_[i]) return false;
        return true;
    }

    ParamVector midpoint() const {
        std::vector<double> v(size());
        for (std::size_t i = 0; i < size(); ++i) v[i] = 0.5 * (lower_[i] + upper_[i]);
        return {model_, v};
    }

    // Map to the unit cube and back.
    double normalize(std::size_t i, double value) const { return (value - lower_[i]) / width(i); }
    double denormalize(std::size_t i, double unit) const { return lower_[i] + width(i) * unit; }

    friend bool operator==(const PriorBox&, const PriorBox&) = default;

private:
    ModelSpec model_;
    std::vector<double> lower_, upper_;
};

// n-1 unit-time increments of one observed or simulated path.
class IncrementSeries {
public:
    IncrementSeries() = default;
    explicit IncrementSeries(std::vector<double> increments) : data_(std::move(increments)) {
        for (double x : data_)
            if (!std::isfinite(x)) throw InvalidArgument("increment series contains a non-finite value");
    }

    const std::vector<double>& values() const noexcept { return data_; }
    std::span<const double> span() const noexcept { return data_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    double operator[](std::size_t i) const { return data_[i]; }

    friend bool operator==(const IncrementSeries&, const IncrementSeries&) = default;

private:
    std::vector<double> data_;
};

inline std::vector<ParamVector> sample_prior(const PriorBox& prior, std::size_t count, SeedSpec seed) {
    if (count < 1) throw InvalidArgument("sample_prior: count must be at least 1");
    Rng rng(seed);
    std::vector<ParamVector> out;
    out.reserve(count);
    std::vector<double> v(prior.size());
    for (std::size_t c = 0; c < count; ++c) {
        for (std::size_t i = 0; i < prior.size(); ++i) v[i] = rng.uniform(prior.lower()[i], prior.upper()[i]);
        out.emplace_back(prior.model(), v);
    }
    return out;
}

namespace detail {

// log(1 + z) for complex z without cancellation when |z| is small.
inline ComplexValue complex_log1p(ComplexValue z) {
    const double re = z.real(), im = z.imag();
    return {0.5 * std::log1p(2.0 * re + re * re + im * im), std::atan2(im, 1.0 + re)};
}

// Draw one unit-time increment.
inline double draw_increment(const ParamVector& p, Rng& rng) {
    const auto& v = p.values();
    switch (p.model().kind()) {
        case ModelKind::CompoundPoisson: {
            // Sum of N iid N(mu, s2) jumps is N(N mu, N s2) given N.
            const auto jumps = static_cast<double>(rng.poisson(v[0]));
            if (jumps == 0.0) return 0.0;
            return jumps * v[1] + std::sqrt(jumps * v[2]) * rng.normal();
        }
        case ModelKind::Merton: {
            double x = v[0] + std::sqrt(v[1]) * rng.normal();
            const auto jumps = static_cast<double>(rng.poisson(v[2]));
            if (jumps > 0.0) x += jumps * v[3] + std::sqrt(jumps * v[4]) * rng.normal();
            return x;
        }
        case ModelKind::VarianceGamma: {
            const double alpha = v[2];
            const double g = rng.gamma(1.0 / alpha, alpha);
            return v[0] * g + std::sqrt(v[1] * g) * rng.normal();
        }
        case ModelKind::DeepVarianceGamma: {
            // s <- S_1(S_2(...S_L(1))): innermost clock first.
            double s = 1.0;
            for (std::size_t k = v.size() - 1; k >= 1; --k) s = rng.gamma(s / v[k], v[k]);
            return std::sqrt(v[0] * s) * rng.normal();
        }
    }
    return 0.0;
}

}  // namespace detail

// n-1 iid unit-time increments of the model. Throws GammaShapeUnderflow
// when a nested subordinator shape falls below 1e-12.
inline IncrementSeries simulate_increments(const ParamVector& params, std::size_t n, SeedSpec seed) {
    if (n < 2) throw InvalidArgument("simulate_increments: n must be at least 2");
    Rng rng(seed);
    std::vector<double> x(n - 1);
    for (double& xi : x) xi = detail::draw_increment(params, rng);
    return IncrementSeries(std::move(x));
}

// Characteristic exponent Psi(omega) of the unit-time law.
inline ComplexValue log_char_fn(const ParamVector& p, double omega) {
    const auto& v = p.values();
    const double w2 = omega * omega;
    switch (p.model().kind()) {
        case ModelKind::CompoundPoisson: {
            const ComplexValue jump = std::polar(std::exp(-0.5 * v[2] * w2), v[1] * omega);
            return v[0] * (jump - 1.0);
        }
        case ModelKind::Merton: {
            const ComplexValue jump = std::polar(std::exp(-0.5 * v[4] * w2), v[3] * omega);
            return ComplexValue(-0.5 * v[1] * w2, v[0] * omega) + v[2] * (jump - 1.0);
        }
        case ModelKind::VarianceGamma: {
            const double alpha = v[2];
            const ComplexValue z(0.5 * v[1] * alpha * w2, -v[0] * alpha * omega);
            return -detail::complex_log1p(z) / alpha;
        }
        case ModelKind::DeepVarianceGamma: {
            // Laplace exponents of the unit-mean gamma clocks composed with
            // the Brownian exponent, outermost clock applied first.
            double u = 0.5 * v[0] * w2;
            for (std::size_t k = 1; k < v.size(); ++k) u = std::log1p(v[k] * u) / v[k];
            return {-u, 0.0};
        }
    }
    return {0.0, 0.0};
}

// phi(omega) = E[exp(i omega X)] for the unit-time increment X.
inline ComplexValue char_fn(const ParamVector& p, double omega) {
    const auto& v = p.values();
    switch (p.model().kind()) {
        case ModelKind::CompoundPoisson:
        case ModelKind::Merton: return std::exp(log_char_fn(p, omega));
        case ModelKind::VarianceGamma: {
            const double alpha = v[2];
            const ComplexValue base(1.0 + 0.5 * v[1] * alpha * omega * omega, -v[0] * alpha * omega);
            return std::pow(base, -1.0 / alpha);
        }
        case ModelKind::DeepVarianceGamma: {
            double u = 0.5 * v[0] * omega * omega;
            for (std::size_t k = 1; k < v.size(); ++k) u = std::log1p(v[k] * u) / v[k];
            return {std::exp(-u), 0.0};
        }
    }
    return {1.0, 0.0};
}

// Analytic mean and variance of the unit-time increment.
struct Moments {
    double mean;
    double variance;
};

inline Moments increment_moments(const ParamVector& p) {
    const auto& v = p.values();
    switch (p.model().kind()) {
        case ModelKind::CompoundPoisson: return {v[0] * v[1], v[0] * (v[1] * v[1] + v[2])};
        case ModelKind::Merton: return {v[0] + v[2] * v[3], v[1] + v[2] * (v[3] * v[3] + v[4])};
        case ModelKind::VarianceGamma: return {v[0], v[1] + v[0] * v[0] * v[2]};
        case ModelKind::DeepVarianceGamma: return {0.0, v[0]};
    }
    return {0.0, 0.0};
}

}  // namespace levynbe
