#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>

#include "levynbe/error.hpp"
#include "levynbe/levy_models.hpp"

namespace levynbe {

// Training loss. Every kind acts on box-normalized parameters in [0, 1]
// and is averaged over coordinates.
struct LossKind {
    enum class Kind { MSLE, MAE, MSE, LinLin };

    Kind kind = Kind::MSLE;
    double alpha = 0.5;  // LinLin only

    static LossKind msle() { return {Kind::MSLE, 0.5}; }
    static LossKind mae() { return {Kind::MAE, 0.5}; }
    static LossKind mse() { return {Kind::MSE, 0.5}; }
    static LossKind linlin(double alpha) {
        if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("lin-lin alpha must lie strictly inside (0, 1)");
        return {Kind::LinLin, alpha};
    }

    static LossKind parse(std::string_view s) {
        if (s == "msle") return msle();
        if (s == "mae") return mae();
        if (s == "mse") return mse();
        if (s.starts_with("linlin:")) {
            const std::string rest(s.substr(7));
            std::size_t used = 0;
            double a = 0.0;
            try {
                a = std::stod(rest, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != rest.size()) throw InvalidArgument("bad lin-lin level in '" + std::string(s) + "'");
            return linlin(a);
        }
        throw InvalidArgument("unknown loss '" + std::string(s) + "' (expected msle, mae, mse, linlin:<alpha>)");
    }

    std::string to_string() const {
        switch (kind) {
            case Kind::MSLE: return "msle";
            case Kind::MAE: return "mae";
            case Kind::MSE: return "mse";
            case Kind::LinLin: {
                std::string a = std::to_string(alpha);
                while (a.size() > 1 && a.back() == '0') a.pop_back();
                return "linlin:" + a;
            }
        }
        return "?";
    }

    friend bool operator==(const LossKind&, const LossKind&) = default;
};

// Loss of unit-scale estimate `est` against unit-scale truth `truth`.
// When `grad` is non-empty it receives d(loss)/d(est).
inline double unit_loss(const LossKind& kind, std::span<const double> est, std::span<const double> truth,
                        std::span<double> grad = {}) {
    const std::size_t d = est.size();
    const double inv_d = 1.0 / static_cast<double>(d);
    double total = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double e = est[i], t = truth[i];
        double value = 0.0, slope = 0.0;
        switch (kind.kind) {
            case LossKind::Kind::MSLE: {
                const double r = std::log1p(e) - std::log1p(t);
                value = r * r;
                slope = 2.0 * r / (1.0 + e);
                break;
            }
            case LossKind::Kind::MAE:
                value = std::abs(e - t);
                slope = e > t ? 1.0 : (e < t ? -1.0 : 0.0);
                break;
            case LossKind::Kind::MSE:
                value = (e - t) * (e - t);
                slope = 2.0 * (e - t);
                break;
            case LossKind::Kind::LinLin: {
                // (I{theta <= a} - alpha)(a - theta)
                const double indicator = t <= e ? 1.0 : 0.0;
                value = (indicator - kind.alpha) * (e - t);
                slope = indicator - kind.alpha;
                break;
            }
        }
        total += value;
        if (!grad.empty()) grad[i] = slope * inv_d;
    }
    return total * inv_d;
}

// Loss between two parameter vectors inside the prior box.
inline double loss_value(const LossKind& kind, const ParamVector& estimate, const ParamVector& truth,
                         const PriorBox& box) {
    if (!(estimate.model() == box.model()) || !(truth.model() == box.model()))
        throw ModelMismatch("loss_value: parameter model differs from the prior box");
    if (!box.contains(estimate)) throw OutOfBox("loss_value: estimate outside the prior box");
    if (!box.contains(truth)) throw OutOfBox("loss_value: truth outside the prior box");
    std::vector<double> e(box.size()), t(box.size());
    for (std::size_t i = 0; i < box.size(); ++i) {
        e[i] = box.normalize(i, estimate[i]);
        t[i] = box.normalize(i, truth[i]);
    }
    return unit_loss(kind, e, t);
}

}  // namespace levynbe
