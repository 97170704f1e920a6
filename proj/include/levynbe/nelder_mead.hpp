#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "levynbe/levy_models.hpp"

namespace levynbe {

struct NelderMeadOptions {
    double initial_step = 1.0;
    double diameter_tol = 1e-6;
    int max_iterations = 2000;
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

// Unconstrained Nelder-Mead simplex search. Stops when every vertex lies
// within diameter_tol (Euclidean) of the best one, or after max_iterations.
// NaN objective values are treated as +inf.
template <typename Objective>
NelderMeadResult nelder_mead(Objective&& f, std::vector<double> x0, const NelderMeadOptions& opt = {}) {
    const std::size_t d = x0.size();
    auto eval = [&](const std::vector<double>& x) {
        const double v = f(x);
        return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
    };

    std::vector<std::vector<double>> simplex(d + 1, x0);
    for (std::size_t i = 0; i < d; ++i) simplex[i + 1][i] += opt.initial_step;
    std::vector<double> fv(d + 1);
    for (std::size_t i = 0; i <= d; ++i) fv[i] = eval(simplex[i]);

    std::vector<std::size_t> order(d + 1);
    std::vector<double> centroid(d), trial(d), trial2(d);

    auto point = [&](double t, const std::vector<double>& from, std::vector<double>& out) {
        // centroid + t * (centroid - from)
        for (std::size_t i = 0; i < d; ++i) out[i] = centroid[i] + t * (centroid[i] - from[i]);
    };

    NelderMeadResult res;
    int it = 0;
    for (;; ++it) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        const std::size_t best = order.front(), worst = order.back(), second = order[d - (d > 0 ? 1 : 0)];

        double diameter = 0.0;
        for (std::size_t v = 0; v <= d; ++v) {
            double s = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                const double dx = simplex[v][i] - simplex[best][i];
                s += dx * dx;
            }
            diameter = std::max(diameter, std::sqrt(s));
        }
        if (diameter < opt.diameter_tol) {
            res.converged = true;
            break;
        }
        if (it >= opt.max_iterations) break;

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t v = 0; v <= d; ++v) {
            if (v == worst) continue;
            for (std::size_t i = 0; i < d; ++i) centroid[i] += simplex[v][i];
        }
        for (double& c : centroid) c /= static_cast<double>(d);

        point(1.0, simplex[worst], trial);
        const double fr = eval(trial);
        if (fr < fv[best]) {
            point(2.0, simplex[worst], trial2);
            const double fe = eval(trial2);
            if (fe < fr) {
                simplex[worst] = trial2;
                fv[worst] = fe;
            } else {
                simplex[worst] = trial;
                fv[worst] = fr;
            }
        } else if (fr < fv[second]) {
            simplex[worst] = trial;
            fv[worst] = fr;
        } else {
            // Outside contraction if the reflection beat the worst point,
            // inside contraction otherwise.
            const bool outside = fr < fv[worst];
            point(outside ? 0.5 : -0.5, simplex[worst], trial2);
            const double fc = eval(trial2);
            if (fc < (outside ? fr : fv[worst])) {
                simplex[worst] = trial2;
                fv[worst] = fc;
            } else {
                for (std::size_t v = 0; v <= d; ++v) {
                    if (v == best) continue;
                    for (std::size_t i = 0; i < d; ++i)
                        simplex[v][i] = simplex[best][i] + 0.5 * (simplex[v][i] - simplex[best][i]);
                    fv[v] = eval(simplex[v]);
                }
            }
        }
    }

    const auto best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
    res.x = simplex[best];
    res.value = fv[best];
    res.iterations = it;
    return res;
}

// Logit reparameterization of a prior box: unconstrained u maps to
// lower + width * sigmoid(u).
class BoxTransform {
public:
    explicit BoxTransform(PriorBox box) : box_(std::move(box)) {}

    std::vector<double> to_unconstrained(const ParamVector& p) const {
        std::vector<double> u(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double t = std::clamp(box_.normalize(i, p[i]), 1e-12, 1.0 - 1e-12);
            u[i] = std::log(t) - std::log1p(-t);
        }
        return u;
    }

    ParamVector to_box(const std::vector<double>& u) const {
        std::vector<double> v(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double s = 1.0 / (1.0 + std::exp(-u[i]));
            v[i] = std::clamp(box_.denormalize(i, s), box_.lower()[i], box_.upper()[i]);
            // Keep strictly positive coordinates valid when the box touches 0.
            if (box_.model().is_positive(i) && v[i] <= 0.0) v[i] = std::nextafter(0.0, 1.0);
        }
        return {box_.model(), std::move(v)};
    }

    const PriorBox& box() const noexcept { return box_; }

private:
    PriorBox box_;
};

}  // namespace levynbe
