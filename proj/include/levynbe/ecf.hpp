#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "levynbe/error.hpp"
#include "levynbe/levy_models.hpp"

namespace levynbe {

class FrequencyGrid {
public:
    FrequencyGrid() = default;
    explicit FrequencyGrid(std::vector<double> omegas) : omegas_(std::move(omegas)) {
        for (std::size_t k = 0; k < omegas_.size(); ++k) {
            if (!std::isfinite(omegas_[k]) || omegas_[k] == 0.0)
                throw InvalidArgument("frequency grid entries must be finite and nonzero");
            if (k > 0 && !(omegas_[k] > omegas_[k - 1]))
                throw InvalidArgument("frequency grid must be strictly increasing");
        }
    }

    // count equally spaced points on (0, omega_max].
    static FrequencyGrid equally_spaced(double omega_max, std::size_t count) {
        if (count < 1 || !(omega_max > 0.0)) throw InvalidArgument("bad grid specification");
        std::vector<double> w(count);
        for (std::size_t k = 0; k < count; ++k)
            w[k] = omega_max * static_cast<double>(k + 1) / static_cast<double>(count);
        return FrequencyGrid(std::move(w));
    }

    const std::vector<double>& omegas() const noexcept { return omegas_; }
    std::size_t size() const noexcept { return omegas_.size(); }
    bool empty() const noexcept { return omegas_.empty(); }
    double operator[](std::size_t k) const { return omegas_[k]; }

private:
    std::vector<double> omegas_;
};

struct EcfTable {
    FrequencyGrid grid;
    std::vector<ComplexValue> values;
};

inline ComplexValue ecf_at(std::span<const double> data, double omega) {
    double re = 0.0, im = 0.0;
    for (double x : data) {
        re += std::cos(omega * x);
        im += std::sin(omega * x);
    }
    const auto n = static_cast<double>(data.size());
    return {re / n, im / n};
}

inline EcfTable ecf(const IncrementSeries& data, const FrequencyGrid& grid) {
    if (data.empty()) throw EmptyInput("ecf: empty increment series");
    EcfTable table{grid, {}};
    table.values.reserve(grid.size());
    for (double w : grid.omegas()) table.values.push_back(ecf_at(data.span(), w));
    return table;
}

// Theoretical characteristic function tabulated on a grid.
inline EcfTable cf_table(const ParamVector& params, const FrequencyGrid& grid) {
    EcfTable table{grid, {}};
    table.values.reserve(grid.size());
    for (double w : grid.omegas()) table.values.push_back(char_fn(params, w));
    return table;
}

// Sum over the grid of |phi(w_k, theta) - phi_n(w_k)|^2.
inline double lsq_objective(const ParamVector& params, const EcfTable& table) {
    double total = 0.0;
    for (std::size_t k = 0; k < table.grid.size(); ++k)
        total += std::norm(char_fn(params, table.grid[k]) - table.values[k]);
    return total;
}

namespace grid_rule {
inline constexpr double scan_step = 0.5;
inline constexpr double omega_cap_low = 1.0;
inline constexpr double omega_cap_high = 200.0;
inline constexpr double decay_threshold = 0.05;
}  // namespace grid_rule

// First scan point (0.5, 1.0, ..., 200) where the ECF modulus drops below
// 0.05, clamped to [1, 200].
inline double ecf_decay_frequency(const IncrementSeries& data) {
    if (data.empty()) throw EmptyInput("default_grid: empty increment series");
    const auto steps = static_cast<int>(grid_rule::omega_cap_high / grid_rule::scan_step);
    for (int k = 1; k <= steps; ++k) {
        const double w = grid_rule::scan_step * k;
        if (std::abs(ecf_at(data.span(), w)) < grid_rule::decay_threshold)
            return std::clamp(w, grid_rule::omega_cap_low, grid_rule::omega_cap_high);
    }
    return grid_rule::omega_cap_high;
}

inline FrequencyGrid default_grid(const IncrementSeries& data, std::size_t count) {
    if (count < 2) throw InvalidArgument("default_grid: count must be at least 2");
    return FrequencyGrid::equally_spaced(ecf_decay_frequency(data), count);
}

}  // namespace levynbe
