#ifndef OSDECOMP_WEIGHTED_ECDF_HPP
#define OSDECOMP_WEIGHTED_ECDF_HPP

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "osdecomp/table.hpp"

namespace osdecomp {

// Weighted empirical c.d.f.: P(V <= y) = sum{w_i : v_i <= y} / sum w_i.
// Right-continuous step function of y; ties use the weak inequality.
inline double weighted_cdf(std::span<const double> values,
                           std::span<const double> weights, double y) {
    if (values.empty())
        throw EmptyInput("weighted_cdf: no values");
    if (values.size() != weights.size())
        throw LengthMismatch("weighted_cdf: values/weights length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        den += weights[i];
        if (values[i] <= y) num += weights[i];
    }
    return num / den;
}

// Precomputed form for evaluation on many thresholds.
class WeightedEcdf {
public:
    WeightedEcdf(std::vector<double> values, std::vector<double> weights) {
        if (values.empty()) throw EmptyInput("WeightedEcdf: no values");
        if (values.size() != weights.size())
            throw LengthMismatch("WeightedEcdf: values/weights length mismatch");
        std::vector<std::size_t> order(values.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        sorted_values_.reserve(values.size());
        cum_weight_.reserve(values.size());
        double cum = 0.0;
        for (std::size_t idx : order) {
            cum += weights[idx];
            sorted_values_.push_back(values[idx]);
            cum_weight_.push_back(cum);
        }
        total_ = cum;
    }

    double operator()(double y) const {
        auto it = std::upper_bound(sorted_values_.begin(), sorted_values_.end(), y);
        if (it == sorted_values_.begin()) return 0.0;
        std::size_t k = static_cast<std::size_t>(it - sorted_values_.begin());
        return cum_weight_[k - 1] / total_;
    }

    double total_weight() const { return total_; }

private:
    std::vector<double> sorted_values_;
    std::vector<double> cum_weight_;
    double total_ = 0.0;
};

}  // namespace osdecomp

#endif
