#ifndef OSDECOMP_GRID_HPP
#define OSDECOMP_GRID_HPP

#include <algorithm>
#include <cstddef>
#include <vector>

#include "osdecomp/table.hpp"

namespace osdecomp {

// Strictly increasing outcome values y_1 < ... < y_M at which every curve
// is evaluated (one distribution-regression fit per point).
class EvaluationGrid {
public:
    explicit EvaluationGrid(std::vector<double> points) : points_(std::move(points)) {
        if (points_.size() < 2)
            throw InvalidGrid("grid needs at least 2 points");
        for (std::size_t i = 1; i < points_.size(); ++i)
            if (!(points_[i - 1] < points_[i]))
                throw InvalidGrid("grid points must be strictly increasing");
    }

    const std::vector<double>& points() const { return points_; }
    std::size_t size() const { return points_.size(); }
    double operator[](std::size_t i) const { return points_[i]; }

    bool operator==(const EvaluationGrid& o) const { return points_ == o.points_; }

    // Index of the largest grid point <= y, or npos when y < y_1.
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t index_at(double y) const {
        auto it = std::upper_bound(points_.begin(), points_.end(), y);
        if (it == points_.begin()) return npos;
        return static_cast<std::size_t>(it - points_.begin()) - 1;
    }

private:
    std::vector<double> points_;
};

struct GridPolicy {
    enum Kind { Unique, Quantiles, Explicit, Default } kind = Default;
    std::size_t max_unique = 200;    // Default switches to quantiles above this
    std::size_t quantile_count = 199;  // 0.5% .. 99.5%
    std::vector<double> explicit_points;
};

namespace detail {

inline std::vector<double> sorted_pooled_outcomes(const ObservationTable& table) {
    std::vector<double> ys;
    ys.reserve(table.size());
    for (const auto& r : table.rows()) ys.push_back(r.outcome);
    std::sort(ys.begin(), ys.end());
    return ys;
}

inline std::vector<double> unique_values(std::vector<double> sorted) {
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    return sorted;
}

// Equally spaced pooled quantiles on (0,1), deduplicated. Uses the
// lower-nearest order statistic so grid points are observed outcomes.
inline std::vector<double> quantile_points(const std::vector<double>& sorted, std::size_t m) {
    std::vector<double> pts;
    pts.reserve(m);
    const std::size_t n = sorted.size();
    for (std::size_t k = 1; k <= m; ++k) {
        double q = static_cast<double>(k) / static_cast<double>(m + 1);
        std::size_t idx = static_cast<std::size_t>(q * static_cast<double>(n - 1));
        pts.push_back(sorted[idx]);
    }
    return unique_values(std::move(pts));
}

}  // namespace detail

inline EvaluationGrid make_grid(const ObservationTable& table, const GridPolicy& policy = {}) {
    if (policy.kind == GridPolicy::Explicit)
        return EvaluationGrid(policy.explicit_points);

    auto sorted = detail::sorted_pooled_outcomes(table);
    if (sorted.front() == sorted.back())
        throw DegenerateOutcome("all outcome values identical");

    auto uniq = detail::unique_values(sorted);
    switch (policy.kind) {
        case GridPolicy::Unique:
            if (uniq.size() > policy.max_unique) uniq.resize(policy.max_unique);
            return EvaluationGrid(std::move(uniq));
        case GridPolicy::Quantiles:
            return EvaluationGrid(detail::quantile_points(sorted, policy.quantile_count));
        default:
            if (uniq.size() <= policy.max_unique)
                return EvaluationGrid(std::move(uniq));
            return EvaluationGrid(detail::quantile_points(sorted, policy.quantile_count));
    }
}

}  // namespace osdecomp

#endif
