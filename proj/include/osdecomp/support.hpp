#ifndef OSDECOMP_SUPPORT_HPP
#define OSDECOMP_SUPPORT_HPP

#include <array>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "osdecomp/table.hpp"

namespace osdecomp {

enum class RegionTag { Common, WOnly, BOnly };

inline const char* to_string(RegionTag t) {
    switch (t) {
        case RegionTag::Common: return "COMMON";
        case RegionTag::WOnly: return "W_ONLY";
        default: return "B_ONLY";
    }
}

enum class SupportStrategy { Range1D, CellRange, Explicit };

// Per-group, per-covariate bounds for the EXPLICIT strategy. Continuous
// covariates get a closed interval; discrete ones a set of admissible
// values. Covariates left out are unrestricted.
struct ExplicitBounds {
    struct CovariateBounds {
        double low = -std::numeric_limits<double>::infinity();
        double high = std::numeric_limits<double>::infinity();
        std::set<double> values;  // discrete only
    };
    std::map<std::string, CovariateBounds> group[2];  // indexed by group
};

// Per-observation region tags plus the four weighted masses.
struct SupportPartition {
    std::vector<RegionTag> region_of;  // parallel to table rows
    double mass_W_in = 1.0;   // mu_W(S_B)
    double mass_W_out = 0.0;  // mu_W(S_B complement)
    double mass_B_in = 1.0;   // mu_B(S_W)
    double mass_B_out = 0.0;  // mu_B(S_W complement)
    std::string strategy;
};

// (mu_W(S_B), mu_W(S_B^c), mu_B(S_W), mu_B(S_W^c))
inline std::array<double, 4> region_masses(const SupportPartition& p) {
    return {p.mass_W_in, p.mass_W_out, p.mass_B_in, p.mass_B_out};
}

namespace detail {

struct Box {
    std::vector<double> low, high;  // closed interval per continuous covariate
    void expand(const std::vector<double>& x) {
        if (low.empty()) {
            low = x;
            high = x;
            return;
        }
        for (std::size_t k = 0; k < x.size(); ++k) {
            if (x[k] < low[k]) low[k] = x[k];
            if (x[k] > high[k]) high[k] = x[k];
        }
    }
    bool contains(const std::vector<double>& x) const {
        if (low.empty()) return false;
        for (std::size_t k = 0; k < x.size(); ++k)
            if (x[k] < low[k] || x[k] > high[k]) return false;
        return true;
    }
};

// Support of one group estimated from its observed covariates: bounding
// boxes of the continuous covariates within each discrete-covariate cell.
// With no discrete covariates there is a single cell; with no continuous
// ones membership is cell presence alone.
class CellRangeSupport {
public:
    CellRangeSupport(const ObservationTable& table, int group) {
        const auto& schema = table.schema();
        for (std::size_t k = 0; k < schema.size(); ++k)
            (schema[k].kind == CovariateKind::Discrete ? disc_idx_ : cont_idx_).push_back(k);
        for (const auto& r : table.rows()) {
            if (r.group != group) continue;
            cells_[key_of(r.covariates)].expand(project(r.covariates, cont_idx_));
        }
    }

    bool contains(const std::vector<double>& x) const {
        auto it = cells_.find(key_of(x));
        if (it == cells_.end()) return false;
        if (cont_idx_.empty()) return true;
        return it->second.contains(project(x, cont_idx_));
    }

private:
    static std::vector<double> project(const std::vector<double>& x,
                                       const std::vector<std::size_t>& idx) {
        std::vector<double> out;
        out.reserve(idx.size());
        for (std::size_t k : idx) out.push_back(x[k]);
        return out;
    }
    std::vector<double> key_of(const std::vector<double>& x) const {
        return project(x, disc_idx_);
    }

    std::vector<std::size_t> cont_idx_, disc_idx_;
    std::map<std::vector<double>, Box> cells_;
};

inline bool explicit_contains(const ExplicitBounds& b, int group,
                              const std::vector<CovariateSpec>& schema,
                              const std::vector<double>& x) {
    for (std::size_t k = 0; k < schema.size(); ++k) {
        auto it = b.group[group].find(schema[k].name);
        if (it == b.group[group].end()) continue;
        const auto& cb = it->second;
        if (schema[k].kind == CovariateKind::Continuous) {
            if (x[k] < cb.low || x[k] > cb.high) return false;
        } else {
            if (!cb.values.empty() && !cb.values.count(x[k])) return false;
        }
    }
    return true;
}

}  // namespace detail

// Tags every observation COMMON / W_ONLY / B_ONLY and computes the four
// weighted masses. Empty common support is not an error; the masses
// simply reflect it. Boundary membership uses closed intervals.
inline SupportPartition estimate_partition(
    const ObservationTable& table, SupportStrategy strategy,
    const ExplicitBounds* bounds = nullptr) {
    const auto& schema = table.schema();

    std::function<bool(int, const std::vector<double>&)> in_support;
    std::string strategy_name;

    if (strategy == SupportStrategy::Range1D) {
        std::size_t n_cont = 0, cont_k = 0;
        for (std::size_t k = 0; k < schema.size(); ++k)
            if (schema[k].kind == CovariateKind::Continuous) {
                ++n_cont;
                cont_k = k;
            }
        if (n_cont != 1)
            throw StrategyMismatch("RANGE_1D needs exactly one continuous covariate, got " +
                                   std::to_string(n_cont));
        double lo[2], hi[2];
        bool seen[2] = {false, false};
        for (const auto& r : table.rows()) {
            double v = r.covariates[cont_k];
            int g = r.group;
            if (!seen[g]) {
                lo[g] = hi[g] = v;
                seen[g] = true;
            } else {
                if (v < lo[g]) lo[g] = v;
                if (v > hi[g]) hi[g] = v;
            }
        }
        in_support = [=](int g, const std::vector<double>& x) {
            return x[cont_k] >= lo[g] && x[cont_k] <= hi[g];
        };
        strategy_name = "RANGE_1D";
    } else if (strategy == SupportStrategy::CellRange) {
        auto sW = std::make_shared<detail::CellRangeSupport>(table, 0);
        auto sB = std::make_shared<detail::CellRangeSupport>(table, 1);
        in_support = [sW, sB](int g, const std::vector<double>& x) {
            return g == 0 ? sW->contains(x) : sB->contains(x);
        };
        strategy_name = "CELL_RANGE";
    } else {
        if (!bounds)
            throw StrategyMismatch("EXPLICIT strategy requires bounds");
        ExplicitBounds b = *bounds;
        auto sch = schema;
        in_support = [b, sch](int g, const std::vector<double>& x) {
            return detail::explicit_contains(b, g, sch, x);
        };
        strategy_name = "EXPLICIT";
    }

    SupportPartition part;
    part.strategy = strategy_name;
    part.region_of.reserve(table.size());
    double w_in[2] = {0.0, 0.0}, w_out[2] = {0.0, 0.0};
    for (const auto& r : table.rows()) {
        const int other = 1 - r.group;
        const bool common = in_support(other, r.covariates);
        if (common) {
            part.region_of.push_back(RegionTag::Common);
            w_in[r.group] += r.weight;
        } else {
            part.region_of.push_back(r.group == 0 ? RegionTag::WOnly : RegionTag::BOnly);
            w_out[r.group] += r.weight;
        }
    }
    part.mass_W_in = w_in[0] / (w_in[0] + w_out[0]);
    part.mass_W_out = w_out[0] / (w_in[0] + w_out[0]);
    part.mass_B_in = w_in[1] / (w_in[1] + w_out[1]);
    part.mass_B_out = w_out[1] / (w_in[1] + w_out[1]);
    return part;
}

// Default rule: RANGE_1D for a single continuous covariate with no
// discrete ones, CELL_RANGE otherwise.
inline SupportStrategy default_strategy(const ObservationTable& table) {
    std::size_t n_cont = 0, n_disc = 0;
    for (const auto& cv : table.schema())
        (cv.kind == CovariateKind::Continuous ? n_cont : n_disc)++;
    return (n_cont == 1 && n_disc == 0) ? SupportStrategy::Range1D : SupportStrategy::CellRange;
}

}  // namespace osdecomp

#endif
