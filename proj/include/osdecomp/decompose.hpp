#ifndef OSDECOMP_DECOMPOSE_HPP
#define OSDECOMP_DECOMPOSE_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "osdecomp/csv.hpp"
#include "osdecomp/distreg.hpp"
#include "osdecomp/grid.hpp"
#include "osdecomp/support.hpp"
#include "osdecomp/table.hpp"
#include "osdecomp/weighted_ecdf.hpp"

namespace osdecomp {

// Rows entering a theta average: one group, optionally one support region.
struct Selector {
    int group = 0;
    std::optional<RegionTag> region;  // nullopt: all rows of the group
};

struct ThetaEstimate {
    std::string model_group;
    Selector selector;
    std::vector<double> curve;  // per grid point, in [0,1], nondecreasing
};

// Weighted plug-in average of the fitted conditional c.d.f. over the
// selected subsample: curve(y) = sum_i w_i H(y|x_i) / sum_i w_i.
inline ThetaEstimate theta(const ConditionalCdf& model, const ObservationTable& table,
                           const Selector& sel, const SupportPartition* partition = nullptr) {
    if (sel.region && !partition)
        throw EmptySelector("theta: region selector requires a partition");
    ThetaEstimate est;
    est.model_group = model.group();
    est.selector = sel;
    est.curve.assign(model.grid().size(), 0.0);
    double wsum = 0.0;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const auto& r = table.rows()[i];
        if (r.group != sel.group) continue;
        if (sel.region && partition->region_of[i] != *sel.region) continue;
        auto curve = model.predict_curve(r.covariates);
        for (std::size_t m = 0; m < curve.size(); ++m) est.curve[m] += r.weight * curve[m];
        wsum += r.weight;
    }
    if (wsum == 0.0)
        throw EmptySelector("theta: selector matches no observations");
    for (double& v : est.curve) v /= wsum;
    return est;
}

enum class DecompositionMode { Relaxed, ConventionalOs };

inline const char* to_string(DecompositionMode m) {
    return m == DecompositionMode::Relaxed ? "RELAXED" : "CONVENTIONAL_OS";
}

// The evaluation grid and the aligned decomposition curves. In RELAXED
// mode total = composition + structure + w_out + b_out by construction;
// empirical_total is the raw weighted-ECDF gap, kept separate so the
// model approximation error stays visible.
struct DecompositionCurves {
    EvaluationGrid grid{std::vector<double>{0.0, 1.0}};
    DecompositionMode mode = DecompositionMode::Relaxed;
    std::vector<double> total;        // Delta
    std::vector<double> composition;  // Delta_X
    std::vector<double> structure;    // Delta_0
    std::vector<double> w_out;        // Delta_W
    std::vector<double> b_out;        // Delta_B
    std::vector<double> empirical_total;
    std::array<double, 4> masses{1.0, 0.0, 1.0, 0.0};
};

namespace detail {

inline std::vector<double> ecdf_gap(const ObservationTable& table, const EvaluationGrid& grid,
                                    const std::vector<bool>* keep = nullptr) {
    std::vector<double> vals[2], wts[2];
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (keep && !(*keep)[i]) continue;
        const auto& r = table.rows()[i];
        vals[r.group].push_back(r.outcome);
        wts[r.group].push_back(r.weight);
    }
    WeightedEcdf fw(vals[0], wts[0]), fb(vals[1], wts[1]);
    std::vector<double> gap(grid.size());
    for (std::size_t m = 0; m < grid.size(); ++m) gap[m] = fw(grid[m]) - fb(grid[m]);
    return gap;
}

inline bool region_nonempty(const ObservationTable& table, const SupportPartition& part,
                            int group, RegionTag tag) {
    for (std::size_t i = 0; i < table.size(); ++i)
        if (table.rows()[i].group == group && part.region_of[i] == tag) return true;
    return false;
}

}  // namespace detail

// Four-term decomposition over the support regions. Terms whose leading
// mass is zero (or whose region is empty) are identically zero, which
// collapses the result to the conventional two-term split under full
// overlap.
inline DecompositionCurves decompose_relaxed(const ObservationTable& table,
                                             const SupportPartition& partition,
                                             const ConditionalCdf& model_W,
                                             const ConditionalCdf& model_B) {
    if (!(model_W.grid() == model_B.grid()))
        throw GridMismatch("decompose_relaxed: models fitted on different grids");
    const EvaluationGrid& grid = model_W.grid();
    const std::size_t M = grid.size();

    DecompositionCurves out;
    out.grid = grid;
    out.mode = DecompositionMode::Relaxed;
    out.masses = region_masses(partition);
    out.composition.assign(M, 0.0);
    out.structure.assign(M, 0.0);
    out.w_out.assign(M, 0.0);
    out.b_out.assign(M, 0.0);

    const bool w_common = detail::region_nonempty(table, partition, 0, RegionTag::Common);
    const bool b_common = detail::region_nonempty(table, partition, 1, RegionTag::Common);
    const bool w_only = detail::region_nonempty(table, partition, 0, RegionTag::WOnly);
    const bool b_only = detail::region_nonempty(table, partition, 1, RegionTag::BOnly);

    std::vector<double> thW_W_common, thW_B_common, thB_B_common;
    if (w_common)
        thW_W_common = theta(model_W, table, {0, RegionTag::Common}, &partition).curve;
    if (b_common) {
        thW_B_common = theta(model_W, table, {1, RegionTag::Common}, &partition).curve;
        thB_B_common = theta(model_B, table, {1, RegionTag::Common}, &partition).curve;
    }

    if (w_common && b_common) {
        for (std::size_t m = 0; m < M; ++m) {
            out.composition[m] = thW_W_common[m] - thW_B_common[m];
            out.structure[m] = thW_B_common[m] - thB_B_common[m];
        }
    }
    if (partition.mass_W_out > 0.0 && w_only && w_common) {
        auto thW_W_wonly = theta(model_W, table, {0, RegionTag::WOnly}, &partition).curve;
        for (std::size_t m = 0; m < M; ++m)
            out.w_out[m] = (thW_W_wonly[m] - thW_W_common[m]) * partition.mass_W_out;
    }
    if (partition.mass_B_out > 0.0 && b_only && b_common) {
        auto thB_B_bonly = theta(model_B, table, {1, RegionTag::BOnly}, &partition).curve;
        for (std::size_t m = 0; m < M; ++m)
            out.b_out[m] = (thB_B_common[m] - thB_B_bonly[m]) * partition.mass_B_out;
    }

    out.total.assign(M, 0.0);
    for (std::size_t m = 0; m < M; ++m)
        out.total[m] = out.composition[m] + out.structure[m] + out.w_out[m] + out.b_out[m];
    out.empirical_total = detail::ecdf_gap(table, grid);
    return out;
}

// COMMON-tagged rows only, for refitting models the conventional way.
inline ObservationTable trimmed_table(const ObservationTable& table,
                                      const SupportPartition& partition) {
    std::vector<Observation> rows;
    for (std::size_t i = 0; i < table.size(); ++i)
        if (partition.region_of[i] == RegionTag::Common) rows.push_back(table.rows()[i]);
    return ObservationTable(std::move(rows), table.group_labels(), table.schema());
}

// Two-term decomposition on the trimmed (common-support) sample, the
// conventional estimator that imposes overlapping supports.
inline DecompositionCurves decompose_conventional(const ObservationTable& table,
                                                  const SupportPartition& partition,
                                                  const ConditionalCdf& model_W,
                                                  const ConditionalCdf& model_B) {
    if (!(model_W.grid() == model_B.grid()))
        throw GridMismatch("decompose_conventional: models fitted on different grids");
    if (!detail::region_nonempty(table, partition, 0, RegionTag::Common) ||
        !detail::region_nonempty(table, partition, 1, RegionTag::Common))
        throw EmptyCommonSupport("decompose_conventional: a group has no COMMON rows");

    const EvaluationGrid& grid = model_W.grid();
    const std::size_t M = grid.size();

    auto thW_W = theta(model_W, table, {0, RegionTag::Common}, &partition).curve;
    auto thW_B = theta(model_W, table, {1, RegionTag::Common}, &partition).curve;
    auto thB_B = theta(model_B, table, {1, RegionTag::Common}, &partition).curve;

    DecompositionCurves out;
    out.grid = grid;
    out.mode = DecompositionMode::ConventionalOs;
    out.masses = region_masses(partition);
    out.composition.resize(M);
    out.structure.resize(M);
    out.w_out.assign(M, 0.0);
    out.b_out.assign(M, 0.0);
    out.total.resize(M);
    for (std::size_t m = 0; m < M; ++m) {
        out.composition[m] = thW_W[m] - thW_B[m];
        out.structure[m] = thW_B[m] - thB_B[m];
        out.total[m] = out.composition[m] + out.structure[m];
    }
    std::vector<bool> keep(table.size());
    for (std::size_t i = 0; i < table.size(); ++i)
        keep[i] = partition.region_of[i] == RegionTag::Common;
    out.empirical_total = detail::ecdf_gap(table, grid, &keep);
    return out;
}

// ---- DFL reweighting baseline ----

struct PropensityConfig {
    bool saturated = false;  // exact per-cell group-B shares (all-discrete X)
    std::optional<CovariateTransform> transform;  // default: degree-3 polynomial
    Link link = Link::Logit;
    SolverConfig solver;
    double psi_cap = 1e6;
};

struct DflWeights {
    std::vector<std::size_t> row_index;  // W rows, in table order
    std::vector<double> psi;
    std::vector<bool> capped;            // flagged PropensityOverflow rows
    std::string propensity_model;
};

struct DflResult {
    std::vector<double> counterfactual;  // H_0^DFL per grid point
    DflWeights weights;
};

// Reweighted counterfactual: fit P(B|x) pooled, form the Bayes-rule
// factor psi(x) = [p/(1-p)] * [P(W)/P(B)] for each W row, and take the
// weighted ECDF of W outcomes under w * psi. Rows where 1-p underflows
// get psi capped and flagged rather than failing.
inline DflResult dfl_counterfactual(const ObservationTable& table, const EvaluationGrid& grid,
                                    const PropensityConfig& config = {}) {
    double wsum[2] = {0.0, 0.0};
    for (const auto& r : table.rows()) wsum[r.group] += r.weight;
    const double total = wsum[0] + wsum[1];
    const double prior_W = wsum[0] / total, prior_B = wsum[1] / total;

    // p_hat(x) for every W row
    std::vector<std::size_t> w_rows;
    for (std::size_t i = 0; i < table.size(); ++i)
        if (table.rows()[i].group == 0) w_rows.push_back(i);

    std::vector<double> phat(w_rows.size());
    std::string model_desc;
    if (config.saturated) {
        for (const auto& cv : table.schema())
            if (cv.kind != CovariateKind::Discrete)
                throw StrategyMismatch("saturated propensity requires all-discrete covariates");
        std::map<std::vector<double>, std::array<double, 2>> cells;  // {wB, wTotal}
        for (const auto& r : table.rows()) {
            auto& c = cells[r.covariates];
            if (r.group == 1) c[0] += r.weight;
            c[1] += r.weight;
        }
        for (std::size_t k = 0; k < w_rows.size(); ++k) {
            const auto& c = cells.at(table.rows()[w_rows[k]].covariates);
            phat[k] = c[0] / c[1];
        }
        model_desc = "saturated cell shares";
    } else {
        CovariateTransform transform = config.transform
                                           ? *config.transform
                                           : CovariateTransform::polynomial(table, 3);
        // Recast group membership as the outcome of a single binary fit:
        // responses 1{g = B} via a 2-point grid trick is clumsy, so run
        // the threshold solver directly.
        const std::size_t n = table.size();
        Eigen::MatrixXd X(static_cast<Eigen::Index>(n),
                          static_cast<Eigen::Index>(transform.dimension()));
        Eigen::VectorXd z(static_cast<Eigen::Index>(n)), w(static_cast<Eigen::Index>(n));
        double wmean = total / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& r = table.rows()[i];
            X.row(static_cast<Eigen::Index>(i)) = transform(r.covariates).transpose();
            z[static_cast<Eigen::Index>(i)] = r.group == 1 ? 1.0 : 0.0;
            w[static_cast<Eigen::Index>(i)] = r.weight / wmean;
        }
        auto fit = detail::fit_threshold(X, z, w, config.link, config.solver);
        for (std::size_t k = 0; k < w_rows.size(); ++k) {
            const auto& r = table.rows()[w_rows[k]];
            switch (fit.diag.flag) {
                case ThresholdFlag::AllAbove: phat[k] = 0.0; break;
                case ThresholdFlag::AllBelow: phat[k] = 1.0; break;
                case ThresholdFlag::SeparationFallback: phat[k] = fit.fallback; break;
                case ThresholdFlag::Fitted:
                    phat[k] = link_cdf(config.link, transform(r.covariates).dot(fit.beta));
                    break;
            }
        }
        model_desc = std::string(to_string(config.link)) + " on transform";
    }

    DflResult out;
    out.weights.row_index = w_rows;
    out.weights.propensity_model = model_desc;
    out.weights.psi.resize(w_rows.size());
    out.weights.capped.assign(w_rows.size(), false);
    const double ratio_priors = prior_W / prior_B;
    for (std::size_t k = 0; k < w_rows.size(); ++k) {
        double p = phat[k];
        if (p <= 0.0) {
            out.weights.psi[k] = 0.0;
        } else if (1.0 - p <= 0.0) {
            out.weights.psi[k] = config.psi_cap;
            out.weights.capped[k] = true;
        } else {
            double psi = (p / (1.0 - p)) * ratio_priors;
            if (psi > config.psi_cap) {
                psi = config.psi_cap;
                out.weights.capped[k] = true;
            }
            out.weights.psi[k] = psi;
        }
    }

    std::vector<double> vals, wts;
    for (std::size_t k = 0; k < w_rows.size(); ++k) {
        if (out.weights.psi[k] <= 0.0) continue;
        vals.push_back(table.rows()[w_rows[k]].outcome);
        wts.push_back(table.rows()[w_rows[k]].weight * out.weights.psi[k]);
    }
    out.counterfactual.assign(grid.size(), 0.0);
    if (!vals.empty()) {
        WeightedEcdf f(std::move(vals), std::move(wts));
        for (std::size_t m = 0; m < grid.size(); ++m) out.counterfactual[m] = f(grid[m]);
    }
    return out;
}

// ---- contribution shares ----

struct ContributionShares {
    EvaluationGrid grid{std::vector<double>{0.0, 1.0}};
    std::vector<double> composition, structure, w_out, b_out;
    std::vector<double> out_of_support;  // |Delta_W| + |Delta_B|, same normalization
    std::vector<bool> degenerate;        // denominator was zero
};

// share_k(y) = |Delta_k(y)| / sum_j |Delta_j(y)|. A zero denominator
// yields all-zero shares with a degenerate flag at that grid point.
inline ContributionShares contribution_shares(const DecompositionCurves& curves) {
    if (curves.mode != DecompositionMode::Relaxed)
        throw WrongMode("contribution_shares requires RELAXED curves");
    const std::size_t M = curves.grid.size();
    ContributionShares s;
    s.grid = curves.grid;
    s.composition.resize(M);
    s.structure.resize(M);
    s.w_out.resize(M);
    s.b_out.resize(M);
    s.out_of_support.resize(M);
    s.degenerate.assign(M, false);
    for (std::size_t m = 0; m < M; ++m) {
        const double ax = std::abs(curves.composition[m]);
        const double a0 = std::abs(curves.structure[m]);
        const double aw = std::abs(curves.w_out[m]);
        const double ab = std::abs(curves.b_out[m]);
        const double den = ax + a0 + aw + ab;
        if (den == 0.0) {
            s.composition[m] = s.structure[m] = s.w_out[m] = s.b_out[m] = 0.0;
            s.out_of_support[m] = 0.0;
            s.degenerate[m] = true;
        } else {
            s.composition[m] = ax / den;
            s.structure[m] = a0 / den;
            s.w_out[m] = aw / den;
            s.b_out[m] = ab / den;
            s.out_of_support[m] = (aw + ab) / den;
        }
    }
    return s;
}

// ---- serialization: the plot-data contract ----

inline void write_curves_csv(std::ostream& out, const DecompositionCurves& c) {
    out << "y,series,value\n";
    auto emit = [&](const char* name, const std::vector<double>& v) {
        for (std::size_t m = 0; m < c.grid.size(); ++m)
            out << detail::format_double(c.grid[m]) << ',' << name << ','
                << detail::format_double(v[m]) << '\n';
    };
    emit("total", c.total);
    emit("composition", c.composition);
    emit("structure", c.structure);
    emit("w_out", c.w_out);
    emit("b_out", c.b_out);
    emit("empirical_total", c.empirical_total);
}

inline void write_shares_csv(std::ostream& out, const ContributionShares& s) {
    out << "y,series,value\n";
    auto emit = [&](const char* name, const std::vector<double>& v) {
        for (std::size_t m = 0; m < s.grid.size(); ++m)
            out << detail::format_double(s.grid[m]) << ',' << name << ','
                << detail::format_double(v[m]) << '\n';
    };
    emit("composition", s.composition);
    emit("structure", s.structure);
    emit("w_out", s.w_out);
    emit("b_out", s.b_out);
    emit("out_of_support", s.out_of_support);
    for (std::size_t m = 0; m < s.grid.size(); ++m)
        out << detail::format_double(s.grid[m]) << ",degenerate,"
            << (s.degenerate[m] ? 1 : 0) << '\n';
}

inline nlohmann::json curves_to_json(const DecompositionCurves& c) {
    nlohmann::json j;
    j["mode"] = std::string(to_string(c.mode));
    j["grid"] = c.grid.points();
    j["total"] = c.total;
    j["composition"] = c.composition;
    j["structure"] = c.structure;
    j["w_out"] = c.w_out;
    j["b_out"] = c.b_out;
    j["empirical_total"] = c.empirical_total;
    j["masses"] = {{"mass_W_in", c.masses[0]},
                   {"mass_W_out", c.masses[1]},
                   {"mass_B_in", c.masses[2]},
                   {"mass_B_out", c.masses[3]}};
    return j;
}

}  // namespace osdecomp

#endif
