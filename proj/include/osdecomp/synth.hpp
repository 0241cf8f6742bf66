#ifndef OSDECOMP_SYNTH_HPP
#define OSDECOMP_SYNTH_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "osdecomp/decompose.hpp"
#include "osdecomp/grid.hpp"
#include "osdecomp/table.hpp"
#include "osdecomp/transform.hpp"

namespace osdecomp {

// Reproducible uniform stream: mt19937_64 outputs mapped to doubles via
// the top 53 bits, so draws are identical across platforms for a given
// seed. Documented in the README for cross-language fixture sharing.
class UniformStream {
public:
    explicit UniformStream(std::uint64_t seed) : engine_(seed) {}
    double next() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 engine_;
};

// Outcome atom of a finite per-cell distribution.
struct OutcomeAtom {
    double y = 0.0;
    double p = 0.0;
};

// One covariate cell of a DISCRETE_CELLS process. A group mass of zero
// puts the cell outside that group's support. outcomes_B empty means the
// cell's outcome law is shared by both groups.
struct CellSpec {
    double x = 0.0;
    double mass_W = 0.0;
    double mass_B = 0.0;
    std::vector<OutcomeAtom> outcomes_W;
    std::vector<OutcomeAtom> outcomes_B;

    const std::vector<OutcomeAtom>& outcomes(int group) const {
        return (group == 1 && !outcomes_B.empty()) ? outcomes_B : outcomes_W;
    }
    double cdf(int group, double y) const {
        double s = 0.0;
        for (const auto& a : outcomes(group))
            if (a.y <= y) s += a.p;
        return s;
    }
};

// Piecewise-linear coefficient paths of a LOGIT_LINEAR process:
// H_g(y|x) = logistic(a_g(y) + b_g(y) x), with a, b interpolated
// linearly between knots. Paths must be chosen monotone in y.
struct LogitKnot {
    double y = 0.0;
    double a_W = 0.0, b_W = 0.0;
    double a_B = 0.0, b_B = 0.0;
};

struct DgpSpec {
    enum Kind { DiscreteCells, LogitLinear } kind = DiscreteCells;
    std::uint64_t seed = 0;
    std::size_t n_W = 0, n_B = 0;

    std::vector<CellSpec> cells;  // DiscreteCells

    double x_low[2] = {0.0, 0.0};  // LogitLinear: X bounds per group
    double x_high[2] = {1.0, 1.0};
    // X draw is low + (high-low) * u^shape; shape 1 is uniform, other
    // shapes tilt the density while keeping the stated bounds.
    double x_shape[2] = {1.0, 1.0};
    std::vector<LogitKnot> knots;

    void validate() const {
        if (n_W < 2 || n_B < 2)
            throw InvalidSpec("per-group sample sizes must be >= 2");
        if (kind == DiscreteCells) {
            if (cells.empty()) throw InvalidSpec("no cells");
            double mW = 0.0, mB = 0.0;
            for (const auto& c : cells) {
                if (c.mass_W < 0.0 || c.mass_B < 0.0)
                    throw InvalidSpec("negative cell mass");
                mW += c.mass_W;
                mB += c.mass_B;
                for (int g = 0; g < 2; ++g) {
                    if (g == 1 && c.outcomes_B.empty()) continue;
                    const auto& atoms = c.outcomes(g);
                    if (atoms.empty() && (g == 0 ? c.mass_W : c.mass_B) > 0.0)
                        throw InvalidSpec("cell with positive mass has no outcome atoms");
                    double ps = 0.0;
                    for (const auto& a : atoms) {
                        if (a.p < 0.0) throw InvalidSpec("negative atom probability");
                        ps += a.p;
                    }
                    if (!atoms.empty() && std::abs(ps - 1.0) > 1e-12)
                        throw InvalidSpec("cell outcome probabilities must sum to 1");
                }
            }
            if (std::abs(mW - 1.0) > 1e-12 || std::abs(mB - 1.0) > 1e-12)
                throw InvalidSpec("per-group cell masses must sum to 1");
        } else {
            if (knots.size() < 2) throw InvalidSpec("need at least 2 coefficient knots");
            for (std::size_t i = 1; i < knots.size(); ++i)
                if (!(knots[i - 1].y < knots[i].y))
                    throw InvalidSpec("knot y values must be strictly increasing");
            for (int g = 0; g < 2; ++g) {
                if (!(x_low[g] < x_high[g]))
                    throw InvalidSpec("x bounds must satisfy low < high");
                if (!(x_shape[g] > 0.0))
                    throw InvalidSpec("x shape must be positive");
            }
        }
    }

    // Interior index Lambda(a(y) + b(y) x), coefficients interpolated
    // linearly between knots and clamped to the knot range.
    double logit_index(int group, double y, double x) const {
        std::size_t k = 0;
        while (k + 2 < knots.size() && knots[k + 1].y <= y) ++k;
        const auto& lo = knots[k];
        const auto& hi = knots[k + 1];
        double t = (y - lo.y) / (hi.y - lo.y);
        t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
        double a, b;
        if (group == 0) {
            a = lo.a_W + t * (hi.a_W - lo.a_W);
            b = lo.b_W + t * (hi.b_W - lo.b_W);
        } else {
            a = lo.a_B + t * (hi.a_B - lo.a_B);
            b = lo.b_B + t * (hi.b_B - lo.b_B);
        }
        return link_cdf(Link::Logit, a + b * x);
    }

    // Conditional c.d.f. of the draws: zero below the first knot, an
    // atom at each endpoint (sampling clamps to the knot range), the
    // interior index in between.
    double logit_cdf(int group, double y, double x) const {
        if (y < knots.front().y) return 0.0;
        if (y >= knots.back().y) return 1.0;
        return logit_index(group, y, x);
    }

    nlohmann::json to_json() const;
    static DgpSpec from_json(const nlohmann::json& j);
};

inline nlohmann::json DgpSpec::to_json() const {
    nlohmann::json j;
    j["kind"] = kind == DiscreteCells ? "discrete_cells" : "logit_linear";
    j["seed"] = seed;
    j["n_w"] = n_W;
    j["n_b"] = n_B;
    if (kind == DiscreteCells) {
        j["cells"] = nlohmann::json::array();
        for (const auto& c : cells) {
            nlohmann::json cj;
            cj["x"] = c.x;
            cj["mass_w"] = c.mass_W;
            cj["mass_b"] = c.mass_B;
            cj["outcomes_w"] = nlohmann::json::array();
            for (const auto& a : c.outcomes_W)
                cj["outcomes_w"].push_back({{"y", a.y}, {"p", a.p}});
            if (!c.outcomes_B.empty()) {
                cj["outcomes_b"] = nlohmann::json::array();
                for (const auto& a : c.outcomes_B)
                    cj["outcomes_b"].push_back({{"y", a.y}, {"p", a.p}});
            }
            j["cells"].push_back(cj);
        }
    } else {
        j["x_w"] = {x_low[0], x_high[0]};
        j["x_b"] = {x_low[1], x_high[1]};
        j["x_shape_w"] = x_shape[0];
        j["x_shape_b"] = x_shape[1];
        j["knots"] = nlohmann::json::array();
        for (const auto& k : knots)
            j["knots"].push_back({{"y", k.y},
                                  {"a_w", k.a_W},
                                  {"b_w", k.b_W},
                                  {"a_b", k.a_B},
                                  {"b_b", k.b_B}});
    }
    return j;
}

inline DgpSpec DgpSpec::from_json(const nlohmann::json& j) {
    DgpSpec spec;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "discrete_cells")
        spec.kind = DiscreteCells;
    else if (kind == "logit_linear")
        spec.kind = LogitLinear;
    else
        throw InvalidSpec("unknown DGP kind '" + kind + "'");
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.n_W = j.at("n_w").get<std::size_t>();
    spec.n_B = j.at("n_b").get<std::size_t>();
    if (spec.kind == DiscreteCells) {
        for (const auto& cj : j.at("cells")) {
            CellSpec c;
            c.x = cj.at("x").get<double>();
            c.mass_W = cj.at("mass_w").get<double>();
            c.mass_B = cj.at("mass_b").get<double>();
            for (const auto& aj : cj.at("outcomes_w"))
                c.outcomes_W.push_back({aj.at("y").get<double>(), aj.at("p").get<double>()});
            if (cj.contains("outcomes_b"))
                for (const auto& aj : cj.at("outcomes_b"))
                    c.outcomes_B.push_back({aj.at("y").get<double>(), aj.at("p").get<double>()});
            spec.cells.push_back(std::move(c));
        }
    } else {
        spec.x_low[0] = j.at("x_w").at(0).get<double>();
        spec.x_high[0] = j.at("x_w").at(1).get<double>();
        spec.x_low[1] = j.at("x_b").at(0).get<double>();
        spec.x_high[1] = j.at("x_b").at(1).get<double>();
        if (j.contains("x_shape_w")) spec.x_shape[0] = j.at("x_shape_w").get<double>();
        if (j.contains("x_shape_b")) spec.x_shape[1] = j.at("x_shape_b").get<double>();
        for (const auto& kj : j.at("knots"))
            spec.knots.push_back({kj.at("y").get<double>(), kj.at("a_w").get<double>(),
                                  kj.at("b_w").get<double>(), kj.at("a_b").get<double>(),
                                  kj.at("b_b").get<double>()});
    }
    spec.validate();
    return spec;
}

namespace detail {

inline double sample_logit_outcome(const DgpSpec& spec, int group, double x, double u) {
    double lo = spec.knots.front().y, hi = spec.knots.back().y;
    if (u <= spec.logit_index(group, lo, x)) return lo;
    if (u >= spec.logit_index(group, hi, x)) return hi;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (spec.logit_index(group, mid, x) < u)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

// Deterministic draw from the process: all W rows first, then all B
// rows, one uniform pair per row, weights 1.
inline ObservationTable generate(const DgpSpec& spec) {
    spec.validate();
    UniformStream rng(spec.seed);
    std::vector<Observation> rows;
    rows.reserve(spec.n_W + spec.n_B);

    CovariateKind xkind = spec.kind == DgpSpec::DiscreteCells ? CovariateKind::Discrete
                                                              : CovariateKind::Continuous;
    for (int g = 0; g < 2; ++g) {
        const std::size_t n = g == 0 ? spec.n_W : spec.n_B;
        for (std::size_t i = 0; i < n; ++i) {
            Observation obs;
            obs.group = g;
            obs.weight = 1.0;
            if (spec.kind == DgpSpec::DiscreteCells) {
                double u = rng.next();
                double cum = 0.0;
                const CellSpec* cell = &spec.cells.back();
                for (const auto& c : spec.cells) {
                    cum += g == 0 ? c.mass_W : c.mass_B;
                    if (u < cum) {
                        cell = &c;
                        break;
                    }
                }
                obs.covariates = {cell->x};
                double v = rng.next();
                double pcum = 0.0;
                obs.outcome = cell->outcomes(g).back().y;
                for (const auto& a : cell->outcomes(g)) {
                    pcum += a.p;
                    if (v < pcum) {
                        obs.outcome = a.y;
                        break;
                    }
                }
            } else {
                double u = rng.next();
                if (spec.x_shape[g] != 1.0) u = std::pow(u, spec.x_shape[g]);
                double x = spec.x_low[g] + (spec.x_high[g] - spec.x_low[g]) * u;
                obs.covariates = {x};
                obs.outcome = detail::sample_logit_outcome(spec, g, x, rng.next());
            }
            rows.push_back(std::move(obs));
        }
    }
    return ObservationTable(std::move(rows), {"W", "B"},
                            {CovariateSpec{"x", xkind}});
}

// A weighted table carrying the population cell frequencies of a
// DISCRETE_CELLS process: one row per (group, cell, outcome atom) with
// weight mass * p. Feeding it to the estimator reproduces population
// quantities exactly.
inline ObservationTable population_table(const DgpSpec& spec) {
    if (spec.kind != DgpSpec::DiscreteCells)
        throw NotDiscrete("population_table requires a DISCRETE_CELLS spec");
    spec.validate();
    std::vector<Observation> rows;
    for (int g = 0; g < 2; ++g)
        for (const auto& c : spec.cells) {
            const double mass = g == 0 ? c.mass_W : c.mass_B;
            if (mass <= 0.0) continue;
            for (const auto& a : c.outcomes(g)) {
                if (a.p <= 0.0) continue;
                Observation obs;
                obs.group = g;
                obs.outcome = a.y;
                obs.weight = mass * a.p;
                obs.covariates = {c.x};
                rows.push_back(std::move(obs));
            }
        }
    return ObservationTable(std::move(rows), {"W", "B"},
                            {CovariateSpec{"x", CovariateKind::Discrete}});
}

// Exact population decomposition of a DISCRETE_CELLS process by direct
// enumeration over cells. Ground truth for estimator tests.
inline DecompositionCurves oracle_decompose(const DgpSpec& spec, const EvaluationGrid& grid) {
    if (spec.kind != DgpSpec::DiscreteCells)
        throw NotDiscrete("oracle_decompose requires a DISCRETE_CELLS spec");
    spec.validate();

    double muW_in = 0.0, muW_out = 0.0, muB_in = 0.0, muB_out = 0.0;
    for (const auto& c : spec.cells) {
        (c.mass_B > 0.0 ? muW_in : muW_out) += c.mass_W;
        (c.mass_W > 0.0 ? muB_in : muB_out) += c.mass_B;
    }

    const std::size_t M = grid.size();
    DecompositionCurves out;
    out.grid = grid;
    out.mode = DecompositionMode::Relaxed;
    out.masses = {muW_in, muW_out, muB_in, muB_out};
    out.composition.assign(M, 0.0);
    out.structure.assign(M, 0.0);
    out.w_out.assign(M, 0.0);
    out.b_out.assign(M, 0.0);
    out.total.assign(M, 0.0);
    out.empirical_total.assign(M, 0.0);

    for (std::size_t m = 0; m < M; ++m) {
        const double y = grid[m];
        double thW_W_common = 0.0, thW_B_common = 0.0, thB_B_common = 0.0;
        double thW_W_only = 0.0, thB_B_only = 0.0;
        double HW = 0.0, HB = 0.0;
        for (const auto& c : spec.cells) {
            const double hW = c.cdf(0, y), hB = c.cdf(1, y);
            HW += hW * c.mass_W;
            HB += hB * c.mass_B;
            const bool in_SW = c.mass_W > 0.0, in_SB = c.mass_B > 0.0;
            if (in_SW && in_SB) {
                thW_W_common += hW * c.mass_W / muW_in;
                thW_B_common += hW * c.mass_B / muB_in;
                thB_B_common += hB * c.mass_B / muB_in;
            } else if (in_SW && muW_out > 0.0) {
                thW_W_only += hW * c.mass_W / muW_out;
            } else if (in_SB && muB_out > 0.0) {
                thB_B_only += hB * c.mass_B / muB_out;
            }
        }
        if (muW_in > 0.0 && muB_in > 0.0) {
            out.composition[m] = thW_W_common - thW_B_common;
            out.structure[m] = thW_B_common - thB_B_common;
        }
        if (muW_out > 0.0) out.w_out[m] = (thW_W_only - thW_W_common) * muW_out;
        if (muB_out > 0.0) out.b_out[m] = (thB_B_common - thB_B_only) * muB_out;
        out.total[m] = out.composition[m] + out.structure[m] + out.w_out[m] + out.b_out[m];
        out.empirical_total[m] = HW - HB;  // exact marginal gap
    }
    return out;
}

// Grid over every outcome atom of a discrete spec.
inline EvaluationGrid atom_grid(const DgpSpec& spec) {
    if (spec.kind != DgpSpec::DiscreteCells)
        throw NotDiscrete("atom_grid requires a DISCRETE_CELLS spec");
    std::vector<double> ys;
    for (const auto& c : spec.cells)
        for (int g = 0; g < 2; ++g)
            for (const auto& a : c.outcomes(g)) ys.push_back(a.y);
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    return EvaluationGrid(std::move(ys));
}

}  // namespace osdecomp

#endif
