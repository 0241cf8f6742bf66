#ifndef OSDECOMP_TESTS_FIXTURES_HPP
#define OSDECOMP_TESTS_FIXTURES_HPP

#include <vector>

#include "osdecomp/osdecomp.hpp"

namespace fixtures {

using namespace osdecomp;

inline Observation obs(double y, int g, double w, std::vector<double> x) {
    Observation o;
    o.outcome = y;
    o.group = g;
    o.weight = w;
    o.covariates = std::move(x);
    return o;
}

// One continuous covariate named "x".
inline ObservationTable continuous_table(std::vector<Observation> rows) {
    return ObservationTable(std::move(rows), {"W", "B"},
                            {CovariateSpec{"x", CovariateKind::Continuous}});
}

// One discrete covariate named "x".
inline ObservationTable discrete_table(std::vector<Observation> rows) {
    return ObservationTable(std::move(rows), {"W", "B"},
                            {CovariateSpec{"x", CovariateKind::Discrete}});
}

// The 3-cell hand example: W mass on cells {1,2}, B mass on cells {2,3},
// outcomes degenerate at the cell value.
inline DgpSpec three_cell_spec(std::uint64_t seed = 7, std::size_t n = 100) {
    DgpSpec spec;
    spec.kind = DgpSpec::DiscreteCells;
    spec.seed = seed;
    spec.n_W = n;
    spec.n_B = n;
    spec.cells = {
        {1.0, 0.5, 0.0, {{1.0, 1.0}}, {}},
        {2.0, 0.5, 0.5, {{2.0, 1.0}}, {}},
        {3.0, 0.0, 0.5, {{3.0, 1.0}}, {}},
    };
    return spec;
}

// Two mismatched cells with non-degenerate outcome atoms and structural
// differences between groups in the shared cell.
inline DgpSpec two_cell_spec(std::uint64_t seed = 11, std::size_t n = 100) {
    DgpSpec spec;
    spec.kind = DgpSpec::DiscreteCells;
    spec.seed = seed;
    spec.n_W = n;
    spec.n_B = n;
    spec.cells = {
        {0.0, 0.6, 0.8,
         {{1.0, 0.3}, {2.0, 0.5}, {4.0, 0.2}},
         {{1.0, 0.5}, {2.0, 0.3}, {4.0, 0.2}}},
        {1.0, 0.4, 0.2,
         {{2.0, 0.4}, {3.0, 0.6}},
         {{2.0, 0.7}, {3.0, 0.3}}},
    };
    return spec;
}

// Four cells, both out-of-support regions populated, uneven masses.
inline DgpSpec four_cell_spec(std::uint64_t seed = 13, std::size_t n = 100) {
    DgpSpec spec;
    spec.kind = DgpSpec::DiscreteCells;
    spec.seed = seed;
    spec.n_W = n;
    spec.n_B = n;
    spec.cells = {
        {0.0, 0.10, 0.0, {{0.0, 0.5}, {1.0, 0.5}}, {}},
        {1.0, 0.45, 0.30, {{1.0, 0.4}, {3.0, 0.6}}, {{1.0, 0.6}, {3.0, 0.4}}},
        {2.0, 0.45, 0.50, {{2.0, 0.2}, {5.0, 0.8}}, {{2.0, 0.5}, {5.0, 0.5}}},
        {3.0, 0.0, 0.20, {{0.0, 0.3}, {4.0, 0.7}}, {}},
    };
    return spec;
}

// Common-support continuous DGP with different X densities per group.
inline DgpSpec common_support_logit_spec(std::uint64_t seed = 17, std::size_t n = 10000) {
    DgpSpec spec;
    spec.kind = DgpSpec::LogitLinear;
    spec.seed = seed;
    spec.n_W = n;
    spec.n_B = n;
    spec.x_low[0] = 0.0;
    spec.x_high[0] = 10.0;
    spec.x_low[1] = 0.0;
    spec.x_high[1] = 10.0;
    spec.x_shape[1] = 0.5;  // B tilted toward high x
    spec.knots = {
        {0.0, -4.0, 0.3, -4.5, 0.35},
        {5.0, 0.0, 0.3, -0.5, 0.35},
        {10.0, 4.0, 0.3, 4.5, 0.35},
    };
    return spec;
}

// Mismatched supports, outcome increasing in x for both groups
// (H(y|x) decreasing in x), W shifted to higher x.
inline DgpSpec mismatched_logit_spec(std::uint64_t seed = 19, std::size_t n = 5000) {
    DgpSpec spec;
    spec.kind = DgpSpec::LogitLinear;
    spec.seed = seed;
    spec.n_W = n;
    spec.n_B = n;
    spec.x_low[0] = 2.0;
    spec.x_high[0] = 12.0;
    spec.x_low[1] = 0.0;
    spec.x_high[1] = 8.0;
    spec.knots = {
        {0.0, -4.0, -0.5, -4.0, -0.5},
        {10.0, 8.0, -0.5, 8.0, -0.5},
    };
    return spec;
}

}  // namespace fixtures

#endif
