#include <catch2/catch_amalgamated.hpp>

#include <boost/rational.hpp>
#include <sstream>

#include "fixtures.hpp"
#include "osdecomp/osdecomp.hpp"

using namespace osdecomp;

TEST_CASE("generation is deterministic for a fixed seed") {
    auto spec = fixtures::two_cell_spec(21, 300);
    auto a = generate(spec);
    auto b = generate(spec);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.rows()[i].outcome == b.rows()[i].outcome);
        CHECK(a.rows()[i].group == b.rows()[i].group);
        CHECK(a.rows()[i].covariates == b.rows()[i].covariates);
    }
    auto c = generate(fixtures::two_cell_spec(22, 300));
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.rows()[i].outcome != c.rows()[i].outcome ||
            a.rows()[i].covariates != c.rows()[i].covariates)
            differs = true;
    CHECK(differs);
}

TEST_CASE("generated layout: W block then B block, unit weights") {
    auto spec = fixtures::three_cell_spec(23, 50);
    spec.n_B = 70;
    auto table = generate(spec);
    REQUIRE(table.size() == 120);
    for (std::size_t i = 0; i < table.size(); ++i) {
        CHECK(table.rows()[i].group == (i < 50 ? 0 : 1));
        CHECK(table.rows()[i].weight == 1.0);
    }
}

TEST_CASE("discrete draws respect cell supports and outcome atoms") {
    auto spec = fixtures::three_cell_spec(25, 400);
    auto table = generate(spec);
    for (const auto& r : table.rows()) {
        double x = r.covariates[0];
        if (r.group == 0) CHECK((x == 1.0 || x == 2.0));
        else CHECK((x == 2.0 || x == 3.0));
        CHECK(r.outcome == x);  // atoms degenerate at the cell value
    }
}

TEST_CASE("continuous draws respect the stated x bounds") {
    auto spec = fixtures::mismatched_logit_spec(27, 500);
    auto table = generate(spec);
    for (const auto& r : table.rows()) {
        double x = r.covariates[0];
        if (r.group == 0) {
            CHECK(x >= 2.0);
            CHECK(x <= 12.0);
        } else {
            CHECK(x >= 0.0);
            CHECK(x <= 8.0);
        }
        CHECK(r.outcome >= 0.0);
        CHECK(r.outcome <= 10.0);
    }
}

TEST_CASE("logit-linear cdf endpoints and interior shape") {
    auto spec = fixtures::common_support_logit_spec();
    CHECK(spec.logit_cdf(0, -0.001, 5.0) == 0.0);
    CHECK(spec.logit_cdf(0, 10.0, 5.0) == 1.0);
    // interior: logistic(a(y) + b y x) with interpolated coefficients
    double mid = spec.logit_cdf(0, 5.0, 0.0);
    CHECK(mid == Catch::Approx(0.5).margin(1e-12));  // a=0, b*0
    // monotone in y for fixed x
    double prev = 0.0;
    for (double y = 0.0; y <= 10.0; y += 0.25) {
        double v = spec.logit_cdf(0, y, 3.0);
        CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("identical group processes yield a zero oracle decomposition") {
    auto spec = fixtures::two_cell_spec();
    for (auto& c : spec.cells) {
        c.mass_B = c.mass_W;
        c.outcomes_B.clear();  // share W's outcome law
    }
    auto curves = oracle_decompose(spec, atom_grid(spec));
    for (std::size_t m = 0; m < curves.grid.size(); ++m) {
        CHECK(curves.total[m] == 0.0);
        CHECK(curves.composition[m] == 0.0);
        CHECK(curves.structure[m] == 0.0);
        CHECK(curves.w_out[m] == 0.0);
        CHECK(curves.b_out[m] == 0.0);
        CHECK(curves.empirical_total[m] == 0.0);
    }
}

TEST_CASE("three-cell oracle matches the hand derivation") {
    // Cells: x=1 (W only, mass .5, Y=1), x=2 (shared, .5/.5, Y=2),
    // x=3 (B only, mass .5, Y=3). On the common cell the groups agree,
    // so composition and structure vanish and the whole gap sits in the
    // out-of-support terms.
    auto spec = fixtures::three_cell_spec();
    auto grid = atom_grid(spec);
    REQUIRE(grid.points() == std::vector<double>{1.0, 2.0, 3.0});
    auto c = oracle_decompose(spec, grid);

    CHECK(c.masses == std::array<double, 4>{0.5, 0.5, 0.5, 0.5});
    CHECK(c.composition == std::vector<double>{0.0, 0.0, 0.0});
    CHECK(c.structure == std::vector<double>{0.0, 0.0, 0.0});
    // Delta_W(y) = (H_W(y|W-only) - H_W(y|common)) * mu_W_out
    //            = (1{y>=1} - 1{y>=2}) * 0.5
    CHECK(c.w_out == std::vector<double>{0.5, 0.0, 0.0});
    // Delta_B(y) = (H_B(y|common) - H_B(y|B-only)) * mu_B_out
    //            = (1{y>=2} - 1{y>=3}) * 0.5
    CHECK(c.b_out == std::vector<double>{0.0, 0.5, 0.0});
    CHECK(c.total == std::vector<double>{0.5, 0.5, 0.0});
    // the four terms reproduce the exact marginal gap here
    CHECK(c.empirical_total == c.total);
}

TEST_CASE("oracle adding-up is exact in rational arithmetic") {
    // Re-derive the four-cell oracle with boost::rational and check that
    // composition + structure + w_out + b_out telescopes to the marginal
    // gap without any rounding at all.
    using Q = boost::rational<long long>;
    auto spec = fixtures::four_cell_spec();
    auto grid = atom_grid(spec);

    // masses and atom probabilities of four_cell_spec in hundredths
    auto q = [](double v) { return Q(static_cast<long long>(v * 100.0 + 0.5), 100); };

    Q muW_in, muW_out, muB_in, muB_out;
    for (const auto& c : spec.cells) {
        (c.mass_B > 0.0 ? muW_in : muW_out) += q(c.mass_W);
        (c.mass_W > 0.0 ? muB_in : muB_out) += q(c.mass_B);
    }
    auto c_double = oracle_decompose(spec, grid);

    for (std::size_t m = 0; m < grid.size(); ++m) {
        const double y = grid[m];
        Q thWW, thWB, thBB, thWo, thBo, HW, HB;
        for (const auto& c : spec.cells) {
            Q hW, hB;
            for (const auto& a : c.outcomes(0))
                if (a.y <= y) hW += q(a.p);
            for (const auto& a : c.outcomes(1))
                if (a.y <= y) hB += q(a.p);
            HW += hW * q(c.mass_W);
            HB += hB * q(c.mass_B);
            if (c.mass_W > 0.0 && c.mass_B > 0.0) {
                thWW += hW * q(c.mass_W) / muW_in;
                thWB += hW * q(c.mass_B) / muB_in;
                thBB += hB * q(c.mass_B) / muB_in;
            } else if (c.mass_W > 0.0) {
                thWo += hW * q(c.mass_W) / muW_out;
            } else if (c.mass_B > 0.0) {
                thBo += hB * q(c.mass_B) / muB_out;
            }
        }
        Q comp = thWW - thWB;
        Q strc = thWB - thBB;
        Q wout = (thWo - thWW) * muW_out;
        Q bout = (thBB - thBo) * muB_out;
        // exact identity: the four terms sum to H_W - H_B
        CHECK(comp + strc + wout + bout == HW - HB);
        // and the double-precision oracle agrees with the rational one
        CHECK(c_double.total[m] ==
              Catch::Approx(boost::rational_cast<double>(HW - HB)).margin(1e-15));
    }
}

TEST_CASE("population table reproduces population quantities exactly") {
    auto spec = fixtures::four_cell_spec();
    auto table = population_table(spec);
    auto grid = atom_grid(spec);

    // weighted marginal ECDFs equal the population mixture CDFs
    std::vector<double> v[2], w[2];
    for (const auto& r : table.rows()) {
        v[r.group].push_back(r.outcome);
        w[r.group].push_back(r.weight);
    }
    for (std::size_t m = 0; m < grid.size(); ++m) {
        double HW = 0.0, HB = 0.0;
        for (const auto& c : spec.cells) {
            HW += c.cdf(0, grid[m]) * c.mass_W;
            HB += c.cdf(1, grid[m]) * c.mass_B;
        }
        CHECK(weighted_cdf(v[0], w[0], grid[m]) == Catch::Approx(HW).margin(1e-15));
        CHECK(weighted_cdf(v[1], w[1], grid[m]) == Catch::Approx(HB).margin(1e-15));
    }

    // the estimator fed population frequencies matches the oracle
    auto part = estimate_partition(table, SupportStrategy::CellRange);
    auto transform = CovariateTransform::saturated(table);
    auto mW = fit_conditional_cdf(table, "W", grid, transform);
    auto mB = fit_conditional_cdf(table, "B", grid, transform);
    auto est = decompose_relaxed(table, part, mW, mB);
    auto oracle = oracle_decompose(spec, grid);
    for (std::size_t m = 0; m < grid.size(); ++m) {
        CHECK(std::abs(est.composition[m] - oracle.composition[m]) <= 1e-12);
        CHECK(std::abs(est.structure[m] - oracle.structure[m]) <= 1e-12);
        CHECK(std::abs(est.w_out[m] - oracle.w_out[m]) <= 1e-12);
        CHECK(std::abs(est.b_out[m] - oracle.b_out[m]) <= 1e-12);
        CHECK(std::abs(est.total[m] - oracle.total[m]) <= 1e-12);
    }
}

TEST_CASE("spec validation rejects malformed inputs") {
    auto spec = fixtures::three_cell_spec();
    spec.cells[0].mass_W = 0.4;  // masses no longer sum to 1
    CHECK_THROWS_AS(spec.validate(), InvalidSpec);

    spec = fixtures::three_cell_spec();
    spec.cells[1].outcomes_W = {{2.0, 0.7}, {3.0, 0.2}};  // probs sum to 0.9
    CHECK_THROWS_AS(spec.validate(), InvalidSpec);

    spec = fixtures::three_cell_spec();
    spec.n_W = 1;
    CHECK_THROWS_AS(spec.validate(), InvalidSpec);

    auto logit = fixtures::common_support_logit_spec();
    logit.knots[1].y = logit.knots[0].y;  // not strictly increasing
    CHECK_THROWS_AS(logit.validate(), InvalidSpec);

    logit = fixtures::common_support_logit_spec();
    logit.x_low[0] = logit.x_high[0];
    CHECK_THROWS_AS(logit.validate(), InvalidSpec);

    logit = fixtures::common_support_logit_spec();
    logit.x_shape[0] = -1.0;
    CHECK_THROWS_AS(logit.validate(), InvalidSpec);
}

TEST_CASE("spec JSON round trip") {
    for (auto spec : {fixtures::four_cell_spec(), fixtures::two_cell_spec()}) {
        auto back = DgpSpec::from_json(spec.to_json());
        CHECK(back.to_json() == spec.to_json());
    }
    auto logit = fixtures::mismatched_logit_spec();
    auto back = DgpSpec::from_json(logit.to_json());
    CHECK(back.to_json() == logit.to_json());

    nlohmann::json bad = fixtures::three_cell_spec().to_json();
    bad["kind"] = "mystery";
    CHECK_THROWS_AS(DgpSpec::from_json(bad), InvalidSpec);
}

TEST_CASE("oracle and population helpers require a discrete spec") {
    auto spec = fixtures::common_support_logit_spec();
    CHECK_THROWS_AS(population_table(spec), NotDiscrete);
    CHECK_THROWS_AS(atom_grid(spec), NotDiscrete);
    CHECK_THROWS_AS(oracle_decompose(spec, EvaluationGrid({0.0, 1.0})), NotDiscrete);
}
