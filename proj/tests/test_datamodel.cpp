#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "osdecomp/osdecomp.hpp"

using namespace osdecomp;

TEST_CASE("load_table defaults weights to 1 without a weight column") {
    std::istringstream csv(
        "score,arm,age\n"
        "10,W,1\n"
        "20,W,2\n"
        "5,B,1.5\n"
        "8,B,0.5\n");
    SchemaConfig cfg{"score", "arm", "", {{"age", CovariateKind::Continuous}}};
    auto table = load_table(csv, cfg);
    REQUIRE(table.size() == 4);
    for (const auto& r : table.rows()) CHECK(r.weight == 1.0);
    CHECK(table.group_labels()[0] == "W");
    CHECK(table.group_labels()[1] == "B");
}

TEST_CASE("load_table rejects a third group label") {
    std::istringstream csv("y,g\n1,W\n2,B\n3,C\n4,W\n");
    SchemaConfig cfg{"y", "g", "", {}};
    CHECK_THROWS_AS(load_table(csv, cfg), MoreThanTwoGroups);
}

TEST_CASE("load_table rejects a non-positive weight naming the row") {
    std::ostringstream csv;
    csv << "y,g,w\n";
    for (int i = 1; i <= 6; ++i) csv << i << ',' << (i % 2 ? 'W' : 'B') << ",1\n";
    csv << "7,W,-1\n";
    std::istringstream in(csv.str());
    SchemaConfig cfg{"y", "g", "w", {}};
    try {
        load_table(in, cfg);
        FAIL("expected NonNumericValue");
    } catch (const NonNumericValue& e) {
        CHECK(std::string(e.what()).find("row 7") != std::string::npos);
    }
}

TEST_CASE("load_table flags unknown columns and missing groups") {
    std::istringstream csv("y,g\n1,W\n2,B\n");
    SchemaConfig bad{"wealth", "g", "", {}};
    CHECK_THROWS_AS(load_table(csv, bad), UnknownColumn);

    std::istringstream one("y,g\n1,W\n2,W\n");
    SchemaConfig cfg{"y", "g", "", {}};
    CHECK_THROWS_AS(load_table(one, cfg), FewerThanTwoGroups);
}

TEST_CASE("load_table rejects non-numeric fields") {
    std::istringstream csv("y,g\n1,W\nnope,B\n");
    SchemaConfig cfg{"y", "g", "", {}};
    CHECK_THROWS_AS(load_table(csv, cfg), NonNumericValue);
}

TEST_CASE("weighted_cdf basics") {
    std::vector<double> v{1, 2, 3}, w{1, 1, 1};
    CHECK(weighted_cdf(v, w, 2.0) == Catch::Approx(2.0 / 3.0));
    CHECK(weighted_cdf(v, w, 0.5) == 0.0);
    std::vector<double> v2{0, 10}, w2{3, 1};
    CHECK(weighted_cdf(v2, w2, 0.0) == Catch::Approx(0.75));
    std::vector<double> empty;
    CHECK_THROWS_AS(weighted_cdf(empty, empty, 1.0), EmptyInput);
    CHECK_THROWS_AS(weighted_cdf(v, w2, 1.0), LengthMismatch);
}

TEST_CASE("weighted_cdf is a right-continuous nondecreasing step function") {
    std::mt19937_64 rng(42);
    auto unif = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    std::vector<double> v, w;
    for (int i = 0; i < 50; ++i) {
        v.push_back(std::floor(unif() * 10.0));  // force ties
        w.push_back(0.1 + unif());
    }
    double vmin = *std::min_element(v.begin(), v.end());
    double vmax = *std::max_element(v.begin(), v.end());
    CHECK(weighted_cdf(v, w, vmin - 1e-9) == 0.0);
    CHECK(weighted_cdf(v, w, vmax) == Catch::Approx(1.0));
    double prev = 0.0;
    for (double y = vmin - 1.0; y <= vmax + 1.0; y += 0.25) {
        double p = weighted_cdf(v, w, y);
        CHECK(p >= prev);
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        prev = p;
        // right continuity at the step: value just above y matches at ties
        CHECK(weighted_cdf(v, w, y) == weighted_cdf(v, w, std::nextafter(y, y + 1.0)));
    }
    // invariance to rescaling all weights
    std::vector<double> w5 = w;
    for (double& x : w5) x *= 5.0;
    for (double y : {0.5, 3.0, 7.5})
        CHECK(weighted_cdf(v, w, y) == Catch::Approx(weighted_cdf(v, w5, y)).epsilon(1e-14));
}

TEST_CASE("WeightedEcdf matches weighted_cdf") {
    std::vector<double> v{3, 1, 2, 2}, w{1, 2, 0.5, 0.5};
    WeightedEcdf f(v, w);
    for (double y : {0.0, 1.0, 1.5, 2.0, 3.0, 9.0})
        CHECK(f(y) == Catch::Approx(weighted_cdf(v, w, y)).epsilon(1e-14));
}

TEST_CASE("table CSV round trip is bit exact") {
    std::mt19937_64 rng(7);
    std::vector<Observation> rows;
    for (int i = 0; i < 20; ++i) {
        double y = std::ldexp(static_cast<double>(rng() >> 11), -40);
        double w = 0.5 + std::ldexp(static_cast<double>(rng() >> 11), -53);
        double x = std::ldexp(static_cast<double>(rng() >> 11), -45) - 100.0;
        rows.push_back(fixtures::obs(y, i % 2, w, {x}));
    }
    auto table = fixtures::continuous_table(rows);
    std::ostringstream out;
    save_table(out, table);
    std::istringstream in(out.str());
    auto loaded = load_table(in, standard_schema(table.schema()));
    REQUIRE(loaded.size() == table.size());
    for (std::size_t i = 0; i < table.size(); ++i) {
        CHECK(loaded.rows()[i].outcome == table.rows()[i].outcome);
        CHECK(loaded.rows()[i].weight == table.rows()[i].weight);
        CHECK(loaded.rows()[i].covariates == table.rows()[i].covariates);
        CHECK(loaded.rows()[i].group == table.rows()[i].group);
    }
}

TEST_CASE("make_grid policies") {
    auto table = fixtures::continuous_table({
        fixtures::obs(1, 0, 1, {0}),
        fixtures::obs(1, 0, 1, {0}),
        fixtures::obs(2, 1, 1, {0}),
        fixtures::obs(5, 1, 1, {0}),
    });
    SECTION("unique dedups") {
        GridPolicy p;
        p.kind = GridPolicy::Unique;
        CHECK(make_grid(table, p).points() == std::vector<double>{1, 2, 5});
    }
    SECTION("explicit passthrough") {
        GridPolicy p;
        p.kind = GridPolicy::Explicit;
        p.explicit_points = {0, 50, 600};
        CHECK(make_grid(table, p).points() == std::vector<double>{0, 50, 600});
    }
    SECTION("degenerate outcomes rejected") {
        auto flat = fixtures::continuous_table({
            fixtures::obs(3, 0, 1, {0}),
            fixtures::obs(3, 0, 1, {0}),
            fixtures::obs(3, 1, 1, {0}),
            fixtures::obs(3, 1, 1, {0}),
        });
        CHECK_THROWS_AS(make_grid(flat), DegenerateOutcome);
    }
}

TEST_CASE("default grid caps at the quantile count for many outcomes") {
    std::vector<Observation> rows;
    for (int i = 0; i < 10000; ++i)
        rows.push_back(fixtures::obs(static_cast<double>(i), i % 2, 1.0, {0.0}));
    auto table = fixtures::continuous_table(std::move(rows));
    auto grid = make_grid(table);
    CHECK(grid.size() <= 199);
    for (std::size_t m = 1; m < grid.size(); ++m) CHECK(grid[m - 1] < grid[m]);
}
