#include "netcf/core.hpp"
#include "netcf/io.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

using namespace netcf;
using Catch::Approx;

TEST_CASE("staggered design: zero probability gives the all-zero matrix") {
    ExperimentDesign d{{3}, {0.0}};
    const auto w = generate_staggered_design(4, d, 1);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t t = 0; t <= 3; ++t) REQUIRE(w(i, t) == 0);
}

TEST_CASE("staggered design: probability one treats everyone after t=0") {
    ExperimentDesign d{{3}, {1.0}};
    const auto w = generate_staggered_design(4, d, 1);
    for (std::size_t i = 0; i < 4; ++i) {
        REQUIRE(w(i, 0) == 0);
        for (std::size_t t = 1; t <= 3; ++t) REQUIRE(w(i, t) == 1);
    }
}

TEST_CASE("staggered design: stage column means match stage probabilities") {
    ExperimentDesign d{{2, 2, 2}, {0.1, 0.2, 0.5}};
    const auto w = generate_staggered_design(10000, d, 3);
    // law of large numbers check via direct column averaging
    REQUIRE(std::abs(w.column_mean(1) - 0.1) < 0.02);
    REQUIRE(std::abs(w.column_mean(2) - 0.1) < 0.02);
    REQUIRE(std::abs(w.column_mean(3) - 0.2) < 0.02);
    REQUIRE(std::abs(w.column_mean(4) - 0.2) < 0.02);
    REQUIRE(std::abs(w.column_mean(5) - 0.5) < 0.02);
    REQUIRE(std::abs(w.column_mean(6) - 0.5) < 0.02);
}

TEST_CASE("staggered design is deterministic given seed") {
    ExperimentDesign d{{2, 2}, {0.3, 0.7}};
    const auto a = generate_staggered_design(50, d, 9);
    const auto b = generate_staggered_design(50, d, 9);
    REQUIRE(a.raw() == b.raw());
    const auto c = generate_staggered_design(50, d, 10);
    REQUIRE(a.raw() != c.raw());
}

TEST_CASE("monotone rollout keeps units treated once adopted") {
    ExperimentDesign d{{3, 3}, {0.4, 0.4}};
    d.monotone_rollout = true;
    const auto w = generate_staggered_design(200, d, 5);
    for (std::size_t i = 0; i < 200; ++i) {
        bool seen = false;
        for (std::size_t t = 1; t <= 6; ++t) {
            if (seen) REQUIRE(w(i, t) == 1);
            seen = seen || w(i, t);
        }
    }
}

TEST_CASE("empty design is a configuration error") {
    ExperimentDesign d{{}, {}};
    REQUIRE_THROWS_AS(generate_staggered_design(4, d, 1), ConfigError);
}

TEST_CASE("batch_mean basics") {
    OutcomePanel p(4, 2, 3.0);
    const auto full = Batch::full(4);
    REQUIRE(batch_mean(p, full, 0) == 3.0);
    REQUIRE(batch_mean(p, full, 2) == 3.0);

    OutcomePanel q(4, 1);
    q(0, 1) = 1;
    q(1, 1) = 2;
    q(2, 1) = 3;
    q(3, 1) = 4;
    REQUIRE(batch_mean(q, Batch{{0, 2}}, 1) == Approx(2.0));
    // full population equals the unweighted column mean exactly
    REQUIRE(batch_mean(q, full, 1) == q.column_mean(1));
    REQUIRE_THROWS_AS(batch_mean(q, full, 5), IndexError);
}

TEST_CASE("compute_tte hand cases") {
    OutcomePanel a(2, 2), b(2, 2);
    SECTION("identical panels give zero") { REQUIRE(compute_tte(a, b, 2) == 0.0); }
    SECTION("constant shift of one gives one") {
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t t = 0; t <= 2; ++t) a(i, t) = b(i, t) + 1.0;
        REQUIRE(compute_tte(a, b, 1) == Approx(1.0));
        REQUIRE(compute_tte(a, b, 2) == Approx(1.0));
    }
    SECTION("hand sum over last two columns") {
        // treated rows (.,2,4) and (.,0,2); control all ones
        a(0, 1) = 2; a(0, 2) = 4; a(1, 1) = 0; a(1, 2) = 2;
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t t = 0; t <= 2; ++t) b(i, t) = 1.0;
        REQUIRE(compute_tte(a, b, 2) == Approx(1.0));
    }
    SECTION("antisymmetry") {
        a(0, 1) = 5; a(1, 2) = -3; b(0, 2) = 2;
        REQUIRE(compute_tte(a, b, 2) == Approx(-compute_tte(b, a, 2)));
    }
    SECTION("shape mismatch is a contract error") {
        OutcomePanel c(3, 2);
        REQUIRE_THROWS_AS(compute_tte(a, c, 1), ContractError);
    }
}

TEST_CASE("treatment exposure") {
    TreatmentMatrix w(2, 10);
    SECTION("all-zero row gives zero") { REQUIRE(treatment_exposure(w, 0) == 0.0); }
    SECTION("all-one row gives one") {
        for (std::size_t t = 1; t <= 10; ++t) w.set(0, t, true);
        REQUIRE(treatment_exposure(w, 0) == 1.0);
    }
    SECTION("six of ten periods gives 0.6") {
        for (std::size_t t = 1; t <= 6; ++t) w.set(1, t, true);
        REQUIRE(treatment_exposure(w, 1) == Approx(0.6));
    }
}

TEST_CASE("exposures lie in [0,1]; mean exposure tracks the design time-average") {
    const std::size_t n = 4000;
    ExperimentDesign d{{2, 2, 2}, {0.1, 0.2, 0.5}};
    const auto w = generate_staggered_design(n, d, 11);
    const auto e = exposure_all(w);
    double mean = 0.0;
    for (double v : e) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
        mean += v;
    }
    mean /= static_cast<double>(n);
    const double expect = (0.1 + 0.2 + 0.5) / 3.0;
    REQUIRE(std::abs(mean - expect) < 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("treatment matrix invariants") {
    REQUIRE_THROWS_AS(TreatmentMatrix::from_entries(2, 1, {1, 0, 0, 0}), ContractError);
    REQUIRE_THROWS_AS(TreatmentMatrix::from_entries(2, 1, {0, 2, 0, 0}), ContractError);
    auto w = TreatmentMatrix(2, 1);
    REQUIRE_THROWS_AS(w.set(0, 0, true), ContractError);
}

TEST_CASE("panel csv round trip") {
    OutcomePanel p(3, 2);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t t = 0; t <= 2; ++t) p(i, t) = 0.125 * static_cast<double>(i + 7 * t) - 1.0;
    std::stringstream ss;
    write_panel_csv(p, ss);
    const auto q = read_panel_csv(ss);
    REQUIRE(q.n_units() == 3);
    REQUIRE(q.horizon() == 2);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t t = 0; t <= 2; ++t) REQUIRE(q(i, t) == p(i, t));
}

TEST_CASE("treatment csv round trip") {
    ExperimentDesign d{{2}, {0.5}};
    const auto w = generate_staggered_design(6, d, 2);
    std::stringstream ss;
    write_treatment_csv(w, ss);
    const auto v = read_treatment_csv(ss);
    REQUIRE(v.raw() == w.raw());
}

TEST_CASE("panel json envelope carries shape and seed") {
    OutcomePanel p(2, 1);
    p(0, 1) = 2.5;
    const auto j = panel_envelope(p, 77, json{{"note", "x"}});
    REQUIRE(j.at("n_units") == 2);
    REQUIRE(j.at("horizon") == 1);
    REQUIRE(j.at("seed") == 77);
    REQUIRE(j.at("outcomes")[0][1] == 2.5);
}
