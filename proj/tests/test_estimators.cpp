#include "netcf/dpnb.hpp"
#include "netcf/envs/se_exact.hpp"
#include "netcf/estimators.hpp"
#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace netcf;
using Catch::Approx;

namespace {

// W with an exact number of treated units per period (round(p*N)), so the
// realized treatment means equal the requested levels.
TreatmentMatrix exact_level_design(std::size_t n, const std::vector<double>& levels,
                                   std::uint64_t seed) {
    TreatmentMatrix w(n, levels.size() - 1);
    Rng rng(seed);
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    for (std::size_t t = 1; t < levels.size(); ++t) {
        rng.shuffle(order.begin(), order.end());
        const auto k = static_cast<std::size_t>(std::llround(levels[t] * static_cast<double>(n)));
        for (std::size_t j = 0; j < k; ++j) w.set(order[j], t, true);
    }
    return w;
}

SeExactSpec batch_structured_spec() {
    SeExactSpec s;
    s.b_g = 0.4;
    s.c_g = {0.3};
    s.d_g = -0.5;
    s.b_h = 0.2;
    s.c_h = {0.2};
    s.d_h = -0.4;
    s.y0_mean = 1.0;
    s.y0_sd = 1.0;
    return s;
}

struct ExactData {
    OutcomePanel panel;
    TreatmentMatrix w;
    std::vector<Batch> train;
};

ExactData make_exact_data(const SeExactSpec& s, std::size_t n, std::size_t T, std::uint64_t seed,
                          std::size_t n_batches = 8, std::size_t control_prefix = 0) {
    SeExactEnv env(s, n, T, seed);
    ExperimentDesign d;
    if (control_prefix > 0) {
        // keep the first periods all-control so lag-l targets can match
        d.stage_lengths = {control_prefix, (T - control_prefix) / 2,
                           T - control_prefix - (T - control_prefix) / 2};
        d.stage_probs = {0.0, 0.25, 0.75};
    } else {
        d.stage_lengths = {T / 2, T - T / 2};
        d.stage_probs = {0.25, 0.75};
    }
    auto w = generate_staggered_design(n, d, derive_seed(seed, "w"));
    auto panel = env.simulate(w);
    Rng rng(derive_seed(seed, "batches"));
    auto train = create_training_batches(w, {n / 4, n_batches}, rng);
    return {std::move(panel), std::move(w), std::move(train)};
}

// Target allocation equal to w_obs on the first l columns, constant afterwards.
TreatmentMatrix target_with_prefix(const TreatmentMatrix& w_obs, std::size_t l, bool treated) {
    TreatmentMatrix w(w_obs.n_units(), w_obs.horizon());
    for (std::size_t i = 0; i < w_obs.n_units(); ++i) {
        for (std::size_t t = 1; t < l && t <= w_obs.horizon(); ++t) w.set(i, t, w_obs(i, t));
        for (std::size_t t = std::max<std::size_t>(l, 1); t <= w_obs.horizon(); ++t)
            w.set(i, t, treated);
    }
    return w;
}

double merged(double g, double h) { return g + h; }

} // namespace

// ---------------------------------------------------------------------------
// DM / HT baselines
// ---------------------------------------------------------------------------

TEST_CASE("dm: outcome equal to treatment gives exactly one") {
    const std::size_t n = 10, T = 3;
    const auto w = exact_level_design(n, {0, 0.5, 0.3, 0.7}, 1);
    OutcomePanel p(n, T);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t <= T; ++t) p(i, t) = w(i, t);
    REQUIRE(dm(p, w, 3) == Approx(1.0));
}

TEST_CASE("dm: constant panel gives zero") {
    const auto w = exact_level_design(10, {0, 0.5, 0.5}, 2);
    OutcomePanel p(10, 2, 4.2);
    REQUIRE(dm(p, w, 2) == Approx(0.0));
}

TEST_CASE("dm: hand means at L=1") {
    TreatmentMatrix w(3, 1);
    w.set(0, 1, true);
    OutcomePanel p(3, 1);
    p(0, 1) = 5;
    p(1, 1) = 3;
    p(2, 1) = 2;
    REQUIRE(dm(p, w, 1) == Approx(2.5));
}

TEST_CASE("dm: location-scale equivariance") {
    const std::size_t n = 20, T = 4;
    const auto w = exact_level_design(n, {0, 0.4, 0.4, 0.6, 0.6}, 3);
    OutcomePanel p(n, T);
    Rng rng(4);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t <= T; ++t) p(i, t) = rng.normal(0, 2);
    OutcomePanel q = p;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t <= T; ++t) q(i, t) = 3.5 * p(i, t) + 7.0;
    REQUIRE(dm(q, w, 2) == Approx(3.5 * dm(p, w, 2)));
}

TEST_CASE("dm: an empty arm is an estimator error") {
    TreatmentMatrix w(3, 1); // nobody treated at t=1
    OutcomePanel p(3, 1, 1.0);
    REQUIRE_THROWS_AS(dm(p, w, 1), EstimatorError);
}

TEST_CASE("ht: constant outcome, balanced arms, p=1/2 gives zero") {
    const std::size_t n = 10;
    const auto w = exact_level_design(n, {0, 0.5}, 5);
    OutcomePanel p(n, 1, 1.0);
    REQUIRE(ht(p, w, {0.0, 0.5}, 1) == Approx(0.0));
}

TEST_CASE("ht: outcome equal to treatment, p=1/2, half treated gives one") {
    const std::size_t n = 10;
    const auto w = exact_level_design(n, {0, 0.5}, 6);
    OutcomePanel p(n, 1);
    for (std::size_t i = 0; i < n; ++i) p(i, 1) = w(i, 1);
    REQUIRE(ht(p, w, {0.0, 0.5}, 1) == Approx(1.0));
}

TEST_CASE("ht: all-control column matches the direct formula") {
    const std::size_t n = 8;
    TreatmentMatrix w(n, 1);
    OutcomePanel p(n, 1);
    Rng rng(7);
    double direct = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        p(i, 1) = rng.uniform(0, 3);
        direct += -p(i, 1) / (1.0 - 0.5);
    }
    direct /= static_cast<double>(n);
    REQUIRE(ht(p, w, {0.0, 0.5}, 1) == Approx(direct));
}

TEST_CASE("ht: degenerate probability is an error") {
    const auto w = exact_level_design(4, {0, 0.5}, 8);
    OutcomePanel p(4, 1, 1.0);
    REQUIRE_THROWS_AS(ht(p, w, {0.0, 1.0}, 1), EstimatorError);
    REQUIRE_THROWS_AS(ht(p, w, {0.0, 0.0}, 1), EstimatorError);
}

// ---------------------------------------------------------------------------
// bcmp
// ---------------------------------------------------------------------------

TEST_CASE("bcmp recovers exact coefficients and the all-control counterfactual") {
    // deterministic scalar recursion with (b,c,d,e) = (1, 0.5, -1.2, 0) and
    // realized treatment levels (0, .25, .25, .75, .75)
    const std::size_t n = 8, T = 4;
    const std::vector<double> levels = {0, 0.25, 0.25, 0.75, 0.75};
    const auto w = exact_level_design(n, levels, 9);
    const auto series = oracles::scalar_recursion(1.0, 0.5, -1.2, 0.0, 0.0, levels);
    OutcomePanel p(n, T);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t <= T; ++t) p(i, t) = series[t];

    const auto res = bcmp_estimate(p, w, TreatmentMatrix(n, T)); // target all-control
    REQUIRE(std::abs(res.fit.coeffs[0] - 1.0) < 1e-8);
    REQUIRE(std::abs(res.fit.coeffs[1] - 0.5) < 1e-8);
    REQUIRE(std::abs(res.fit.coeffs[2] + 1.2) < 1e-8);
    REQUIRE(std::abs(res.fit.coeffs[3]) < 1e-8);

    const std::vector<double> expect = {0.0, 1.0, 1.5, 1.75, 1.875};
    for (std::size_t t = 0; t <= T; ++t) REQUIRE(std::abs(res.series.pop[t] - expect[t]) < 1e-8);
}

TEST_CASE("bcmp self-counterfactual reproduces observed means on exact data") {
    const std::size_t n = 8, T = 6;
    const std::vector<double> levels = {0, 0.25, 0.25, 0.25, 0.75, 0.75, 0.75};
    const auto w = exact_level_design(n, levels, 10);
    const auto series = oracles::scalar_recursion(0.8, 0.4, -0.9, 0.3, 0.5, levels);
    OutcomePanel p(n, T);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t <= T; ++t) p(i, t) = series[t];
    const auto res = bcmp_estimate(p, w, w);
    for (std::size_t t = 0; t <= T; ++t) REQUIRE(std::abs(res.series.pop[t] - series[t]) < 1e-8);
}

TEST_CASE("bcmp: treatment-free dynamics make the estimate independent of the target") {
    const std::size_t n = 8, T = 5;
    const std::vector<double> levels = {0, 0.25, 0.75, 0.25, 0.75, 0.5};
    const auto w = exact_level_design(n, levels, 11);
    const auto series = oracles::scalar_recursion(1.0, 0.6, 0.0, 0.0, 2.0, levels);
    OutcomePanel p(n, T);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t <= T; ++t) p(i, t) = series[t];
    const auto a = bcmp_estimate(p, w, TreatmentMatrix::all_level(n, T, true));
    const auto b = bcmp_estimate(p, w, TreatmentMatrix::all_level(n, T, false));
    for (std::size_t t = 0; t <= T; ++t) REQUIRE(a.series.pop[t] == Approx(b.series.pop[t]).margin(1e-9));
}

TEST_CASE("bcmp: constant treatment probability raises the rank error") {
    const std::size_t n = 10, T = 4;
    const auto w = exact_level_design(n, {0, 0.5, 0.5, 0.5, 0.5}, 12);
    OutcomePanel p(n, T);
    Rng rng(13);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t <= T; ++t) p(i, t) = rng.normal();
    REQUIRE_THROWS_AS(bcmp_estimate(p, w, w), EstimatorError);
}

// ---------------------------------------------------------------------------
// design rows
// ---------------------------------------------------------------------------

TEST_CASE("build_design_rows: population batch duplicates the population columns") {
    const std::vector<double> ybar = {1, 2, 3, 4};
    const std::vector<double> p = {0, 0.3, 0.5, 0.7};
    DesignMatrix X;
    std::vector<double> y;
    build_design_rows(ybar, {ybar}, p, {p}, 1, {1, 2, 3}, X, y);
    REQUIRE(X.rows == 3);
    REQUIRE(X.cols == 7);
    for (std::size_t r = 0; r < 3; ++r) {
        REQUIRE(X.at(r, 1) == X.at(r, 4)); // lag column duplicated
        REQUIRE(X.at(r, 2) == X.at(r, 5)); // p column duplicated
        REQUIRE(X.at(r, 3) == X.at(r, 6)); // interaction duplicated
        REQUIRE(y[r] == ybar[r + 1]);
    }
}

TEST_CASE("build_design_rows: row and column counts") {
    const std::vector<double> ybar = {1, 2, 3};
    const std::vector<double> p = {0, 0.4, 0.6};
    DesignMatrix X;
    std::vector<double> y;
    build_design_rows(ybar, {ybar}, p, {p}, 1, default_targets(1, 2), X, y);
    REQUIRE(X.rows == 2); // (T - l + 1) rows per batch
    REQUIRE(X.cols == 7); // 1 + l + 2 + l + 2
}

TEST_CASE("build_design_rows: shifted batch means shift the batch lag column") {
    const std::vector<double> ybar = {1, 2, 3, 4};
    std::vector<double> shifted = ybar;
    for (auto& v : shifted) v += 1.0;
    const std::vector<double> p = {0, 0.3, 0.5, 0.7};
    DesignMatrix X;
    std::vector<double> y;
    build_design_rows(ybar, {shifted}, p, {p}, 1, {1, 2, 3}, X, y);
    for (std::size_t r = 0; r < 3; ++r) REQUIRE(X.at(r, 4) == Approx(X.at(r, 1) + 1.0));
}

TEST_CASE("build_design_rows: lag-2 column order matches the coefficient order") {
    const std::vector<double> ybar = {10, 20, 30, 40};
    const std::vector<double> p = {0, 0.1, 0.2, 0.3};
    DesignMatrix X;
    std::vector<double> y;
    build_design_rows(ybar, {ybar}, p, {p}, 2, {2, 3}, X, y);
    REQUIRE(X.cols == SEParams::n_coeffs(2));
    // row for t=2: (1, ybar_0, ybar_1, p_2, p_2*ybar_1, ...)
    REQUIRE(X.at(0, 1) == 10);
    REQUIRE(X.at(0, 2) == 20);
    REQUIRE(X.at(0, 3) == Approx(0.2));
    REQUIRE(X.at(0, 4) == Approx(0.2 * 20));
}

// ---------------------------------------------------------------------------
// first-order estimators
// ---------------------------------------------------------------------------

TEST_CASE("fo_semi: self-counterfactual corrections vanish identically") {
    // holds on any data, noisy included
    const std::size_t n = 60, T = 8;
    ExperimentDesign d{{4, 4}, {0.25, 0.75}};
    const auto w = generate_staggered_design(n, d, 14);
    OutcomePanel p(n, T);
    Rng rng(15);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t <= T; ++t) p(i, t) = rng.normal(0, 3);
    Rng brng(16);
    const auto train = create_training_batches(w, {15, 6}, brng);
    const auto vb = create_validation_batches(w, 2);
    const auto res = fo_semi_recursive(p, w, w, vb[0], train, 1, 1e-2);
    const auto pop = p.column_means();
    const auto bm = batch_mean_series(p, vb[0]);
    for (std::size_t t = 0; t <= T; ++t) {
        REQUIRE(res.series.pop[t] == Approx(pop[t]).margin(1e-10));
        REQUIRE(res.series.batch[t] == Approx(bm[t]).margin(1e-10));
    }
}

TEST_CASE("fo_semi matches the scalar oracle on exact data") {
    const auto s = batch_structured_spec();
    const auto data = make_exact_data(s, 400, 10, 17);
    const auto w0 = TreatmentMatrix::all_level(400, 10, false);
    const auto res = fo_semi_recursive(data.panel, data.w, w0, Batch::full(400), data.train, 1, 0.0);

    const std::vector<double> zeros(11, 0.0);
    const auto oracle = oracles::scalar_recursion(merged(s.b_g, s.b_h), merged(s.c_g[0], s.c_h[0]),
                                                  merged(s.d_g, s.d_h), 0.0,
                                                  data.panel.column_mean(0), zeros);
    for (std::size_t t = 0; t <= 10; ++t)
        REQUIRE(std::abs(res.series.pop[t] - oracle[t]) < 1e-6);
}

TEST_CASE("fo_rec equals fo_semi on exact data and extends the horizon") {
    const auto s = batch_structured_spec();
    const auto data = make_exact_data(s, 400, 10, 18);
    const auto w1 = TreatmentMatrix::all_level(400, 10, true);
    const auto semi = fo_semi_recursive(data.panel, data.w, w1, Batch::full(400), data.train, 1, 0.0);
    const auto rec = fo_recursive(data.panel, data.w, w1, Batch::full(400), data.train, 1, 0.0);
    for (std::size_t t = 0; t <= 10; ++t)
        REQUIRE(std::abs(semi.series.pop[t] - rec.series.pop[t]) < 1e-6);

    // rolling 5 periods beyond T under constant p' = 1 matches the oracle
    const auto extended = fo_extend_horizon(rec.params, rec.series.pop, 1.0, 5);
    std::vector<double> probs(16, 1.0);
    probs[0] = 0.0;
    // oracle rolled from the same initialization
    std::vector<double> oracle = {rec.series.pop[0]};
    for (std::size_t t = 1; t <= 15; ++t) {
        const double a = oracle.back();
        oracle.push_back(merged(s.b_g, s.b_h) + merged(s.c_g[0], s.c_h[0]) * a +
                         merged(s.d_g, s.d_h) * probs[t]);
    }
    // beyond the observed horizon the rollout must track the oracle dynamics
    for (std::size_t t = 11; t <= 15; ++t) {
        const double expect = merged(s.b_g, s.b_h) + merged(s.c_g[0], s.c_h[0]) * extended[t - 1] +
                              merged(s.d_g, s.d_h) * 1.0;
        REQUIRE(std::abs(extended[t] - expect) < 1e-6);
    }
}

TEST_CASE("fo_rec with only an intercept produces the flat series at b") {
    SEParams p;
    p.lag = 1;
    p.beta.assign(SEParams::n_coeffs(1), 0.0);
    p.beta[0] = 2.75;
    SeriesBundle s;
    s.pop_means = {0.3, 9.0, -4.0, 0.0};
    s.batch_means = s.pop_means;
    s.pop_p_obs = s.pop_p_tgt = {0, 0.5, 0.5, 0.5};
    s.batch_p_obs = s.batch_p_tgt = s.pop_p_obs;
    const auto est = fo_recursive_from(s, p);
    REQUIRE(est.pop[0] == Approx(0.3));
    for (std::size_t t = 1; t <= 3; ++t) REQUIRE(est.pop[t] == Approx(2.75));
}

TEST_CASE("fo estimators: initialization contract copies observed means for t < l") {
    const auto s = batch_structured_spec();
    auto spec2 = s;
    spec2.c_g = {0.3, 0.1};
    spec2.c_h = {0.2, -0.05};
    spec2.noise_sd = 0.05;
    const auto data = make_exact_data(spec2, 300, 12, 19, 8, 2);
    const auto w1 = target_with_prefix(data.w, 2, true);
    const auto vb = create_validation_batches(data.w, 2);
    const auto res = fo_recursive(data.panel, data.w, w1, vb[1], data.train, 2, 1e-3);
    REQUIRE(res.series.pop[0] == Approx(data.panel.column_mean(0)));
    REQUIRE(res.series.pop[1] == Approx(data.panel.column_mean(1)));
    REQUIRE(res.series.batch[0] == Approx(batch_mean(data.panel, vb[1], 0)));
    REQUIRE(res.series.batch[1] == Approx(batch_mean(data.panel, vb[1], 1)));
}

TEST_CASE("fo_semi on zero-effect oscillatory data tracks observed means for any target") {
    SeExactSpec s;
    s.c_g = {1.2, -0.8};
    s.c_h = {0.3, -0.1};
    s.y0_mean = 2.0;
    s.y0_sd = 1.0;
    const auto data = make_exact_data(s, 400, 12, 20, 8, 2);
    const auto w1 = target_with_prefix(data.w, 2, true);
    const auto res = fo_semi_recursive(data.panel, data.w, w1, Batch::full(400), data.train, 2, 0.0);
    for (std::size_t t = 0; t <= 12; ++t)
        REQUIRE(std::abs(res.series.pop[t] - data.panel.column_mean(t)) < 1e-7);
}

TEST_CASE("fo batch estimates track exact batch-level dynamics") {
    const auto s = batch_structured_spec();
    const auto data = make_exact_data(s, 500, 10, 21);
    const auto vb = create_validation_batches(data.w, 2);
    const auto res = fo_recursive(data.panel, data.w, data.w, vb[0], data.train, 1, 0.0);
    const auto truth = batch_mean_series(data.panel, vb[0]);
    for (std::size_t t = 0; t <= 10; ++t)
        REQUIRE(std::abs(res.series.batch[t] - truth[t]) < 1e-6);
}

// ---------------------------------------------------------------------------
// higher-order estimator
// ---------------------------------------------------------------------------

TEST_CASE("ho with the first-order feature subset reduces to fo_rec") {
    const auto s = batch_structured_spec();
    const auto data = make_exact_data(s, 300, 10, 22);
    const auto w1 = TreatmentMatrix::all_level(300, 10, true);
    const double alpha = 1e-3;
    const auto fo = fo_recursive(data.panel, data.w, w1, Batch::full(300), data.train, 1, alpha);
    const auto ho = ho_recursive(data.panel, data.w, w1, Batch::full(300), data.train,
                                 FeatureSpec::first_order_subset(), alpha);
    for (std::size_t t = 0; t <= 10; ++t)
        REQUIRE(std::abs(fo.series.pop[t] - ho.series.pop[t]) < 1e-8);
}

TEST_CASE("ho captures variance that doubles each period") {
    const std::size_t n = 400, T = 8;
    OutcomePanel p(n, T);
    const double a0 = 0.5;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t <= T; ++t) {
            const double a = a0 * std::pow(std::sqrt(2.0), static_cast<double>(t));
            p(i, t) = (i % 2 == 0 ? a : -a);
        }
    ExperimentDesign d{{4, 4}, {0.25, 0.75}};
    const auto w = generate_staggered_design(n, d, 23);
    Rng brng(24);
    const auto train = create_training_batches(w, {100, 30}, brng);
    const auto res = ho_recursive(p, w, w, Batch::full(n), train, FeatureSpec::default_quadratic(),
                                  1e-8);
    for (std::size_t t = 2; t <= T; ++t) {
        const double ratio = res.pop_state[t][1] / res.pop_state[t - 1][1];
        REQUIRE(ratio == Approx(2.0).margin(0.05));
    }
}

TEST_CASE("ho linear features recover additive dynamics and stay interaction-free") {
    // exact additive data: no treatment-outcome interaction in the generator
    SeExactSpec s;
    s.b_g = 0.4;
    s.c_g = {0.3};
    s.d_g = -0.5;
    s.c_h = {0.2};
    s.d_h = -0.3;
    s.y0_mean = 1.0;
    s.y0_sd = 1.0;
    const auto data = make_exact_data(s, 300, 10, 50);
    const auto w0 = TreatmentMatrix::all_level(300, 10, false);
    const auto res = ho_recursive(data.panel, data.w, w0, Batch::full(300), data.train,
                                  FeatureSpec::linear(2), 1e-8);
    const std::vector<double> zeros(11, 0.0);
    const auto oracle = oracles::scalar_recursion(merged(s.b_g, s.b_h), merged(s.c_g[0], s.c_h[0]),
                                                  merged(s.d_g, s.d_h), 0.0,
                                                  data.panel.column_mean(0), zeros);
    for (std::size_t t = 0; t <= 10; ++t)
        REQUIRE(std::abs(res.series.pop[t] - oracle[t]) < 1e-4);
    // no feature multiplies outcome stats by the treatment mean
    for (const auto& f : FeatureSpec::linear(2).phi) {
        int total = 0;
        for (int p : f.powers) total += p;
        REQUIRE(total <= 1);
    }
}

TEST_CASE("ho on a constant panel stays constant with zero moments") {
    const std::size_t n = 100, T = 6;
    OutcomePanel p(n, T, 3.25);
    ExperimentDesign d{{3, 3}, {0.3, 0.7}};
    const auto w = generate_staggered_design(n, d, 25);
    Rng brng(26);
    const auto train = create_training_batches(w, {25, 10}, brng);
    const auto res = ho_recursive(p, w, w, Batch::full(n), train, FeatureSpec::default_quadratic(),
                                  1e-4);
    for (std::size_t t = 0; t <= T; ++t) {
        REQUIRE(res.series.pop[t] == Approx(3.25).margin(1e-6));
        REQUIRE(std::abs(res.pop_state[t][1]) < 1e-9);
    }
}

// ---------------------------------------------------------------------------
// detrending
// ---------------------------------------------------------------------------

TEST_CASE("detrend with all-zero target returns the step-1 baseline") {
    const auto s = batch_structured_spec();
    const auto data = make_exact_data(s, 400, 10, 27);
    const auto w0 = TreatmentMatrix::all_level(400, 10, false);
    const auto res = detrend_estimate(data.panel, data.w, w0, Batch::full(400), data.train, 1, 1e-9);
    for (std::size_t t = 0; t <= 10; ++t)
        REQUIRE(std::abs(res.series.pop[t] - res.baseline[t]) < 1e-5);
}

TEST_CASE("detrend on zero-effect oscillatory data returns observed means") {
    SeExactSpec s;
    s.c_g = {1.2, -0.8};
    s.c_h = {0.3, -0.1};
    s.y0_mean = 2.0;
    s.y0_sd = 1.0;
    const auto data = make_exact_data(s, 400, 12, 28, 8, 2);
    const auto w1 = target_with_prefix(data.w, 2, true);
    const auto res = detrend_estimate(data.panel, data.w, w1, Batch::full(400), data.train, 2, 1e-9);
    for (std::size_t t = 0; t <= 12; ++t)
        REQUIRE(std::abs(res.series.pop[t] - data.panel.column_mean(t)) < 1e-5);
}

TEST_CASE("detrend recovers the all-treat counterfactual on additive seasonal data") {
    // oscillatory baseline plus linear treatment dynamics, all exact
    SeExactSpec s;
    s.b_g = 0.1;
    s.c_g = {1.1, -0.7};
    s.d_g = -0.3;
    s.c_h = {0.25, -0.05};
    s.d_h = -0.5;
    s.y0_mean = 1.0;
    s.y0_sd = 0.8;
    const std::size_t n = 500, T = 12;
    const auto data = make_exact_data(s, n, T, 29, 8, 2);
    const auto w1 = target_with_prefix(data.w, 2, true);

    // ground truth from the same frozen world under all-treat
    SeExactEnv env(s, n, T, 29);
    const auto gt = env.simulate(w1);

    const auto det = detrend_estimate(data.panel, data.w, w1, Batch::full(n), data.train, 2, 1e-9);
    const auto rec = fo_recursive(data.panel, data.w, w1, Batch::full(n), data.train, 2, 1e-9);

    double det_err = 0.0, rec_err = 0.0;
    for (std::size_t t = 0; t <= T; ++t) {
        det_err = std::max(det_err, std::abs(det.series.pop[t] - gt.column_mean(t)));
        rec_err = std::max(rec_err, std::abs(rec.series.pop[t] - gt.column_mean(t)));
    }
    REQUIRE(det_err <= 2.0 * rec_err + 1e-6);
    REQUIRE(det_err < 1e-4);
}

// ---------------------------------------------------------------------------
// cross-cutting invariants
// ---------------------------------------------------------------------------

TEST_CASE("self-counterfactual consistency across the estimator family") {
    const auto s = batch_structured_spec();
    const auto data = make_exact_data(s, 400, 10, 30);
    const Batch pop = Batch::full(400);
    const auto obs = data.panel.column_means();

    auto check = [&](const std::vector<double>& est) {
        for (std::size_t t = 0; t <= 10; ++t) REQUIRE(std::abs(est[t] - obs[t]) < 1e-6);
    };
    check(bcmp_estimate(data.panel, data.w, data.w).series.pop);
    check(fo_semi_recursive(data.panel, data.w, data.w, pop, data.train, 1, 0.0).series.pop);
    check(fo_recursive(data.panel, data.w, data.w, pop, data.train, 1, 0.0).series.pop);
    check(detrend_estimate(data.panel, data.w, data.w, pop, data.train, 1, 1e-10).series.pop);
    check(ho_recursive(data.panel, data.w, data.w, pop, data.train,
                       FeatureSpec::first_order_subset(), 1e-10)
              .series.pop);
}

TEST_CASE("fo estimators require matching initial treatment columns") {
    const auto s = batch_structured_spec();
    const auto data = make_exact_data(s, 100, 8, 31);
    auto w_bad = TreatmentMatrix::all_level(100, 8, true); // differs at t=1 < l=2
    REQUIRE_THROWS_AS(
        fo_recursive(data.panel, data.w, w_bad, Batch::full(100), data.train, 2, 1e-3),
        ContractError);
}

TEST_CASE("degenerate fit with constant treatment probability raises an estimator error") {
    const std::size_t n = 60, T = 6;
    const auto w = exact_level_design(n, {0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5}, 32);
    OutcomePanel p(n, T);
    Rng rng(33);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t <= T; ++t) p(i, t) = rng.normal();
    Rng brng(34);
    const auto train = create_training_batches(w, {15, 6}, brng);
    REQUIRE_THROWS_AS(
        fo_recursive(p, w, TreatmentMatrix(n, T), Batch::full(n), train, 1, 1e-3),
        EstimatorError);
}
