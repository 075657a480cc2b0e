#pragma once

#include "netcf/core.hpp"
#include "netcf/errors.hpp"
#include "netcf/linalg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace netcf {

// ---------------------------------------------------------------------------
// baselines
// ---------------------------------------------------------------------------

// Difference-in-means over the terminal window of L periods.
inline double dm(const OutcomePanel& panel, const TreatmentMatrix& w, std::size_t L) {
    if (!panel.same_shape(w)) throw ContractError("dm: panel and treatment shapes differ");
    const std::size_t T = panel.horizon();
    if (L < 1 || L > T) throw ContractError("dm: bad window");
    double acc = 0.0;
    for (std::size_t t = T - L + 1; t <= T; ++t) {
        double st = 0.0, sc = 0.0;
        std::size_t nt = 0, nc = 0;
        for (std::size_t i = 0; i < panel.n_units(); ++i) {
            if (w(i, t)) {
                st += panel(i, t);
                ++nt;
            } else {
                sc += panel(i, t);
                ++nc;
            }
        }
        if (nt == 0 || nc == 0)
            throw EstimatorError("dm: period " + std::to_string(t) + " has an empty arm");
        acc += st / static_cast<double>(nt) - sc / static_cast<double>(nc);
    }
    return acc / static_cast<double>(L);
}

// Horvitz-Thompson with known per-period marginal treatment probabilities.
inline double ht(const OutcomePanel& panel, const TreatmentMatrix& w,
                 const std::vector<double>& probs_per_t, std::size_t L) {
    if (!panel.same_shape(w)) throw ContractError("ht: panel and treatment shapes differ");
    const std::size_t T = panel.horizon();
    if (L < 1 || L > T) throw ContractError("ht: bad window");
    if (probs_per_t.size() != T + 1) throw ContractError("ht: probs length must be T+1");
    const std::size_t n = panel.n_units();
    double acc = 0.0;
    for (std::size_t t = T - L + 1; t <= T; ++t) {
        const double p = probs_per_t[t];
        if (!(p > 0.0 && p < 1.0))
            throw EstimatorError("ht: treatment probability must be strictly inside (0,1)");
        for (std::size_t i = 0; i < n; ++i) {
            const double wi = w(i, t);
            acc += panel(i, t) * wi / p - panel(i, t) * (1.0 - wi) / (1.0 - p);
        }
    }
    return acc / (static_cast<double>(L) * static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// state-evolution regression machinery
// ---------------------------------------------------------------------------

// Coefficients of the batch-mean state-evolution regression, ordered
// (b, c_gl..c_g1, d_g, e_g, c_hl..c_h1, d_h, e_h).
struct SEParams {
    std::size_t lag = 1;
    std::vector<double> beta;
    double fit_condition = 0.0;  // condition number of the normal equations
    bool ill_conditioned = false; // condition above 1e12

    static std::size_t n_coeffs(std::size_t l) { return 1 + l + 2 + l + 2; }

    void validate() const {
        if (lag == 0) throw ContractError("SEParams: lag must be >= 1");
        if (beta.size() != n_coeffs(lag)) throw ContractError("SEParams: coefficient count mismatch");
    }

    double b() const { return beta[0]; }
    // j = 1..lag, j = 1 is the most recent lag
    double c_g(std::size_t j) const { return beta[1 + (lag - j)]; }
    double d_g() const { return beta[1 + lag]; }
    double e_g() const { return beta[2 + lag]; }
    double c_h(std::size_t j) const { return beta[3 + lag + (lag - j)]; }
    double d_h() const { return beta[3 + 2 * lag]; }
    double e_h() const { return beta[4 + 2 * lag]; }
};

// Counterfactual mean series; values for t < lag equal observed means
// (initialization contract). `batch` is empty when no target batch was given.
struct EstimateSeries {
    std::vector<double> pop;
    std::vector<double> batch;
    std::size_t lag = 1;
};

// One design row per (batch j, period t in targets): columns exactly in
// SEParams order; the response is the batch mean at t.
inline void build_design_rows(const std::vector<double>& pop_means,
                              const std::vector<std::vector<double>>& batch_means,
                              const std::vector<double>& pop_p,
                              const std::vector<std::vector<double>>& batch_p,
                              std::size_t l, const std::vector<std::size_t>& targets,
                              DesignMatrix& X, std::vector<double>& y) {
    if (l == 0) throw ContractError("build_design_rows: lag must be >= 1");
    if (batch_means.size() != batch_p.size())
        throw ContractError("build_design_rows: batch series count mismatch");
    const std::size_t len = pop_means.size();
    if (pop_p.size() != len) throw ContractError("build_design_rows: series lengths differ");
    for (std::size_t j = 0; j < batch_means.size(); ++j)
        if (batch_means[j].size() != len || batch_p[j].size() != len)
            throw ContractError("build_design_rows: batch series lengths differ");
    if (len < l + 1) throw ContractError("build_design_rows: series shorter than lag+1");

    const std::size_t k = SEParams::n_coeffs(l);
    X.rows = batch_means.size() * targets.size();
    X.cols = k;
    X.data.assign(X.rows * X.cols, 0.0);
    y.assign(X.rows, 0.0);

    std::size_t r = 0;
    for (std::size_t j = 0; j < batch_means.size(); ++j) {
        for (std::size_t t : targets) {
            if (t < l || t >= len) throw ContractError("build_design_rows: target period out of range");
            std::size_t c = 0;
            X.at(r, c++) = 1.0;
            for (std::size_t u = t - l; u <= t - 1; ++u) X.at(r, c++) = pop_means[u];
            X.at(r, c++) = pop_p[t];
            X.at(r, c++) = pop_p[t] * pop_means[t - 1];
            for (std::size_t u = t - l; u <= t - 1; ++u) X.at(r, c++) = batch_means[j][u];
            X.at(r, c++) = batch_p[j][t];
            X.at(r, c++) = batch_p[j][t] * batch_means[j][t - 1];
            y[r] = batch_means[j][t];
            ++r;
        }
    }
}

inline std::vector<std::size_t> default_targets(std::size_t l, std::size_t T) {
    std::vector<std::size_t> ts;
    for (std::size_t t = l; t <= T; ++t) ts.push_back(t);
    return ts;
}

inline void require_treatment_variation(const std::vector<double>& pop_p,
                                        const std::vector<std::size_t>& targets) {
    std::set<long long> levels;
    for (std::size_t t : targets) levels.insert(llround(pop_p[t] * 1e12));
    if (levels.size() < 2)
        throw EstimatorError("constant observed treatment probability across periods; "
                             "the state-evolution regression is rank deficient");
}

struct SeriesBundle {
    std::vector<double> pop_means;
    std::vector<double> pop_p_obs;
    std::vector<double> pop_p_tgt;
    std::vector<double> batch_means;  // target batch, observed
    std::vector<double> batch_p_obs;
    std::vector<double> batch_p_tgt;
    std::vector<std::vector<double>> train_means;
    std::vector<std::vector<double>> train_p;
};

inline SeriesBundle make_series_bundle(const OutcomePanel& panel, const TreatmentMatrix& w_obs,
                                       const TreatmentMatrix& w_tgt, const Batch& target_batch,
                                       const std::vector<Batch>& train_batches) {
    if (!panel.same_shape(w_obs)) throw ContractError("estimator: panel/treatment shape mismatch");
    if (!w_obs.same_shape(w_tgt)) throw ContractError("estimator: treatment matrices differ in shape");
    SeriesBundle s;
    s.pop_means = panel.column_means();
    s.pop_p_obs = w_obs.column_means();
    s.pop_p_tgt = w_tgt.column_means();
    s.batch_means = batch_mean_series(panel, target_batch);
    s.batch_p_obs = batch_treat_mean_series(w_obs, target_batch);
    s.batch_p_tgt = batch_treat_mean_series(w_tgt, target_batch);
    for (const auto& b : train_batches) {
        s.train_means.push_back(batch_mean_series(panel, b));
        s.train_p.push_back(batch_treat_mean_series(w_obs, b));
    }
    return s;
}

inline SEParams fit_separams(const SeriesBundle& s, std::size_t l, double alpha,
                             const std::vector<std::size_t>& targets) {
    if (s.train_means.empty()) throw ContractError("fit_separams: no training batches");
    if (targets.empty()) throw EstimatorError("fit_separams: no trainable periods");
    require_treatment_variation(s.pop_p_obs, targets);
    DesignMatrix X;
    std::vector<double> y;
    build_design_rows(s.pop_means, s.train_means, s.pop_p_obs, s.train_p, l, targets, X, y);
    try {
        SEParams p;
        p.lag = l;
        const auto fit = ridge_fit_full(X, y, alpha);
        p.beta = fit.beta;
        p.fit_condition = fit.condition;
        p.ill_conditioned = fit.ill_conditioned;
        return p;
    } catch (const SolverError& e) {
        throw EstimatorError(std::string("state-evolution fit failed: ") + e.what());
    }
}

inline void check_initial_window_match(const TreatmentMatrix& w_obs, const TreatmentMatrix& w_tgt,
                                       std::size_t l) {
    for (std::size_t i = 0; i < w_obs.n_units(); ++i)
        for (std::size_t t = 0; t < l && t <= w_obs.horizon(); ++t)
            if (w_obs(i, t) != w_tgt(i, t))
                throw ContractError("observed and target treatments must match on the first " +
                                    std::to_string(l) + " columns");
}

// ---------------------------------------------------------------------------
// basic causal message-passing estimator (population means, lag 1)
// ---------------------------------------------------------------------------

struct BcmpFit {
    // (b, c, d, e) of ybar_{t+1} = b + c ybar_t + d p_{t+1} + e ybar_t p_{t+1}
    std::array<double, 4> coeffs{};
};

// Fits the four-term mean recursion by OLS over the given transition starts
// (each u predicts period u+1).
inline BcmpFit bcmp_fit(const std::vector<double>& pop_means, const std::vector<double>& pop_p,
                        const std::vector<std::size_t>& transition_starts) {
    if (transition_starts.empty()) throw EstimatorError("bcmp: no transitions to fit");
    std::vector<std::size_t> resp;
    for (std::size_t u : transition_starts) resp.push_back(u + 1);
    require_treatment_variation(pop_p, resp);

    DesignMatrix X;
    X.rows = transition_starts.size();
    X.cols = 4;
    X.data.assign(X.rows * X.cols, 0.0);
    std::vector<double> y(X.rows);
    std::size_t r = 0;
    for (std::size_t u : transition_starts) {
        X.at(r, 0) = 1.0;
        X.at(r, 1) = pop_means[u];
        X.at(r, 2) = pop_p[u + 1];
        X.at(r, 3) = pop_means[u] * pop_p[u + 1];
        y[r] = pop_means[u + 1];
        ++r;
    }
    BcmpFit f;
    try {
        const auto beta = ridge_fit(X, y, 0.0);
        std::copy(beta.begin(), beta.end(), f.coeffs.begin());
    } catch (const SolverError& e) {
        throw EstimatorError(std::string("bcmp fit rank deficient: ") + e.what());
    }
    return f;
}

struct BcmpResult {
    BcmpFit fit;
    EstimateSeries series;
};

inline BcmpResult bcmp_estimate(const OutcomePanel& panel, const TreatmentMatrix& w_obs,
                                const TreatmentMatrix& w_target) {
    if (!panel.same_shape(w_obs)) throw ContractError("bcmp: panel/treatment shape mismatch");
    if (!w_obs.same_shape(w_target)) throw ContractError("bcmp: treatment matrices differ in shape");
    const std::size_t T = panel.horizon();
    const auto ybar = panel.column_means();
    const auto p_obs = w_obs.column_means();
    const auto p_tgt = w_target.column_means();

    std::vector<std::size_t> starts;
    for (std::size_t u = 0; u < T; ++u) starts.push_back(u);
    BcmpResult res;
    res.fit = bcmp_fit(ybar, p_obs, starts);

    auto& est = res.series;
    est.lag = 1;
    est.pop.assign(T + 1, 0.0);
    est.pop[0] = ybar[0];
    const auto& c = res.fit.coeffs;
    for (std::size_t t = 1; t <= T; ++t)
        est.pop[t] = c[0] + c[1] * est.pop[t - 1] + c[2] * p_tgt[t] + c[3] * est.pop[t - 1] * p_tgt[t];
    return res;
}

// ---------------------------------------------------------------------------
// first-order estimators (semi-recursive / recursive)
// ---------------------------------------------------------------------------

namespace detail {

inline double dot_lags(const SEParams& p, bool g_part, const std::vector<double>& series,
                       std::size_t t) {
    double acc = 0.0;
    for (std::size_t j = 1; j <= p.lag; ++j)
        acc += (g_part ? p.c_g(j) : p.c_h(j)) * series[t - j];
    return acc;
}

} // namespace detail

// Algorithm steps shared below: after fitting, roll corrections (semi) or the
// full recursion (recursive) from the first `l` observed periods.
inline EstimateSeries fo_semi_recursive_from(const SeriesBundle& s, const SEParams& p) {
    const std::size_t T = s.pop_means.size() - 1;
    const std::size_t l = p.lag;
    EstimateSeries est;
    est.lag = l;
    est.pop.assign(T + 1, 0.0);
    est.batch.assign(T + 1, 0.0);
    for (std::size_t t = 0; t < l && t <= T; ++t) {
        est.pop[t] = s.pop_means[t];
        est.batch[t] = s.batch_means[t];
    }
    for (std::size_t t = l; t <= T; ++t) {
        double rg = 0.0, rh = 0.0, rhb = 0.0;
        for (std::size_t j = 1; j <= l; ++j) {
            const double dpop = est.pop[t - j] - s.pop_means[t - j];
            rg += p.c_g(j) * dpop;
            rh += p.c_h(j) * dpop;
            rhb += p.c_h(j) * (est.batch[t - j] - s.batch_means[t - j]);
        }
        rg += p.d_g() * (s.pop_p_tgt[t] - s.pop_p_obs[t]) +
              p.e_g() * (s.pop_p_tgt[t] * est.pop[t - 1] - s.pop_p_obs[t] * s.pop_means[t - 1]);
        rh += p.d_h() * (s.pop_p_tgt[t] - s.pop_p_obs[t]) +
              p.e_h() * (s.pop_p_tgt[t] * est.pop[t - 1] - s.pop_p_obs[t] * s.pop_means[t - 1]);
        rhb += p.d_h() * (s.batch_p_tgt[t] - s.batch_p_obs[t]) +
               p.e_h() * (s.batch_p_tgt[t] * est.batch[t - 1] - s.batch_p_obs[t] * s.batch_means[t - 1]);
        est.pop[t] = s.pop_means[t] + rg + rh;
        est.batch[t] = s.batch_means[t] + rg + rhb;
    }
    return est;
}

// Recursive rollout; the fitted intercept enters the population part once so a
// fit with all slope coefficients zero reproduces the flat series at b.
inline EstimateSeries fo_recursive_from(const SeriesBundle& s, const SEParams& p) {
    const std::size_t T = s.pop_means.size() - 1;
    const std::size_t l = p.lag;
    EstimateSeries est;
    est.lag = l;
    est.pop.assign(T + 1, 0.0);
    est.batch.assign(T + 1, 0.0);
    for (std::size_t t = 0; t < l && t <= T; ++t) {
        est.pop[t] = s.pop_means[t];
        est.batch[t] = s.batch_means[t];
    }
    for (std::size_t t = l; t <= T; ++t) {
        const double rg = p.b() + detail::dot_lags(p, true, est.pop, t) +
                          p.d_g() * s.pop_p_tgt[t] + p.e_g() * s.pop_p_tgt[t] * est.pop[t - 1];
        const double rh = detail::dot_lags(p, false, est.pop, t) +
                          p.d_h() * s.pop_p_tgt[t] + p.e_h() * s.pop_p_tgt[t] * est.pop[t - 1];
        const double rhb = detail::dot_lags(p, false, est.batch, t) +
                           p.d_h() * s.batch_p_tgt[t] + p.e_h() * s.batch_p_tgt[t] * est.batch[t - 1];
        est.pop[t] = rg + rh;
        est.batch[t] = rg + rhb;
    }
    return est;
}

struct FoResult {
    SEParams params;
    EstimateSeries series;
};

inline FoResult fo_semi_recursive(const OutcomePanel& panel, const TreatmentMatrix& w_obs,
                                  const TreatmentMatrix& w_target, const Batch& target_batch,
                                  const std::vector<Batch>& train_batches, std::size_t l,
                                  double alpha) {
    check_initial_window_match(w_obs, w_target, l);
    const auto s = make_series_bundle(panel, w_obs, w_target, target_batch, train_batches);
    FoResult r;
    r.params = fit_separams(s, l, alpha, default_targets(l, panel.horizon()));
    r.series = fo_semi_recursive_from(s, r.params);
    return r;
}

inline FoResult fo_recursive(const OutcomePanel& panel, const TreatmentMatrix& w_obs,
                             const TreatmentMatrix& w_target, const Batch& target_batch,
                             const std::vector<Batch>& train_batches, std::size_t l,
                             double alpha) {
    check_initial_window_match(w_obs, w_target, l);
    const auto s = make_series_bundle(panel, w_obs, w_target, target_batch, train_batches);
    FoResult r;
    r.params = fit_separams(s, l, alpha, default_targets(l, panel.horizon()));
    r.series = fo_recursive_from(s, r.params);
    return r;
}

// Rolls a fitted recursion beyond the observed horizon under constant target
// treatment probability.
inline std::vector<double> fo_extend_horizon(const SEParams& p, std::vector<double> pop_series,
                                             double p_target, std::size_t extra) {
    for (std::size_t k = 0; k < extra; ++k) {
        const std::size_t t = pop_series.size();
        double v = p.b();
        for (std::size_t j = 1; j <= p.lag; ++j)
            v += (p.c_g(j) + p.c_h(j)) * pop_series[t - j];
        v += (p.d_g() + p.d_h()) * p_target +
             (p.e_g() + p.e_h()) * p_target * pop_series[t - 1];
        pop_series.push_back(v);
    }
    return pop_series;
}

// ---------------------------------------------------------------------------
// higher-order recursive estimator
// ---------------------------------------------------------------------------

// Monomial feature over the stat vector (mean, M2..Mm, p).
struct Feature {
    std::string name;
    std::vector<int> powers;

    double eval(const std::vector<double>& stats) const {
        double v = 1.0;
        for (std::size_t k = 0; k < powers.size(); ++k)
            for (int e = 0; e < powers[k]; ++e) v *= stats[k];
        return v;
    }
};

struct FeatureSpec {
    std::size_t moment_order = 2; // m >= 2
    std::vector<Feature> phi;     // population features; includes the constant
    std::vector<Feature> psi;     // batch features; no constant by convention

    void validate() const {
        if (moment_order < 2) throw ContractError("FeatureSpec: moment order must be >= 2");
        if (phi.empty() || psi.empty()) throw ContractError("FeatureSpec: feature lists must be nonempty");
        for (const auto& f : phi)
            if (f.powers.size() != moment_order + 1)
                throw ContractError("FeatureSpec: phi feature arity mismatch");
        for (const auto& f : psi)
            if (f.powers.size() != moment_order + 1)
                throw ContractError("FeatureSpec: psi feature arity mismatch");
    }

    // All monomials of degree <= 2 over (mean, M2..Mm, p); psi drops the
    // constant so the merged regression keeps a single intercept.
    static FeatureSpec default_quadratic(std::size_t m = 2) {
        FeatureSpec fs;
        fs.moment_order = m;
        const std::size_t dim = m + 1; // mean, M2..Mm, p
        auto name_of = [m](std::size_t k) -> std::string {
            if (k == 0) return "mean";
            if (k <= m - 1) return "M" + std::to_string(k + 1);
            return "p";
        };
        Feature one;
        one.name = "1";
        one.powers.assign(dim, 0);
        fs.phi.push_back(one);
        for (std::size_t k = 0; k < dim; ++k) {
            Feature f;
            f.name = name_of(k);
            f.powers.assign(dim, 0);
            f.powers[k] = 1;
            fs.phi.push_back(f);
        }
        for (std::size_t k = 0; k < dim; ++k)
            for (std::size_t k2 = k; k2 < dim; ++k2) {
                Feature f;
                f.name = name_of(k) + "*" + name_of(k2);
                f.powers.assign(dim, 0);
                f.powers[k] += 1;
                f.powers[k2] += 1;
                fs.phi.push_back(f);
            }
        fs.psi.assign(fs.phi.begin() + 1, fs.phi.end());
        return fs;
    }

    // Purely additive features (no treatment-outcome interaction); rollouts
    // under extreme treatment levels stay contractive whenever the fitted lag
    // weights are.
    static FeatureSpec linear(std::size_t m = 2) {
        FeatureSpec fs;
        fs.moment_order = m;
        const std::size_t dim = m + 1;
        auto unit = [dim](std::string n, std::size_t k) {
            Feature f;
            f.name = std::move(n);
            f.powers.assign(dim, 0);
            f.powers[k] = 1;
            return f;
        };
        Feature one;
        one.name = "1";
        one.powers.assign(dim, 0);
        fs.phi.push_back(one);
        fs.phi.push_back(unit("mean", 0));
        for (std::size_t k = 2; k <= m; ++k) fs.phi.push_back(unit("M" + std::to_string(k), k - 1));
        fs.phi.push_back(unit("p", dim - 1));
        fs.psi.assign(fs.phi.begin() + 1, fs.phi.end());
        return fs;
    }

    // The restriction that collapses the estimator onto the first-order one.
    static FeatureSpec first_order_subset() {
        FeatureSpec fs;
        fs.moment_order = 2;
        auto mono = [](std::string n, int pm, int pv, int pp) {
            Feature f;
            f.name = std::move(n);
            f.powers = {pm, pv, pp};
            return f;
        };
        fs.phi = {mono("1", 0, 0, 0), mono("mean", 1, 0, 0), mono("p", 0, 0, 1),
                  mono("p*mean", 1, 0, 1)};
        fs.psi = {mono("mean", 1, 0, 0), mono("p", 0, 0, 1), mono("p*mean", 1, 0, 1)};
        return fs;
    }
};

// Per-period distributional state: mean followed by central moments 2..m.
inline std::vector<std::vector<double>> moment_stats(const OutcomePanel& panel, const Batch& batch,
                                                     std::size_t m) {
    const std::size_t T = panel.horizon();
    std::vector<std::vector<double>> stats(T + 1, std::vector<double>(m, 0.0));
    for (std::size_t t = 0; t <= T; ++t) {
        const double mu = batch_mean(panel, batch, t);
        stats[t][0] = mu;
        for (std::size_t k = 2; k <= m; ++k) {
            double acc = 0.0;
            for (auto i : batch.indices) acc += std::pow(panel(i, t) - mu, static_cast<double>(k));
            stats[t][k - 1] = acc / static_cast<double>(batch.size());
        }
    }
    return stats;
}

struct HoResult {
    std::vector<double> theta;          // row-major (|phi|+|psi|) x m
    FeatureSpec spec;
    EstimateSeries series;              // mean component
    std::vector<std::vector<double>> pop_state;   // rolled (mean, moments), per t
    std::vector<std::vector<double>> batch_state;
};

inline HoResult ho_recursive(const OutcomePanel& panel, const TreatmentMatrix& w_obs,
                             const TreatmentMatrix& w_target, const Batch& target_batch,
                             const std::vector<Batch>& train_batches, const FeatureSpec& spec,
                             double alpha) {
    spec.validate();
    if (!panel.same_shape(w_obs)) throw ContractError("ho: panel/treatment shape mismatch");
    if (!w_obs.same_shape(w_target)) throw ContractError("ho: treatment matrices differ in shape");
    check_initial_window_match(w_obs, w_target, 1);
    if (train_batches.empty()) throw ContractError("ho: no training batches");

    const std::size_t T = panel.horizon();
    const std::size_t m = spec.moment_order;
    const std::size_t n_phi = spec.phi.size();
    const std::size_t n_psi = spec.psi.size();

    const auto pop_stats = moment_stats(panel, Batch::full(panel.n_units()), m);
    const auto pop_p_obs = w_obs.column_means();
    const auto pop_p_tgt = w_target.column_means();
    require_treatment_variation(pop_p_obs, default_targets(1, T));

    auto eval_features = [](const std::vector<Feature>& fs, const std::vector<double>& stats,
                            double p, double* out) {
        std::vector<double> in = stats;
        in.push_back(p);
        for (std::size_t k = 0; k < fs.size(); ++k) out[k] = fs[k].eval(in);
    };

    DesignMatrix X, Y;
    X.rows = train_batches.size() * T;
    X.cols = n_phi + n_psi;
    X.data.assign(X.rows * X.cols, 0.0);
    Y.rows = X.rows;
    Y.cols = m;
    Y.data.assign(Y.rows * Y.cols, 0.0);

    std::size_t r = 0;
    for (const auto& b : train_batches) {
        const auto bstats = moment_stats(panel, b, m);
        const auto bp = batch_treat_mean_series(w_obs, b);
        for (std::size_t t = 0; t < T; ++t) {
            eval_features(spec.phi, pop_stats[t], pop_p_obs[t + 1], &X.at(r, 0));
            eval_features(spec.psi, bstats[t], bp[t + 1], &X.at(r, n_phi));
            for (std::size_t k = 0; k < m; ++k) Y.at(r, k) = bstats[t + 1][k];
            ++r;
        }
    }

    HoResult res;
    res.spec = spec;
    try {
        res.theta = ridge_fit_multi(X, Y, alpha);
    } catch (const SolverError& e) {
        throw EstimatorError(std::string("higher-order fit failed: ") + e.what());
    }

    const auto batch_stats0 = moment_stats(panel, target_batch, m);
    const auto batch_p_tgt = batch_treat_mean_series(w_target, target_batch);

    auto apply = [&](const std::vector<double>& pop_state, const std::vector<double>& bss,
                     double p_pop, double p_batch, std::vector<double>& next_pop,
                     std::vector<double>& next_batch) {
        std::vector<double> fpop(n_phi), fpsi_pop(n_psi), fpsi_b(n_psi);
        eval_features(spec.phi, pop_state, p_pop, fpop.data());
        eval_features(spec.psi, pop_state, p_pop, fpsi_pop.data());
        eval_features(spec.psi, bss, p_batch, fpsi_b.data());
        next_pop.assign(m, 0.0);
        next_batch.assign(m, 0.0);
        for (std::size_t k = 0; k < m; ++k) {
            double g = 0.0;
            for (std::size_t j = 0; j < n_phi; ++j) g += res.theta[j * m + k] * fpop[j];
            double h_pop = 0.0, h_b = 0.0;
            for (std::size_t j = 0; j < n_psi; ++j) {
                h_pop += res.theta[(n_phi + j) * m + k] * fpsi_pop[j];
                h_b += res.theta[(n_phi + j) * m + k] * fpsi_b[j];
            }
            next_pop[k] = g + h_pop;
            next_batch[k] = g + h_b;
        }
    };

    res.pop_state.assign(T + 1, {});
    res.batch_state.assign(T + 1, {});
    res.pop_state[0] = pop_stats[0];
    res.batch_state[0] = batch_stats0[0];
    for (std::size_t t = 1; t <= T; ++t)
        apply(res.pop_state[t - 1], res.batch_state[t - 1], pop_p_tgt[t], batch_p_tgt[t],
              res.pop_state[t], res.batch_state[t]);

    res.series.lag = 1;
    res.series.pop.resize(T + 1);
    res.series.batch.resize(T + 1);
    for (std::size_t t = 0; t <= T; ++t) {
        res.series.pop[t] = res.pop_state[t][0];
        res.series.batch[t] = res.batch_state[t][0];
    }
    return res;
}

// ---------------------------------------------------------------------------
// detrending pipeline
// ---------------------------------------------------------------------------

struct DetrendResult {
    std::vector<double> baseline; // estimated all-control mean series
    SEParams baseline_params;
    SEParams filtered_params;
    EstimateSeries series;
};

// First estimate the all-control baseline with the semi-recursive step, fit
// the recursive estimator on baseline-subtracted outcomes, then add the
// baseline back.
inline DetrendResult detrend_estimate(const OutcomePanel& panel, const TreatmentMatrix& w_obs,
                                      const TreatmentMatrix& w_target, const Batch& target_batch,
                                      const std::vector<Batch>& train_batches, std::size_t l,
                                      double alpha) {
    const TreatmentMatrix w_zero(w_obs.n_units(), w_obs.horizon());
    check_initial_window_match(w_obs, w_zero, l);
    check_initial_window_match(w_obs, w_target, l);

    DetrendResult res;
    const auto base = fo_semi_recursive(panel, w_obs, w_zero, Batch::full(panel.n_units()),
                                        train_batches, l, alpha);
    res.baseline = base.series.pop;
    res.baseline_params = base.params;

    OutcomePanel filtered = panel;
    for (std::size_t i = 0; i < panel.n_units(); ++i)
        for (std::size_t t = 0; t <= panel.horizon(); ++t)
            filtered(i, t) -= res.baseline[t];

    const auto rec = fo_recursive(filtered, w_obs, w_target, target_batch, train_batches, l, alpha);
    res.filtered_params = rec.params;
    res.series = rec.series;
    for (std::size_t t = 0; t <= panel.horizon(); ++t) {
        res.series.pop[t] += res.baseline[t];
        res.series.batch[t] += res.baseline[t];
    }
    return res;
}

} // namespace netcf
