#pragma once

#include "netcf/concurrency.hpp"
#include "netcf/core.hpp"
#include "netcf/dpnb.hpp"
#include "netcf/errors.hpp"
#include "netcf/estimators.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace netcf {

enum class EstimatorId { Bcmp, FoSemi, FoRec, HoRec, Detrend };

inline std::string to_string(EstimatorId id) {
    switch (id) {
        case EstimatorId::Bcmp: return "bcmp";
        case EstimatorId::FoSemi: return "fo-semi";
        case EstimatorId::FoRec: return "fo-rec";
        case EstimatorId::HoRec: return "ho-rec";
        case EstimatorId::Detrend: return "detrend";
    }
    return "?";
}

inline EstimatorId estimator_id_from_string(const std::string& s) {
    if (s == "bcmp") return EstimatorId::Bcmp;
    if (s == "fo-semi") return EstimatorId::FoSemi;
    if (s == "fo-rec") return EstimatorId::FoRec;
    if (s == "ho-rec") return EstimatorId::HoRec;
    if (s == "detrend") return EstimatorId::Detrend;
    throw ConfigError("unknown estimator id: " + s);
}

struct CandidateConfig {
    EstimatorId estimator = EstimatorId::FoRec;
    std::size_t lag = 1;
    BatchParams batch;
    double alpha = 1e-2;
    FeatureSpec features = FeatureSpec::default_quadratic();

    std::string label() const {
        return to_string(estimator) + "(l=" + std::to_string(lag) +
               ",s=" + std::to_string(batch.batch_size) + ",m=" + std::to_string(batch.batch_count) +
               ",alpha=" + std::to_string(alpha) + ")";
    }
};

// Ordered half-open period intervals covering [0, T+1).
struct TimeBlocks {
    std::vector<std::pair<std::size_t, std::size_t>> blocks;

    void validate(std::size_t n_periods) const {
        if (blocks.empty()) throw ConfigError("TimeBlocks: empty");
        std::size_t expect = 0;
        for (const auto& [a, b] : blocks) {
            if (a != expect || b <= a)
                throw ConfigError("TimeBlocks: blocks must be contiguous, nonempty, ordered");
            expect = b;
        }
        if (expect != n_periods) throw ConfigError("TimeBlocks: union must cover all periods");
    }

    static TimeBlocks equal(std::size_t n_periods, std::size_t k) {
        if (k == 0 || k > n_periods) throw ConfigError("TimeBlocks: bad block count");
        TimeBlocks tb;
        const std::size_t base = n_periods / k;
        const std::size_t extra = n_periods % k;
        std::size_t pos = 0;
        for (std::size_t g = 0; g < k; ++g) {
            const std::size_t sz = base + (g < extra ? 1 : 0);
            tb.blocks.emplace_back(pos, pos + sz);
            pos += sz;
        }
        return tb;
    }
};

// Observed batch means: entry (j, t) = mean outcome of validation batch j at t.
inline std::vector<std::vector<double>> reference_truth(const OutcomePanel& panel,
                                                        const std::vector<Batch>& validation_batches) {
    std::vector<std::vector<double>> truth;
    truth.reserve(validation_batches.size());
    for (const auto& b : validation_batches) truth.push_back(batch_mean_series(panel, b));
    return truth;
}

inline double mse_loss(const std::vector<std::vector<double>>& truth,
                       const std::vector<std::vector<double>>& est) {
    if (truth.size() != est.size()) throw ContractError("mse_loss: row counts differ");
    if (truth.empty()) throw ContractError("mse_loss: empty tables");
    double acc = 0.0;
    std::size_t cells = 0;
    for (std::size_t j = 0; j < truth.size(); ++j) {
        if (truth[j].size() != est[j].size()) throw ContractError("mse_loss: row lengths differ");
        for (std::size_t t = 0; t < truth[j].size(); ++t) {
            const double d = truth[j][t] - est[j][t];
            acc += d * d;
            ++cells;
        }
    }
    return acc / static_cast<double>(cells);
}

using LossFn = std::function<double(const std::vector<std::vector<double>>&,
                                    const std::vector<std::vector<double>>&)>;

struct CCVResult {
    std::vector<double> losses;                                   // per candidate
    std::size_t selected = 0;
    std::vector<std::vector<std::vector<double>>> estimates;      // candidate -> batch -> series
    std::vector<std::string> diagnostics;                         // per candidate; empty = ok
};

namespace ccv_detail {

inline bool in_block(std::size_t t, const std::pair<std::size_t, std::size_t>& blk) {
    return t >= blk.first && t < blk.second;
}

// Fit targets: periods t outside the held-out block whose lag window does not
// touch the block (no rows spanning the gap).
inline std::vector<std::size_t> training_targets(std::size_t l, std::size_t T,
                                                 const std::pair<std::size_t, std::size_t>& blk) {
    std::vector<std::size_t> ts;
    for (std::size_t t = l; t <= T; ++t) {
        bool ok = true;
        for (std::size_t u = t - l; u <= t; ++u)
            if (in_block(u, blk)) {
                ok = false;
                break;
            }
        if (ok) ts.push_back(t);
    }
    return ts;
}

// Recursive one-step update shared by the first-order rollouts.
inline double fo_pop_step(const SEParams& p, const std::vector<double>& pop, std::size_t t,
                          double p_pop) {
    double v = p.b();
    for (std::size_t j = 1; j <= p.lag; ++j) v += (p.c_g(j) + p.c_h(j)) * pop[t - j];
    v += (p.d_g() + p.d_h()) * p_pop + (p.e_g() + p.e_h()) * p_pop * pop[t - 1];
    return v;
}

inline double fo_batch_step(const SEParams& p, const std::vector<double>& pop,
                            const std::vector<double>& batch, std::size_t t, double p_pop,
                            double p_batch) {
    double v = p.b();
    for (std::size_t j = 1; j <= p.lag; ++j)
        v += p.c_g(j) * pop[t - j] + p.c_h(j) * batch[t - j];
    v += p.d_g() * p_pop + p.e_g() * p_pop * pop[t - 1];
    v += p.d_h() * p_batch + p.e_h() * p_batch * batch[t - 1];
    return v;
}

// Per-candidate data prepared once and shared across folds: batch aggregation
// does not depend on the held-out block.
struct CandidatePrep {
    SeriesBundle bundle;                                   // series over training batches
    std::vector<std::vector<double>> vb_means;             // validation batch means
    std::vector<std::vector<double>> vb_ps;                // validation batch treatment means
    std::vector<std::vector<double>> pop_stats;            // ho: per-t (mean, M2..Mm)
    std::vector<std::vector<std::vector<double>>> train_stats; // ho: per train batch
    std::vector<std::vector<std::vector<double>>> vb_stats;    // ho: per validation batch
};

struct FoldContext {
    const CandidatePrep& prep;
    std::pair<std::size_t, std::size_t> blk;
    std::size_t T;
};

// Per-fold prediction: initialize from observed means at the block's left
// boundary (or the initialization contract at t < lag) and roll the recursion
// through the block under the observed treatment columns.
inline std::vector<std::vector<double>> predict_block_fo(const FoldContext& cx, std::size_t l,
                                                         double alpha) {
    const auto& s = cx.prep.bundle;
    const auto targets = training_targets(l, cx.T, cx.blk);
    const SEParams p = fit_separams(s, l, alpha, targets);

    std::vector<std::vector<double>> out;
    std::vector<double> pop_work = s.pop_means;
    for (std::size_t t = std::max(cx.blk.first, l); t < cx.blk.second; ++t)
        pop_work[t] = fo_pop_step(p, pop_work, t, s.pop_p_obs[t]);

    for (std::size_t j = 0; j < cx.prep.vb_means.size(); ++j) {
        auto batch_work = cx.prep.vb_means[j];
        const auto& bp = cx.prep.vb_ps[j];
        std::vector<double> est(cx.blk.second - cx.blk.first, 0.0);
        for (std::size_t t = cx.blk.first; t < cx.blk.second; ++t) {
            if (t >= l)
                batch_work[t] = fo_batch_step(p, pop_work, batch_work, t, s.pop_p_obs[t], bp[t]);
            est[t - cx.blk.first] = batch_work[t];
        }
        out.push_back(std::move(est));
    }
    return out;
}

inline std::vector<std::vector<double>> predict_block_bcmp(const FoldContext& cx) {
    const auto& ybar = cx.prep.bundle.pop_means;
    const auto& pp = cx.prep.bundle.pop_p_obs;
    std::vector<std::size_t> starts;
    for (std::size_t u = 0; u < cx.T; ++u)
        if (!in_block(u, cx.blk) && !in_block(u + 1, cx.blk)) starts.push_back(u);
    const auto fit = bcmp_fit(ybar, pp, starts);
    const auto& c = fit.coeffs;

    std::vector<double> work = ybar;
    for (std::size_t t = std::max<std::size_t>(cx.blk.first, 1); t < cx.blk.second; ++t)
        work[t] = c[0] + c[1] * work[t - 1] + c[2] * pp[t] + c[3] * work[t - 1] * pp[t];

    // population-level estimator: every validation batch is scored against the
    // population series
    std::vector<double> est(cx.blk.second - cx.blk.first);
    for (std::size_t t = cx.blk.first; t < cx.blk.second; ++t) est[t - cx.blk.first] = work[t];
    return std::vector<std::vector<double>>(cx.prep.vb_means.size(), est);
}

inline std::vector<std::vector<double>> predict_block_ho(const FoldContext& cx,
                                                         const FeatureSpec& spec, double alpha) {
    spec.validate();
    const std::size_t m = spec.moment_order;
    const std::size_t n_phi = spec.phi.size();
    const std::size_t n_psi = spec.psi.size();

    const auto& pop_stats = cx.prep.pop_stats;
    const auto& pp = cx.prep.bundle.pop_p_obs;
    std::vector<std::size_t> trans;
    for (std::size_t u = 0; u < cx.T; ++u)
        if (!in_block(u, cx.blk) && !in_block(u + 1, cx.blk)) trans.push_back(u);
    if (trans.empty()) throw EstimatorError("ho: no trainable transitions in fold");
    {
        std::vector<std::size_t> resp;
        for (std::size_t u : trans) resp.push_back(u + 1);
        require_treatment_variation(pp, resp);
    }

    auto eval_features = [](const std::vector<Feature>& fs, const std::vector<double>& stats,
                            double p, double* out) {
        std::vector<double> in = stats;
        in.push_back(p);
        for (std::size_t k = 0; k < fs.size(); ++k) out[k] = fs[k].eval(in);
    };

    const auto& bstats = cx.prep.train_stats;
    const auto& bps = cx.prep.bundle.train_p;

    DesignMatrix X, Y;
    X.rows = bstats.size() * trans.size();
    X.cols = n_phi + n_psi;
    X.data.assign(X.rows * X.cols, 0.0);
    Y.rows = X.rows;
    Y.cols = m;
    Y.data.assign(Y.rows * Y.cols, 0.0);
    std::size_t r = 0;
    for (std::size_t j = 0; j < bstats.size(); ++j)
        for (std::size_t u : trans) {
            eval_features(spec.phi, pop_stats[u], pp[u + 1], &X.at(r, 0));
            eval_features(spec.psi, bstats[j][u], bps[j][u + 1], &X.at(r, n_phi));
            for (std::size_t k = 0; k < m; ++k) Y.at(r, k) = bstats[j][u + 1][k];
            ++r;
        }
    std::vector<double> theta;
    try {
        theta = ridge_fit_multi(X, Y, alpha);
    } catch (const SolverError& e) {
        throw EstimatorError(std::string("ho fold fit failed: ") + e.what());
    }

    auto apply_rows = [&](const std::vector<double>& feats_phi, const std::vector<double>& feats_psi,
                          std::vector<double>& next) {
        next.assign(m, 0.0);
        for (std::size_t k = 0; k < m; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n_phi; ++j) acc += theta[j * m + k] * feats_phi[j];
            for (std::size_t j = 0; j < n_psi; ++j) acc += theta[(n_phi + j) * m + k] * feats_psi[j];
            next[k] = acc;
        }
    };

    // population state through the block
    std::vector<std::vector<double>> pop_work = pop_stats;
    std::vector<double> fphi(n_phi), fpsi(n_psi);
    for (std::size_t t = std::max<std::size_t>(cx.blk.first, 1); t < cx.blk.second; ++t) {
        eval_features(spec.phi, pop_work[t - 1], pp[t], fphi.data());
        eval_features(spec.psi, pop_work[t - 1], pp[t], fpsi.data());
        apply_rows(fphi, fpsi, pop_work[t]);
    }

    std::vector<std::vector<double>> out;
    for (std::size_t j = 0; j < cx.prep.vb_stats.size(); ++j) {
        auto bw = cx.prep.vb_stats[j];
        const auto& bp = cx.prep.vb_ps[j];
        std::vector<double> est(cx.blk.second - cx.blk.first, 0.0);
        for (std::size_t t = cx.blk.first; t < cx.blk.second; ++t) {
            if (t >= 1) {
                eval_features(spec.phi, pop_work[t - 1], pp[t], fphi.data());
                std::vector<double> fb(n_psi);
                eval_features(spec.psi, bw[t - 1], bp[t], fb.data());
                apply_rows(fphi, fb, bw[t]);
            }
            est[t - cx.blk.first] = bw[t][0];
        }
        out.push_back(std::move(est));
    }
    return out;
}

inline std::vector<std::vector<double>> predict_block_detrend(const FoldContext& cx, std::size_t l,
                                                              double alpha) {
    const auto& s = cx.prep.bundle;
    const std::size_t T = cx.T;
    const auto targets = training_targets(l, T, cx.blk);
    const SEParams p1 = fit_separams(s, l, alpha, targets);

    // all-control baseline: semi-recursive anchoring outside the block, pure
    // recursion (zero treatment) inside it
    std::vector<double> base(T + 1, 0.0);
    for (std::size_t t = 0; t < l; ++t) base[t] = s.pop_means[t];
    for (std::size_t t = l; t <= T; ++t) {
        if (in_block(t, cx.blk)) {
            double v = p1.b();
            for (std::size_t j = 1; j <= l; ++j) v += (p1.c_g(j) + p1.c_h(j)) * base[t - j];
            base[t] = v;
        } else {
            double rg = 0.0, rh = 0.0;
            for (std::size_t j = 1; j <= l; ++j) {
                const double d = base[t - j] - s.pop_means[t - j];
                rg += p1.c_g(j) * d;
                rh += p1.c_h(j) * d;
            }
            rg += p1.d_g() * (0.0 - s.pop_p_obs[t]) +
                  p1.e_g() * (0.0 - s.pop_p_obs[t] * s.pop_means[t - 1]);
            rh += p1.d_h() * (0.0 - s.pop_p_obs[t]) +
                  p1.e_h() * (0.0 - s.pop_p_obs[t] * s.pop_means[t - 1]);
            base[t] = s.pop_means[t] + rg + rh;
        }
    }

    // subtracting the baseline column-wise commutes with batch averaging, so
    // the filtered series come straight from the raw ones
    SeriesBundle sf = s;
    for (std::size_t t = 0; t <= T; ++t) {
        sf.pop_means[t] -= base[t];
        sf.batch_means[t] -= base[t];
        for (auto& bm : sf.train_means) bm[t] -= base[t];
    }
    const SEParams p2 = fit_separams(sf, l, alpha, targets);

    std::vector<double> pop_work = sf.pop_means;
    for (std::size_t t = std::max(cx.blk.first, l); t < cx.blk.second; ++t)
        pop_work[t] = fo_pop_step(p2, pop_work, t, sf.pop_p_obs[t]);

    std::vector<std::vector<double>> out;
    for (std::size_t j = 0; j < cx.prep.vb_means.size(); ++j) {
        auto batch_work = cx.prep.vb_means[j];
        for (std::size_t t = 0; t <= T; ++t) batch_work[t] -= base[t];
        const auto& bp = cx.prep.vb_ps[j];
        std::vector<double> est(cx.blk.second - cx.blk.first, 0.0);
        for (std::size_t t = cx.blk.first; t < cx.blk.second; ++t) {
            if (t >= l)
                batch_work[t] = fo_batch_step(p2, pop_work, batch_work, t, sf.pop_p_obs[t], bp[t]);
            est[t - cx.blk.first] = batch_work[t] + base[t];
        }
        out.push_back(std::move(est));
    }
    return out;
}

} // namespace ccv_detail

// Leave-one-time-block-out selection over the candidate grid. Estimates inside
// each held-out block target the observed treatment columns; the per-candidate
// loss compares the fold-assembled series against observed validation-batch
// means over the full horizon. Candidates evaluate in parallel; each writes
// its own slot, so the selection never depends on the thread count.
inline CCVResult run_ccv(const OutcomePanel& panel, const TreatmentMatrix& w,
                         const std::vector<CandidateConfig>& candidates, const TimeBlocks& blocks,
                         const std::vector<Batch>& validation_batches, const LossFn& loss,
                         std::uint64_t seed, std::size_t threads = 1) {
    if (!panel.same_shape(w)) throw ContractError("run_ccv: panel/treatment shape mismatch");
    if (candidates.empty()) throw ConfigError("run_ccv: empty candidate grid");
    blocks.validate(panel.n_periods());
    if (blocks.blocks.size() < 2) throw ConfigError("run_ccv: need at least 2 time blocks");
    if (validation_batches.empty()) throw ConfigError("run_ccv: no validation batches");

    const auto truth = reference_truth(panel, validation_batches);
    CCVResult res;
    res.losses.assign(candidates.size(), std::numeric_limits<double>::infinity());
    res.estimates.assign(candidates.size(), {});
    res.diagnostics.assign(candidates.size(), "");

    parallel_for(candidates.size(), threads, [&](std::size_t ci) {
        const auto& cand = candidates[ci];
        std::vector<std::vector<double>> assembled(
            validation_batches.size(), std::vector<double>(panel.n_periods(), 0.0));
        try {
            Rng brng(derive_seed(seed, "ccv-batches", ci));
            const auto train = create_training_batches(w, cand.batch, brng);

            ccv_detail::CandidatePrep prep;
            prep.bundle = make_series_bundle(panel, w, w, Batch::full(panel.n_units()), train);
            prep.vb_means = truth;
            for (const auto& vb : validation_batches)
                prep.vb_ps.push_back(batch_treat_mean_series(w, vb));
            if (cand.estimator == EstimatorId::HoRec) {
                const std::size_t m = cand.features.moment_order;
                prep.pop_stats = moment_stats(panel, Batch::full(panel.n_units()), m);
                for (const auto& b : train) prep.train_stats.push_back(moment_stats(panel, b, m));
                for (const auto& vb : validation_batches)
                    prep.vb_stats.push_back(moment_stats(panel, vb, m));
            }

            for (const auto& blk : blocks.blocks) {
                ccv_detail::FoldContext cx{prep, blk, panel.horizon()};
                std::vector<std::vector<double>> est;
                switch (cand.estimator) {
                    case EstimatorId::Bcmp: est = ccv_detail::predict_block_bcmp(cx); break;
                    case EstimatorId::FoSemi:
                    case EstimatorId::FoRec:
                        est = ccv_detail::predict_block_fo(cx, cand.lag, cand.alpha);
                        break;
                    case EstimatorId::HoRec:
                        est = ccv_detail::predict_block_ho(cx, cand.features, cand.alpha);
                        break;
                    case EstimatorId::Detrend:
                        est = ccv_detail::predict_block_detrend(cx, cand.lag, cand.alpha);
                        break;
                }
                for (std::size_t j = 0; j < validation_batches.size(); ++j)
                    for (std::size_t t = blk.first; t < blk.second; ++t)
                        assembled[j][t] = est[j][t - blk.first];
            }
            res.estimates[ci] = assembled;
            res.losses[ci] = loss(truth, assembled);
        } catch (const std::exception& e) {
            res.diagnostics[ci] = e.what();
            res.estimates[ci] = assembled;
            res.losses[ci] = std::numeric_limits<double>::infinity();
        }
    });

    res.selected = 0;
    for (std::size_t ci = 1; ci < candidates.size(); ++ci)
        if (res.losses[ci] < res.losses[res.selected]) res.selected = ci;
    return res;
}

// Refits the selected candidate on the full horizon and produces the
// counterfactual mean series for a target allocation.
inline EstimateSeries estimate_with_candidate(const CandidateConfig& cand, const OutcomePanel& panel,
                                              const TreatmentMatrix& w_obs,
                                              const TreatmentMatrix& w_target, std::uint64_t seed) {
    Rng brng(derive_seed(seed, "estimate-batches"));
    const Batch pop = Batch::full(panel.n_units());
    switch (cand.estimator) {
        case EstimatorId::Bcmp:
            return bcmp_estimate(panel, w_obs, w_target).series;
        case EstimatorId::FoSemi: {
            const auto train = create_training_batches(w_obs, cand.batch, brng);
            return fo_semi_recursive(panel, w_obs, w_target, pop, train, cand.lag, cand.alpha).series;
        }
        case EstimatorId::FoRec: {
            const auto train = create_training_batches(w_obs, cand.batch, brng);
            return fo_recursive(panel, w_obs, w_target, pop, train, cand.lag, cand.alpha).series;
        }
        case EstimatorId::HoRec: {
            const auto train = create_training_batches(w_obs, cand.batch, brng);
            return ho_recursive(panel, w_obs, w_target, pop, train, cand.features, cand.alpha).series;
        }
        case EstimatorId::Detrend: {
            const auto train = create_training_batches(w_obs, cand.batch, brng);
            return detrend_estimate(panel, w_obs, w_target, pop, train, cand.lag, cand.alpha).series;
        }
    }
    throw ConfigError("estimate_with_candidate: unknown estimator");
}

} // namespace netcf
