#pragma once

#include "netcf/errors.hpp"
#include "netcf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace netcf {

// Binary treatment assignments, N x (T+1). Column 0 is the all-control
// initialization and is forced to zero.
class TreatmentMatrix {
public:
    TreatmentMatrix(std::size_t n_units, std::size_t horizon)
        : n_(n_units), t_(horizon), w_(n_units * (horizon + 1), 0) {
        if (n_ == 0 || t_ == 0) throw ConfigError("TreatmentMatrix: n_units and horizon must be positive");
    }

    static TreatmentMatrix from_entries(std::size_t n_units, std::size_t horizon,
                                        const std::vector<std::uint8_t>& entries) {
        TreatmentMatrix m(n_units, horizon);
        if (entries.size() != m.w_.size())
            throw ContractError("TreatmentMatrix: entry count does not match n_units x (horizon+1)");
        m.w_ = entries;
        for (std::size_t i = 0; i < n_units; ++i) {
            if (m(i, 0) != 0) throw ContractError("TreatmentMatrix: column 0 must be all zeros");
            for (std::size_t t = 0; t <= horizon; ++t)
                if (m(i, t) > 1) throw ContractError("TreatmentMatrix: entries must be 0/1");
        }
        return m;
    }

    std::size_t n_units() const { return n_; }
    std::size_t horizon() const { return t_; }
    std::size_t n_periods() const { return t_ + 1; }

    std::uint8_t operator()(std::size_t unit, std::size_t t) const { return w_[unit * (t_ + 1) + t]; }

    void set(std::size_t unit, std::size_t t, bool on) {
        if (t == 0 && on) throw ContractError("TreatmentMatrix: column 0 is reserved all-control");
        w_[unit * (t_ + 1) + t] = on ? 1 : 0;
    }

    double column_mean(std::size_t t) const {
        check_t(t);
        std::size_t c = 0;
        for (std::size_t i = 0; i < n_; ++i) c += (*this)(i, t);
        return static_cast<double>(c) / static_cast<double>(n_);
    }

    // Treatment means for every period 0..T.
    std::vector<double> column_means() const {
        std::vector<double> p(t_ + 1);
        for (std::size_t t = 0; t <= t_; ++t) p[t] = column_mean(t);
        return p;
    }

    const std::vector<std::uint8_t>& raw() const { return w_; }

    bool same_shape(const TreatmentMatrix& o) const { return n_ == o.n_ && t_ == o.t_; }

    void check_t(std::size_t t) const {
        if (t > t_) throw IndexError("TreatmentMatrix: period index out of range");
    }

    static TreatmentMatrix all_level(std::size_t n_units, std::size_t horizon, bool treated) {
        TreatmentMatrix m(n_units, horizon);
        if (treated)
            for (std::size_t i = 0; i < n_units; ++i)
                for (std::size_t t = 1; t <= horizon; ++t) m.set(i, t, true);
        return m;
    }

private:
    std::size_t n_, t_;
    std::vector<std::uint8_t> w_;
};

// Real-valued outcomes aligned with a TreatmentMatrix, N x (T+1).
class OutcomePanel {
public:
    OutcomePanel(std::size_t n_units, std::size_t horizon, double fill = 0.0)
        : n_(n_units), t_(horizon), y_(n_units * (horizon + 1), fill) {
        if (n_ == 0 || t_ == 0) throw ConfigError("OutcomePanel: n_units and horizon must be positive");
    }

    std::size_t n_units() const { return n_; }
    std::size_t horizon() const { return t_; }
    std::size_t n_periods() const { return t_ + 1; }

    double operator()(std::size_t unit, std::size_t t) const { return y_[unit * (t_ + 1) + t]; }
    double& operator()(std::size_t unit, std::size_t t) { return y_[unit * (t_ + 1) + t]; }

    double column_mean(std::size_t t) const {
        check_t(t);
        double s = 0.0;
        for (std::size_t i = 0; i < n_; ++i) s += (*this)(i, t);
        return s / static_cast<double>(n_);
    }

    std::vector<double> column_means() const {
        std::vector<double> m(t_ + 1);
        for (std::size_t t = 0; t <= t_; ++t) m[t] = column_mean(t);
        return m;
    }

    void validate_finite() const {
        for (double v : y_)
            if (!std::isfinite(v)) throw ContractError("OutcomePanel: non-finite entry");
    }

    bool same_shape(const OutcomePanel& o) const { return n_ == o.n_ && t_ == o.t_; }
    bool same_shape(const TreatmentMatrix& w) const { return n_ == w.n_units() && t_ == w.horizon(); }

    const std::vector<double>& raw() const { return y_; }
    std::vector<double>& raw() { return y_; }

    void check_t(std::size_t t) const {
        if (t > t_) throw IndexError("OutcomePanel: period index out of range");
    }

private:
    std::size_t n_, t_;
    std::vector<double> y_;
};

// Staged rollout: per-stage Bernoulli probabilities over consecutive period
// blocks. With monotone_rollout, a treated unit stays treated afterwards.
struct ExperimentDesign {
    std::vector<std::size_t> stage_lengths;
    std::vector<double> stage_probs;
    bool monotone_rollout = false;

    std::size_t total_horizon() const {
        return std::accumulate(stage_lengths.begin(), stage_lengths.end(), std::size_t{0});
    }

    void validate() const {
        if (stage_lengths.empty()) throw ConfigError("ExperimentDesign: no stages");
        if (stage_lengths.size() != stage_probs.size())
            throw ConfigError("ExperimentDesign: stage_lengths and stage_probs length mismatch");
        for (std::size_t len : stage_lengths)
            if (len == 0) throw ConfigError("ExperimentDesign: stage length must be positive");
        for (double p : stage_probs)
            if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("ExperimentDesign: probability outside [0,1]");
    }

    // Marginal treatment probability at period t (t = 1..T); p_0 = 0.
    double prob_at(std::size_t t) const {
        if (t == 0) return 0.0;
        std::size_t upto = 0;
        for (std::size_t k = 0; k < stage_lengths.size(); ++k) {
            upto += stage_lengths[k];
            if (t <= upto) return stage_probs[k];
        }
        throw IndexError("ExperimentDesign: period beyond design horizon");
    }

    std::vector<double> probs_per_period() const {
        const std::size_t T = total_horizon();
        std::vector<double> p(T + 1, 0.0);
        for (std::size_t t = 1; t <= T; ++t) p[t] = prob_at(t);
        return p;
    }
};

// Index subset of units. Indices are kept sorted and unique.
struct Batch {
    std::vector<std::uint32_t> indices;

    Batch() = default;
    explicit Batch(std::vector<std::uint32_t> idx) : indices(std::move(idx)) {
        std::sort(indices.begin(), indices.end());
        indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
    }

    static Batch full(std::size_t n) {
        Batch b;
        b.indices.resize(n);
        std::iota(b.indices.begin(), b.indices.end(), 0u);
        return b;
    }

    std::size_t size() const { return indices.size(); }

    void validate(std::size_t n_units) const {
        if (indices.empty()) throw ContractError("Batch: empty");
        for (auto i : indices)
            if (i >= n_units) throw ContractError("Batch: unit index out of range");
    }
};

inline TreatmentMatrix generate_staggered_design(std::size_t n_units,
                                                 const ExperimentDesign& design,
                                                 std::uint64_t seed) {
    design.validate();
    if (n_units < 1) throw ConfigError("generate_staggered_design: n_units must be >= 1");
    const std::size_t T = design.total_horizon();
    TreatmentMatrix w(n_units, T);
    Rng rng(derive_seed(seed, "treatment"));
    for (std::size_t i = 0; i < n_units; ++i) {
        bool adopted = false;
        for (std::size_t t = 1; t <= T; ++t) {
            bool on = rng.bernoulli(design.prob_at(t));
            if (design.monotone_rollout) {
                adopted = adopted || on;
                on = adopted;
            }
            w.set(i, t, on);
        }
    }
    return w;
}

inline double batch_mean(const OutcomePanel& panel, const Batch& batch, std::size_t t) {
    panel.check_t(t);
    batch.validate(panel.n_units());
    double s = 0.0;
    for (auto i : batch.indices) s += panel(i, t);
    return s / static_cast<double>(batch.size());
}

inline std::vector<double> batch_mean_series(const OutcomePanel& panel, const Batch& batch) {
    batch.validate(panel.n_units());
    std::vector<double> m(panel.n_periods(), 0.0);
    for (auto i : batch.indices)
        for (std::size_t t = 0; t < m.size(); ++t) m[t] += panel(i, t);
    for (auto& v : m) v /= static_cast<double>(batch.size());
    return m;
}

// Mean treatment over a batch at period t.
inline double batch_treat_mean(const TreatmentMatrix& w, const Batch& batch, std::size_t t) {
    w.check_t(t);
    batch.validate(w.n_units());
    double s = 0.0;
    for (auto i : batch.indices) s += w(i, t);
    return s / static_cast<double>(batch.size());
}

inline std::vector<double> batch_treat_mean_series(const TreatmentMatrix& w, const Batch& batch) {
    batch.validate(w.n_units());
    std::vector<double> m(w.n_periods(), 0.0);
    for (auto i : batch.indices)
        for (std::size_t t = 0; t < m.size(); ++t) m[t] += w(i, t);
    for (auto& v : m) v /= static_cast<double>(batch.size());
    return m;
}

// Average total treatment effect over the terminal window of L periods.
inline double compute_tte(const OutcomePanel& panel_all_treat,
                          const OutcomePanel& panel_all_control, std::size_t L) {
    if (!panel_all_treat.same_shape(panel_all_control))
        throw ContractError("compute_tte: panel shapes differ");
    const std::size_t T = panel_all_treat.horizon();
    if (L < 1 || L > T) throw ContractError("compute_tte: window L must satisfy 1 <= L <= T");
    const std::size_t n = panel_all_treat.n_units();
    double s = 0.0;
    for (std::size_t t = T - L + 1; t <= T; ++t)
        for (std::size_t i = 0; i < n; ++i)
            s += panel_all_treat(i, t) - panel_all_control(i, t);
    return s / (static_cast<double>(L) * static_cast<double>(n));
}

// TTE from two mean series instead of unit panels.
inline double series_tte(const std::vector<double>& treat_means,
                         const std::vector<double>& control_means, std::size_t L) {
    if (treat_means.size() != control_means.size())
        throw ContractError("series_tte: series lengths differ");
    const std::size_t T = treat_means.size() - 1;
    if (L < 1 || L > T) throw ContractError("series_tte: bad window");
    double s = 0.0;
    for (std::size_t t = T - L + 1; t <= T; ++t) s += treat_means[t] - control_means[t];
    return s / static_cast<double>(L);
}

// Fraction of periods 1..T in which the unit is treated. Column 0 is excluded
// because it is forced all-control.
inline double treatment_exposure(const TreatmentMatrix& w, std::size_t unit) {
    if (unit >= w.n_units()) throw IndexError("treatment_exposure: unit out of range");
    std::size_t c = 0;
    for (std::size_t t = 1; t <= w.horizon(); ++t) c += w(unit, t);
    return static_cast<double>(c) / static_cast<double>(w.horizon());
}

inline std::vector<double> exposure_all(const TreatmentMatrix& w) {
    std::vector<double> e(w.n_units());
    for (std::size_t i = 0; i < w.n_units(); ++i) e[i] = treatment_exposure(w, i);
    return e;
}

} // namespace netcf
