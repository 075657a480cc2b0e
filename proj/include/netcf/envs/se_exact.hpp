#pragma once

#include "netcf/core.hpp"
#include "netcf/errors.hpp"
#include "netcf/rng.hpp"

#include <cstdint>
#include <vector>

namespace netcf {

// Mean-field environment whose population and batch means satisfy the linear
// state-evolution regression exactly (no cross terms, optional noise):
//   y_{t+1}^i = b_g + sum_j c_g[j-1] ybar_{t+1-j} + d_g pbar_{t+1}
//             + b_h + sum_j c_h[j-1] y^i_{t+1-j}  + d_h w^i_{t+1} + eps
// c_*[0] multiplies the most recent lag.
struct SeExactSpec {
    double b_g = 0.0;
    std::vector<double> c_g; // population-lag coefficients, lag 1 first
    double d_g = 0.0;
    double b_h = 0.0;
    std::vector<double> c_h; // own-lag coefficients, lag 1 first
    double d_h = 0.0;
    double y0_mean = 0.0;
    double y0_sd = 0.0;
    double noise_sd = 0.0;

    std::size_t lag() const { return std::max(c_g.size(), c_h.size()); }

    void validate() const {
        if (y0_sd < 0.0 || noise_sd < 0.0)
            throw ConfigError("SeExactSpec: dispersion parameters must be >= 0");
    }
};

class SeExactEnv {
public:
    SeExactEnv(SeExactSpec spec, std::size_t n_units, std::size_t horizon, std::uint64_t world_seed)
        : spec_(std::move(spec)), n_(n_units), t_(horizon), seed_(world_seed) {
        spec_.validate();
        y0_.resize(n_);
        Rng init(derive_seed(seed_, "world-init"));
        for (auto& v : y0_) v = init.normal(spec_.y0_mean, spec_.y0_sd);
    }

    std::size_t n_units() const { return n_; }
    std::size_t horizon() const { return t_; }
    const SeExactSpec& spec() const { return spec_; }

    OutcomePanel simulate(const TreatmentMatrix& w) const {
        if (w.n_units() != n_ || w.horizon() != t_)
            throw ContractError("SeExactEnv: treatment matrix shape mismatch");
        OutcomePanel panel(n_, t_);
        for (std::size_t i = 0; i < n_; ++i) panel(i, 0) = y0_[i];
        std::vector<double> pop_means(t_ + 1, 0.0);
        pop_means[0] = panel.column_mean(0);
        for (std::size_t t = 0; t < t_; ++t) {
            const double p_next = w.column_mean(t + 1);
            double base = spec_.b_g + spec_.b_h + spec_.d_g * p_next;
            for (std::size_t j = 0; j < spec_.c_g.size() && j <= t; ++j)
                base += spec_.c_g[j] * pop_means[t - j];
            Rng noise(derive_seed(seed_, "noise", t));
            double colsum = 0.0;
            for (std::size_t i = 0; i < n_; ++i) {
                double v = base + spec_.d_h * w(i, t + 1);
                for (std::size_t j = 0; j < spec_.c_h.size() && j <= t; ++j)
                    v += spec_.c_h[j] * panel(i, t - j);
                if (spec_.noise_sd > 0.0) v += noise.normal(0.0, spec_.noise_sd);
                panel(i, t + 1) = v;
                colsum += v;
            }
            pop_means[t + 1] = colsum / static_cast<double>(n_);
        }
        return panel;
    }

private:
    SeExactSpec spec_;
    std::size_t n_, t_;
    std::uint64_t seed_;
    std::vector<double> y0_;
};

} // namespace netcf
