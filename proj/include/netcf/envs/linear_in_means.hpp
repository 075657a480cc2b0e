#pragma once

#include "netcf/core.hpp"
#include "netcf/errors.hpp"
#include "netcf/graph.hpp"
#include "netcf/rng.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace netcf {

// One unit's linear-in-means transition. `weighted_neighbor_outcome` is
// sum_j A^{ij} y^j_t and `row_weight_sum` is sum_j A^{ij} (1 for connected
// units under row normalization, 0 for isolated ones).
inline double lim_step(double baseline_next, double own_baseline_t,
                       double weighted_neighbor_outcome, double row_weight_sum,
                       double weighted_neighbor_treat, double w_own,
                       double gamma, double delta_p, double delta_u_i) {
    return baseline_next +
           gamma * (weighted_neighbor_outcome - row_weight_sum * own_baseline_t) +
           delta_p * weighted_neighbor_treat + delta_u_i * w_own;
}

// Spillover dynamics on a row-stochastic adjacency matrix around a seasonal
// baseline panel (sinusoid plus noise, per-unit levels).
struct LimSpec {
    GraphSpec graph;
    double gamma = 0.4;
    double delta_p = 0.2;
    double delta_u_mean = 0.3;   // per-unit direct effects, Gaussian truncated at 0
    double delta_u_sd = 0.15;
    double base_level_mean = 10.0;
    double base_level_sd = 2.0;
    double season_amplitude = 2.0;
    double season_period = 28.0;
    double base_noise_sd = 0.5;

    void validate() const {
        if (season_period <= 0.0) throw ConfigError("LimSpec: season_period must be > 0");
        if (delta_u_sd < 0.0 || base_level_sd < 0.0 || base_noise_sd < 0.0)
            throw ConfigError("LimSpec: dispersion parameters must be >= 0");
    }
};

class LimEnv {
public:
    LimEnv(LimSpec spec, std::size_t n_units, std::size_t horizon, std::uint64_t world_seed)
        : spec_(std::move(spec)), n_(n_units), t_(horizon), seed_(world_seed),
          graph_(make_graph(n_units, with_seed(spec_.graph, world_seed))) {
        spec_.validate();
        Rng people(derive_seed(seed_, "world-people"));
        delta_u_.resize(n_);
        level_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            delta_u_[i] = people.truncated_normal(spec_.delta_u_mean, spec_.delta_u_sd, 0.0);
            level_[i] = people.normal(spec_.base_level_mean, spec_.base_level_sd);
        }
        baseline_ = OutcomePanel(n_, t_);
        Rng bnoise(derive_seed(seed_, "world-baseline"));
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t tt = 0; tt <= t_; ++tt) {
                const double season = spec_.season_amplitude *
                    std::sin(2.0 * std::numbers::pi * static_cast<double>(tt) / spec_.season_period);
                baseline_(i, tt) = level_[i] + season + bnoise.normal(0.0, spec_.base_noise_sd);
            }
    }

    std::size_t n_units() const { return n_; }
    std::size_t horizon() const { return t_; }
    const OutcomePanel& baseline() const { return baseline_; }

    OutcomePanel simulate(const TreatmentMatrix& w) const {
        if (w.n_units() != n_ || w.horizon() != t_)
            throw ContractError("LimEnv: treatment matrix shape mismatch");
        OutcomePanel panel(n_, t_);
        std::vector<double> y(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            y[i] = baseline_(i, 0);
            panel(i, 0) = y[i];
        }
        std::vector<double> ynext(n_);
        for (std::size_t t = 0; t < t_; ++t) {
            for (std::size_t i = 0; i < n_; ++i) {
                const auto& nb = graph_.neighbors(i);
                double wy = 0.0, ww = 0.0, rowsum = 0.0;
                if (!nb.empty()) {
                    const double a = 1.0 / static_cast<double>(nb.size());
                    for (auto j : nb) {
                        wy += a * y[j];
                        ww += a * w(j, t + 1);
                    }
                    rowsum = 1.0;
                }
                ynext[i] = lim_step(baseline_(i, t + 1), baseline_(i, t), wy, rowsum, ww,
                                    w(i, t + 1), spec_.gamma, spec_.delta_p, delta_u_[i]);
            }
            y = ynext;
            for (std::size_t i = 0; i < n_; ++i) panel(i, t + 1) = y[i];
        }
        return panel;
    }

private:
    static GraphSpec with_seed(GraphSpec g, std::uint64_t seed) {
        g.seed = derive_seed(seed, "world-graph");
        return g;
    }

    LimSpec spec_;
    std::size_t n_, t_;
    std::uint64_t seed_;
    Graph graph_;
    std::vector<double> delta_u_, level_;
    OutcomePanel baseline_{1, 1};
};

} // namespace netcf
