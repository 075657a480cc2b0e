#pragma once

#include "netcf/core.hpp"
#include "netcf/errors.hpp"
#include "netcf/graph.hpp"
#include "netcf/rng.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace netcf {

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Exercise decision probability: baseline score, message effect, peer count
// reinforcement, treated peer interaction, and a penalty on neighbor-behavior
// variance.
inline double exercise_prob(double alpha_ti, double tau_ti, double w, double y_prev,
                            double z_count, double v_var, double c, double e, double eta) {
    if (z_count < 0.0) throw ContractError("exercise_prob: neighbor count must be >= 0");
    if (v_var < 0.0) throw ContractError("exercise_prob: neighbor variance must be >= 0");
    return logistic(alpha_ti + tau_ti * w + c * y_prev * z_count + e * w * y_prev * z_count -
                    eta * v_var);
}

// Digital encouragement program: binary exercise decisions with peer
// influence on a social graph and weekly propensity cycles.
struct ExerciseSpec {
    GraphSpec graph;
    double c = 0.04;
    double e = 0.01;
    double eta = 0.02;
    double alpha_mean = -0.5;
    double alpha_sd = 0.4;
    double alpha_weekly_amp = 0.3;
    double tau_mean = 0.8;
    double tau_sd = 0.25;
    double tau_weekly_amp = 0.2;
    double init_prob = 0.4;

    void validate() const {
        if (!(init_prob >= 0.0 && init_prob <= 1.0))
            throw ConfigError("ExerciseSpec: init_prob outside [0,1]");
        if (alpha_sd < 0.0 || tau_sd < 0.0)
            throw ConfigError("ExerciseSpec: dispersion parameters must be >= 0");
    }
};

class ExerciseEnv {
public:
    // weekend highs, Monday bump, mid-week plateau, Friday dip
    static constexpr std::array<double, 7> weekday_profile{0.5, 0.0, 0.0, 0.0, -0.3, 1.0, 1.0};

    ExerciseEnv(ExerciseSpec spec, std::size_t n_units, std::size_t horizon, std::uint64_t world_seed)
        : spec_(std::move(spec)), n_(n_units), t_(horizon), seed_(world_seed),
          graph_(make_graph(n_units, with_seed(spec_.graph, world_seed))) {
        spec_.validate();
        Rng people(derive_seed(seed_, "world-people"));
        alpha_.resize(n_);
        tau_.resize(n_);
        y0_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            alpha_[i] = people.normal(spec_.alpha_mean, spec_.alpha_sd);
            tau_[i] = people.truncated_normal(spec_.tau_mean, spec_.tau_sd, 0.0);
            y0_[i] = people.bernoulli(spec_.init_prob) ? 1.0 : 0.0;
        }
    }

    std::size_t n_units() const { return n_; }
    std::size_t horizon() const { return t_; }

    double alpha_at(std::size_t unit, std::size_t t) const {
        return alpha_[unit] + spec_.alpha_weekly_amp * weekday_profile[t % 7];
    }
    double tau_at(std::size_t unit, std::size_t t) const {
        return tau_[unit] * (1.0 + spec_.tau_weekly_amp * weekday_profile[t % 7]);
    }

    OutcomePanel simulate(const TreatmentMatrix& w) const {
        if (w.n_units() != n_ || w.horizon() != t_)
            throw ContractError("ExerciseEnv: treatment matrix shape mismatch");
        OutcomePanel panel(n_, t_);
        std::vector<double> y = y0_;
        for (std::size_t i = 0; i < n_; ++i) panel(i, 0) = y[i];
        std::vector<double> ynext(n_);
        for (std::size_t t = 0; t < t_; ++t) {
            Rng noise(derive_seed(seed_, "noise", t));
            for (std::size_t i = 0; i < n_; ++i) {
                const auto& nb = graph_.neighbors(i);
                double z = 0.0;
                for (auto j : nb) z += y[j];
                double v = 0.0;
                if (!nb.empty()) {
                    const double q = z / static_cast<double>(nb.size());
                    v = q * (1.0 - q); // empirical variance of binary neighbor outcomes
                }
                const double p = exercise_prob(alpha_at(i, t + 1), tau_at(i, t + 1),
                                               w(i, t + 1), y[i], z, v,
                                               spec_.c, spec_.e, spec_.eta);
                ynext[i] = noise.uniform01() < p ? 1.0 : 0.0;
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

    ExerciseSpec spec_;
    std::size_t n_, t_;
    std::uint64_t seed_;
    Graph graph_;
    std::vector<double> alpha_, tau_, y0_;
};

} // namespace netcf
