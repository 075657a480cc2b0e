#pragma once

#include "netcf/core.hpp"
#include "netcf/errors.hpp"
#include "netcf/graph.hpp"
#include "netcf/rng.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace netcf {

// Adoption probability of the promoted opinion given the neighbor split and
// the relative payoff advantage h.
inline double belief_adoption_prob(double n_a, double n_b, double n, double h, double beta) {
    if (beta < 0.0) throw ContractError("belief_adoption_prob: beta must be >= 0");
    if (n_a + n_b > n + 1e-9) throw ContractError("belief_adoption_prob: nA + nB exceeds n");
    const double z = 2.0 * beta * (n * h + n_a - n_b);
    return 1.0 / (1.0 + std::exp(-z));
}

// Opinion diffusion by coordination games on a social graph. Units carry
// synthetic age/activity covariates that shape base payoffs and treatment
// responsiveness: civic-age units favor the promoted opinion, responsiveness
// peaks near age 35 and scales with profile activity.
struct BeliefSpec {
    GraphSpec graph;
    double beta = 0.4;
    double payoff_base_a = 1.0;
    double payoff_base_b = 1.0;
    double civic_age_bonus = 0.25;    // added to payoff A for ages 25..55
    double activity_bonus = 0.3;      // times activity, added to payoff A
    double payoff_noise_sd = 0.1;
    double treat_effect_scale = 0.6;  // Gaussian bump at age 35
    double treat_age_sd = 12.0;
    double treat_activity_floor = 0.25;
    double init_adoption = 0.4; // keeps the coordination cascade interior

    void validate() const {
        if (beta < 0.0) throw ConfigError("BeliefSpec: beta must be >= 0");
        if (!(init_adoption >= 0.0 && init_adoption <= 1.0))
            throw ConfigError("BeliefSpec: init_adoption outside [0,1]");
    }
};

class BeliefEnv {
public:
    BeliefEnv(BeliefSpec spec, std::size_t n_units, std::size_t horizon, std::uint64_t world_seed)
        : spec_(std::move(spec)), n_(n_units), t_(horizon), seed_(world_seed),
          graph_(make_graph(n_units, with_seed(spec_.graph, world_seed))) {
        spec_.validate();
        Rng people(derive_seed(seed_, "world-people"));
        payoff_a_.resize(n_);
        payoff_b_.resize(n_);
        treat_effect_.resize(n_);
        y0_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            const double age = people.uniform(18.0, 75.0);
            const double activity = people.uniform01();
            double pa = spec_.payoff_base_a + spec_.activity_bonus * activity +
                        (age >= 25.0 && age <= 55.0 ? spec_.civic_age_bonus : 0.0) +
                        people.normal(0.0, spec_.payoff_noise_sd);
            double pb = spec_.payoff_base_b + people.normal(0.0, spec_.payoff_noise_sd);
            payoff_a_[i] = std::max(0.05, pa);
            payoff_b_[i] = std::max(0.05, pb);
            const double da = age - 35.0;
            treat_effect_[i] = spec_.treat_effect_scale *
                               std::exp(-da * da / (2.0 * spec_.treat_age_sd * spec_.treat_age_sd)) *
                               (spec_.treat_activity_floor + activity);
            y0_[i] = people.bernoulli(spec_.init_adoption) ? 1.0 : 0.0;
        }
    }

    std::size_t n_units() const { return n_; }
    std::size_t horizon() const { return t_; }

    OutcomePanel simulate(const TreatmentMatrix& w) const {
        if (w.n_units() != n_ || w.horizon() != t_)
            throw ContractError("BeliefEnv: treatment matrix shape mismatch");
        OutcomePanel panel(n_, t_);
        std::vector<double> y = y0_;
        for (std::size_t i = 0; i < n_; ++i) panel(i, 0) = y[i];
        std::vector<double> ynext(n_);
        for (std::size_t t = 0; t < t_; ++t) {
            Rng noise(derive_seed(seed_, "noise", t));
            for (std::size_t i = 0; i < n_; ++i) {
                const auto& nb = graph_.neighbors(i);
                double n_a = 0.0;
                for (auto j : nb) n_a += y[j];
                const double n_tot = static_cast<double>(nb.size());
                const double n_b = n_tot - n_a;
                const double pa = payoff_a_[i] + (w(i, t + 1) ? treat_effect_[i] : 0.0);
                const double h = (pa - payoff_b_[i]) / (pa + payoff_b_[i]);
                const double p = belief_adoption_prob(n_a, n_b, n_tot, h, spec_.beta);
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

    BeliefSpec spec_;
    std::size_t n_, t_;
    std::uint64_t seed_;
    Graph graph_;
    std::vector<double> payoff_a_, payoff_b_, treat_effect_, y0_;
};

} // namespace netcf
