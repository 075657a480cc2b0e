#pragma once

#include "netcf/core.hpp"
#include "netcf/envs/auction.hpp"
#include "netcf/envs/belief.hpp"
#include "netcf/envs/datacenter.hpp"
#include "netcf/envs/exercise.hpp"
#include "netcf/envs/gaussian.hpp"
#include "netcf/envs/linear_in_means.hpp"
#include "netcf/envs/se_exact.hpp"
#include "netcf/errors.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <variant>

namespace netcf {

enum class EnvKind { Gaussian, SeExact, Belief, LinearInMeans, Exercise, DataCenter, Auction };

inline EnvKind env_kind_from_string(const std::string& s) {
    if (s == "gaussian") return EnvKind::Gaussian;
    if (s == "se-exact") return EnvKind::SeExact;
    if (s == "belief") return EnvKind::Belief;
    if (s == "linear-in-means") return EnvKind::LinearInMeans;
    if (s == "exercise") return EnvKind::Exercise;
    if (s == "datacenter") return EnvKind::DataCenter;
    if (s == "auction") return EnvKind::Auction;
    throw ConfigError("unknown environment kind: " + s);
}

inline std::string to_string(EnvKind k) {
    switch (k) {
        case EnvKind::Gaussian: return "gaussian";
        case EnvKind::SeExact: return "se-exact";
        case EnvKind::Belief: return "belief";
        case EnvKind::LinearInMeans: return "linear-in-means";
        case EnvKind::Exercise: return "exercise";
        case EnvKind::DataCenter: return "datacenter";
        case EnvKind::Auction: return "auction";
    }
    return "?";
}

// Environment configuration with a kind discriminator; only the spec matching
// the kind is read.
struct EnvConfig {
    EnvKind kind = EnvKind::Gaussian;
    std::size_t n_units = 100;
    std::size_t horizon = 8;
    std::uint64_t seed = 0;
    GaussianSpec gaussian;
    SeExactSpec se_exact;
    BeliefSpec belief;
    LimSpec lim;
    ExerciseSpec exercise;
    DataCenterSpec datacenter;
    AuctionSpec auction;

    EnvConfig with_seed(std::uint64_t s) const {
        EnvConfig c = *this;
        c.seed = s;
        return c;
    }
};

// One frozen world. Construction performs all world-level draws, so repeated
// simulate() calls share common random numbers.
class Env {
public:
    explicit Env(const EnvConfig& cfg) : world_(make(cfg)) {}

    OutcomePanel simulate(const TreatmentMatrix& w) const {
        return std::visit([&](const auto& env) { return env.simulate(w); }, world_);
    }

private:
    using World = std::variant<GaussianEnv, SeExactEnv, BeliefEnv, LimEnv, ExerciseEnv,
                               DataCenterEnv, AuctionEnv>;

    static World make(const EnvConfig& c) {
        switch (c.kind) {
            case EnvKind::Gaussian: return GaussianEnv(c.gaussian, c.n_units, c.horizon, c.seed);
            case EnvKind::SeExact: return SeExactEnv(c.se_exact, c.n_units, c.horizon, c.seed);
            case EnvKind::Belief: return BeliefEnv(c.belief, c.n_units, c.horizon, c.seed);
            case EnvKind::LinearInMeans: return LimEnv(c.lim, c.n_units, c.horizon, c.seed);
            case EnvKind::Exercise: return ExerciseEnv(c.exercise, c.n_units, c.horizon, c.seed);
            case EnvKind::DataCenter: return DataCenterEnv(c.datacenter, c.n_units, c.horizon, c.seed);
            case EnvKind::Auction: return AuctionEnv(c.auction, c.n_units, c.horizon, c.seed);
        }
        throw ConfigError("Env: unknown environment kind");
    }

    World world_;
};

inline OutcomePanel simulate(const EnvConfig& cfg, const TreatmentMatrix& w) {
    if (w.n_units() != cfg.n_units || w.horizon() != cfg.horizon)
        throw ContractError("simulate: treatment matrix does not match env config shape");
    return Env(cfg).simulate(w);
}

// Observed/alternative panels from one frozen world (common random numbers).
inline std::pair<OutcomePanel, OutcomePanel>
ground_truth_pair(const EnvConfig& cfg, const TreatmentMatrix& w_obs, const TreatmentMatrix& w_alt) {
    if (!w_obs.same_shape(w_alt))
        throw ContractError("ground_truth_pair: treatment matrices differ in shape");
    for (std::size_t i = 0; i < w_obs.n_units(); ++i)
        if (w_obs(i, 0) != w_alt(i, 0))
            throw ContractError("ground_truth_pair: column 0 must match");
    if (w_obs.n_units() != cfg.n_units || w_obs.horizon() != cfg.horizon)
        throw ContractError("ground_truth_pair: treatment shape does not match env config");
    Env env(cfg);
    return {env.simulate(w_obs), env.simulate(w_alt)};
}

} // namespace netcf
