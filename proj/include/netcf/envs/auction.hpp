#pragma once

#include "netcf/core.hpp"
#include "netcf/errors.hpp"
#include "netcf/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace netcf {

struct AuctionOutcome {
    std::vector<std::int32_t> assignment; // bidder -> object
    std::vector<double> prices;           // per object
};

// Forward epsilon-auction: repeatedly let an unassigned bidder outbid the
// current holder of its best-margin object. Terminates in an assignment where
// every bidder is within epsilon of its best margin; prices never decrease.
inline AuctionOutcome auction_round(const std::vector<std::vector<double>>& valuations,
                                    std::vector<double> prices, double epsilon) {
    const std::size_t n = valuations.size();
    if (n == 0) throw ContractError("auction_round: empty valuation matrix");
    for (const auto& row : valuations) {
        if (row.size() != n) throw ContractError("auction_round: valuation matrix must be square");
        for (double v : row)
            if (!std::isfinite(v)) throw ContractError("auction_round: non-finite valuation");
    }
    if (epsilon <= 0.0) throw ConfigError("auction_round: epsilon must be > 0");
    if (prices.size() != n) throw ContractError("auction_round: price vector length mismatch");

    AuctionOutcome out;
    out.assignment.assign(n, -1);
    out.prices = std::move(prices);
    std::vector<std::int32_t> owner(n, -1); // object -> bidder

    std::vector<std::uint32_t> unassigned(n);
    for (std::uint32_t i = 0; i < n; ++i) unassigned[i] = i;

    const std::size_t max_iters = 16 + n * n * 64 +
        static_cast<std::size_t>(std::min<double>(1e9, 4.0 * n / epsilon *
            [&] {
                double span = 0.0;
                for (const auto& row : valuations)
                    for (double v : row) span = std::max(span, std::abs(v));
                return span + 1.0;
            }()));
    std::size_t iters = 0;
    while (!unassigned.empty()) {
        if (++iters > max_iters) throw EstimatorError("auction_round: failed to terminate");
        const std::uint32_t i = unassigned.back();
        unassigned.pop_back();

        double best = -std::numeric_limits<double>::infinity();
        double second = -std::numeric_limits<double>::infinity();
        std::size_t best_j = 0;
        for (std::size_t j = 0; j < n; ++j) {
            const double margin = valuations[i][j] - out.prices[j];
            if (margin > best) {
                second = best;
                best = margin;
                best_j = j;
            } else if (margin > second) {
                second = margin;
            }
        }
        if (!std::isfinite(second)) second = best; // single object: pay only epsilon
        out.prices[best_j] += best - second + epsilon;

        if (owner[best_j] >= 0) {
            out.assignment[owner[best_j]] = -1;
            unassigned.push_back(static_cast<std::uint32_t>(owner[best_j]));
        }
        owner[best_j] = static_cast<std::int32_t>(i);
        out.assignment[i] = static_cast<std::int32_t>(best_j);
    }
    return out;
}

// Auction market over N objects and N bidders. Bidder types differ in level
// and dispersion of their valuations; treatment lifts the valuations of the
// selected objects by tau percent for every bidder. Outcome = realized value
// of each object (the winning bidder's valuation).
struct AuctionSpec {
    double tau_percent = 10.0;
    double epsilon = 0.01;
    double base_value_mean = 100.0;
    double base_value_sd = 10.0;
    double bidder_noise_sd = 6.0;
    std::array<double, 4> type_mean_mult{1.0, 1.15, 0.9, 1.1};  // standard, collector, dealer, investor
    std::array<double, 4> type_sd_mult{1.0, 1.8, 0.5, 1.5};
    double price_carry = 0.0; // starting prices as a fraction of last period's

    void validate() const {
        if (epsilon <= 0.0) throw ConfigError("AuctionSpec: epsilon must be > 0");
        if (base_value_sd < 0.0 || bidder_noise_sd < 0.0)
            throw ConfigError("AuctionSpec: dispersion parameters must be >= 0");
        if (!(price_carry >= 0.0 && price_carry <= 1.0))
            throw ConfigError("AuctionSpec: price_carry outside [0,1]");
    }
};

class AuctionEnv {
public:
    AuctionEnv(AuctionSpec spec, std::size_t n_units, std::size_t horizon, std::uint64_t world_seed)
        : spec_(std::move(spec)), n_(n_units), t_(horizon), seed_(world_seed) {
        spec_.validate();
        Rng world(derive_seed(seed_, "world-objects"));
        base_value_.resize(n_);
        for (auto& v : base_value_) v = std::max(1.0, world.normal(spec_.base_value_mean, spec_.base_value_sd));
    }

    std::size_t n_units() const { return n_; }
    std::size_t horizon() const { return t_; }

    std::vector<std::vector<double>> valuations_at(std::size_t t, const TreatmentMatrix& w) const {
        Rng vr(derive_seed(seed_, "valuations", t));
        std::vector<std::vector<double>> v(n_, std::vector<double>(n_));
        for (std::size_t i = 0; i < n_; ++i) {
            const std::size_t ty = i % 4;
            for (std::size_t j = 0; j < n_; ++j) {
                double val = base_value_[j] * spec_.type_mean_mult[ty] +
                             spec_.type_sd_mult[ty] * spec_.bidder_noise_sd * vr.normal();
                val = std::max(0.0, val);
                if (t >= 1 && w(j, t))
                    val *= 1.0 + spec_.tau_percent / 100.0;
                v[i][j] = val;
            }
        }
        return v;
    }

    OutcomePanel simulate(const TreatmentMatrix& w) const {
        if (w.n_units() != n_ || w.horizon() != t_)
            throw ContractError("AuctionEnv: treatment matrix shape mismatch");
        OutcomePanel panel(n_, t_);
        std::vector<double> prices(n_, 0.0);
        for (std::size_t t = 0; t <= t_; ++t) {
            const auto v = valuations_at(t, w);
            const auto res = auction_round(v, prices, spec_.epsilon);
            for (std::size_t j = 0; j < n_; ++j) {
                std::int32_t winner = -1;
                for (std::size_t i = 0; i < n_; ++i)
                    if (res.assignment[i] == static_cast<std::int32_t>(j)) {
                        winner = static_cast<std::int32_t>(i);
                        break;
                    }
                panel(j, t) = winner >= 0 ? v[static_cast<std::size_t>(winner)][j] : 0.0;
            }
            prices.assign(n_, 0.0);
            if (spec_.price_carry > 0.0)
                for (std::size_t j = 0; j < n_; ++j) prices[j] = spec_.price_carry * res.prices[j];
        }
        return panel;
    }

private:
    AuctionSpec spec_;
    std::size_t n_, t_;
    std::uint64_t seed_;
    std::vector<double> base_value_;
};

} // namespace netcf
