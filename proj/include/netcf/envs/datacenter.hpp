#pragma once

#include "netcf/core.hpp"
#include "netcf/errors.hpp"
#include "netcf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <queue>
#include <vector>

namespace netcf {

// Samples min(sample_size, |capable|) distinct capable servers and returns one
// with the shortest queue; ties are broken uniformly at random. Consumes a
// fixed number of draws per call so parallel scenario runs stay aligned.
inline std::uint32_t jsq_assign(const std::vector<std::uint32_t>& queue_lengths,
                                const std::vector<std::uint32_t>& capable,
                                std::size_t sample_size, Rng& rng) {
    if (capable.empty()) throw RoutingError("jsq_assign: no capable server for task");
    const std::size_t m = std::min(sample_size, capable.size());

    // draw m distinct positions without copying the capable set
    std::vector<std::uint32_t> picked;
    picked.reserve(m);
    for (std::size_t k = 0; k < m; ++k) {
        auto r = static_cast<std::uint32_t>(rng.uniform01() * static_cast<double>(capable.size() - k));
        if (r >= capable.size() - k) r = static_cast<std::uint32_t>(capable.size() - k - 1);
        std::uint32_t pos = r;
        std::vector<std::uint32_t> sorted = picked;
        std::sort(sorted.begin(), sorted.end());
        for (auto p : sorted)
            if (pos >= p) ++pos;
        picked.push_back(pos);
    }

    std::uint32_t best = capable[picked[0]];
    std::uint32_t best_len = queue_lengths[best];
    std::size_t ties = 1;
    std::vector<std::uint32_t> tied{best};
    for (std::size_t k = 1; k < m; ++k) {
        const std::uint32_t s = capable[picked[k]];
        if (queue_lengths[s] < best_len) {
            best = s;
            best_len = queue_lengths[s];
            tied.assign(1, s);
            ties = 1;
        } else if (queue_lengths[s] == best_len) {
            tied.push_back(s);
            ++ties;
        }
    }
    const double u = rng.uniform01(); // always one tie-break draw
    if (ties > 1) {
        auto idx = static_cast<std::size_t>(u * static_cast<double>(ties));
        if (idx >= ties) idx = ties - 1;
        best = tied[idx];
    }
    return best;
}

// Server farm with typed tasks, join-the-shortest-queue routing over a random
// sample of capable servers, exponential service demands, and a day-cycle
// arrival rate. Outcome = per-interval utilization; treatment multiplies the
// service rate of selected servers.
struct DataCenterSpec {
    std::size_t n_task_types = 3;
    std::size_t types_per_server = 2;
    double base_service_rate = 1.0;
    double treat_rate_multiplier = 1.5; // free parameter of the model
    std::size_t jsq_sample = 2;         // routing sample size d
    double interval_length = 1.0;
    double arrival_rate_per_server = 0.7;
    double day_amplitude = 0.4;
    double day_period_intervals = 24.0;

    void validate() const {
        if (n_task_types == 0 || types_per_server == 0)
            throw ConfigError("DataCenterSpec: task types must be positive");
        if (base_service_rate <= 0.0 || treat_rate_multiplier <= 0.0)
            throw ConfigError("DataCenterSpec: rates must be positive");
        if (jsq_sample == 0) throw ConfigError("DataCenterSpec: jsq_sample must be >= 1");
        if (interval_length <= 0.0 || day_period_intervals <= 0.0)
            throw ConfigError("DataCenterSpec: interval parameters must be positive");
        if (!(day_amplitude >= 0.0 && day_amplitude < 1.0))
            throw ConfigError("DataCenterSpec: day_amplitude must be in [0,1)");
    }
};

class DataCenterEnv {
public:
    DataCenterEnv(DataCenterSpec spec, std::size_t n_units, std::size_t horizon, std::uint64_t world_seed)
        : spec_(std::move(spec)), n_(n_units), t_(horizon), seed_(world_seed) {
        spec_.validate();
        Rng caps(derive_seed(seed_, "world-capabilities"));
        capable_by_type_.assign(spec_.n_task_types, {});
        const std::size_t per = std::min(spec_.types_per_server, spec_.n_task_types);
        for (std::uint32_t s = 0; s < n_; ++s) {
            std::vector<std::uint32_t> types;
            while (types.size() < per) {
                const auto ty = static_cast<std::uint32_t>(caps.below(spec_.n_task_types));
                if (std::find(types.begin(), types.end(), ty) == types.end()) types.push_back(ty);
            }
            for (auto ty : types) capable_by_type_[ty].push_back(s);
        }
        for (std::uint32_t ty = 0; ty < capable_by_type_.size(); ++ty)
            if (capable_by_type_[ty].empty())
                capable_by_type_[ty].push_back(ty % static_cast<std::uint32_t>(n_));

        generate_arrivals();
    }

    std::size_t n_units() const { return n_; }
    std::size_t horizon() const { return t_; }
    std::size_t n_arrivals() const { return arrivals_.size(); }

    double arrival_rate_at(double time) const {
        const double day = spec_.day_period_intervals * spec_.interval_length;
        const double phase = 2.0 * std::numbers::pi * time / day - std::numbers::pi / 2.0;
        return static_cast<double>(n_) * spec_.arrival_rate_per_server *
               (1.0 + spec_.day_amplitude * std::sin(phase));
    }

    OutcomePanel simulate(const TreatmentMatrix& w) const {
        if (w.n_units() != n_ || w.horizon() != t_)
            throw ContractError("DataCenterEnv: treatment matrix shape mismatch");

        const double len = spec_.interval_length;
        OutcomePanel panel(n_, t_);
        Rng route(derive_seed(seed_, "routing"));

        struct Server {
            std::vector<double> pending;    // waiting job works, FIFO front at index head
            std::size_t head = 0;
            bool busy = false;
            double completion = 0.0;        // valid while busy
            double segment_start = 0.0;     // service segment start (job start or boundary)
            std::uint32_t generation = 0;
        };
        struct Completion {
            double time;
            std::uint32_t server;
            std::uint32_t generation;
            bool operator>(const Completion& o) const { return time > o.time; }
        };

        std::vector<Server> servers(n_);
        std::vector<std::uint32_t> qlen(n_, 0);
        std::priority_queue<Completion, std::vector<Completion>, std::greater<>> heap;
        std::vector<double> busy_in_interval(n_, 0.0);

        std::size_t next_arrival = 0;
        std::size_t interval = 0;
        double interval_end = len;

        auto rate_of = [&](std::uint32_t s) {
            const bool treated = w(s, interval) != 0;
            return spec_.base_service_rate * (treated ? spec_.treat_rate_multiplier : 1.0);
        };
        auto start_job = [&](std::uint32_t s, double now) {
            auto& sv = servers[s];
            const double work = sv.pending[sv.head];
            ++sv.head;
            sv.busy = true;
            sv.segment_start = now;
            sv.completion = now + work / rate_of(s);
            ++sv.generation;
            heap.push({sv.completion, s, sv.generation});
        };

        const double total_time = static_cast<double>(t_ + 1) * len;
        while (interval <= t_) {
            double t_arr = next_arrival < arrivals_.size() ? arrivals_[next_arrival].time : total_time + 1.0;
            double t_cmp = heap.empty() ? total_time + 1.0 : heap.top().time;

            if (t_arr < interval_end && t_arr <= t_cmp) {
                const auto& a = arrivals_[next_arrival++];
                const auto s = jsq_assign(qlen, capable_by_type_[a.type], spec_.jsq_sample, route);
                servers[s].pending.push_back(a.work);
                ++qlen[s];
                if (!servers[s].busy) start_job(s, a.time);
                continue;
            }
            if (t_cmp < interval_end) {
                const auto c = heap.top();
                heap.pop();
                auto& sv = servers[c.server];
                if (c.generation != sv.generation || !sv.busy) continue; // stale entry
                busy_in_interval[c.server] += c.time - sv.segment_start;
                sv.busy = false;
                --qlen[c.server];
                if (sv.head < sv.pending.size()) start_job(c.server, c.time);
                continue;
            }

            // interval boundary: accrue running segments, record utilization,
            // rescale in-flight completions for the new rates
            for (std::uint32_t s = 0; s < n_; ++s) {
                auto& sv = servers[s];
                if (sv.busy) {
                    busy_in_interval[s] += interval_end - sv.segment_start;
                    sv.segment_start = interval_end;
                }
                panel(s, interval) = std::clamp(busy_in_interval[s] / len, 0.0, 1.0);
                busy_in_interval[s] = 0.0;
            }
            ++interval;
            if (interval > t_) break;
            interval_end += len;
            for (std::uint32_t s = 0; s < n_; ++s) {
                auto& sv = servers[s];
                if (!sv.busy) continue;
                const double old_rate = spec_.base_service_rate *
                                        (w(s, interval - 1) ? spec_.treat_rate_multiplier : 1.0);
                const double remaining = (sv.completion - sv.segment_start) * old_rate;
                sv.completion = sv.segment_start + remaining / rate_of(s);
                ++sv.generation;
                heap.push({sv.completion, s, sv.generation});
            }
        }
        return panel;
    }

private:
    struct Arrival {
        double time;
        std::uint32_t type;
        double work;
    };

    void generate_arrivals() {
        Rng arr(derive_seed(seed_, "world-arrivals"));
        const double total_time = static_cast<double>(t_ + 1) * spec_.interval_length;
        const double lmax = static_cast<double>(n_) * spec_.arrival_rate_per_server *
                            (1.0 + spec_.day_amplitude);
        double t = 0.0;
        while (true) {
            t += arr.exponential(lmax);
            if (t >= total_time) break;
            if (arr.uniform01() <= arrival_rate_at(t) / lmax) {
                Arrival a;
                a.time = t;
                a.type = static_cast<std::uint32_t>(arr.below(spec_.n_task_types));
                a.work = arr.exponential(1.0);
                arrivals_.push_back(a);
            }
        }
    }

    DataCenterSpec spec_;
    std::size_t n_, t_;
    std::uint64_t seed_;
    std::vector<std::vector<std::uint32_t>> capable_by_type_;
    std::vector<Arrival> arrivals_;
};

} // namespace netcf
