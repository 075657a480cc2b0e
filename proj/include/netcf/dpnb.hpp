#pragma once

#include "netcf/core.hpp"
#include "netcf/errors.hpp"
#include "netcf/rng.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

namespace netcf {

struct BatchParams {
    std::size_t batch_size = 0;  // target average size s
    std::size_t batch_count = 0; // m

    void validate(std::size_t n_units) const {
        if (batch_size == 0 || batch_size > n_units)
            throw ConfigError("BatchParams: batch size must be in [1, n_units]");
        if (batch_count == 0) throw ConfigError("BatchParams: batch count must be >= 1");
    }
};

namespace detail {

// Units ordered by treatment duration (periods under treatment), ties broken
// by unit index so replays are deterministic.
inline std::vector<std::uint32_t> duration_order(const TreatmentMatrix& w) {
    const std::size_t n = w.n_units();
    std::vector<std::uint32_t> dur(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 1; t <= w.horizon(); ++t) dur[i] += w(i, t);
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return dur[a] < dur[b]; });
    return order;
}

} // namespace detail

// Training batches with diverse treatment exposure. For each batch: merge a
// systematic block of the duration-sorted units (start sliding across the
// range) with a uniformly random block, then keep each pooled unit with
// probability s/|pool| so the expected batch size is s.
inline std::vector<Batch> create_training_batches(const TreatmentMatrix& w,
                                                  const BatchParams& params, Rng& rng) {
    const std::size_t n = w.n_units();
    params.validate(n);
    const std::size_t s = params.batch_size;
    const std::size_t m = params.batch_count;

    const auto order = detail::duration_order(w);
    std::vector<Batch> batches;
    batches.reserve(m);
    std::vector<std::uint8_t> in_pool(n, 0);

    for (std::size_t b = 0; b < m; ++b) {
        const std::size_t span = n - s;
        const std::size_t sys_start =
            m > 1 ? std::min(span, (b * span) / (m - 1)) : 0;

        for (int attempt = 0; attempt < 2; ++attempt) {
            std::fill(in_pool.begin(), in_pool.end(), 0);
            for (std::size_t k = 0; k < s; ++k) in_pool[order[sys_start + k]] = 1;
            const auto rand_start = static_cast<std::size_t>(rng.below(span + 1));
            for (std::size_t k = 0; k < s; ++k) in_pool[order[rand_start + k]] = 1;

            std::size_t pool_size = 0;
            for (auto v : in_pool) pool_size += v;
            const double keep = std::min(1.0, static_cast<double>(s) / static_cast<double>(pool_size));

            std::vector<std::uint32_t> members;
            members.reserve(pool_size);
            for (std::uint32_t i = 0; i < n; ++i)
                if (in_pool[i] && rng.bernoulli(keep)) members.push_back(i);

            if (!members.empty()) {
                batches.emplace_back(std::move(members));
                break;
            }
            if (attempt == 1)
                throw ConfigError("create_training_batches: sampled an empty batch twice; "
                                  "increase batch size");
        }
    }
    return batches;
}

// Validation batches: units ranked by treatment exposure (descending, ties by
// unit index) and split into b_v contiguous groups whose sizes differ by at
// most one, remainder going to the earliest groups. Deterministic given W.
inline std::vector<Batch> create_validation_batches(const TreatmentMatrix& w, std::size_t b_v) {
    const std::size_t n = w.n_units();
    if (b_v == 0 || b_v > n)
        throw ConfigError("create_validation_batches: b_v must be in [1, n_units]");

    const auto expo = exposure_all(w);
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return expo[a] > expo[b]; });

    std::vector<Batch> batches;
    batches.reserve(b_v);
    const std::size_t base = n / b_v;
    const std::size_t extra = n % b_v;
    std::size_t pos = 0;
    for (std::size_t g = 0; g < b_v; ++g) {
        const std::size_t sz = base + (g < extra ? 1 : 0);
        std::vector<std::uint32_t> members(order.begin() + static_cast<std::ptrdiff_t>(pos),
                                           order.begin() + static_cast<std::ptrdiff_t>(pos + sz));
        pos += sz;
        batches.emplace_back(std::move(members));
    }
    return batches;
}

} // namespace netcf
