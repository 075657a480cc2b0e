#pragma once

#include "netcf/errors.hpp"
#include "netcf/rng.hpp"

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

namespace netcf {

enum class GraphKind { PreferentialAttachment, ConfigurationModel, KRegular };

struct GraphSpec {
    GraphKind kind = GraphKind::PreferentialAttachment;
    double mean_degree = 8.0;
    std::uint64_t seed = 0;

    void validate(std::size_t n_units) const {
        if (mean_degree < 1.0 || mean_degree >= static_cast<double>(n_units))
            throw ConfigError("GraphSpec: mean degree must be in [1, n_units)");
    }
};

// Undirected simple graph in CSR form.
class Graph {
public:
    explicit Graph(std::size_t n) : n_(n), adj_(n) {}

    std::size_t n_nodes() const { return n_; }

    void add_edge(std::uint32_t a, std::uint32_t b) {
        if (a == b) return;
        adj_[a].push_back(b);
        adj_[b].push_back(a);
    }

    void finalize() {
        for (auto& nb : adj_) {
            std::sort(nb.begin(), nb.end());
            nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
        }
    }

    const std::vector<std::uint32_t>& neighbors(std::size_t i) const { return adj_[i]; }
    std::size_t degree(std::size_t i) const { return adj_[i].size(); }

    double mean_degree() const {
        std::size_t s = 0;
        for (const auto& nb : adj_) s += nb.size();
        return static_cast<double>(s) / static_cast<double>(n_);
    }

private:
    std::size_t n_;
    std::vector<std::vector<std::uint32_t>> adj_;
};

// Barabasi-Albert style growth: each new node attaches to `m` existing nodes
// chosen proportionally to degree (via the repeated-endpoint trick).
inline Graph preferential_attachment(std::size_t n, std::size_t m, Rng& rng) {
    if (n < 2) throw ConfigError("preferential_attachment: need n >= 2");
    m = std::max<std::size_t>(1, std::min(m, n - 1));
    Graph g(n);
    std::vector<std::uint32_t> endpoints; // node appears once per incident edge
    const std::size_t seed_nodes = m + 1;
    for (std::uint32_t a = 0; a < seed_nodes && a < n; ++a)
        for (std::uint32_t b = a + 1; b < seed_nodes && b < n; ++b) {
            g.add_edge(a, b);
            endpoints.push_back(a);
            endpoints.push_back(b);
        }
    for (std::uint32_t v = static_cast<std::uint32_t>(seed_nodes); v < n; ++v) {
        std::vector<std::uint32_t> targets;
        while (targets.size() < m) {
            const auto pick = endpoints[rng.below(endpoints.size())];
            if (pick != v && std::find(targets.begin(), targets.end(), pick) == targets.end())
                targets.push_back(pick);
        }
        for (auto t : targets) {
            g.add_edge(v, t);
            endpoints.push_back(v);
            endpoints.push_back(t);
        }
    }
    g.finalize();
    return g;
}

// Configuration model with Poisson-like degrees, multi-edges and self-loops erased.
inline Graph configuration_model(std::size_t n, double mean_degree, Rng& rng) {
    std::vector<std::uint32_t> stubs;
    for (std::uint32_t i = 0; i < n; ++i) {
        // geometric-ish integer degrees with the requested mean, at least 1
        std::size_t d = 1;
        double acc = 1.0;
        while (acc < mean_degree && rng.uniform01() < (mean_degree - acc) / mean_degree) {
            ++d;
            ++acc;
            if (d > 4 * static_cast<std::size_t>(mean_degree) + 8) break;
        }
        for (std::size_t k = 0; k < d; ++k) stubs.push_back(i);
    }
    if (stubs.size() % 2 == 1) stubs.push_back(static_cast<std::uint32_t>(rng.below(n)));
    rng.shuffle(stubs.begin(), stubs.end());
    Graph g(n);
    for (std::size_t k = 0; k + 1 < stubs.size(); k += 2) g.add_edge(stubs[k], stubs[k + 1]);
    g.finalize();
    return g;
}

// Random k-regular-ish graph by stub matching with self/multi edges dropped.
inline Graph k_regular(std::size_t n, std::size_t k, Rng& rng) {
    if (k >= n) throw ConfigError("k_regular: k must be < n");
    std::vector<std::uint32_t> stubs;
    stubs.reserve(n * k);
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) stubs.push_back(i);
    if (stubs.size() % 2 == 1) stubs.pop_back();
    rng.shuffle(stubs.begin(), stubs.end());
    Graph g(n);
    for (std::size_t s = 0; s + 1 < stubs.size(); s += 2) g.add_edge(stubs[s], stubs[s + 1]);
    g.finalize();
    return g;
}

inline Graph make_graph(std::size_t n, const GraphSpec& spec) {
    spec.validate(n);
    Rng rng(derive_seed(spec.seed, "graph"));
    switch (spec.kind) {
        case GraphKind::PreferentialAttachment: {
            const auto m = static_cast<std::size_t>(std::max(1.0, spec.mean_degree / 2.0));
            return preferential_attachment(n, m, rng);
        }
        case GraphKind::ConfigurationModel:
            return configuration_model(n, spec.mean_degree, rng);
        case GraphKind::KRegular:
            return k_regular(n, static_cast<std::size_t>(spec.mean_degree), rng);
    }
    throw ConfigError("make_graph: unknown graph kind");
}

inline GraphKind graph_kind_from_string(const std::string& s) {
    if (s == "preferential-attachment") return GraphKind::PreferentialAttachment;
    if (s == "configuration-model") return GraphKind::ConfigurationModel;
    if (s == "k-regular") return GraphKind::KRegular;
    throw ConfigError("unknown graph generator tag: " + s);
}

} // namespace netcf
