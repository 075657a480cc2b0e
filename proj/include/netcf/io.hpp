#pragma once

#include "netcf/ccv.hpp"
#include "netcf/core.hpp"
#include "netcf/envs/env.hpp"
#include "netcf/errors.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace netcf {

using json = nlohmann::ordered_json;

// Fixed 12-significant-digit rendering so identical results export to
// byte-identical files.
inline std::string format_number(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// CSV panels (header t0..tT, one row per unit)
// ---------------------------------------------------------------------------

inline void write_panel_csv(const OutcomePanel& panel, std::ostream& os) {
    for (std::size_t t = 0; t <= panel.horizon(); ++t) os << (t ? "," : "") << "t" << t;
    os << "\n";
    for (std::size_t i = 0; i < panel.n_units(); ++i) {
        for (std::size_t t = 0; t <= panel.horizon(); ++t)
            os << (t ? "," : "") << format_number(panel(i, t));
        os << "\n";
    }
}

inline void write_treatment_csv(const TreatmentMatrix& w, std::ostream& os) {
    for (std::size_t t = 0; t <= w.horizon(); ++t) os << (t ? "," : "") << "t" << t;
    os << "\n";
    for (std::size_t i = 0; i < w.n_units(); ++i) {
        for (std::size_t t = 0; t <= w.horizon(); ++t) os << (t ? "," : "") << int(w(i, t));
        os << "\n";
    }
}

namespace io_detail {

inline std::vector<std::vector<std::string>> read_csv(std::istream& is) {
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

} // namespace io_detail

inline OutcomePanel read_panel_csv(std::istream& is) {
    const auto rows = io_detail::read_csv(is);
    if (rows.size() < 2) throw IoError("panel csv: need a header and at least one unit row");
    const std::size_t periods = rows[0].size();
    if (periods < 2 || rows[0][0] != "t0") throw IoError("panel csv: bad header, expected t0..tT");
    OutcomePanel panel(rows.size() - 1, periods - 1);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != periods) throw IoError("panel csv: ragged row " + std::to_string(i));
        for (std::size_t t = 0; t < periods; ++t) panel(i - 1, t) = std::stod(rows[i][t]);
    }
    panel.validate_finite();
    return panel;
}

inline TreatmentMatrix read_treatment_csv(std::istream& is) {
    const auto rows = io_detail::read_csv(is);
    if (rows.size() < 2) throw IoError("treatment csv: need a header and at least one unit row");
    const std::size_t periods = rows[0].size();
    if (periods < 2 || rows[0][0] != "t0") throw IoError("treatment csv: bad header, expected t0..tT");
    std::vector<std::uint8_t> entries;
    entries.reserve((rows.size() - 1) * periods);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != periods) throw IoError("treatment csv: ragged row " + std::to_string(i));
        for (std::size_t t = 0; t < periods; ++t)
            entries.push_back(static_cast<std::uint8_t>(std::stoi(rows[i][t])));
    }
    return TreatmentMatrix::from_entries(rows.size() - 1, periods - 1, entries);
}

// ---------------------------------------------------------------------------
// JSON envelopes
// ---------------------------------------------------------------------------

inline json panel_envelope(const OutcomePanel& panel, std::uint64_t seed, const json& meta) {
    json j;
    j["n_units"] = panel.n_units();
    j["horizon"] = panel.horizon();
    j["seed"] = seed;
    j["meta"] = meta;
    json data = json::array();
    for (std::size_t i = 0; i < panel.n_units(); ++i) {
        json row = json::array();
        for (std::size_t t = 0; t <= panel.horizon(); ++t) row.push_back(panel(i, t));
        data.push_back(std::move(row));
    }
    j["outcomes"] = std::move(data);
    return j;
}

inline json treatment_envelope(const TreatmentMatrix& w, std::uint64_t seed, const json& meta) {
    json j;
    j["n_units"] = w.n_units();
    j["horizon"] = w.horizon();
    j["seed"] = seed;
    j["meta"] = meta;
    json data = json::array();
    for (std::size_t i = 0; i < w.n_units(); ++i) {
        json row = json::array();
        for (std::size_t t = 0; t <= w.horizon(); ++t) row.push_back(int(w(i, t)));
        data.push_back(std::move(row));
    }
    j["treatments"] = std::move(data);
    return j;
}

inline json batches_to_json(const std::vector<Batch>& batches) {
    json arr = json::array();
    for (const auto& b : batches) arr.push_back(b.indices);
    return arr;
}

// Coefficient export with explicit column order so audits can recompute
// predictions from the design rows.
inline json separams_to_json(const SEParams& p) {
    p.validate();
    json j;
    j["lag"] = p.lag;
    std::vector<std::string> names{"b"};
    for (std::size_t k = p.lag; k >= 1; --k) names.push_back("c_g" + std::to_string(k));
    names.push_back("d_g");
    names.push_back("e_g");
    for (std::size_t k = p.lag; k >= 1; --k) names.push_back("c_h" + std::to_string(k));
    names.push_back("d_h");
    names.push_back("e_h");
    j["columns"] = names;
    j["beta"] = p.beta;
    return j;
}

inline SEParams separams_from_json(const json& j) {
    SEParams p;
    p.lag = j.at("lag").get<std::size_t>();
    p.beta = j.at("beta").get<std::vector<double>>();
    p.validate();
    return p;
}

inline json estimate_series_to_json(const EstimateSeries& e) {
    json j;
    j["lag"] = e.lag;
    j["initialization"] = "values below lag copied from observed means";
    j["population"] = e.pop;
    if (!e.batch.empty()) j["batch"] = e.batch;
    return j;
}

// ---------------------------------------------------------------------------
// config parsing with location-carrying errors
// ---------------------------------------------------------------------------

namespace io_detail {

inline const json* find(const json& j, const std::string& key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback, const std::string& where) {
    const json* v = find(j, key);
    if (!v) return fallback;
    try {
        return v->get<T>();
    } catch (const std::exception&) {
        throw ConfigError("config: bad value type at " + where + "/" + key);
    }
}

template <typename T>
T require(const json& j, const std::string& key, const std::string& where) {
    const json* v = find(j, key);
    if (!v) throw ConfigError("config: missing required key " + where + "/" + key);
    try {
        return v->get<T>();
    } catch (const std::exception&) {
        throw ConfigError("config: bad value type at " + where + "/" + key);
    }
}

} // namespace io_detail

inline GraphSpec graph_spec_from_json(const json& j, const std::string& where) {
    GraphSpec g;
    g.kind = graph_kind_from_string(io_detail::get_or<std::string>(j, "generator",
                                                                   "preferential-attachment", where));
    g.mean_degree = io_detail::get_or<double>(j, "mean_degree", g.mean_degree, where);
    g.seed = io_detail::get_or<std::uint64_t>(j, "seed", 0, where);
    return g;
}

inline EnvConfig env_config_from_json(const json& j, const std::string& where = "/env") {
    using namespace io_detail;
    EnvConfig c;
    c.kind = env_kind_from_string(require<std::string>(j, "kind", where));
    c.n_units = require<std::size_t>(j, "n_units", where);
    c.horizon = require<std::size_t>(j, "horizon", where);
    c.seed = get_or<std::uint64_t>(j, "seed", 0, where);

    switch (c.kind) {
        case EnvKind::Gaussian: {
            const json* g = find(j, "gaussian");
            if (!g) throw ConfigError("config: missing " + where + "/gaussian");
            const std::string w2 = where + "/gaussian";
            c.gaussian.mu = get_or<double>(*g, "mu", 0.0, w2);
            c.gaussian.sigma = get_or<double>(*g, "sigma", 0.0, w2);
            c.gaussian.sigma_t = get_or<double>(*g, "sigma_t", 0.0, w2);
            c.gaussian.sigma_t_schedule =
                get_or<std::vector<double>>(*g, "sigma_t_schedule", {}, w2);
            c.gaussian.noise_sd = get_or<double>(*g, "noise_sd", 0.0, w2);
            c.gaussian.y0_mean = get_or<double>(*g, "y0_mean", 0.0, w2);
            c.gaussian.y0_sd = get_or<double>(*g, "y0_sd", 0.0, w2);
            auto coeffs = [&](const char* key) {
                AffineYW f;
                if (const json* cj = find(*g, key)) {
                    f.b = get_or<double>(*cj, "b", 0.0, w2);
                    f.c = get_or<double>(*cj, "c", 0.0, w2);
                    f.d = get_or<double>(*cj, "d", 0.0, w2);
                    f.e = get_or<double>(*cj, "e", 0.0, w2);
                }
                return f;
            };
            c.gaussian.g = coeffs("g");
            c.gaussian.h = coeffs("h");
            break;
        }
        case EnvKind::SeExact: {
            const json* g = find(j, "se_exact");
            if (!g) throw ConfigError("config: missing " + where + "/se_exact");
            const std::string w2 = where + "/se_exact";
            c.se_exact.b_g = get_or<double>(*g, "b_g", 0.0, w2);
            c.se_exact.d_g = get_or<double>(*g, "d_g", 0.0, w2);
            c.se_exact.b_h = get_or<double>(*g, "b_h", 0.0, w2);
            c.se_exact.d_h = get_or<double>(*g, "d_h", 0.0, w2);
            c.se_exact.c_g = get_or<std::vector<double>>(*g, "c_g", {}, w2);
            c.se_exact.c_h = get_or<std::vector<double>>(*g, "c_h", {}, w2);
            c.se_exact.y0_mean = get_or<double>(*g, "y0_mean", 0.0, w2);
            c.se_exact.y0_sd = get_or<double>(*g, "y0_sd", 0.0, w2);
            c.se_exact.noise_sd = get_or<double>(*g, "noise_sd", 0.0, w2);
            break;
        }
        case EnvKind::Belief: {
            const json* g = find(j, "belief");
            const std::string w2 = where + "/belief";
            if (g) {
                c.belief.beta = get_or<double>(*g, "beta", c.belief.beta, w2);
                c.belief.init_adoption = get_or<double>(*g, "init_adoption", c.belief.init_adoption, w2);
                c.belief.treat_effect_scale =
                    get_or<double>(*g, "treat_effect_scale", c.belief.treat_effect_scale, w2);
                if (const json* gj = find(*g, "graph")) c.belief.graph = graph_spec_from_json(*gj, w2);
            }
            break;
        }
        case EnvKind::LinearInMeans: {
            const json* g = find(j, "linear_in_means");
            const std::string w2 = where + "/linear_in_means";
            if (g) {
                c.lim.gamma = get_or<double>(*g, "gamma", c.lim.gamma, w2);
                c.lim.delta_p = get_or<double>(*g, "delta_p", c.lim.delta_p, w2);
                c.lim.delta_u_mean = get_or<double>(*g, "delta_u_mean", c.lim.delta_u_mean, w2);
                c.lim.delta_u_sd = get_or<double>(*g, "delta_u_sd", c.lim.delta_u_sd, w2);
                c.lim.season_amplitude = get_or<double>(*g, "season_amplitude", c.lim.season_amplitude, w2);
                c.lim.season_period = get_or<double>(*g, "season_period", c.lim.season_period, w2);
                c.lim.base_noise_sd = get_or<double>(*g, "base_noise_sd", c.lim.base_noise_sd, w2);
                if (const json* gj = find(*g, "graph")) c.lim.graph = graph_spec_from_json(*gj, w2);
            }
            break;
        }
        case EnvKind::Exercise: {
            const json* g = find(j, "exercise");
            const std::string w2 = where + "/exercise";
            if (g) {
                c.exercise.c = get_or<double>(*g, "c", c.exercise.c, w2);
                c.exercise.e = get_or<double>(*g, "e", c.exercise.e, w2);
                c.exercise.eta = get_or<double>(*g, "eta", c.exercise.eta, w2);
                c.exercise.alpha_mean = get_or<double>(*g, "alpha_mean", c.exercise.alpha_mean, w2);
                c.exercise.tau_mean = get_or<double>(*g, "tau_mean", c.exercise.tau_mean, w2);
                c.exercise.init_prob = get_or<double>(*g, "init_prob", c.exercise.init_prob, w2);
                if (const json* gj = find(*g, "graph")) c.exercise.graph = graph_spec_from_json(*gj, w2);
            }
            break;
        }
        case EnvKind::DataCenter: {
            const json* g = find(j, "datacenter");
            const std::string w2 = where + "/datacenter";
            if (g) {
                c.datacenter.n_task_types = get_or<std::size_t>(*g, "n_task_types", c.datacenter.n_task_types, w2);
                c.datacenter.types_per_server =
                    get_or<std::size_t>(*g, "types_per_server", c.datacenter.types_per_server, w2);
                c.datacenter.base_service_rate =
                    get_or<double>(*g, "base_service_rate", c.datacenter.base_service_rate, w2);
                c.datacenter.treat_rate_multiplier =
                    get_or<double>(*g, "treat_rate_multiplier", c.datacenter.treat_rate_multiplier, w2);
                c.datacenter.jsq_sample = get_or<std::size_t>(*g, "jsq_sample", c.datacenter.jsq_sample, w2);
                c.datacenter.arrival_rate_per_server =
                    get_or<double>(*g, "arrival_rate_per_server", c.datacenter.arrival_rate_per_server, w2);
                c.datacenter.day_amplitude = get_or<double>(*g, "day_amplitude", c.datacenter.day_amplitude, w2);
                c.datacenter.day_period_intervals =
                    get_or<double>(*g, "day_period_intervals", c.datacenter.day_period_intervals, w2);
            }
            break;
        }
        case EnvKind::Auction: {
            const json* g = find(j, "auction");
            const std::string w2 = where + "/auction";
            if (g) {
                c.auction.tau_percent = get_or<double>(*g, "tau_percent", c.auction.tau_percent, w2);
                c.auction.epsilon = get_or<double>(*g, "epsilon", c.auction.epsilon, w2);
                c.auction.base_value_mean = get_or<double>(*g, "base_value_mean", c.auction.base_value_mean, w2);
                c.auction.base_value_sd = get_or<double>(*g, "base_value_sd", c.auction.base_value_sd, w2);
                c.auction.bidder_noise_sd = get_or<double>(*g, "bidder_noise_sd", c.auction.bidder_noise_sd, w2);
                c.auction.price_carry = get_or<double>(*g, "price_carry", c.auction.price_carry, w2);
            }
            break;
        }
    }
    return c;
}

inline ExperimentDesign design_from_json(const json& j, const std::string& where = "/design") {
    using namespace io_detail;
    ExperimentDesign d;
    d.stage_lengths = require<std::vector<std::size_t>>(j, "stage_lengths", where);
    d.stage_probs = require<std::vector<double>>(j, "stage_probs", where);
    d.monotone_rollout = get_or<bool>(j, "monotone_rollout", false, where);
    d.validate();
    return d;
}

inline CandidateConfig candidate_from_json(const json& j, const std::string& where) {
    using namespace io_detail;
    CandidateConfig c;
    c.estimator = estimator_id_from_string(require<std::string>(j, "estimator", where));
    c.lag = get_or<std::size_t>(j, "lag", 1, where);
    c.batch.batch_size = get_or<std::size_t>(j, "batch_size", 0, where);
    c.batch.batch_count = get_or<std::size_t>(j, "batch_count", 20, where);
    c.alpha = get_or<double>(j, "alpha", 1e-2, where);
    const auto m = get_or<std::size_t>(j, "moment_order", 2, where);
    const auto fam = get_or<std::string>(j, "features", "quadratic", where);
    if (fam == "quadratic")
        c.features = FeatureSpec::default_quadratic(m);
    else if (fam == "linear")
        c.features = FeatureSpec::linear(m);
    else if (fam == "first-order")
        c.features = FeatureSpec::first_order_subset();
    else
        throw ConfigError("config: unknown feature family at " + where + "/features");
    return c;
}

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

} // namespace netcf
