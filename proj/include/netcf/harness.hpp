#pragma once

#include "netcf/ccv.hpp"
#include "netcf/concurrency.hpp"
#include "netcf/core.hpp"
#include "netcf/dpnb.hpp"
#include "netcf/envs/env.hpp"
#include "netcf/errors.hpp"
#include "netcf/estimators.hpp"
#include "netcf/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace netcf {

inline std::vector<double> quantiles(std::vector<double> xs, const std::vector<double>& qs) {
    std::sort(xs.begin(), xs.end());
    std::vector<double> out;
    for (double q : qs) {
        if (xs.empty()) {
            out.push_back(std::nan(""));
            continue;
        }
        const double pos = q * static_cast<double>(xs.size() - 1);
        const auto lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, xs.size() - 1);
        out.push_back(xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]));
    }
    return out;
}

inline double median(std::vector<double> xs) { return quantiles(std::move(xs), {0.5})[0]; }

// ---------------------------------------------------------------------------
// result tables
// ---------------------------------------------------------------------------

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void add_row(std::vector<double> r) {
        if (r.size() != columns.size()) throw ContractError("Table: row width mismatch");
        rows.push_back(std::move(r));
    }
};

inline std::string to_csv(const Table& t) {
    std::string s;
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        if (c) s += ',';
        s += t.columns[c];
    }
    s += '\n';
    for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) s += ',';
            s += format_number(row[c]);
        }
        s += '\n';
    }
    return s;
}

inline json to_json(const Table& t) {
    json j;
    j["columns"] = t.columns;
    json rows = json::array();
    for (const auto& row : t.rows) {
        json r = json::array();
        for (double v : row) r.push_back(json::parse(format_number(v), nullptr, true));
        rows.push_back(std::move(r));
    }
    j["rows"] = std::move(rows);
    return j;
}

inline Table table_from_json(const json& j) {
    Table t;
    t.columns = j.at("columns").get<std::vector<std::string>>();
    for (const auto& r : j.at("rows")) t.add_row(r.get<std::vector<double>>());
    return t;
}

// Bit-stable export: fixed float formatting, fixed column order.
inline void export_table(const Table& t, const std::string& path, const std::string& format) {
    try {
        if (format == "csv") {
            write_text_file(path, to_csv(t));
        } else if (format == "json") {
            write_text_file(path, to_json(t).dump(2) + "\n");
        } else {
            throw ConfigError("export: format must be csv or json");
        }
    } catch (const IoError& e) {
        throw IoError(std::string(e.what()) + " (exporting " + path + ")");
    }
}

// ---------------------------------------------------------------------------
// benchmark pipeline
// ---------------------------------------------------------------------------

struct BenchmarkConfig {
    EnvConfig env;
    ExperimentDesign design;
    std::size_t runs = 20;
    std::size_t tte_window = 0; // 0: use the last stage length
    std::vector<CandidateConfig> grid;
    std::size_t b_v = 2;
    std::size_t n_blocks = 3;
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    void validate() const {
        if (runs < 1) throw ConfigError("BenchmarkConfig: runs must be >= 1");
        design.validate();
        const std::size_t L = tte_window ? tte_window : design.stage_lengths.back();
        if (L > design.stage_lengths.back())
            throw ConfigError("BenchmarkConfig: TTE window exceeds the last stage length");
        if (grid.empty()) throw ConfigError("BenchmarkConfig: empty estimator grid");
        if (env.horizon != design.total_horizon())
            throw ConfigError("BenchmarkConfig: env horizon must equal design horizon");
    }
};

struct RunRecord {
    std::size_t run = 0;
    double gt_tte = std::nan("");
    double cmp_tte = std::nan("");
    double bcmp_tte = std::nan("");
    double dm_tte = std::nan("");
    double ht_tte = std::nan("");
    double selected = -1; // candidate index, -1 if CCV failed
    std::string error;
};

struct BenchmarkResult {
    std::vector<RunRecord> records;
    Table per_run;
    Table aggregates;
    json metadata;
};

inline BenchmarkResult run_benchmark(const BenchmarkConfig& cfg) {
    cfg.validate();
    const std::size_t L = cfg.tte_window ? cfg.tte_window : cfg.design.stage_lengths.back();
    const auto probs = cfg.design.probs_per_period();

    std::vector<RunRecord> recs(cfg.runs);
    parallel_for(cfg.runs, cfg.threads, [&](std::size_t r) {
        RunRecord rec;
        rec.run = r;
        const std::uint64_t run_seed = derive_seed(cfg.seed, "run", r);
        try {
            const auto w = generate_staggered_design(cfg.env.n_units, cfg.design, run_seed);
            const auto env_cfg = cfg.env.with_seed(derive_seed(run_seed, "world"));
            Env world(env_cfg);
            const auto obs = world.simulate(w);
            const auto w_treat = TreatmentMatrix::all_level(cfg.env.n_units, cfg.env.horizon, true);
            const auto w_ctrl = TreatmentMatrix::all_level(cfg.env.n_units, cfg.env.horizon, false);
            const auto gt_treat = world.simulate(w_treat);
            const auto gt_ctrl = world.simulate(w_ctrl);
            rec.gt_tte = compute_tte(gt_treat, gt_ctrl, L);

            try {
                rec.dm_tte = dm(obs, w, L);
            } catch (const std::exception& e) {
                rec.error += std::string("dm: ") + e.what() + "; ";
            }
            try {
                rec.ht_tte = ht(obs, w, probs, L);
            } catch (const std::exception& e) {
                rec.error += std::string("ht: ") + e.what() + "; ";
            }
            try {
                const auto bt = bcmp_estimate(obs, w, w_treat).series.pop;
                const auto bc = bcmp_estimate(obs, w, w_ctrl).series.pop;
                rec.bcmp_tte = series_tte(bt, bc, L);
            } catch (const std::exception& e) {
                rec.error += std::string("bcmp: ") + e.what() + "; ";
            }
            try {
                const auto vbatches = create_validation_batches(w, cfg.b_v);
                const auto blocks = TimeBlocks::equal(cfg.env.horizon + 1, cfg.n_blocks);
                const auto ccv = run_ccv(obs, w, cfg.grid, blocks, vbatches, mse_loss, run_seed);
                rec.selected = static_cast<double>(ccv.selected);
                const auto& cand = cfg.grid[ccv.selected];
                const auto et = estimate_with_candidate(cand, obs, w, w_treat, run_seed);
                const auto ec = estimate_with_candidate(cand, obs, w, w_ctrl, run_seed);
                rec.cmp_tte = series_tte(et.pop, ec.pop, L);
            } catch (const std::exception& e) {
                rec.error += std::string("ccv: ") + e.what() + "; ";
            }
        } catch (const std::exception& e) {
            rec.error += std::string("run: ") + e.what();
        }
        recs[r] = std::move(rec);
    });

    BenchmarkResult out;
    out.records = recs;
    out.per_run.columns = {"run", "gt_tte", "cmp_tte", "bcmp_tte", "dm_tte", "ht_tte", "selected"};
    for (const auto& r : recs)
        out.per_run.add_row({static_cast<double>(r.run), r.gt_tte, r.cmp_tte, r.bcmp_tte, r.dm_tte,
                             r.ht_tte, r.selected});

    out.aggregates.columns = {"estimator_id", "mean_tte", "sd_tte", "median_abs_error",
                              "q05", "q25", "q50", "q75", "q95"};
    const std::vector<std::pair<std::string, std::function<double(const RunRecord&)>>> cols = {
        {"gt", [](const RunRecord& r) { return r.gt_tte; }},
        {"cmp", [](const RunRecord& r) { return r.cmp_tte; }},
        {"bcmp", [](const RunRecord& r) { return r.bcmp_tte; }},
        {"dm", [](const RunRecord& r) { return r.dm_tte; }},
        {"ht", [](const RunRecord& r) { return r.ht_tte; }}};
    std::size_t est_id = 0;
    for (const auto& [name, get] : cols) {
        std::vector<double> vals, errs;
        for (const auto& r : recs) {
            const double v = get(r);
            if (!std::isnan(v)) {
                vals.push_back(v);
                if (!std::isnan(r.gt_tte)) errs.push_back(std::abs(v - r.gt_tte));
            }
        }
        double mean = std::nan(""), sd = std::nan("");
        if (!vals.empty()) {
            mean = 0.0;
            for (double v : vals) mean += v;
            mean /= static_cast<double>(vals.size());
            sd = 0.0;
            for (double v : vals) sd += (v - mean) * (v - mean);
            sd = vals.size() > 1 ? std::sqrt(sd / static_cast<double>(vals.size() - 1)) : 0.0;
        }
        const auto qs = quantiles(vals, {0.05, 0.25, 0.5, 0.75, 0.95});
        out.aggregates.add_row({static_cast<double>(est_id++), mean, sd,
                                errs.empty() ? std::nan("") : median(errs), qs[0], qs[1], qs[2],
                                qs[3], qs[4]});
    }

    out.metadata["estimator_order"] = std::vector<std::string>{"gt", "cmp", "bcmp", "dm", "ht"};
    out.metadata["runs"] = cfg.runs;
    out.metadata["tte_window"] = L;
    out.metadata["seed"] = cfg.seed;
    out.metadata["env_kind"] = to_string(cfg.env.kind);
    out.metadata["n_units"] = cfg.env.n_units;
    out.metadata["horizon"] = cfg.env.horizon;
    if (cfg.runs < 100)
        out.metadata["scale_note"] = "reduced-scale run count; full-scale experiments use 100 runs";
    return out;
}

// ---------------------------------------------------------------------------
// DM bias/variance sweep
// ---------------------------------------------------------------------------

struct SweepConfig {
    enum class Param { Mu, Sigma };
    Param sweep_param = Param::Sigma;
    double fixed_value = 0.04; // the non-swept parameter
    std::vector<double> values;
    std::size_t worlds = 20;
    std::size_t resamples = 50;
    std::size_t nested_boot = 200;
    std::size_t n_units = 500;
    std::size_t horizon = 8;
    double noise_sd = 0.1;
    ExperimentDesign design{{4, 4}, {0.25, 0.75}};
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    void validate() const {
        if (values.empty()) throw ConfigError("SweepConfig: no sweep values");
        if (worlds < 1 || resamples < 1 || nested_boot < 1)
            throw ConfigError("SweepConfig: counts must be >= 1");
        design.validate();
        if (design.total_horizon() != horizon)
            throw ConfigError("SweepConfig: design horizon mismatch");
    }
};

struct SweepRow {
    double value = 0.0;
    double mse = 0.0, variance = 0.0, sq_bias = 0.0;
    double mse_se = 0.0, var_se = 0.0, bias_se = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    Table table;
    json metadata;
};

namespace harness_detail {

// pooled over (world, run): bias is the overall mean error, variance the
// remainder, so mse = variance + sq_bias holds exactly
struct SweepStats {
    double mse, variance, sq_bias;
};

inline SweepStats decompose(const std::vector<double>& gt,
                            const std::vector<std::vector<double>>& est) {
    double m1 = 0.0, m2 = 0.0;
    std::size_t count = 0;
    for (std::size_t w = 0; w < gt.size(); ++w)
        for (double v : est[w]) {
            const double err = v - gt[w];
            m1 += err;
            m2 += err * err;
            ++count;
        }
    m1 /= static_cast<double>(count);
    m2 /= static_cast<double>(count);
    return {m2, m2 - m1 * m1, m1 * m1};
}

} // namespace harness_detail

// Bias/variance decomposition of the final-period DM estimate across frozen
// worlds and treatment resamples, with +-1 SE bands from a nested bootstrap
// over (worlds, runs).
inline SweepResult dm_sweep(const SweepConfig& cfg) {
    cfg.validate();
    SweepResult out;
    out.table.columns = {"value", "mse", "variance", "sq_bias", "mse_se", "var_se", "bias_se"};

    for (std::size_t vi = 0; vi < cfg.values.size(); ++vi) {
        const double v = cfg.values[vi];
        GaussianSpec spec;
        spec.mu = cfg.sweep_param == SweepConfig::Param::Mu ? v : cfg.fixed_value;
        spec.sigma = cfg.sweep_param == SweepConfig::Param::Sigma ? v : cfg.fixed_value;
        spec.noise_sd = cfg.noise_sd;
        spec.h = AffineYW{1.0, 0.0, -1.2, 0.0}; // h = 1 - 1.2 w
        spec.g = AffineYW{0.0, 0.0, 1.0, 0.0};  // g = w

        std::vector<double> gt(cfg.worlds);
        std::vector<std::vector<double>> est(cfg.worlds, std::vector<double>(cfg.resamples));
        // world seeds shared across sweep values (common random numbers), so
        // curve differences are not drowned by between-value noise
        parallel_for(cfg.worlds, cfg.threads, [&](std::size_t wi) {
            const std::uint64_t wseed = derive_seed(cfg.seed, "sweep-world", wi);
            GaussianEnv env(spec, cfg.n_units, cfg.horizon, wseed);
            const auto w1 = TreatmentMatrix::all_level(cfg.n_units, cfg.horizon, true);
            const auto w0 = TreatmentMatrix::all_level(cfg.n_units, cfg.horizon, false);
            const auto p1 = env.simulate(w1);
            const auto p0 = env.simulate(w0);
            gt[wi] = compute_tte(p1, p0, 1); // final period
            for (std::size_t r = 0; r < cfg.resamples; ++r) {
                const auto w = generate_staggered_design(cfg.n_units, cfg.design,
                                                         derive_seed(wseed, "resample", r));
                const auto obs = env.simulate(w, nullptr, r + 1);
                est[wi][r] = dm(obs, w, 1);
            }
        });

        const auto point = harness_detail::decompose(gt, est);

        // nested bootstrap: resample worlds, then runs within each world
        Rng boot(derive_seed(cfg.seed, "nested-boot", vi));
        std::vector<double> bs_mse, bs_var, bs_bias;
        bs_mse.reserve(cfg.nested_boot);
        for (std::size_t b = 0; b < cfg.nested_boot; ++b) {
            std::vector<double> g2(cfg.worlds);
            std::vector<std::vector<double>> e2(cfg.worlds, std::vector<double>(cfg.resamples));
            for (std::size_t w = 0; w < cfg.worlds; ++w) {
                const auto pick = static_cast<std::size_t>(boot.below(cfg.worlds));
                g2[w] = gt[pick];
                for (std::size_t r = 0; r < cfg.resamples; ++r)
                    e2[w][r] = est[pick][static_cast<std::size_t>(boot.below(cfg.resamples))];
            }
            const auto s = harness_detail::decompose(g2, e2);
            bs_mse.push_back(s.mse);
            bs_var.push_back(s.variance);
            bs_bias.push_back(s.sq_bias);
        }
        auto sd_of = [](const std::vector<double>& xs) {
            double m = 0.0;
            for (double x : xs) m += x;
            m /= static_cast<double>(xs.size());
            double s = 0.0;
            for (double x : xs) s += (x - m) * (x - m);
            return xs.size() > 1 ? std::sqrt(s / static_cast<double>(xs.size() - 1)) : 0.0;
        };

        SweepRow row;
        row.value = v;
        row.mse = point.mse;
        row.variance = point.variance;
        row.sq_bias = point.sq_bias;
        row.mse_se = sd_of(bs_mse);
        row.var_se = sd_of(bs_var);
        row.bias_se = sd_of(bs_bias);
        out.rows.push_back(row);
        out.table.add_row({row.value, row.mse, row.variance, row.sq_bias, row.mse_se, row.var_se,
                           row.bias_se});
    }

    out.metadata["sweep_param"] = cfg.sweep_param == SweepConfig::Param::Mu ? "mu" : "sigma";
    out.metadata["fixed_value"] = cfg.fixed_value;
    out.metadata["worlds"] = cfg.worlds;
    out.metadata["resamples"] = cfg.resamples;
    out.metadata["nested_boot"] = cfg.nested_boot;
    out.metadata["seed"] = cfg.seed;
    if (cfg.worlds < 100 || cfg.resamples < 200 || cfg.nested_boot < 400)
        out.metadata["scale_note"] =
            "reduced-scale counts; full-scale experiments use 100 worlds, 200 resamples, 400 nested";
    return out;
}

} // namespace netcf
