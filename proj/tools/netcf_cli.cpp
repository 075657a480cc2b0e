// Command-line front end: simulate environments, run estimators, CCV model
// selection, the DM bias/variance sweep, and full benchmark runs.

#include "netcf/netcf.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace netcf;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    std::size_t threads = 1;
    std::string format = "csv";
};

json load_config(const GlobalOpts& g) {
    if (g.config_path.empty()) throw ConfigError("--config <file> is required");
    return load_json_file(g.config_path);
}

EnvConfig env_from(const json& cfg, const GlobalOpts& g) {
    auto it = cfg.find("env");
    if (it == cfg.end()) throw ConfigError("config: missing /env section");
    EnvConfig env = env_config_from_json(*it);
    if (g.seed) env.seed = *g.seed;
    return env;
}

ExperimentDesign design_from(const json& cfg) {
    auto it = cfg.find("design");
    if (it == cfg.end()) throw ConfigError("config: missing /design section");
    return design_from_json(*it);
}

std::vector<CandidateConfig> grid_from(const json& cfg, std::size_t n_units) {
    auto ccv = cfg.find("ccv");
    if (ccv == cfg.end()) throw ConfigError("config: missing /ccv section");
    std::vector<CandidateConfig> grid;

    if (auto cands = ccv->find("candidates"); cands != ccv->end()) {
        if (!cands->is_array() || cands->empty())
            throw ConfigError("config: /ccv/candidates must be a nonempty array");
        std::size_t k = 0;
        for (const auto& cj : *cands) {
            auto c = candidate_from_json(cj, "/ccv/candidates[" + std::to_string(k++) + "]");
            if (c.batch.batch_size == 0) {
                const double frac = cj.value("batch_size_frac", 0.2);
                c.batch.batch_size = std::max<std::size_t>(
                    1, static_cast<std::size_t>(frac * static_cast<double>(n_units)));
            }
            grid.push_back(std::move(c));
        }
        return grid;
    }

    // cross-product grid: estimators x lags x sizes x counts x alphas
    auto gj = ccv->find("grid");
    if (gj == ccv->end())
        throw ConfigError("config: /ccv needs either /candidates or /grid");
    const auto estimators = gj->value("estimators", std::vector<std::string>{"fo-rec"});
    const auto lags = gj->value("lags", std::vector<std::size_t>{1});
    const auto fracs = gj->value("batch_size_fracs", std::vector<double>{0.2});
    const auto counts = gj->value("batch_counts", std::vector<std::size_t>{100});
    const auto alphas = gj->value("alphas", std::vector<double>{1e-2});
    const auto features = gj->value("features", std::string("quadratic")); // ho-rec only
    const auto moment_order = gj->value("moment_order", std::size_t{2});
    for (const auto& est : estimators)
        for (std::size_t lag : lags)
            for (double frac : fracs)
                for (std::size_t count : counts)
                    for (double alpha : alphas) {
                        CandidateConfig c;
                        c.estimator = estimator_id_from_string(est);
                        c.lag = lag;
                        c.batch.batch_size = std::max<std::size_t>(
                            1, static_cast<std::size_t>(frac * static_cast<double>(n_units)));
                        c.batch.batch_count = count;
                        c.alpha = alpha;
                        if (c.estimator == EstimatorId::HoRec) {
                            if (features == "linear")
                                c.features = FeatureSpec::linear(moment_order);
                            else if (features == "quadratic")
                                c.features = FeatureSpec::default_quadratic(moment_order);
                            else
                                throw ConfigError("config: unknown /ccv/grid/features family");
                        }
                        grid.push_back(c);
                    }
    if (grid.empty()) throw ConfigError("config: /ccv/grid produced no candidates");
    return grid;
}

void write_out(const GlobalOpts& g, const std::string& name, const Table& t) {
    fs::create_directories(g.out_dir);
    const auto path = (fs::path(g.out_dir) / (name + "." + g.format)).string();
    export_table(t, path, g.format);
    std::cout << "wrote " << path << "\n";
}

void write_json_out(const GlobalOpts& g, const std::string& name, const json& j) {
    fs::create_directories(g.out_dir);
    const auto path = (fs::path(g.out_dir) / (name + ".json")).string();
    write_text_file(path, j.dump(2) + "\n");
    std::cout << "wrote " << path << "\n";
}

int cmd_simulate(const GlobalOpts& g) {
    const auto cfg = load_config(g);
    const auto env = env_from(cfg, g);
    const auto design = design_from(cfg);
    if (design.total_horizon() != env.horizon)
        throw ConfigError("config: design horizon differs from env horizon");
    const auto w = generate_staggered_design(env.n_units, design, env.seed);
    const auto panel = simulate(env, w);

    fs::create_directories(g.out_dir);
    json meta;
    meta["env_kind"] = to_string(env.kind);
    meta["design_stage_lengths"] = design.stage_lengths;
    meta["design_stage_probs"] = design.stage_probs;
    if (g.format == "json") {
        write_json_out(g, "panel", panel_envelope(panel, env.seed, meta));
        write_json_out(g, "treatment", treatment_envelope(w, env.seed, meta));
    } else {
        std::ofstream pf(fs::path(g.out_dir) / "panel.csv");
        write_panel_csv(panel, pf);
        std::cout << "wrote " << (fs::path(g.out_dir) / "panel.csv").string() << "\n";
        std::ofstream wf(fs::path(g.out_dir) / "treatment.csv");
        write_treatment_csv(w, wf);
        std::cout << "wrote " << (fs::path(g.out_dir) / "treatment.csv").string() << "\n";
    }
    return 0;
}

int cmd_tte(const GlobalOpts& g) {
    const auto cfg = load_config(g);
    const auto env = env_from(cfg, g);
    std::size_t L = env.horizon;
    if (auto b = cfg.find("benchmark"); b != cfg.end() && b->contains("tte_window"))
        L = b->at("tte_window").get<std::size_t>();
    else if (auto d = cfg.find("design"); d != cfg.end())
        L = design_from(cfg).stage_lengths.back();
    const auto w1 = TreatmentMatrix::all_level(env.n_units, env.horizon, true);
    const auto w0 = TreatmentMatrix::all_level(env.n_units, env.horizon, false);
    const auto [p1, p0] = ground_truth_pair(env, w1, w0);
    const double tte = compute_tte(p1, p0, L);
    std::cout << "ground-truth TTE (all-treat vs all-control, window L=" << L
              << "): " << format_number(tte) << "\n";
    return 0;
}

int cmd_estimate(const GlobalOpts& g, const std::string& estimator, std::size_t lag, double alpha,
                 const std::string& target, std::size_t batch_size, std::size_t batch_count) {
    const auto cfg = load_config(g);
    const auto env = env_from(cfg, g);
    const auto design = design_from(cfg);
    const auto w = generate_staggered_design(env.n_units, design, env.seed);
    const auto panel = simulate(env, w);

    CandidateConfig cand;
    cand.estimator = estimator_id_from_string(estimator);
    cand.lag = lag;
    cand.alpha = alpha;
    cand.batch.batch_size = batch_size ? batch_size : std::max<std::size_t>(1, env.n_units / 5);
    cand.batch.batch_count = batch_count;

    const bool treat = target == "all-treat";
    if (!treat && target != "all-control")
        throw ConfigError("--target must be all-treat or all-control");
    const auto wt = TreatmentMatrix::all_level(env.n_units, env.horizon, treat);
    const auto est = estimate_with_candidate(cand, panel, w, wt, env.seed);

    Table t;
    t.columns = {"t", "observed_mean", "estimate"};
    const auto obs = panel.column_means();
    for (std::size_t tt = 0; tt <= env.horizon; ++tt)
        t.add_row({static_cast<double>(tt), obs[tt], est.pop[tt]});
    write_out(g, "estimate", t);
    write_json_out(g, "estimate_series", estimate_series_to_json(est));

    // fitted coefficients with their column order, for audit
    if (cand.estimator == EstimatorId::FoSemi || cand.estimator == EstimatorId::FoRec ||
        cand.estimator == EstimatorId::Detrend) {
        Rng brng(derive_seed(env.seed, "estimate-batches"));
        const auto train = create_training_batches(w, cand.batch, brng);
        const auto fit = fo_recursive(panel, w, wt, Batch::full(env.n_units), train, cand.lag,
                                      cand.alpha);
        if (fit.params.ill_conditioned)
            std::cerr << "warning: normal equations condition number "
                      << format_number(fit.params.fit_condition)
                      << " exceeds 1e12; consider a larger --alpha\n";
        write_json_out(g, "estimate_params", separams_to_json(fit.params));
    }
    return 0;
}

int cmd_ccv(const GlobalOpts& g) {
    const auto cfg = load_config(g);
    const auto env = env_from(cfg, g);
    const auto design = design_from(cfg);
    const auto grid = grid_from(cfg, env.n_units);
    std::size_t b_v = 2, n_blocks = 3;
    if (auto c = cfg.find("ccv"); c != cfg.end()) {
        b_v = c->value("b_v", b_v);
        n_blocks = c->value("blocks", n_blocks);
    }
    const auto w = generate_staggered_design(env.n_units, design, env.seed);
    const auto panel = simulate(env, w);
    const auto vb = create_validation_batches(w, b_v);
    const auto blocks = TimeBlocks::equal(env.horizon + 1, n_blocks);
    const auto res = run_ccv(panel, w, grid, blocks, vb, mse_loss, env.seed, g.threads);

    Table t;
    t.columns = {"candidate", "loss", "selected"};
    for (std::size_t i = 0; i < grid.size(); ++i)
        t.add_row({static_cast<double>(i), res.losses[i], i == res.selected ? 1.0 : 0.0});
    write_out(g, "ccv_losses", t);

    json sel;
    sel["selected_index"] = res.selected;
    sel["selected_label"] = grid[res.selected].label();
    json diags = json::array();
    for (const auto& d : res.diagnostics) diags.push_back(d);
    sel["diagnostics"] = diags;
    write_json_out(g, "ccv_selection", sel);

    Table est;
    est.columns = {"batch", "t", "truth", "estimate"};
    const auto truth = reference_truth(panel, vb);
    for (std::size_t j = 0; j < vb.size(); ++j)
        for (std::size_t tt = 0; tt <= env.horizon; ++tt)
            est.add_row({static_cast<double>(j), static_cast<double>(tt), truth[j][tt],
                         res.estimates[res.selected][j][tt]});
    write_out(g, "ccv_estimates", est);
    return 0;
}

int cmd_dm_sweep(const GlobalOpts& g) {
    const auto cfg = load_config(g);
    auto s = cfg.find("sweep");
    if (s == cfg.end()) throw ConfigError("config: missing /sweep section");
    SweepConfig sc;
    const std::string param = s->value("param", std::string("sigma"));
    sc.sweep_param = param == "mu" ? SweepConfig::Param::Mu : SweepConfig::Param::Sigma;
    sc.fixed_value = s->value("fixed_value", sc.fixed_value);
    sc.values = s->value("values", std::vector<double>{});
    sc.worlds = s->value("worlds", sc.worlds);
    sc.resamples = s->value("resamples", sc.resamples);
    sc.nested_boot = s->value("nested_boot", sc.nested_boot);
    sc.n_units = s->value("n_units", sc.n_units);
    sc.horizon = s->value("horizon", sc.horizon);
    sc.noise_sd = s->value("noise_sd", sc.noise_sd);
    if (auto d = cfg.find("design"); d != cfg.end()) sc.design = design_from(cfg);
    sc.seed = g.seed.value_or(s->value("seed", 0));
    sc.threads = g.threads;

    const auto res = dm_sweep(sc);
    write_out(g, "dm_sweep", res.table);
    write_json_out(g, "dm_sweep_meta", res.metadata);
    return 0;
}

int cmd_benchmark(const GlobalOpts& g, bool raw_runs) {
    const auto cfg = load_config(g);
    BenchmarkConfig bc;
    bc.env = env_from(cfg, g);
    bc.design = design_from(cfg);
    bc.grid = grid_from(cfg, bc.env.n_units);
    if (auto b = cfg.find("benchmark"); b != cfg.end()) {
        bc.runs = b->value("runs", bc.runs);
        bc.tte_window = b->value("tte_window", bc.tte_window);
    }
    if (auto c = cfg.find("ccv"); c != cfg.end()) {
        bc.b_v = c->value("b_v", bc.b_v);
        bc.n_blocks = c->value("blocks", bc.n_blocks);
    }
    bc.seed = g.seed.value_or(bc.env.seed);
    bc.threads = g.threads;

    const auto res = run_benchmark(bc);
    write_out(g, "benchmark_aggregates", res.aggregates);
    write_json_out(g, "benchmark_meta", res.metadata);
    if (raw_runs) write_out(g, "benchmark_runs", res.per_run);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"counterfactual estimation and validation under network interference"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "config file (JSON)");
    std::uint64_t seed_opt = 0;
    auto* seed_flag = app.add_option("--seed", seed_opt, "master seed override");
    app.add_option("--out", g.out_dir, "output directory");
    app.add_option("--threads", g.threads, "worker threads");
    app.add_option("--format", g.format, "output format: csv or json")
        ->check(CLI::IsMember({"csv", "json"}));

    auto* sim = app.add_subcommand("simulate", "simulate an environment under a staggered design");
    auto* est = app.add_subcommand("estimate", "counterfactual estimate from one estimator");
    std::string est_id = "fo-rec", est_target = "all-treat";
    std::size_t est_lag = 1, est_bs = 0, est_bc = 20;
    double est_alpha = 1e-2;
    est->add_option("--estimator", est_id, "bcmp | fo-semi | fo-rec | ho-rec | detrend");
    est->add_option("--lag", est_lag, "lag order l");
    est->add_option("--alpha", est_alpha, "ridge penalty");
    est->add_option("--target", est_target, "all-treat | all-control");
    est->add_option("--batch-size", est_bs, "training batch size (default n/5)");
    est->add_option("--batch-count", est_bc, "training batch count");
    auto* ccv = app.add_subcommand("ccv", "counterfactual cross-validation over the config grid");
    auto* sweep = app.add_subcommand("dm-sweep", "DM bias/variance decomposition sweep");
    auto* bench = app.add_subcommand("benchmark", "full pipeline: simulate, CCV, estimate, compare");
    bool bench_raw = false;
    bench->add_flag("--raw", bench_raw, "also export the raw per-run table");
    auto* tte = app.add_subcommand("tte", "ground-truth TTE from paired simulation");

    CLI11_PARSE(app, argc, argv);
    if (!seed_flag->empty()) g.seed = seed_opt;

    try {
        if (sim->parsed()) return cmd_simulate(g);
        if (est->parsed()) return cmd_estimate(g, est_id, est_lag, est_alpha, est_target, est_bs, est_bc);
        if (ccv->parsed()) return cmd_ccv(g);
        if (sweep->parsed()) return cmd_dm_sweep(g);
        if (bench->parsed()) return cmd_benchmark(g, bench_raw);
        if (tte->parsed()) return cmd_tte(g);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
