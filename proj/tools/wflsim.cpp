// wflsim: wireless federated-learning simulator CLI.
//
// Subcommands: simulate, sweep, optimize-n, bounds, divergence, gen-config.
// Exit codes: 0 success, 1 configuration error, 2 runtime/divergence error.
// Environment: WFLSIM_DATA_DIR overrides the dataset directory,
// WFLSIM_THREADS caps worker threads (1 = fully serial).

#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wfl/analysis.hpp"
#include "wfl/config.hpp"
#include "wfl/csv.hpp"
#include "wfl/harness.hpp"
#include "wfl/optimizer.hpp"

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void write_table(const wfl::CsvTable& table, const std::string& out) {
    if (out == "-")
        std::cout << wfl::csv_to_string(table);
    else
        wfl::write_csv(table, out);
}

wfl::CsvTable bounds_header() {
    wfl::CsvTable t;
    t.header = {"K",        "N",        "p_min",       "p_max",    "zeta1_mc", "zeta1_se",
                "zeta1_bound", "zeta2_mc", "zeta2_se", "zeta2_bound", "gap_lower"};
    return t;
}

void push_bounds_row(wfl::CsvTable& t, const wfl::BoundConstants& c, double z1_mc, double z1_se,
                     double z2_mc, double z2_se) {
    double p_min = 1.0, p_max = 0.0;
    for (double p : c.probs) {
        p_min = std::min(p_min, p);
        p_max = std::max(p_max, p);
    }
    const double z1 = wfl::zeta_bound_gomore(c);
    const double z2 = wfl::zeta_bound_dds(c);
    double gap = kNan;
    if (c.small_lr())
        gap = wfl::theorem_gap_lower(c);
    else
        std::cerr << "note: eta > G/(T*gamma); gap lower bound not valid, writing nan\n";
    t.rows.push_back({std::to_string(c.k_devices), std::to_string(c.n_participating),
                      wfl::format_g9(p_min), wfl::format_g9(p_max), wfl::format_g9(z1_mc),
                      wfl::format_g9(z1_se), wfl::format_g9(z1), wfl::format_g9(z2_mc),
                      wfl::format_g9(z2_se), wfl::format_g9(z2), wfl::format_g9(gap)});
}

/// Evenly spread device probabilities in [p_min, p_max].
std::vector<double> spread_probs(int k, double p_min, double p_max) {
    std::vector<double> probs(k);
    for (int i = 0; i < k; ++i)
        probs[i] = k == 1 ? p_min : p_min + (p_max - p_min) * i / (k - 1);
    return probs;
}

/// Planar ring of quadratic-family centers (radius = scale), zero-padded to
/// `dim`. Fixed geometry keeps the norm constants analytic and the CLI
/// output reproducible.
wfl::ModelSpec ring_quadratic(int k, int dim, double scale) {
    if (dim < 2) throw wfl::config_error("quadratic dimension must be >= 2 for the ring layout");
    std::vector<wfl::ParamVector> centers(k, wfl::ParamVector(dim, 0.0));
    for (int i = 0; i < k; ++i) {
        const double angle = 2.0 * M_PI * i / k;
        centers[i][0] = scale * std::cos(angle);
        centers[i][1] = scale * std::sin(angle);
    }
    return wfl::make_quadratic(wfl::ParamVector(dim, 0.0), std::move(centers));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "wflsim: federated-learning-over-lossy-uplinks simulator.\n"
        "Compares direct-discard and stale-substitution aggregation, checks the\n"
        "divergence bounds by Monte Carlo, and plans the participating-device count.\n"
        "Env: WFLSIM_DATA_DIR (dataset directory), WFLSIM_THREADS (worker cap)."};
    app.require_subcommand(1);

    // ---- simulate ----
    auto* sim = app.add_subcommand("simulate", "run one experiment and emit per-round CSV");
    std::string sim_config, sim_out = "-", sim_data_dir;
    std::uint64_t sim_seed = 0;
    bool sim_seed_set = false, sim_zero_wall = false;
    int sim_rounds = -1, sim_trial = 0, sim_participating = 0;
    sim->add_option("--config", sim_config, "experiment config JSON (omit for built-in defaults)");
    sim->add_option("--out", sim_out, "output CSV path, '-' for stdout")->capture_default_str();
    sim->add_option("--seed", sim_seed, "override seed.master")->each([&](const std::string&) {
        sim_seed_set = true;
    });
    sim->add_option("--trial", sim_trial, "trial index within the seed family")
        ->capture_default_str();
    sim->add_option("--rounds", sim_rounds, "override hyper.rounds");
    sim->add_option("--participating", sim_participating, "override devices.participating");
    sim->add_option("--data-dir", sim_data_dir, "override data.dir");
    sim->add_flag("--zero-walltime", sim_zero_wall,
                  "write wall_time as 0 for byte-stable output");

    // ---- sweep ----
    auto* swp = app.add_subcommand("sweep", "run a grid over one axis, summarize final rounds");
    std::string swp_config, swp_out = "-", swp_axis;
    std::vector<double> swp_grid;
    int swp_trials = 0;
    swp->add_option("--config", swp_config, "experiment config JSON (omit for built-in defaults)");
    swp->add_option("--axis", swp_axis, "power_dbm | n_participating | snr_threshold_db");
    swp->add_option("--grid", swp_grid, "axis values")->delimiter(',');
    swp->add_option("--trials", swp_trials, "override seed.trials");
    swp->add_option("--out", swp_out, "output CSV path, '-' for stdout")->capture_default_str();

    // ---- optimize-n ----
    auto* opt = app.add_subcommand("optimize-n", "plan the participating-device count");
    int opt_k = 20;
    double opt_rho = 0.0, opt_payload = 1628480.0, opt_delay = 1.5, opt_bandwidth = 1e6;
    double opt_power_dbm = 20.0, opt_noise_dbm = -174.0, opt_ref_gain = 1e-3, opt_alpha = 2.2;
    std::vector<double> opt_distances, opt_lambdas;
    std::string opt_out = "-";
    opt->add_option("--k", opt_k, "total device count K")->capture_default_str();
    opt->add_option("--rho", opt_rho, "rate budget (overrides payload/delay/bandwidth)");
    opt->add_option("--payload-bits", opt_payload, "upload payload in bits")->capture_default_str();
    opt->add_option("--delay-s", opt_delay, "delay budget in seconds")->capture_default_str();
    opt->add_option("--bandwidth-hz", opt_bandwidth, "bandwidth in Hz")->capture_default_str();
    opt->add_option("--distances", opt_distances, "device distances in meters")->delimiter(',');
    opt->add_option("--lambda-list", opt_lambdas, "device channel statistics (overrides distances)")
        ->delimiter(',');
    opt->add_option("--power-dbm", opt_power_dbm, "transmit power")->capture_default_str();
    opt->add_option("--noise-dbm-hz", opt_noise_dbm, "noise density")->capture_default_str();
    opt->add_option("--ref-gain", opt_ref_gain, "reference channel gain |h0|^2")
        ->capture_default_str();
    opt->add_option("--alpha", opt_alpha, "path-loss exponent")->capture_default_str();
    opt->add_option("--out", opt_out, "objective curve CSV path, '-' for stdout")
        ->capture_default_str();

    // ---- bounds ----
    auto* bnd = app.add_subcommand("bounds", "evaluate the divergence bounds analytically");
    int bnd_k = 4, bnd_n = 2, bnd_t = 10;
    double bnd_eta = 0.01, bnd_gamma_sq = 4.0, bnd_g_sq = 1.0, bnd_p = 0.0;
    double bnd_p_min = 0.5, bnd_p_max = 0.9;
    std::string bnd_out = "-";
    bnd->add_option("--k", bnd_k, "total device count K")->capture_default_str();
    bnd->add_option("--n", bnd_n, "participating devices N")->capture_default_str();
    bnd->add_option("--eta", bnd_eta, "learning rate")->capture_default_str();
    bnd->add_option("--t-local", bnd_t, "local steps T")->capture_default_str();
    bnd->add_option("--gamma-sq", bnd_gamma_sq, "gradient-norm constant")->capture_default_str();
    bnd->add_option("--g-sq", bnd_g_sq, "parameter-norm constant")->capture_default_str();
    bnd->add_option("--p", bnd_p, "uniform error-free probability (overrides --p-min/--p-max)");
    bnd->add_option("--p-min", bnd_p_min, "lowest device probability")->capture_default_str();
    bnd->add_option("--p-max", bnd_p_max, "highest device probability")->capture_default_str();
    bnd->add_option("--out", bnd_out, "output CSV path, '-' for stdout")->capture_default_str();

    // ---- divergence ----
    auto* dvg = app.add_subcommand(
        "divergence", "Monte-Carlo divergence vs. bounds on the quadratic family");
    int dvg_k = 4, dvg_n = 2, dvg_t = 10, dvg_dim = 2;
    long dvg_trials = 10000;
    double dvg_eta = 0.01, dvg_scale = 1.0, dvg_p = 0.0, dvg_p_min = 0.5, dvg_p_max = 0.9;
    std::uint64_t dvg_seed = 1;
    std::string dvg_out = "-";
    dvg->add_option("--k", dvg_k, "total device count K")->capture_default_str();
    dvg->add_option("--n", dvg_n, "participating devices N")->capture_default_str();
    dvg->add_option("--eta", dvg_eta, "learning rate")->capture_default_str();
    dvg->add_option("--t-local", dvg_t, "local steps T")->capture_default_str();
    dvg->add_option("--dim", dvg_dim, "parameter dimension")->capture_default_str();
    dvg->add_option("--center-scale", dvg_scale, "ring radius of the centers")
        ->capture_default_str();
    dvg->add_option("--p", dvg_p, "uniform error-free probability (overrides --p-min/--p-max)");
    dvg->add_option("--p-min", dvg_p_min, "lowest device probability")->capture_default_str();
    dvg->add_option("--p-max", dvg_p_max, "highest device probability")->capture_default_str();
    dvg->add_option("--trials", dvg_trials, "Monte-Carlo trials")->capture_default_str();
    dvg->add_option("--seed", dvg_seed, "master seed")->capture_default_str();
    dvg->add_option("--out", dvg_out, "output CSV path, '-' for stdout")->capture_default_str();

    // ---- gen-config ----
    auto* gen = app.add_subcommand("gen-config", "write a defaults config file");
    std::string gen_out = "config.json";
    bool gen_synth = false;
    gen->add_option("--out", gen_out, "where to write the config")->capture_default_str();
    gen->add_flag("--synthetic", gen_synth, "synthetic-data variant instead of MNIST files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;  // bad invocation is a configuration error
    }

    try {
        if (app.got_subcommand(sim)) {
            wfl::ExperimentConfig cfg =
                sim_config.empty() ? wfl::default_config() : wfl::load_config(sim_config);
            if (sim_seed_set) cfg.master_seed = sim_seed;
            if (sim_rounds >= 0) cfg.hp.rounds = sim_rounds;
            if (sim_participating > 0) {
                cfg.n_participating = sim_participating;
                cfg.auto_n = false;
            }
            if (!sim_data_dir.empty()) cfg.data_dir = sim_data_dir;
            if (sim_zero_wall) cfg.record_walltime = false;
            const std::vector<wfl::RunRecord> records = wfl::run_experiment(cfg, sim_trial);
            write_table(wfl::records_to_csv(records), sim_out);
        } else if (app.got_subcommand(swp)) {
            wfl::ExperimentConfig cfg =
                swp_config.empty() ? wfl::default_config() : wfl::load_config(swp_config);
            if (swp_trials > 0) cfg.n_trial_seeds = swp_trials;
            const std::string axis = swp_axis.empty() ? cfg.sweep_axis : swp_axis;
            const std::vector<double> grid = swp_grid.empty() ? cfg.sweep_grid : swp_grid;
            if (axis.empty() || grid.empty())
                throw wfl::config_error("sweep needs an axis and a grid (flags or config)");
            write_table(wfl::sweep(cfg, axis, grid), swp_out);
        } else if (app.got_subcommand(opt)) {
            std::vector<double> lambdas = opt_lambdas;
            if (lambdas.empty()) {
                wfl::RadioConstants radio;
                radio.transmit_power_w = wfl::dbm_to_watts(opt_power_dbm);
                radio.noise_density_w_per_hz = wfl::dbm_to_watts(opt_noise_dbm);
                radio.ref_gain = opt_ref_gain;
                radio.pathloss_exp = opt_alpha;
                radio.bandwidth_hz = opt_bandwidth;
                std::vector<double> distances = opt_distances;
                if (distances.empty()) {
                    distances.resize(opt_k);
                    for (int k = 0; k < opt_k; ++k)
                        distances[k] = opt_k == 1 ? 100.0 : 100.0 + 400.0 * k / (opt_k - 1);
                }
                for (const wfl::DeviceLink& link : wfl::make_links(radio, distances))
                    lambdas.push_back(link.lambda);
            }
            if (static_cast<int>(lambdas.size()) != opt_k)
                throw wfl::config_error("need one distance/lambda per device (K = " +
                                        std::to_string(opt_k) + ")");
            const double rho =
                opt_rho > 0 ? opt_rho : opt_payload / (opt_bandwidth * opt_delay);
            const wfl::ActivationPlan plan = wfl::optimize_participation(lambdas, rho, opt_k);
            wfl::CsvTable curve;
            curve.header = {"n", "objective"};
            for (int n = 1; n <= opt_k; ++n)
                curve.rows.push_back({std::to_string(n),
                                      wfl::format_g9(plan.objective_values[n - 1])});
            write_table(curve, opt_out);
            std::cout << "best_n=" << plan.best_n << "\n";
        } else if (app.got_subcommand(bnd)) {
            wfl::BoundConstants c;
            c.k_devices = bnd_k;
            c.n_participating = bnd_n;
            c.eta = bnd_eta;
            c.local_epochs = bnd_t;
            c.gamma_sq = bnd_gamma_sq;
            c.g_sq = bnd_g_sq;
            c.probs = bnd_p > 0 ? std::vector<double>(bnd_k, bnd_p)
                                : spread_probs(bnd_k, bnd_p_min, bnd_p_max);
            wfl::CsvTable table = bounds_header();
            push_bounds_row(table, c, kNan, kNan, kNan, kNan);
            write_table(table, bnd_out);
        } else if (app.got_subcommand(dvg)) {
            const wfl::ModelSpec model = ring_quadratic(dvg_k, dvg_dim, dvg_scale);
            std::vector<wfl::DevicePartition> partitions(dvg_k);
            for (int k = 0; k < dvg_k; ++k) partitions[k].device_id = k;

            wfl::RoundContext ctx;
            ctx.model = &model;
            ctx.partitions = &partitions;
            ctx.hp.learning_rate = dvg_eta;
            ctx.hp.local_epochs = dvg_t;
            ctx.probs = dvg_p > 0 ? std::vector<double>(dvg_k, dvg_p)
                                  : spread_probs(dvg_k, dvg_p_min, dvg_p_max);
            ctx.n_participating = dvg_n;

            const wfl::ConstantsEstimate consts =
                wfl::estimate_constants(model, partitions, nullptr, ctx.hp, 1, {dvg_seed, 0});
            wfl::BoundConstants c;
            c.gamma_sq = consts.gamma_sq;
            c.g_sq = consts.g_sq;
            c.eta = dvg_eta;
            c.local_epochs = dvg_t;
            c.k_devices = dvg_k;
            c.n_participating = dvg_n;
            c.probs = ctx.probs;

            const wfl::PairedDivergence mc = wfl::estimate_divergence_paired(
                ctx, model.quad_w0, dvg_trials, wfl::RngSpec{dvg_seed, 0});
            wfl::CsvTable table = bounds_header();
            push_bounds_row(table, c, mc.gomore.mean, mc.gomore.std_err, mc.dds.mean,
                            mc.dds.std_err);
            write_table(table, dvg_out);
        } else if (app.got_subcommand(gen)) {
            wfl::ExperimentConfig cfg = wfl::default_config();
            if (gen_synth) {
                cfg.source = wfl::DataSource::synthetic;
                cfg.mlp_layers = {cfg.synth.n_features, 32, cfg.synth.n_classes};
            }
            wfl::save_config(cfg, gen_out);
            std::cout << "wrote " << gen_out << "\n";
        }
    } catch (const wfl::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
