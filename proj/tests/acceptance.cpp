// Acceptance gates for the simulator, one per release-blocking claim:
//
//   1  closed forms match independent long-double evaluators
//   2  Monte-Carlo divergence sits under the analytic bounds
//   3  the bound gap is positive, ordered, and vanishes as links clean up
//   4  paired Monte Carlo separates the two lossy rules beyond 3 sigma
//   5  the participation planner predicts the empirical accuracy peak
//   6  stale substitution beats discarding end to end on the image task
//   7  stale substitution reaches a target accuracy at >= 5 dB less power
//   8  every criterion above reproduces its CSV byte for byte when re-run
//
// Each criterion prints exactly one PASS/FAIL line; the binary exits
// nonzero if any requested criterion fails or overruns its wall budget.
// Run from the repository root so data/mnist resolves.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "wfl/harness.hpp"

#include "oracles.hpp"

namespace {

using namespace wfl;

struct CriterionResult {
    bool pass = false;
    std::string detail;
    std::string csv;
};

/// Planar ring of quadratic centers (radius = scale), zero-padded to dim.
ModelSpec ring_model(int k, int dim, double scale) {
    std::vector<ParamVector> centers(k, ParamVector(dim, 0.0));
    for (int i = 0; i < k; ++i) {
        const double angle = 2.0 * M_PI * i / k;
        centers[i][0] = scale * std::cos(angle);
        centers[i][1] = scale * std::sin(angle);
    }
    return make_quadratic(ParamVector(dim, 0.0), std::move(centers));
}

double rel_err(double ours, long double theirs) {
    const long double m = std::max<long double>(std::fabs(ours), fabsl(theirs));
    if (m < 1e-280L) return 0.0;
    return static_cast<double>(fabsl(ours - theirs) / m);
}

double final_accuracy(const std::vector<RunRecord>& records, StrategyId s) {
    for (auto it = records.rbegin(); it != records.rend(); ++it)
        if (it->strategy == s) return it->test_accuracy;
    throw config_error("no records for requested strategy");
}

double mean_of(const std::vector<double>& xs) {
    double m = 0;
    for (double x : xs) m += x;
    return m / xs.size();
}

std::string fmt1(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", x);
    return buf;
}

// ---- criterion 1: formula exactness against the reference evaluators ----

CriterionResult criterion_formula_exactness() {
    StreamRng gen(RngSpec{8101, 0});
    const int n_points = 1000;
    // worst relative error per function, in declaration order
    double worst[5] = {0, 0, 0, 0, 0};

    // Sampling note: channel-dependent points are drawn by the per-device
    // exponent u = lambda*(2^(rho*N)-1)/N rather than by lambda, keeping u in
    // a window where the composed formulas retain enough magnitude that a
    // 1e-12 relative comparison of double against long double is meaningful.
    // Outside it (p within ~1e-7 of 1 at N = 1, exponents past ~600) the
    // difference is pure representation noise; those edges are pinned by the
    // channel unit tests with fit-for-purpose tolerances.
    for (int i = 0; i < n_points; ++i) {
        {
            // channel success probability, including the overflow-guard region
            if (i % 5 == 0) {
                const double lambda = std::exp(gen.uniform(std::log(1e-9), std::log(1.0)));
                const double rho = gen.uniform(30.0, 60.0);
                const int n = 1 + static_cast<int>(gen.uniform_int(40));
                const double ours = error_free_prob_rate(lambda, RateParams{rho, n});
                worst[0] = std::max(worst[0], rel_err(ours, oracle::p_rate(lambda, rho, n)));
            } else {
                const double rho = gen.uniform(0.05, 3.0);
                const int n = 1 + static_cast<int>(gen.uniform_int(40));
                const double theta_over_n = (std::exp2(rho * n) - 1.0) / n;
                const double u = (i % 7 == 0)
                                     ? 0.0
                                     : std::exp(gen.uniform(std::log(1e-9), std::log(100.0)));
                const double lambda = u / theta_over_n;
                const double ours = error_free_prob_rate(lambda, RateParams{rho, n});
                worst[0] = std::max(worst[0], rel_err(ours, oracle::p_rate(lambda, rho, n)));
            }
        }
        {
            // the two divergence bounds and their guaranteed gap
            BoundConstants c;
            oracle::BoundInputs o;
            c.k_devices = o.k = 2 + static_cast<int>(gen.uniform_int(63));
            c.n_participating = o.n = 1 + static_cast<int>(gen.uniform_int(c.k_devices));
            c.local_epochs = 1 + static_cast<int>(gen.uniform_int(40));
            o.t_local = c.local_epochs;
            c.gamma_sq = o.gamma_sq = gen.uniform(0.01, 25.0);
            c.g_sq = o.g_sq = gen.uniform(0.01, 25.0);
            // keep the step small enough that the gap formula applies
            c.eta = gen.uniform(0.05, 0.999) * std::sqrt(c.g_sq) /
                    (c.local_epochs * std::sqrt(c.gamma_sq));
            o.eta = c.eta;
            c.probs.resize(c.k_devices);
            o.probs.resize(c.k_devices);
            for (int k = 0; k < c.k_devices; ++k) {
                c.probs[k] = gen.uniform(0.01, 1.0);
                o.probs[k] = c.probs[k];
            }
            worst[1] = std::max(worst[1], rel_err(zeta_bound_gomore(c), oracle::zeta1(o)));
            worst[2] = std::max(worst[2], rel_err(zeta_bound_dds(c), oracle::zeta2(o)));
            worst[3] = std::max(worst[3], rel_err(theorem_gap_lower(c), oracle::gap(o)));
        }
        {
            // participation objective
            const int k = 2 + static_cast<int>(gen.uniform_int(49));
            const int n = 1 + static_cast<int>(gen.uniform_int(k));
            const double rho = gen.uniform(0.05, 2.5);
            const double theta_over_n = (std::exp2(rho * n) - 1.0) / n;
            std::vector<double> lambdas(k);
            std::vector<long double> lambdas_l(k);
            for (int d = 0; d < k; ++d) {
                lambdas[d] = (gen.uniform01() < 0.1)
                                 ? 0.0
                                 : std::exp(gen.uniform(std::log(1e-3), std::log(50.0))) /
                                       theta_over_n;
                lambdas_l[d] = lambdas[d];
            }
            worst[4] = std::max(
                worst[4], rel_err(activation_objective(lambdas, rho, n, k),
                                  oracle::participation_objective(lambdas_l, rho, n, k)));
        }
    }

    static const char* names[5] = {"error_free_prob_rate", "zeta_bound_gomore",
                                   "zeta_bound_dds", "theorem_gap_lower",
                                   "activation_objective"};
    CsvTable t;
    t.header = {"function", "n_points", "max_rel_err"};
    bool pass = true;
    double overall = 0;
    int worst_f = 0;
    for (int f = 0; f < 5; ++f) {
        t.rows.push_back({names[f], std::to_string(n_points), format_g9(worst[f])});
        pass = pass && worst[f] < 1e-12;
        if (worst[f] > overall) {
            overall = worst[f];
            worst_f = f;
        }
    }
    CriterionResult res;
    res.pass = pass;
    res.detail = "5 closed forms x 1000 random points, max rel err " + format_g9(overall) +
                 " in " + names[worst_f] + " (tolerance 1e-12)";
    res.csv = csv_to_string(t);
    return res;
}

// ---- criteria 2 and 4: Monte-Carlo divergence vs. the bounds ----

struct LemmaCell {
    int k = 0, n = 0;
    double p = 0;
    double gamma_sq = 0, g_sq = 0;
    PairedDivergence mc;
    double bound1 = 0, bound2 = 0;
};

/// 27-cell grid on the exact-constant quadratic ring: K x p x N with
/// N in {1, K/2, K}, eta small enough that the gap regime applies.
std::vector<LemmaCell> lemma_grid(long n_trials) {
    const RngSpec root{20318, 0};
    std::vector<LemmaCell> cells;
    int idx = 0;
    for (int k : {2, 4, 8})
        for (double p : {0.3, 0.6, 0.9})
            for (int n : {1, k / 2, k}) {
                ModelSpec model = ring_model(k, 2, 1.0);
                std::vector<DevicePartition> partitions(k);
                for (int d = 0; d < k; ++d) partitions[d].device_id = d;
                HyperParams hp;
                hp.learning_rate = 0.02;
                hp.local_epochs = 10;

                RoundContext ctx;
                ctx.model = &model;
                ctx.partitions = &partitions;
                ctx.hp = hp;
                ctx.probs.assign(k, p);
                ctx.n_participating = n;

                const ConstantsEstimate consts =
                    estimate_constants(model, partitions, nullptr, hp, 1, root);
                BoundConstants c;
                c.gamma_sq = consts.gamma_sq;
                c.g_sq = consts.g_sq;
                c.eta = hp.learning_rate;
                c.local_epochs = hp.local_epochs;
                c.k_devices = k;
                c.n_participating = n;
                c.probs = ctx.probs;

                LemmaCell cell;
                cell.k = k;
                cell.n = n;
                cell.p = p;
                cell.gamma_sq = consts.gamma_sq;
                cell.g_sq = consts.g_sq;
                cell.mc = estimate_divergence_paired(
                    ctx, model.quad_w0, n_trials,
                    derive_stream(root, {stream::kTrial, std::uint64_t(idx)}));
                cell.bound1 = zeta_bound_gomore(c);
                cell.bound2 = zeta_bound_dds(c);
                cells.push_back(cell);
                ++idx;
            }
    return cells;
}

CriterionResult criterion_divergence_bounds() {
    const std::vector<LemmaCell> cells = lemma_grid(10000);
    CsvTable t;
    t.header = {"K",        "N",        "p",           "zeta1_mc", "zeta1_se", "zeta1_bound",
                "zeta2_mc", "zeta2_se", "zeta2_bound", "margin1",  "margin2"};
    bool pass = true;
    double worst1 = std::numeric_limits<double>::infinity(), worst2 = worst1;
    for (const LemmaCell& cell : cells) {
        // the estimate minus three standard errors must stay under the bound
        const double m1 = cell.bound1 - (cell.mc.gomore.mean - 3 * cell.mc.gomore.std_err);
        const double m2 = cell.bound2 - (cell.mc.dds.mean - 3 * cell.mc.dds.std_err);
        pass = pass && m1 >= 0 && m2 >= 0;
        worst1 = std::min(worst1, m1);
        worst2 = std::min(worst2, m2);
        t.rows.push_back({std::to_string(cell.k), std::to_string(cell.n), format_g9(cell.p),
                          format_g9(cell.mc.gomore.mean), format_g9(cell.mc.gomore.std_err),
                          format_g9(cell.bound1), format_g9(cell.mc.dds.mean),
                          format_g9(cell.mc.dds.std_err), format_g9(cell.bound2),
                          format_g9(m1), format_g9(m2)});
    }
    CriterionResult res;
    res.pass = pass;
    res.detail = "27 configs x 10000 trials; worst bound margins " + format_g9(worst1) +
                 " (stale-substitution) and " + format_g9(worst2) + " (discard)";
    res.csv = csv_to_string(t);
    return res;
}

CriterionResult criterion_paired_ordering() {
    const std::vector<LemmaCell> cells = lemma_grid(10000);
    CsvTable t;
    t.header = {"K", "N", "p", "diff_mean", "diff_se", "z"};
    bool pass = true;
    double min_z = std::numeric_limits<double>::infinity();
    int checked = 0;
    for (const LemmaCell& cell : cells) {
        if (cell.p > 0.6 + 1e-9) continue;  // ordering is only claimed for lossy links
        ++checked;
        const double z = cell.mc.diff_std_err > 0
                             ? cell.mc.diff_mean / cell.mc.diff_std_err
                             : (cell.mc.diff_mean > 0 ? std::numeric_limits<double>::infinity()
                                                      : 0.0);
        pass = pass && cell.mc.diff_mean > 3 * cell.mc.diff_std_err;
        min_z = std::min(min_z, z);
        t.rows.push_back({std::to_string(cell.k), std::to_string(cell.n), format_g9(cell.p),
                          format_g9(cell.mc.diff_mean), format_g9(cell.mc.diff_std_err),
                          format_g9(z)});
    }
    CriterionResult res;
    res.pass = pass && checked > 0;
    res.detail = "discard-minus-stale divergence gap positive beyond 3 sigma in " +
                 std::to_string(checked) + "/" + std::to_string(checked) +
                 " lossy cells, min z = " + format_g9(min_z);
    res.csv = csv_to_string(t);
    return res;
}

// ---- criterion 3: gap ordering, lower bound, and clean-limit decay ----

CriterionResult criterion_gap_ordering() {
    StreamRng gen(RngSpec{30117, 0});
    CsvTable t;
    t.header = {"check", "index", "lhs", "rhs"};
    bool pass = true;
    double min_margin = std::numeric_limits<double>::infinity();

    for (int i = 0; i < 1000; ++i) {
        BoundConstants c;
        c.k_devices = 2 + static_cast<int>(gen.uniform_int(31));
        c.n_participating = 1 + static_cast<int>(gen.uniform_int(c.k_devices));
        c.local_epochs = 1 + static_cast<int>(gen.uniform_int(20));
        c.gamma_sq = gen.uniform(0.25, 16.0);
        c.g_sq = gen.uniform(0.25, 16.0);
        c.eta = gen.uniform(0.05, 0.95) * std::sqrt(c.g_sq) /
                (c.local_epochs * std::sqrt(c.gamma_sq));
        c.probs.resize(c.k_devices);
        for (int k = 0; k < c.k_devices; ++k) c.probs[k] = gen.uniform(0.02, 1.0);
        c.probs[0] = gen.uniform(0.02, 0.95);  // at least one lossy link

        const double z1 = zeta_bound_gomore(c);
        const double z2 = zeta_bound_dds(c);
        const double lower = theorem_gap_lower(c);
        const double diff = z2 - z1;
        // 1e-9 relative slack absorbs summation rounding in the subtraction
        const double margin = diff - lower + 1e-9 * std::max(1.0, z2);
        pass = pass && z1 < z2 && margin >= 0;
        min_margin = std::min(min_margin, diff - lower);
        t.rows.push_back({"ordering", std::to_string(i), format_g9(z1), format_g9(z2)});
        t.rows.push_back({"gap", std::to_string(i), format_g9(diff), format_g9(lower)});
    }

    // uniformly cleaner links shrink the guaranteed gap to exactly zero
    BoundConstants c;
    c.k_devices = 4;
    c.n_participating = 2;
    c.eta = 0.01;
    c.local_epochs = 10;
    c.gamma_sq = 4.0;
    c.g_sq = 1.0;
    double prev = std::numeric_limits<double>::infinity();
    double last = -1;
    for (int i = 0; i < 100; ++i) {
        const double p = (i + 1) / 100.0;
        c.probs.assign(4, p);
        const double g = theorem_gap_lower(c);
        pass = pass && g < prev;
        prev = g;
        last = g;
        t.rows.push_back({"monotone", std::to_string(i), format_g9(p), format_g9(g)});
    }
    pass = pass && last == 0.0;

    CriterionResult res;
    res.pass = pass;
    res.detail =
        "1000 small-step configs ordered with gap >= lower bound (min slack " +
        format_g9(min_margin) + "); lower bound strictly decreasing to 0 on the 100-point grid";
    res.csv = csv_to_string(t);
    return res;
}

// ---- criterion 5: the participation planner against an accuracy sweep ----

CriterionResult criterion_participation_planner() {
    CsvTable t;
    t.header = {"kind", "x", "value"};
    bool pass = true;
    std::ostringstream note;

    // Closed-form plans across tightening delay budgets. Each budget keeps
    // even the best link below 0.8 success at full participation, which is
    // the regime where an interior optimum is claimed.
    for (double tau : {1.2, 1.0, 0.8, 0.6}) {
        ExperimentConfig geo = default_config();
        geo.radio.delay_budget_s = tau;
        const std::vector<double> lambdas = geo.device_lambdas();
        const double rho = rho_of(geo.radio);
        double p_max = 0;
        for (double l : lambdas)
            p_max = std::max(p_max, error_free_prob_rate(l, RateParams{rho, geo.k_devices}));
        const ActivationPlan plan = optimize_participation(lambdas, rho, geo.k_devices);
        if (!(p_max < 0.8)) {
            pass = false;
            note << "tau=" << tau << " not lossy enough at full participation; ";
        }
        if (!(plan.best_n > 1 && plan.best_n < geo.k_devices)) {
            pass = false;
            note << "tau=" << tau << " optimum not interior (best_n=" << plan.best_n << "); ";
        }
        t.rows.push_back({"plan", format_g9(tau), std::to_string(plan.best_n)});
        t.rows.push_back({"p_max_full", format_g9(tau), format_g9(p_max)});
    }

    // Empirical accuracy sweep at one of those budgets: train with the
    // stale-substitution rule on non-IID synthetic data and compare the
    // accuracy argmax over the even N grid against the planner. Single-shard
    // devices plus long, aggressive local runs make participation width
    // matter: a 2-device round average lurches toward 2 classes, while wider
    // rounds cover most of the label space and train stably.
    ExperimentConfig cfg = default_config();
    cfg.radio.delay_budget_s = 0.7;
    cfg.source = DataSource::synthetic;
    cfg.partition = PartitionScheme::noniid_shards;
    cfg.shards_per_device = 1;
    cfg.synth.n_classes = 8;
    cfg.synth.n_features = 20;
    cfg.synth.n_samples = 6000;
    cfg.synth.spread = 1.0;
    cfg.model_family = "mlp";
    cfg.mlp_layers = {20, 32, 8};
    cfg.hp.learning_rate = 0.1;
    cfg.hp.local_epochs = 15;
    cfg.hp.batch_size = 32;
    cfg.hp.rounds = 30;
    cfg.strategies = {StrategyId::gomore};
    cfg.record_walltime = false;
    cfg.master_seed = 50871;
    const int n_trials = 5;

    const ActivationPlan plan =
        optimize_participation(cfg.device_lambdas(), rho_of(cfg.radio), cfg.k_devices);
    const int predicted = predicted_accuracy_argmax(plan);
    t.rows.push_back({"predicted", "0.7", std::to_string(predicted)});

    int best_n_grid = 0;
    double best_acc = -1;
    for (int n = 2; n <= cfg.k_devices; n += 2) {
        cfg.n_participating = n;
        double mean = 0;
        for (int trial = 0; trial < n_trials; ++trial)
            mean += final_accuracy(run_experiment(cfg, trial), StrategyId::gomore);
        mean /= n_trials;
        t.rows.push_back({"accuracy", std::to_string(n), format_g9(mean)});
        if (mean > best_acc) {
            best_acc = mean;
            best_n_grid = n;
        }
    }
    t.rows.push_back({"empirical_argmax", std::to_string(best_n_grid), format_g9(best_acc)});
    if (std::abs(best_n_grid - predicted) > 2) {
        pass = false;
        note << "empirical argmax " << best_n_grid << " further than 2 from predicted "
             << predicted << "; ";
    }

    CriterionResult res;
    res.pass = pass;
    res.detail = "interior optima on all four delay budgets; predicted best_n=" +
                 std::to_string(predicted) + ", empirical accuracy argmax N=" +
                 std::to_string(best_n_grid) + " over {2,4,...,20}" +
                 (note.str().empty() ? "" : " | " + note.str());
    res.csv = csv_to_string(t);
    return res;
}

// ---- criterion 6: end-to-end trends on the image task ----

// Transmit power for the trend runs. The stock 20 dBm leaves every link
// above 0.99 success, where all rules coincide; this level pushes the far
// half of the cell into frequent errors while the near half stays healthy.
constexpr double kTrendPowerDbm = -4.0;

CriterionResult criterion_trend_reproduction() {
    ExperimentConfig base = default_config();
    base.radio.transmit_power_w = dbm_to_watts(kTrendPowerDbm);
    // the stock step size leaves the error-free reference far from converged
    // at 100 rounds, drowning every comparison in seed noise
    base.hp.learning_rate = 0.1;
    base.record_walltime = false;
    base.master_seed = 60901;
    const int n_seeds = 10;

    CsvTable t;
    t.header = {"split", "trial", "strategy", "final_accuracy"};

    std::vector<double> ideal_acc, gomore_noniid, dds_noniid, gomore_iid, dds_iid;
    ExperimentConfig noniid = base;
    noniid.strategies = {StrategyId::ideal, StrategyId::gomore, StrategyId::dds};
    for (int trial = 0; trial < n_seeds; ++trial) {
        const auto recs = run_experiment(noniid, trial);
        ideal_acc.push_back(final_accuracy(recs, StrategyId::ideal));
        gomore_noniid.push_back(final_accuracy(recs, StrategyId::gomore));
        dds_noniid.push_back(final_accuracy(recs, StrategyId::dds));
        t.rows.push_back({"noniid", std::to_string(trial), "ideal", format_g9(ideal_acc.back())});
        t.rows.push_back(
            {"noniid", std::to_string(trial), "gomore", format_g9(gomore_noniid.back())});
        t.rows.push_back({"noniid", std::to_string(trial), "dds", format_g9(dds_noniid.back())});
    }
    ExperimentConfig iid = base;
    iid.partition = PartitionScheme::iid;
    iid.strategies = {StrategyId::gomore, StrategyId::dds};
    for (int trial = 0; trial < n_seeds; ++trial) {
        const auto recs = run_experiment(iid, trial);
        gomore_iid.push_back(final_accuracy(recs, StrategyId::gomore));
        dds_iid.push_back(final_accuracy(recs, StrategyId::dds));
        t.rows.push_back({"iid", std::to_string(trial), "gomore", format_g9(gomore_iid.back())});
        t.rows.push_back({"iid", std::to_string(trial), "dds", format_g9(dds_iid.back())});
    }

    int wins = 0;
    for (int trial = 0; trial < n_seeds; ++trial)
        if (gomore_noniid[trial] >= dds_noniid[trial]) ++wins;

    std::vector<double> gap_noniid(n_seeds), gap_iid(n_seeds);
    for (int trial = 0; trial < n_seeds; ++trial) {
        gap_noniid[trial] = gomore_noniid[trial] - dds_noniid[trial];
        gap_iid[trial] = gomore_iid[trial] - dds_iid[trial];
    }
    const double mean_gap_noniid = mean_of(gap_noniid);
    const double mean_gap_iid = mean_of(gap_iid);

    const double ideal_mean = mean_of(ideal_acc);
    const double dds_trail = ideal_mean - mean_of(dds_noniid);
    const double gomore_trail = ideal_mean - mean_of(gomore_noniid);

    t.rows.push_back({"summary", "-1", "wins", std::to_string(wins)});
    t.rows.push_back({"summary", "-1", "gap_noniid_mean", format_g9(mean_gap_noniid)});
    t.rows.push_back({"summary", "-1", "gap_iid_mean", format_g9(mean_gap_iid)});
    t.rows.push_back({"summary", "-1", "ideal_mean", format_g9(ideal_mean)});
    t.rows.push_back({"summary", "-1", "dds_trail", format_g9(dds_trail)});
    t.rows.push_back({"summary", "-1", "gomore_trail", format_g9(gomore_trail)});

    const bool pass_a = wins >= 8;
    const bool pass_b = mean_gap_noniid >= mean_gap_iid;
    const bool pass_c = dds_trail > 0.05 && gomore_trail < 0.03;

    CriterionResult res;
    res.pass = pass_a && pass_b && pass_c;
    res.detail = "stale substitution wins " + std::to_string(wins) + "/10 paired seeds (need 8); "
                 "non-IID gap " + format_g9(mean_gap_noniid) + " vs IID gap " +
                 format_g9(mean_gap_iid) + "; vs ideal ceiling: discard trails " +
                 format_g9(dds_trail) + " (need > 0.05), stale trails " +
                 format_g9(gomore_trail) + " (need < 0.03)";
    res.csv = csv_to_string(t);
    return res;
}

// ---- criterion 7: power saving on a 1 dB grid ----

CriterionResult criterion_power_saving() {
    ExperimentConfig cfg = default_config();
    cfg.source = DataSource::synthetic;
    cfg.partition = PartitionScheme::iid;
    cfg.synth.n_classes = 8;
    cfg.synth.n_features = 20;
    cfg.synth.n_samples = 6000;
    cfg.synth.spread = 0.3;
    cfg.model_family = "mlp";
    cfg.mlp_layers = {20, 32, 8};
    cfg.hp.learning_rate = 0.03;
    cfg.hp.local_epochs = 5;
    cfg.hp.batch_size = 32;
    cfg.hp.rounds = 60;
    cfg.n_participating = 10;
    cfg.strategies = {StrategyId::gomore, StrategyId::dds};
    cfg.record_walltime = false;
    cfg.master_seed = 70123;
    const int n_trials = 2;

    std::vector<double> grid;
    for (int dbm = -16; dbm <= 2; ++dbm) grid.push_back(dbm);

    std::vector<double> acc_gomore, acc_dds;
    for (double dbm : grid) {
        ExperimentConfig point = cfg;
        point.radio.transmit_power_w = dbm_to_watts(dbm);
        double g = 0, d = 0;
        for (int trial = 0; trial < n_trials; ++trial) {
            const auto recs = run_experiment(point, trial);
            g += final_accuracy(recs, StrategyId::gomore);
            d += final_accuracy(recs, StrategyId::dds);
        }
        acc_gomore.push_back(g / n_trials);
        acc_dds.push_back(d / n_trials);
    }

    // Running-best envelopes make "power needed to reach accuracy a" well
    // defined even where the raw curves wiggle.
    std::vector<double> env_gomore(acc_gomore), env_dds(acc_dds);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        env_gomore[i] = std::max(env_gomore[i], env_gomore[i - 1]);
        env_dds[i] = std::max(env_dds[i], env_dds[i - 1]);
    }

    CsvTable t;
    t.header = {"power_dbm", "strategy", "acc_mean", "acc_env"};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        t.rows.push_back({format_g9(grid[i]), "gomore", format_g9(acc_gomore[i]),
                          format_g9(env_gomore[i])});
        t.rows.push_back(
            {format_g9(grid[i]), "dds", format_g9(acc_dds[i]), format_g9(env_dds[i])});
    }

    // Best witness: a target accuracy the stale-substitution rule reaches
    // at least 5 dB below the power the discard rule needs for it.
    double best_saving = -std::numeric_limits<double>::infinity();
    double best_target = 0, best_pg = 0, best_pd = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double target = env_gomore[i];
        std::size_t ig = 0;
        while (env_gomore[ig] < target - 1e-12) ++ig;
        std::size_t id = 0;
        while (id < grid.size() && env_dds[id] < target - 1e-12) ++id;
        const bool dds_reaches = id < grid.size();
        // an unreached target still witnesses "needs more than the grid top"
        const double saving = (dds_reaches ? grid[id] : grid.back()) - grid[ig];
        if (saving > best_saving) {
            best_saving = saving;
            best_target = target;
            best_pg = grid[ig];
            best_pd = dds_reaches ? grid[id] : std::numeric_limits<double>::infinity();
        }
    }
    t.rows.push_back(
        {"witness", format_g9(best_target), format_g9(best_pg), format_g9(best_pd)});

    CriterionResult res;
    res.pass = best_saving >= 5.0;
    res.detail = "accuracy " + format_g9(best_target) + " reached at " + format_g9(best_pg) +
                 " dBm by stale substitution vs " +
                 (std::isfinite(best_pd) ? format_g9(best_pd) + " dBm" : "beyond the grid") +
                 " by discard: " + format_g9(best_saving) + " dB saving (need >= 5)";
    res.csv = csv_to_string(t);
    return res;
}

// ---- criterion 8: byte-identical reruns of everything above ----

CriterionResult criterion_determinism() {
    struct Entry {
        int id;
        CriterionResult (*fn)();
    };
    const Entry entries[] = {
        {1, criterion_formula_exactness}, {2, criterion_divergence_bounds},
        {3, criterion_gap_ordering},      {4, criterion_paired_ordering},
        {5, criterion_participation_planner}, {6, criterion_trend_reproduction},
        {7, criterion_power_saving},
    };
    CsvTable t;
    t.header = {"criterion", "csv_bytes", "identical"};
    bool pass = true;
    for (const Entry& e : entries) {
        const CriterionResult first = e.fn();
        const CriterionResult second = e.fn();
        const bool same = first.csv == second.csv && first.pass == second.pass;
        pass = pass && same;
        t.rows.push_back({std::to_string(e.id), std::to_string(first.csv.size()),
                          same ? "yes" : "no"});
    }
    CriterionResult res;
    res.pass = pass;
    res.detail = pass ? "criteria 1-7 re-run with the same seeds: all CSVs byte-identical"
                      : "at least one criterion changed its CSV between identical runs";
    res.csv = csv_to_string(t);
    return res;
}

}  // namespace

int main(int argc, char** argv) {
    struct Gate {
        int id;
        const char* name;
        CriterionResult (*fn)();
        double budget_s;  // 0 = no wall budget
    };
    const Gate gates[] = {
        {1, "formula exactness", criterion_formula_exactness, 1.0},
        {2, "divergence bounds", criterion_divergence_bounds, 120.0},
        {3, "bound gap ordering", criterion_gap_ordering, 5.0},
        {4, "paired mc ordering", criterion_paired_ordering, 120.0},
        {5, "participation planner", criterion_participation_planner, 300.0},
        {6, "lossy-uplink trends", criterion_trend_reproduction, 1800.0},
        {7, "power saving", criterion_power_saving, 600.0},
        {8, "determinism", criterion_determinism, 0.0},
    };

    int which = 0;  // 0 = run everything
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
            which = std::atoi(argv[++i]);
            if (which < 1 || which > 8) {
                std::cerr << "criterion must be 1..8\n";
                return 1;
            }
        } else {
            std::cerr << "usage: wfl_acceptance [--criterion N]\n";
            return 1;
        }
    }

    bool any_fail = false;
    for (const Gate& gate : gates) {
        if (which != 0 && gate.id != which) continue;
        const auto t0 = std::chrono::steady_clock::now();
        CriterionResult res;
        try {
            res = gate.fn();
        } catch (const std::exception& e) {
            res.pass = false;
            res.detail = std::string("threw: ") + e.what();
        }
        const double dt =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        bool pass = res.pass;
        std::string note;
        if (gate.budget_s > 0 && dt >= gate.budget_s) {
            pass = false;
            note = " [over budget " + fmt1(gate.budget_s) + " s]";
        }
        std::cout << "criterion " << gate.id << ": " << (pass ? "PASS" : "FAIL") << " - "
                  << gate.name << ": " << res.detail << note << " [" << fmt1(dt) << " s]\n";
        any_fail = any_fail || !pass;
    }
    return any_fail ? 1 : 0;
}
