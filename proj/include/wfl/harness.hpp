#pragma once

// End-to-end orchestration: build the dataset/model/channel from a config,
// run the round loop per strategy under common random numbers, and emit
// CSVs. Strategy comparisons share the selection stream, the error-event
// stream, and the per-(round, device) batch streams, so two strategies at
// the same seed differ only through the aggregation rule.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "wfl/aggregation.hpp"
#include "wfl/analysis.hpp"
#include "wfl/channel.hpp"
#include "wfl/config.hpp"
#include "wfl/core.hpp"
#include "wfl/csv.hpp"
#include "wfl/data.hpp"
#include "wfl/learner.hpp"
#include "wfl/optimizer.hpp"
#include "wfl/parallel.hpp"
#include "wfl/rng.hpp"

namespace wfl {

struct RunRecord {
    int round = 0;
    StrategyId strategy = StrategyId::ideal;
    double test_accuracy = 0.0;   // NaN for label-free model families
    double test_loss = 0.0;
    int n_error_free = 0;
    double divergence_sample = 0.0;  // squared distance to the ideal path; NaN if no ideal run
    double wall_time = 0.0;          // seconds; 0 when timing is disabled for stable output
};

inline CsvTable records_to_csv(const std::vector<RunRecord>& records) {
    CsvTable t;
    t.header = {"round",        "strategy",          "test_accuracy", "test_loss",
                "n_error_free", "divergence_sample", "wall_time"};
    t.rows.reserve(records.size());
    for (const RunRecord& r : records)
        t.rows.push_back({std::to_string(r.round), strategy_name(r.strategy),
                          format_g9(r.test_accuracy), format_g9(r.test_loss),
                          std::to_string(r.n_error_free), format_g9(r.divergence_sample),
                          format_g9(r.wall_time)});
    return t;
}

inline void emit_csv(const std::vector<RunRecord>& records, const std::string& path) {
    write_csv(records_to_csv(records), path);
}

/// data.dir from the config, unless WFLSIM_DATA_DIR overrides it.
inline std::string data_directory(const ExperimentConfig& cfg) {
    if (const char* env = std::getenv("WFLSIM_DATA_DIR"); env && *env) return env;
    return cfg.data_dir;
}

namespace detail {

inline LabeledDataset slice_dataset(const LabeledDataset& ds, int first, int count) {
    LabeledDataset out;
    out.n_samples = count;
    out.n_features = ds.n_features;
    out.n_classes = ds.n_classes;
    out.storage = ds.storage;
    out.labels.assign(ds.labels.begin() + first, ds.labels.begin() + first + count);
    const std::size_t begin = std::size_t(first) * ds.n_features;
    const std::size_t end = std::size_t(first + count) * ds.n_features;
    if (ds.storage == LabeledDataset::Storage::f64)
        out.dense.assign(ds.dense.begin() + begin, ds.dense.begin() + end);
    else
        out.bytes.assign(ds.bytes.begin() + begin, ds.bytes.begin() + end);
    return out;
}

}  // namespace detail

/// Train/test pair per the config: IDX files from the data directory, or a
/// seeded synthetic draw with its last 20% held out.
inline std::pair<LabeledDataset, LabeledDataset> load_experiment_data(const ExperimentConfig& cfg,
                                                                      RngSpec root) {
    if (cfg.source == DataSource::mnist) {
        const std::string dir = data_directory(cfg);
        LabeledDataset train =
            load_idx(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
        LabeledDataset test =
            load_idx(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte");
        return {std::move(train), std::move(test)};
    }
    LabeledDataset full = synth_gaussian_clusters(cfg.synth.n_classes, cfg.synth.n_features,
                                                  cfg.synth.n_samples, cfg.synth.spread, root);
    const int n_test = full.n_samples / 5;
    if (n_test < 1 || full.n_samples - n_test < cfg.k_devices)
        throw config_error("synthetic dataset too small for a 20% holdout plus K partitions");
    LabeledDataset train = detail::slice_dataset(full, 0, full.n_samples - n_test);
    LabeledDataset test = detail::slice_dataset(full, full.n_samples - n_test, n_test);
    return {std::move(train), std::move(test)};
}

/// Model per the config. MLP layer widths must bracket the dataset
/// (features in, classes out); quadratic centers are a seeded draw.
inline ModelSpec build_model(const ExperimentConfig& cfg, const LabeledDataset* train, RngSpec root) {
    if (cfg.model_family == "mlp") {
        if (!train) throw config_error("mlp experiments need a dataset");
        if (cfg.mlp_layers.front() != train->n_features)
            throw config_error("model.layers[0] = " + std::to_string(cfg.mlp_layers.front()) +
                               " but the dataset has " + std::to_string(train->n_features) +
                               " features");
        if (cfg.mlp_layers.back() != train->n_classes)
            throw config_error("model.layers last width = " + std::to_string(cfg.mlp_layers.back()) +
                               " but the dataset has " + std::to_string(train->n_classes) +
                               " classes");
        return make_mlp(cfg.mlp_layers);
    }
    StreamRng gen(derive_stream(root, {stream::kCenter}));
    std::vector<ParamVector> centers(cfg.k_devices);
    for (auto& c : centers) {
        c.resize(cfg.quad_dimension);
        for (double& x : c) x = cfg.quad_center_scale * gen.normal();
    }
    return make_quadratic(ParamVector(cfg.quad_dimension, 0.0), std::move(centers));
}

/// Per-device error-free probabilities at participation level N: fixed SNR
/// threshold if the config sets one, otherwise the rate-derived threshold.
inline std::vector<double> device_probs(const ExperimentConfig& cfg,
                                        const std::vector<double>& lambdas, int n_participating) {
    std::vector<double> probs;
    probs.reserve(lambdas.size());
    if (cfg.radio.snr_threshold > 0) {
        for (double lambda : lambdas)
            probs.push_back(std::exp(-lambda * cfg.radio.snr_threshold / n_participating));
    } else {
        const RateParams rate{rho_of(cfg.radio), n_participating};
        for (double lambda : lambdas) probs.push_back(error_free_prob_rate(lambda, rate));
    }
    return probs;
}

/// One full experiment at one seed: M rounds per strategy, common random
/// numbers across strategies, evaluation on the held-out set every round.
/// Records come back grouped by strategy in config order, rounds ascending.
/// divergence_sample tracks each strategy's squared distance to the ideal
/// path at the same round (NaN when ideal is not among the strategies).
inline std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, int trial_index = 0) {
    cfg.validate();
    const RngSpec root =
        derive_stream(RngSpec{cfg.master_seed, 0}, {stream::kTrial, std::uint64_t(trial_index)});

    auto [train, test] = load_experiment_data(cfg, root);
    const ModelSpec model = build_model(cfg, &train, root);
    const bool is_mlp = model.family == ModelFamily::mlp;
    const LabeledDataset* train_ptr = is_mlp ? &train : nullptr;
    const LabeledDataset* test_ptr = is_mlp ? &test : nullptr;

    std::vector<DevicePartition> partitions =
        cfg.partition == PartitionScheme::iid
            ? partition_iid(train, cfg.k_devices, root)
            : partition_noniid_shards(train, cfg.k_devices, cfg.shards_per_device, root);

    const std::vector<double> lambdas = cfg.device_lambdas();
    int n_participating = cfg.n_participating;
    if (cfg.auto_n)
        n_participating = optimize_participation(lambdas, rho_of(cfg.radio), cfg.k_devices).best_n;
    const std::vector<double> probs = device_probs(cfg, lambdas, n_participating);

    const ParamVector w_init = init_params(model, root);

    // Ideal runs first (whatever its position in the config) so the other
    // strategies can report their per-round distance to its path.
    std::vector<StrategyId> order = cfg.strategies;
    for (std::size_t i = 0; i < order.size(); ++i)
        if (order[i] == StrategyId::ideal && i != 0) std::swap(order[0], order[i]);
    const bool have_ideal = !order.empty() && order[0] == StrategyId::ideal;

    std::vector<ParamVector> ideal_path;  // aggregate after each round
    if (have_ideal) ideal_path.reserve(cfg.hp.rounds);

    std::vector<std::vector<RunRecord>> per_strategy(order.size());
    std::vector<ParamVector> locals(cfg.k_devices);

    for (std::size_t si = 0; si < order.size(); ++si) {
        const StrategyId strategy = order[si];
        ParamVector w = w_init;
        auto& records = per_strategy[si];
        records.reserve(cfg.hp.rounds);
        for (int m = 0; m < cfg.hp.rounds; ++m) {
            const auto t0 = std::chrono::steady_clock::now();

            StreamRng sel_rng(derive_stream(root, {stream::kSelect, std::uint64_t(m)}));
            const SelectionSet selected = select_devices(cfg.k_devices, n_participating, sel_rng);

            // The ideal rule aggregates every device; the lossy rules only
            // need the selected ones trained. Batch streams are keyed by
            // (round, device), so the subset choice cannot desynchronize
            // the draws the strategies share.
            const std::vector<int>* to_train_ids = nullptr;
            std::vector<int> all_ids;
            if (strategy == StrategyId::ideal) {
                all_ids.resize(cfg.k_devices);
                for (int k = 0; k < cfg.k_devices; ++k) all_ids[k] = k;
                to_train_ids = &all_ids;
            } else {
                to_train_ids = &selected.device_ids;
            }
            parallel_for((*to_train_ids).size(), [&](std::size_t i) {
                const int k = (*to_train_ids)[i];
                locals[k] = local_update(
                    model, w, train_ptr, partitions[k], cfg.hp,
                    derive_stream(root, {stream::kBatch, std::uint64_t(m), std::uint64_t(k)}));
            });

            std::vector<double> probs_selected;
            probs_selected.reserve(selected.device_ids.size());
            for (int id : selected.device_ids) probs_selected.push_back(probs[id]);
            const ErrorEvents events = sample_error_events(
                probs_selected, selected, derive_stream(root, {stream::kError, std::uint64_t(m)}));

            switch (strategy) {
                case StrategyId::ideal:
                    w = aggregate_ideal(locals);
                    break;
                case StrategyId::dds: {
                    std::vector<ParamVector> locals_selected;
                    locals_selected.reserve(selected.device_ids.size());
                    for (int id : selected.device_ids) locals_selected.push_back(locals[id]);
                    w = aggregate_dds(locals_selected, events.error_free, probs_selected);
                    break;
                }
                case StrategyId::gomore: {
                    std::vector<ParamVector> locals_selected;
                    locals_selected.reserve(selected.device_ids.size());
                    for (int id : selected.device_ids) locals_selected.push_back(locals[id]);
                    w = aggregate_gomore(locals_selected, events.error_free, w);
                    break;
                }
            }
            if (strategy == StrategyId::ideal) ideal_path.push_back(w);

            const EvalResult eval = evaluate(model, w, test_ptr, cfg.eval_max_samples);

            RunRecord rec;
            rec.round = m;
            rec.strategy = strategy;
            rec.test_accuracy =
                eval.has_accuracy ? eval.accuracy : std::numeric_limits<double>::quiet_NaN();
            rec.test_loss = eval.mean_loss;
            rec.n_error_free = events.n_error_free();
            if (strategy == StrategyId::ideal)
                rec.divergence_sample = 0.0;
            else if (have_ideal)
                rec.divergence_sample = vec_sq_dist(w, ideal_path[m]);
            else
                rec.divergence_sample = std::numeric_limits<double>::quiet_NaN();
            rec.wall_time =
                cfg.record_walltime
                    ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
                    : 0.0;
            records.push_back(rec);
        }
    }

    // Emit in the order the config asked for.
    std::vector<RunRecord> out;
    out.reserve(std::size_t(cfg.hp.rounds) * order.size());
    for (StrategyId s : cfg.strategies)
        for (std::size_t si = 0; si < order.size(); ++si)
            if (order[si] == s) {
                for (const RunRecord& r : per_strategy[si]) out.push_back(r);
                per_strategy[si].clear();  // guard against duplicate emission
                break;
            }
    return out;
}

/// Final-round summary of one strategy across trial seeds.
struct SweepCell {
    double acc_mean = 0.0, acc_std = 0.0;
    double loss_mean = 0.0, loss_std = 0.0;
    int n_seeds = 0;
};

inline ExperimentConfig apply_sweep_axis(ExperimentConfig cfg, const std::string& axis,
                                         double value) {
    if (axis == "power_dbm") {
        cfg.radio.transmit_power_w = dbm_to_watts(value);
    } else if (axis == "n_participating") {
        cfg.n_participating = static_cast<int>(value);
        cfg.auto_n = false;
        if (cfg.n_participating < 1 || cfg.n_participating > cfg.k_devices)
            throw config_error("sweep grid value " + format_g9(value) +
                               " is outside [1, devices.count]");
    } else if (axis == "snr_threshold_db") {
        cfg.radio.snr_threshold = db_to_linear(value);
    } else {
        throw config_error("unknown sweep axis '" + axis + "'");
    }
    return cfg;
}

/// Runs the experiment grid and summarizes final-round accuracy/loss per
/// (axis value, strategy) over the trial seeds. All grid points share the
/// master seed, so every point sees the same data, partition, and draws.
inline CsvTable sweep(const ExperimentConfig& cfg, const std::string& axis,
                      const std::vector<double>& grid) {
    if (grid.empty()) throw config_error("sweep grid must not be empty");
    CsvTable table;
    table.header = {"axis",      "axis_value", "strategy",  "final_accuracy_mean",
                    "final_accuracy_std", "final_loss_mean", "final_loss_std", "n_seeds"};
    for (double value : grid) {
        const ExperimentConfig point_cfg = apply_sweep_axis(cfg, axis, value);
        std::vector<std::vector<double>> accs(cfg.strategies.size()),
            losses(cfg.strategies.size());
        for (int trial = 0; trial < cfg.n_trial_seeds; ++trial) {
            const std::vector<RunRecord> records = run_experiment(point_cfg, trial);
            for (std::size_t si = 0; si < cfg.strategies.size(); ++si) {
                // last record of this strategy's block
                for (auto it = records.rbegin(); it != records.rend(); ++it)
                    if (it->strategy == cfg.strategies[si]) {
                        accs[si].push_back(it->test_accuracy);
                        losses[si].push_back(it->test_loss);
                        break;
                    }
            }
        }
        for (std::size_t si = 0; si < cfg.strategies.size(); ++si) {
            auto stats = [](const std::vector<double>& xs) {
                double mean = 0;
                for (double x : xs) mean += x;
                mean /= xs.empty() ? 1 : xs.size();
                double var = 0;
                for (double x : xs) var += (x - mean) * (x - mean);
                if (xs.size() > 1) var /= xs.size() - 1;
                return std::pair<double, double>{mean, std::sqrt(var)};
            };
            const auto [am, as] = stats(accs[si]);
            const auto [lm, ls] = stats(losses[si]);
            table.rows.push_back({axis, format_g9(value), strategy_name(cfg.strategies[si]),
                                  format_g9(am), format_g9(as), format_g9(lm), format_g9(ls),
                                  std::to_string(cfg.n_trial_seeds)});
        }
    }
    return table;
}

}  // namespace wfl
