#pragma once

// Experiment configuration: a self-describing JSON file with units spelled
// out in the key names (power_dbm, bandwidth_hz, delay_budget_s, ...), since
// unit slips in the link-budget arithmetic are the main practical hazard.
// Loading is strict: unknown keys are rejected so typos fail fast.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wfl/aggregation.hpp"
#include "wfl/channel.hpp"
#include "wfl/core.hpp"
#include "wfl/learner.hpp"

namespace wfl {

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double watts_to_dbm(double watts) { return 10.0 * std::log10(watts) + 30.0; }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

enum class DataSource { mnist, synthetic };
enum class PartitionScheme { iid, noniid_shards };

struct SyntheticParams {
    int n_classes = 4;
    int n_features = 20;
    int n_samples = 5000;
    double spread = 0.3;
};

struct ExperimentConfig {
    RadioConstants radio;
    std::vector<double> distances_m;  // per device; ignored when lambdas set
    std::vector<double> lambdas;      // direct channel statistics (optional)

    std::string model_family = "mlp";      // mlp | quadratic
    std::vector<int> mlp_layers = {784, 64, 10};
    int quad_dimension = 2;
    double quad_center_scale = 1.0;

    HyperParams hp;

    DataSource source = DataSource::mnist;
    PartitionScheme partition = PartitionScheme::noniid_shards;
    int shards_per_device = 2;
    SyntheticParams synth;
    std::string data_dir = "data/mnist";
    int eval_max_samples = 0;  // 0 = whole test split

    int k_devices = 20;
    int n_participating = 10;
    bool auto_n = false;

    std::vector<StrategyId> strategies = {StrategyId::ideal, StrategyId::dds, StrategyId::gomore};

    std::uint64_t master_seed = 12061984;
    int n_trial_seeds = 1;
    bool record_walltime = true;

    std::string sweep_axis;  // power_dbm | n_participating | snr_threshold_db
    std::vector<double> sweep_grid;

    void validate() const {
        radio.validate();
        hp.validate();
        if (k_devices < 1) throw config_error("devices.count must be >= 1");
        if (!auto_n && (n_participating < 1 || n_participating > k_devices))
            throw config_error("devices.participating must lie in [1, devices.count]");
        if (lambdas.empty()) {
            if (static_cast<int>(distances_m.size()) != k_devices)
                throw config_error("geometry.distances_m must list one distance per device");
        } else if (static_cast<int>(lambdas.size()) != k_devices) {
            throw config_error("geometry.lambdas must list one value per device");
        }
        if (model_family != "mlp" && model_family != "quadratic")
            throw config_error("model.family must be mlp or quadratic");
        if (model_family == "mlp" && mlp_layers.size() < 2)
            throw config_error("model.layers needs at least input and output widths");
        if (model_family == "quadratic" && quad_dimension < 1)
            throw config_error("model.dimension must be >= 1");
        if (partition == PartitionScheme::noniid_shards && shards_per_device < 1)
            throw config_error("data.shards_per_device must be >= 1");
        if (strategies.empty()) throw config_error("strategies list must not be empty");
        if (n_trial_seeds < 1) throw config_error("seed.trials must be >= 1");
        if (eval_max_samples < 0) throw config_error("data.eval_max_samples must be >= 0");
        if (!sweep_axis.empty() && sweep_axis != "power_dbm" && sweep_axis != "n_participating" &&
            sweep_axis != "snr_threshold_db")
            throw config_error(
                "sweep.axis must be power_dbm, n_participating, or snr_threshold_db");
        if (!sweep_axis.empty() && sweep_grid.empty())
            throw config_error("sweep.grid must not be empty when sweep.axis is set");
    }

    /// Per-device lambda list, from the explicit list or the geometry.
    std::vector<double> device_lambdas() const {
        if (!lambdas.empty()) return lambdas;
        std::vector<double> out;
        out.reserve(distances_m.size());
        for (double d : distances_m) out.push_back(lambda_for_distance(radio, d));
        return out;
    }
};

/// K=20 devices spread 100..500 m, 1 MHz of bandwidth, -174 dBm/Hz noise,
/// path-loss exponent 2.2, 20 dBm transmit power, eta=0.001, T=10, b=50,
/// 100 rounds, label-shard splits of the MNIST-format dataset.
inline ExperimentConfig default_config() {
    ExperimentConfig cfg;
    cfg.radio = RadioConstants{};
    cfg.distances_m.resize(cfg.k_devices);
    for (int k = 0; k < cfg.k_devices; ++k)
        cfg.distances_m[k] = 100.0 + 400.0 * k / (cfg.k_devices - 1);
    return cfg;
}

namespace detail {

using json = nlohmann::json;

inline void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                                const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known) throw config_error("unknown config key '" + where + "." + it.key() + "'");
    }
}

template <typename T>
inline void maybe(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    using detail::maybe;
    ExperimentConfig cfg = default_config();
    cfg.distances_m.clear();

    detail::reject_unknown_keys(
        j, {"radio", "geometry", "model", "hyper", "data", "devices", "strategies", "seed", "sweep",
            "record_walltime"},
        "config");

    if (j.contains("radio")) {
        const auto& r = j.at("radio");
        detail::reject_unknown_keys(r,
                                    {"transmit_power_dbm", "bandwidth_hz", "noise_density_dbm_per_hz",
                                     "ref_gain", "pathloss_exponent", "snr_threshold_db",
                                     "payload_bits", "delay_budget_s"},
                                    "radio");
        if (r.contains("transmit_power_dbm"))
            cfg.radio.transmit_power_w = dbm_to_watts(r.at("transmit_power_dbm").get<double>());
        maybe(r, "bandwidth_hz", cfg.radio.bandwidth_hz);
        if (r.contains("noise_density_dbm_per_hz"))
            cfg.radio.noise_density_w_per_hz =
                dbm_to_watts(r.at("noise_density_dbm_per_hz").get<double>());
        maybe(r, "ref_gain", cfg.radio.ref_gain);
        maybe(r, "pathloss_exponent", cfg.radio.pathloss_exp);
        if (r.contains("snr_threshold_db"))
            cfg.radio.snr_threshold = db_to_linear(r.at("snr_threshold_db").get<double>());
        maybe(r, "payload_bits", cfg.radio.payload_bits);
        maybe(r, "delay_budget_s", cfg.radio.delay_budget_s);
    }
    if (j.contains("geometry")) {
        const auto& g = j.at("geometry");
        detail::reject_unknown_keys(g, {"distances_m", "lambdas"}, "geometry");
        maybe(g, "distances_m", cfg.distances_m);
        maybe(g, "lambdas", cfg.lambdas);
    }
    if (j.contains("model")) {
        const auto& m = j.at("model");
        detail::reject_unknown_keys(m, {"family", "layers", "dimension", "center_scale"}, "model");
        maybe(m, "family", cfg.model_family);
        maybe(m, "layers", cfg.mlp_layers);
        maybe(m, "dimension", cfg.quad_dimension);
        maybe(m, "center_scale", cfg.quad_center_scale);
    }
    if (j.contains("hyper")) {
        const auto& h = j.at("hyper");
        detail::reject_unknown_keys(h, {"learning_rate", "local_epochs", "batch_size", "rounds"},
                                    "hyper");
        maybe(h, "learning_rate", cfg.hp.learning_rate);
        maybe(h, "local_epochs", cfg.hp.local_epochs);
        maybe(h, "batch_size", cfg.hp.batch_size);
        maybe(h, "rounds", cfg.hp.rounds);
    }
    if (j.contains("data")) {
        const auto& d = j.at("data");
        detail::reject_unknown_keys(d,
                                    {"source", "partition", "shards_per_device", "dir",
                                     "eval_max_samples", "synthetic"},
                                    "data");
        if (d.contains("source")) {
            const std::string s = d.at("source").get<std::string>();
            if (s == "mnist")
                cfg.source = DataSource::mnist;
            else if (s == "synthetic")
                cfg.source = DataSource::synthetic;
            else
                throw config_error("data.source must be mnist or synthetic");
        }
        if (d.contains("partition")) {
            const std::string p = d.at("partition").get<std::string>();
            if (p == "iid")
                cfg.partition = PartitionScheme::iid;
            else if (p == "noniid_shards")
                cfg.partition = PartitionScheme::noniid_shards;
            else
                throw config_error("data.partition must be iid or noniid_shards");
        }
        maybe(d, "shards_per_device", cfg.shards_per_device);
        maybe(d, "dir", cfg.data_dir);
        maybe(d, "eval_max_samples", cfg.eval_max_samples);
        if (d.contains("synthetic")) {
            const auto& s = d.at("synthetic");
            detail::reject_unknown_keys(s, {"n_classes", "n_features", "n_samples", "spread"},
                                        "data.synthetic");
            maybe(s, "n_classes", cfg.synth.n_classes);
            maybe(s, "n_features", cfg.synth.n_features);
            maybe(s, "n_samples", cfg.synth.n_samples);
            maybe(s, "spread", cfg.synth.spread);
        }
    }
    if (j.contains("devices")) {
        const auto& d = j.at("devices");
        detail::reject_unknown_keys(d, {"count", "participating"}, "devices");
        maybe(d, "count", cfg.k_devices);
        if (d.contains("participating")) {
            const auto& n = d.at("participating");
            if (n.is_string()) {
                if (n.get<std::string>() != "auto")
                    throw config_error("devices.participating must be an integer or \"auto\"");
                cfg.auto_n = true;
            } else {
                cfg.n_participating = n.get<int>();
            }
        }
    }
    if (j.contains("strategies")) {
        cfg.strategies.clear();
        for (const auto& s : j.at("strategies"))
            cfg.strategies.push_back(parse_strategy(s.get<std::string>()));
    }
    if (j.contains("seed")) {
        const auto& s = j.at("seed");
        detail::reject_unknown_keys(s, {"master", "trials"}, "seed");
        maybe(s, "master", cfg.master_seed);
        maybe(s, "trials", cfg.n_trial_seeds);
    }
    maybe(j, "record_walltime", cfg.record_walltime);
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        detail::reject_unknown_keys(s, {"axis", "grid"}, "sweep");
        maybe(s, "axis", cfg.sweep_axis);
        maybe(s, "grid", cfg.sweep_grid);
    }

    // Default geometry only when the config provided no geometry at all.
    if (cfg.distances_m.empty() && cfg.lambdas.empty()) {
        cfg.distances_m.resize(cfg.k_devices);
        for (int k = 0; k < cfg.k_devices; ++k)
            cfg.distances_m[k] =
                cfg.k_devices == 1 ? 100.0 : 100.0 + 400.0 * k / (cfg.k_devices - 1);
    }
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw config_error("config file " + path + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["radio"] = {{"transmit_power_dbm", watts_to_dbm(cfg.radio.transmit_power_w)},
                  {"bandwidth_hz", cfg.radio.bandwidth_hz},
                  {"noise_density_dbm_per_hz", watts_to_dbm(cfg.radio.noise_density_w_per_hz)},
                  {"ref_gain", cfg.radio.ref_gain},
                  {"pathloss_exponent", cfg.radio.pathloss_exp},
                  {"payload_bits", cfg.radio.payload_bits},
                  {"delay_budget_s", cfg.radio.delay_budget_s}};
    if (cfg.radio.snr_threshold > 0)
        j["radio"]["snr_threshold_db"] = 10.0 * std::log10(cfg.radio.snr_threshold);
    if (!cfg.lambdas.empty())
        j["geometry"] = {{"lambdas", cfg.lambdas}};
    else
        j["geometry"] = {{"distances_m", cfg.distances_m}};
    if (cfg.model_family == "mlp")
        j["model"] = {{"family", "mlp"}, {"layers", cfg.mlp_layers}};
    else
        j["model"] = {{"family", "quadratic"},
                      {"dimension", cfg.quad_dimension},
                      {"center_scale", cfg.quad_center_scale}};
    j["hyper"] = {{"learning_rate", cfg.hp.learning_rate},
                  {"local_epochs", cfg.hp.local_epochs},
                  {"batch_size", cfg.hp.batch_size},
                  {"rounds", cfg.hp.rounds}};
    j["data"] = {{"source", cfg.source == DataSource::mnist ? "mnist" : "synthetic"},
                 {"partition", cfg.partition == PartitionScheme::iid ? "iid" : "noniid_shards"},
                 {"shards_per_device", cfg.shards_per_device},
                 {"dir", cfg.data_dir},
                 {"eval_max_samples", cfg.eval_max_samples},
                 {"synthetic",
                  {{"n_classes", cfg.synth.n_classes},
                   {"n_features", cfg.synth.n_features},
                   {"n_samples", cfg.synth.n_samples},
                   {"spread", cfg.synth.spread}}}};
    j["devices"] = {{"count", cfg.k_devices}};
    if (cfg.auto_n)
        j["devices"]["participating"] = "auto";
    else
        j["devices"]["participating"] = cfg.n_participating;
    j["strategies"] = nlohmann::json::array();
    for (StrategyId s : cfg.strategies) j["strategies"].push_back(strategy_name(s));
    j["seed"] = {{"master", cfg.master_seed}, {"trials", cfg.n_trial_seeds}};
    j["record_walltime"] = cfg.record_walltime;
    if (!cfg.sweep_axis.empty()) j["sweep"] = {{"axis", cfg.sweep_axis}, {"grid", cfg.sweep_grid}};
    return j;
}

inline void save_config(const ExperimentConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot open config output file: " + path);
    out << config_to_json(cfg).dump(2) << "\n";
}

}  // namespace wfl
