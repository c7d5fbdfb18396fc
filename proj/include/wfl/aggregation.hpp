#pragma once

// Device selection and the three aggregation rules. All three accumulate
// raw sums in device-index order and scale by a reciprocal at the end, so
// in the no-error limit (every p_k = 1) direct-discard, stale-substitution,
// and the restricted mean coincide bit-for-bit, not just approximately.

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wfl/channel.hpp"
#include "wfl/core.hpp"
#include "wfl/data.hpp"
#include "wfl/learner.hpp"
#include "wfl/parallel.hpp"
#include "wfl/rng.hpp"

namespace wfl {

enum class StrategyId { ideal, dds, gomore };

inline const char* strategy_name(StrategyId s) {
    switch (s) {
        case StrategyId::ideal: return "ideal";
        case StrategyId::dds: return "dds";
        case StrategyId::gomore: return "gomore";
    }
    return "?";
}

inline StrategyId parse_strategy(const std::string& name) {
    if (name == "ideal") return StrategyId::ideal;
    if (name == "dds") return StrategyId::dds;
    if (name == "gomore") return StrategyId::gomore;
    throw config_error("unknown strategy '" + name + "' (expected ideal|dds|gomore)");
}

/// Uniform selection of N of K devices without replacement (partial
/// Fisher-Yates); every size-N subset is equiprobable. Ids come back sorted.
inline SelectionSet select_devices(int k_devices, int n_participating, StreamRng& rng) {
    if (n_participating < 1 || n_participating > k_devices)
        throw config_error("selection size must satisfy 1 <= N <= K");
    std::vector<int> pool(k_devices);
    for (int i = 0; i < k_devices; ++i) pool[i] = i;
    for (int i = 0; i < n_participating; ++i) {
        int j = i + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(k_devices - i)));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(n_participating);
    std::sort(pool.begin(), pool.end());
    return SelectionSet{std::move(pool)};
}

/// Full-participation, error-free mean over all K locals.
inline ParamVector aggregate_ideal(std::span<const ParamVector> locals) {
    return vec_mean(locals);
}

/// Direct-discard rule: error-free uploads are kept with weight 1/(N*p_k),
/// errored ones contribute nothing. When every upload errored the result is
/// the literal empty-sum zero vector — kept as-is so the divergence
/// statistics see the event rather than a patched-over fallback.
inline ParamVector aggregate_dds(const std::vector<ParamVector>& locals_selected,
                                 const std::vector<std::uint8_t>& error_free,
                                 const std::vector<double>& probs_selected) {
    const std::size_t n = locals_selected.size();
    if (error_free.size() != n || probs_selected.size() != n)
        throw config_error("aggregate_dds: locals/error flags/probs size mismatch");
    if (n == 0) throw config_error("aggregate_dds: empty selection");
    ParamVector out(locals_selected[0].size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        require_same_dim(out, locals_selected[i], "aggregate_dds");
        if (!error_free[i]) continue;
        const double p = probs_selected[i];
        if (!(p > 0.0))
            throw config_error("aggregate_dds: p_k = 0 makes inverse-probability weight undefined");
        const ParamVector& w = locals_selected[i];
        for (std::size_t d = 0; d < out.size(); ++d) out[d] += w[d] / p;
    }
    vec_scale_inplace(1.0 / static_cast<double>(n), out);
    return out;
}

/// Stale-substitution rule: each errored upload is replaced by the previous
/// global model, then everything is averaged over the selection. The result
/// is a convex combination of {locals} and w_prev.
inline ParamVector aggregate_gomore(const std::vector<ParamVector>& locals_selected,
                                    const std::vector<std::uint8_t>& error_free,
                                    const ParamVector& w_prev) {
    const std::size_t n = locals_selected.size();
    if (error_free.size() != n)
        throw config_error("aggregate_gomore: locals/error flags size mismatch");
    if (n == 0) throw config_error("aggregate_gomore: empty selection");
    bool any_ok = false;
    for (auto ok : error_free) any_ok |= ok != 0;
    if (!any_ok) return w_prev;  // averaging n copies of w_prev must stay exact
    ParamVector out(w_prev.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const ParamVector& w = error_free[i] ? locals_selected[i] : w_prev;
        require_same_dim(out, w, "aggregate_gomore");
        for (std::size_t d = 0; d < out.size(); ++d) out[d] += w[d];
    }
    vec_scale_inplace(1.0 / static_cast<double>(n), out);
    return out;
}

/// Everything run_round needs besides the evolving global model. probs[k]
/// is device k's error-free probability at the current participation level.
struct RoundContext {
    const ModelSpec* model = nullptr;
    const LabeledDataset* data = nullptr;  // null for the quadratic family
    const std::vector<DevicePartition>* partitions = nullptr;
    HyperParams hp;
    std::vector<double> probs;
    int n_participating = 1;
    // Set false when the caller already parallelizes across run_round calls
    // (e.g. Monte-Carlo trials) so device updates stay serial inside each.
    bool parallel_locals = true;
};

/// One round's shared draws and per-strategy aggregates. Strategies compared
/// through a single run_round call see the same selection, the same error
/// events, and the same trained locals (common random numbers).
struct RoundOutcome {
    int round = 0;
    SelectionSet selected;
    ErrorEvents events;
    std::vector<ParamVector> locals;  // one per device, trained from w_m
    std::vector<StrategyId> strategies;
    std::vector<ParamVector> aggregates;  // parallel to strategies

    const ParamVector& aggregate_for(StrategyId s) const {
        for (std::size_t i = 0; i < strategies.size(); ++i)
            if (strategies[i] == s) return aggregates[i];
        throw config_error("round outcome holds no aggregate for strategy " +
                           std::string(strategy_name(s)));
    }
    int n_error_free() const { return events.n_error_free(); }
};

/// Single federated round from a common global model: select N devices,
/// train all K locals (so the ideal reference is always available), sample
/// error events for the selected set, then aggregate once per requested
/// strategy over the shared draws.
inline RoundOutcome run_round(const RoundContext& ctx, const ParamVector& w_m, int round,
                              const std::vector<StrategyId>& strategies, RngSpec rng) {
    if (!ctx.model || !ctx.partitions) throw config_error("run_round: model and partitions required");
    const int k_devices = static_cast<int>(ctx.partitions->size());
    if (k_devices < 1) throw config_error("run_round: no device partitions");
    if (static_cast<int>(ctx.probs.size()) != k_devices)
        throw config_error("run_round: probs must cover all K devices");

    RoundOutcome out;
    out.round = round;
    out.strategies = strategies;

    StreamRng sel_rng(derive_stream(rng, {stream::kSelect, std::uint64_t(round)}));
    out.selected = select_devices(k_devices, ctx.n_participating, sel_rng);

    out.locals.resize(k_devices);
    parallel_for(
        k_devices,
        [&](std::size_t k) {
            out.locals[k] = local_update(
                *ctx.model, w_m, ctx.data, (*ctx.partitions)[k], ctx.hp,
                derive_stream(rng, {stream::kBatch, std::uint64_t(round), std::uint64_t(k)}));
        },
        ctx.parallel_locals ? 0 : 1);

    std::vector<double> probs_selected;
    probs_selected.reserve(out.selected.size());
    for (int id : out.selected.device_ids) probs_selected.push_back(ctx.probs[id]);
    out.events = sample_error_events(probs_selected, out.selected,
                                     derive_stream(rng, {stream::kError, std::uint64_t(round)}));

    std::vector<ParamVector> locals_selected;
    locals_selected.reserve(out.selected.size());
    for (int id : out.selected.device_ids) locals_selected.push_back(out.locals[id]);

    out.aggregates.reserve(strategies.size());
    for (StrategyId s : strategies) {
        switch (s) {
            case StrategyId::ideal:
                out.aggregates.push_back(aggregate_ideal(out.locals));
                break;
            case StrategyId::dds:
                out.aggregates.push_back(
                    aggregate_dds(locals_selected, out.events.error_free, probs_selected));
                break;
            case StrategyId::gomore:
                out.aggregates.push_back(
                    aggregate_gomore(locals_selected, out.events.error_free, w_m));
                break;
        }
    }
    return out;
}

}  // namespace wfl
