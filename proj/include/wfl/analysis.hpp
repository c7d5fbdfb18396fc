#pragma once

// Weight-divergence analysis: closed-form upper bounds for the two lossy
// aggregation rules, the analytic lower bound on their gap, Monte-Carlo
// estimators that check the bounds empirically, and norm-constant
// estimation. The quadratic family gets exact constants (its iterates stay
// in the convex hull of the start point and the centers), which is what
// makes the bound checks assertable rather than advisory.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "wfl/aggregation.hpp"
#include "wfl/core.hpp"
#include "wfl/learner.hpp"
#include "wfl/parallel.hpp"
#include "wfl/rng.hpp"

namespace wfl {

/// Inputs every bound shares: norm constants, step size, step count, the
/// cohort sizes, and per-device error-free probabilities.
struct BoundConstants {
    double gamma_sq = 1.0;  // max squared stochastic-gradient norm
    double g_sq = 1.0;      // max squared parameter norm
    double eta = 0.001;
    int local_epochs = 10;
    int k_devices = 2;
    int n_participating = 1;
    std::vector<double> probs;

    void validate() const {
        if (!(gamma_sq >= 0)) throw config_error("bound constants: gamma_sq must be >= 0");
        if (!(g_sq >= 0)) throw config_error("bound constants: g_sq must be >= 0");
        if (!(eta >= 0)) throw config_error("bound constants: eta must be >= 0");
        if (local_epochs < 1) throw config_error("bound constants: local_epochs must be >= 1");
        if (k_devices < 2) throw config_error("bound constants: need K >= 2 devices");
        if (n_participating < 1 || n_participating > k_devices)
            throw config_error("bound constants: need 1 <= N <= K");
        if (static_cast<int>(probs.size()) != k_devices)
            throw config_error("bound constants: one probability per device required");
        for (double p : probs)
            if (!(p > 0.0 && p <= 1.0))
                throw config_error("bound constants: probabilities must lie in (0,1]");
    }

    /// Small-learning-rate condition eta <= G/(T*gamma) under which the
    /// strategy ordering is guaranteed.
    bool small_lr() const {
        if (gamma_sq == 0) return true;
        return eta * local_epochs * std::sqrt(gamma_sq) <= std::sqrt(g_sq);
    }
};

/// Divergence bound for the stale-substitution rule:
/// sum_k (eta^2 T^2 gamma^2 / K) * ((K-N)/(N(K-1)) * p_k^2 - p_k + 1).
inline double zeta_bound_gomore(const BoundConstants& c) {
    c.validate();
    const double k = c.k_devices, n = c.n_participating;
    const double lead = c.eta * c.eta * double(c.local_epochs) * double(c.local_epochs) *
                        c.gamma_sq / k;
    const double sel = (k - n) / (n * (k - 1.0));
    double sum = 0;
    // grouped so 1-p stays exact near p = 1 instead of cancelling
    for (double p : c.probs) sum += lead * (sel * p * p + (1.0 - p));
    return sum;
}

/// Divergence bound for the direct-discard rule:
/// sum_k (eta^2 T^2 gamma^2 (K-N) / (K N (K-1)) + (1-p_k)/(K p_k) * G^2).
/// Diverges as any p_k -> 0, which is why p_k = 0 is rejected outright.
inline double zeta_bound_dds(const BoundConstants& c) {
    c.validate();
    const double k = c.k_devices, n = c.n_participating;
    const double t = c.local_epochs;
    const double sel_term = c.eta * c.eta * t * t * c.gamma_sq * (k - n) / (k * n * (k - 1.0));
    double sum = 0;
    for (double p : c.probs) sum += sel_term + (1.0 - p) / (k * p) * c.g_sq;
    return sum;
}

/// Analytic lower bound on zeta_bound_dds - zeta_bound_gomore, valid under
/// eta <= G/(T*gamma): sum_k (eta^2 T^2 gamma^2 / K) *
/// ((K-N)(1-p_k^2)/(N(K-1)) + (1-p_k)^2/p_k). Zero iff every p_k = 1.
inline double theorem_gap_lower(const BoundConstants& c) {
    c.validate();
    if (!c.small_lr())
        throw config_error("gap lower bound needs the small-learning-rate condition eta <= G/(T*gamma)");
    const double k = c.k_devices, n = c.n_participating;
    const double lead = c.eta * c.eta * double(c.local_epochs) * double(c.local_epochs) *
                        c.gamma_sq / k;
    const double sel = (k - n) / (n * (k - 1.0));
    double sum = 0;
    // factored through q = 1-p (exact), which would otherwise cancel in 1-p^2
    for (double p : c.probs) {
        const double q = 1.0 - p;
        sum += lead * q * (sel * (1.0 + p) + q / p);
    }
    return sum;
}

struct DivergenceEstimate {
    double mean = 0.0;
    double std_err = 0.0;
    long n_trials = 0;
};

namespace detail {

inline DivergenceEstimate summarize(const std::vector<double>& samples) {
    DivergenceEstimate est;
    est.n_trials = static_cast<long>(samples.size());
    long double sum = 0;
    for (double s : samples) sum += s;
    const double mean = static_cast<double>(sum / est.n_trials);
    long double sq = 0;
    for (double s : samples) sq += (s - mean) * (s - mean);
    est.mean = mean;
    if (est.n_trials > 1) {
        const double var = static_cast<double>(sq / (est.n_trials - 1));
        est.std_err = std::sqrt(var / est.n_trials);
    }
    return est;
}

}  // namespace detail

/// One-round Monte-Carlo divergence: every trial trains all K devices from
/// the same w_start (shared batch draws between the ideal and lossy paths),
/// aggregates ideally over all K, then applies the lossy rule to a fresh
/// selection + error draw and records the squared distance. Trials use
/// derived streams and reduce in index order, so the result is identical
/// serial or parallel.
inline DivergenceEstimate estimate_divergence_mc(StrategyId strategy, const RoundContext& ctx,
                                                 const ParamVector& w_start, long n_trials,
                                                 RngSpec rng) {
    if (strategy == StrategyId::ideal)
        throw config_error("divergence is measured against the ideal aggregate; pick dds or gomore");
    if (n_trials < 1) throw config_error("divergence estimation needs n_trials >= 1");
    RoundContext trial_ctx = ctx;
    trial_ctx.parallel_locals = false;  // trials are the parallel axis here
    std::vector<double> samples(n_trials);
    const std::vector<StrategyId> wanted = {StrategyId::ideal, strategy};
    parallel_for(static_cast<std::size_t>(n_trials), [&](std::size_t t) {
        RoundOutcome out = run_round(trial_ctx, w_start, 0, wanted,
                                     derive_stream(rng, {stream::kTrial, std::uint64_t(t)}));
        samples[t] = vec_sq_dist(out.aggregate_for(strategy), out.aggregate_for(StrategyId::ideal));
    });
    return detail::summarize(samples);
}

/// Paired comparison of the two lossy rules under identical draws. The
/// per-trial difference (dds - gomore) gets its own standard error, which is
/// what makes the ordering test sharp at modest trial counts.
struct PairedDivergence {
    DivergenceEstimate gomore;
    DivergenceEstimate dds;
    double diff_mean = 0.0;  // mean of (dds - gomore) per trial
    double diff_std_err = 0.0;
};

inline PairedDivergence estimate_divergence_paired(const RoundContext& ctx,
                                                   const ParamVector& w_start, long n_trials,
                                                   RngSpec rng) {
    if (n_trials < 1) throw config_error("divergence estimation needs n_trials >= 1");
    RoundContext trial_ctx = ctx;
    trial_ctx.parallel_locals = false;
    std::vector<double> d_gomore(n_trials), d_dds(n_trials);
    const std::vector<StrategyId> wanted = {StrategyId::ideal, StrategyId::dds, StrategyId::gomore};
    parallel_for(static_cast<std::size_t>(n_trials), [&](std::size_t t) {
        RoundOutcome out = run_round(trial_ctx, w_start, 0, wanted,
                                     derive_stream(rng, {stream::kTrial, std::uint64_t(t)}));
        const ParamVector& ideal = out.aggregate_for(StrategyId::ideal);
        d_gomore[t] = vec_sq_dist(out.aggregate_for(StrategyId::gomore), ideal);
        d_dds[t] = vec_sq_dist(out.aggregate_for(StrategyId::dds), ideal);
    });
    PairedDivergence res;
    res.gomore = detail::summarize(d_gomore);
    res.dds = detail::summarize(d_dds);
    std::vector<double> diff(n_trials);
    for (long t = 0; t < n_trials; ++t) diff[t] = d_dds[t] - d_gomore[t];
    DivergenceEstimate d = detail::summarize(diff);
    res.diff_mean = d.mean;
    res.diff_std_err = d.std_err;
    return res;
}

/// Norm constants for the bounds.
struct ConstantsEstimate {
    double gamma_sq = 0.0;
    double g_sq = 0.0;
    bool exact = false;       // analytic (quadratic family) vs probed
    bool degenerate = false;  // gamma_sq == 0: bounds are trivially zero
};

/// For the quadratic family the constants are analytic: iterates and
/// aggregates stay inside the convex hull of {w_start} + {centers} (local
/// steps move along segments toward a center; the stale-substitution and
/// ideal aggregates are convex combinations), and both norms are convex, so
/// their suprema sit at hull vertices. For the MLP they are probe maxima
/// times a safety factor, and bound checks built on them stay advisory.
inline ConstantsEstimate estimate_constants(const ModelSpec& model,
                                            const std::vector<DevicePartition>& partitions,
                                            const LabeledDataset* data, const HyperParams& hp,
                                            int n_probes, RngSpec rng,
                                            double safety_factor = 1.5) {
    ConstantsEstimate est;
    if (model.family == ModelFamily::quadratic) {
        est.exact = true;
        std::vector<const ParamVector*> vertices;
        vertices.push_back(&model.quad_w0);
        for (const auto& c : model.centers) vertices.push_back(&c);
        for (const ParamVector* v : vertices) {
            est.g_sq = std::max(est.g_sq, vec_sq_norm(*v));
            for (const auto& c : model.centers)
                est.gamma_sq = std::max(est.gamma_sq, vec_sq_dist(*v, c));
        }
        est.degenerate = est.gamma_sq == 0.0;
        return est;
    }

    if (n_probes < 1) throw config_error("constant estimation needs n_probes >= 1");
    if (partitions.empty()) throw config_error("constant estimation needs device partitions");
    double max_grad_sq = 0.0, max_w_sq = 0.0;
    for (int probe = 0; probe < n_probes; ++probe) {
        const RngSpec probe_rng = derive_stream(rng, {stream::kProbe, std::uint64_t(probe)});
        ParamVector w = init_params(model, probe_rng);
        max_w_sq = std::max(max_w_sq, vec_sq_norm(w));
        const DevicePartition& part = partitions[probe % partitions.size()];
        StreamRng gen(derive_stream(probe_rng, {stream::kBatch}));
        Batch batch;
        batch.device_id = part.device_id;
        batch.sample_indices.resize(hp.batch_size);
        ParamVector grad;
        for (int t = 0; t < hp.local_epochs; ++t) {
            for (int i = 0; i < hp.batch_size; ++i)
                batch.sample_indices[i] =
                    part.sample_indices[gen.uniform_int(std::uint64_t(part.size()))];
            loss_and_grad(model, w, batch, data, grad);
            max_grad_sq = std::max(max_grad_sq, vec_sq_norm(grad));
            vec_axpy_inplace(-hp.learning_rate, grad, w);
            max_w_sq = std::max(max_w_sq, vec_sq_norm(w));
        }
    }
    est.gamma_sq = safety_factor * max_grad_sq;
    est.g_sq = safety_factor * max_w_sq;
    est.degenerate = est.gamma_sq == 0.0;
    return est;
}

}  // namespace wfl
