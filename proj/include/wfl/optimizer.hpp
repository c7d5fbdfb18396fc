#pragma once

// Participation planner. The objective trades selection coverage against
// per-device error probability: activating more devices splits the rate
// budget N ways and drives every p_k down, so the minimum usually sits in
// the interior. K is small, so exhaustive search over N in [1, K] is exact
// and O(K) objective evaluations.

#include <cmath>
#include <vector>

#include "wfl/channel.hpp"
#include "wfl/core.hpp"

namespace wfl {

/// Planner output: the whole objective curve (index N-1), the minimizer,
/// and the per-device error-free probabilities at that minimizer.
struct ActivationPlan {
    std::vector<double> objective_values;
    int best_n = 1;
    std::vector<double> probs_at_best;
};

/// Objective for activating N of K devices:
/// sum_k [ (K-N)/((K-1)N) * p_k(N)^2 - p_k(N) ],  p_k(N) = e^{-lambda_k (2^{rho N}-1)/N}.
/// Lower is better; the overflow guard in the channel module maps huge
/// rho*N to p_k = 0, where the objective flattens to 0 per device.
inline double activation_objective(const std::vector<double>& lambdas, double rho, int n_participating,
                                   int k_devices) {
    if (k_devices < 2) throw config_error("activation objective needs K >= 2");
    if (n_participating < 1 || n_participating > k_devices)
        throw config_error("activation objective needs 1 <= N <= K");
    if (static_cast<int>(lambdas.size()) != k_devices)
        throw config_error("activation objective needs one lambda per device");
    if (!(rho > 0)) throw config_error("activation objective needs rho > 0");
    const double coef = double(k_devices - n_participating) /
                        (double(k_devices - 1) * n_participating);
    const RateParams rate{rho, n_participating};
    double sum = 0;
    for (double lambda : lambdas) {
        if (!(lambda >= 0)) throw config_error("device lambdas must be >= 0");
        const double p = error_free_prob_rate(lambda, rate);
        // p*(coef*p - 1): avoids cancellation at p near 1 (coef is exactly
        // 1 at N = 1 and below 1/2 for N >= 2, so coef*p - 1 is safe)
        sum += p * (coef * p - 1.0);
    }
    return sum;
}

/// Exhaustive search over N in [1, K]; ties break toward smaller N (fewer
/// active devices keep every p_k higher, the safer side of a tie).
inline ActivationPlan optimize_participation(const std::vector<double>& lambdas, double rho,
                                             int k_devices) {
    if (k_devices < 1) throw config_error("optimize_participation needs K >= 1");
    if (static_cast<int>(lambdas.size()) != k_devices)
        throw config_error("optimize_participation needs one lambda per device");
    ActivationPlan plan;
    plan.objective_values.resize(k_devices);
    if (k_devices == 1) {
        // Degenerate cohort: the coverage term is void, leaving -p(N=1).
        if (!(rho > 0)) throw config_error("activation objective needs rho > 0");
        plan.objective_values[0] = -error_free_prob_rate(lambdas[0], RateParams{rho, 1});
        plan.best_n = 1;
    } else {
        for (int n = 1; n <= k_devices; ++n)
            plan.objective_values[n - 1] = activation_objective(lambdas, rho, n, k_devices);
        plan.best_n = 1;
        for (int n = 2; n <= k_devices; ++n)
            if (plan.objective_values[n - 1] < plan.objective_values[plan.best_n - 1])
                plan.best_n = n;
    }
    const RateParams rate{rho, plan.best_n};
    plan.probs_at_best.reserve(lambdas.size());
    for (double lambda : lambdas) plan.probs_at_best.push_back(error_free_prob_rate(lambda, rate));
    return plan;
}

/// The planner's claim about end-to-end behavior: accuracy vs. N should
/// peak where the objective bottoms out. This returns that predicted
/// argmax; sweeps compare it against the empirical accuracy argmax.
inline int predicted_accuracy_argmax(const ActivationPlan& plan) { return plan.best_n; }

}  // namespace wfl
