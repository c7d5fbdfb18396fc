#pragma once

// Wireless uplink model. A device's upload survives the round iff its SNR
// under Rayleigh fading clears the decoding threshold; the outage event is
// fully summarized by the closed-form error-free probability, so rounds draw
// only Bernoulli error events and never sample the fading itself.

#include <cmath>
#include <cstdint>
#include <vector>

#include "wfl/core.hpp"
#include "wfl/rng.hpp"

namespace wfl {

/// Shared radio constants. snr_threshold is the linear decoding threshold
/// theta; leave it at 0 to derive it from the rate budget (payload over
/// delay) instead.
struct RadioConstants {
    double transmit_power_w = 0.1;
    double bandwidth_hz = 1e6;
    double noise_density_w_per_hz = 3.9810717055349853e-21;  // -174 dBm/Hz
    double ref_gain = 1e-3;                                  // |h0|^2, -30 dB
    double pathloss_exp = 2.2;
    double snr_threshold = 0.0;  // theta, linear; 0 = rate-derived
    double payload_bits = 1628480.0;
    double delay_budget_s = 1.5;

    void validate() const {
        if (!(transmit_power_w > 0)) throw config_error("radio.transmit_power_w must be > 0");
        if (!(bandwidth_hz > 0)) throw config_error("radio.bandwidth_hz must be > 0");
        if (!(noise_density_w_per_hz > 0)) throw config_error("radio.noise_density_w_per_hz must be > 0");
        if (!(ref_gain > 0)) throw config_error("radio.ref_gain must be > 0");
        if (!(pathloss_exp > 0)) throw config_error("radio.pathloss_exp must be > 0");
        if (snr_threshold < 0) throw config_error("radio.snr_threshold must be >= 0");
        if (!(payload_bits > 0)) throw config_error("radio.payload_bits must be > 0");
        if (!(delay_budget_s > 0)) throw config_error("radio.delay_budget_s must be > 0");
    }
};

/// Per-device link statistics. lambda folds every radio constant into one
/// number: lambda_k = B*N0 / (2*P*|h0|^2*d_k^-alpha).
struct DeviceLink {
    double distance_m = 0.0;
    double lambda = 0.0;
};

inline double lambda_for_distance(const RadioConstants& radio, double distance_m) {
    radio.validate();
    if (!(distance_m > 0)) throw config_error("device distance must be > 0");
    return radio.bandwidth_hz * radio.noise_density_w_per_hz /
           (2.0 * radio.transmit_power_w * radio.ref_gain * std::pow(distance_m, -radio.pathloss_exp));
}

inline std::vector<DeviceLink> make_links(const RadioConstants& radio,
                                          const std::vector<double>& distances_m) {
    std::vector<DeviceLink> links;
    links.reserve(distances_m.size());
    for (double d : distances_m) links.push_back({d, lambda_for_distance(radio, d)});
    return links;
}

/// Rate-budget reparameterization: rho = payload / (bandwidth * delay).
struct RateParams {
    double rho = 0.0;
    int n_active = 1;
};

inline double rho_of(const RadioConstants& radio) {
    radio.validate();
    return radio.payload_bits / (radio.bandwidth_hz * radio.delay_budget_s);
}

/// Probability the upload is error-free, directly from the radio constants:
/// exp(-B*N0*theta / (2*N*P*|h0|^2*d^-alpha)). Equals 1 iff theta = 0.
inline double error_free_prob_direct(const RadioConstants& radio, double distance_m,
                                     int n_active, double theta) {
    radio.validate();
    if (n_active < 1) throw config_error("n_active must be >= 1");
    if (theta < 0) throw config_error("snr threshold must be >= 0");
    double lambda = lambda_for_distance(radio, distance_m);
    return std::exp(-lambda * theta / static_cast<double>(n_active));
}

/// Same probability through the rate budget: exp(-lambda*(2^(rho*N)-1)/N).
/// Agrees with error_free_prob_direct when theta = 2^(rho*N)-1. The exponent
/// is guarded: rho*N > 1000 underflows to probability 0.
inline double error_free_prob_rate(double lambda, const RateParams& rate) {
    if (lambda < 0) throw config_error("lambda must be >= 0");
    if (!(rate.rho > 0)) throw config_error("rho must be > 0");
    if (rate.n_active < 1) throw config_error("n_active must be >= 1");
    const double n = static_cast<double>(rate.n_active);
    const double rho_n = rate.rho * n;
    if (rho_n > 1000.0) return 0.0;
    return std::exp(-lambda * (std::exp2(rho_n) - 1.0) / n);
}

inline std::vector<double> error_free_probs(const std::vector<DeviceLink>& links,
                                            const RateParams& rate) {
    std::vector<double> probs;
    probs.reserve(links.size());
    for (const auto& link : links) probs.push_back(error_free_prob_rate(link.lambda, rate));
    return probs;
}

/// Error events for one round. error_free[i] corresponds to
/// selected.device_ids[i]; unselected devices are absent.
struct ErrorEvents {
    SelectionSet selected;
    std::vector<std::uint8_t> error_free;

    bool error_free_for(int device_id) const {
        for (std::size_t i = 0; i < selected.device_ids.size(); ++i)
            if (selected.device_ids[i] == device_id) return error_free[i] != 0;
        throw std::invalid_argument("error_free_for: device not selected");
    }
    int n_error_free() const {
        int n = 0;
        for (auto ok : error_free) n += ok != 0;
        return n;
    }
};

/// Draws one independent Bernoulli error event per selected device.
/// probs_selected[i] is the error-free probability of selected.device_ids[i].
inline ErrorEvents sample_error_events(const std::vector<double>& probs_selected,
                                       const SelectionSet& selected, RngSpec rng) {
    if (probs_selected.size() != selected.device_ids.size())
        throw std::invalid_argument("sample_error_events: one probability per selected device required");
    for (double p : probs_selected)
        if (!(p >= 0.0 && p <= 1.0))
            throw std::invalid_argument("sample_error_events: probability outside [0,1]");
    StreamRng gen(rng);
    ErrorEvents events;
    events.selected = selected;
    events.error_free.resize(selected.device_ids.size());
    for (std::size_t i = 0; i < probs_selected.size(); ++i)
        events.error_free[i] = gen.bernoulli(probs_selected[i]) ? 1 : 0;
    return events;
}

}  // namespace wfl
