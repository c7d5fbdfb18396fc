#pragma once

// Local training: T mini-batch SGD steps per round on one of two model
// families. The MLP (flat parameter layout, softmax cross-entropy) is the
// classifier used for end-to-end runs; the quadratic family
// F_k(w) = 0.5*||w - c_k||^2 has closed-form dynamics and exact norm
// constants, which makes divergence-bound checks sharp instead of advisory.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "wfl/core.hpp"
#include "wfl/data.hpp"
#include "wfl/rng.hpp"

namespace wfl {

enum class ModelFamily { mlp, quadratic };
enum class Activation { relu };

struct ModelSpec {
    ModelFamily family = ModelFamily::mlp;
    // mlp
    std::vector<int> layer_sizes;  // e.g. {784, 64, 10}
    Activation activation = Activation::relu;
    // quadratic
    ParamVector quad_w0;
    std::vector<ParamVector> centers;  // centers[k] is device k's target
};

inline ModelSpec make_mlp(std::vector<int> layer_sizes) {
    if (layer_sizes.size() < 2) throw config_error("mlp needs at least input and output layers");
    for (int w : layer_sizes)
        if (w < 1) throw config_error("mlp layer widths must be >= 1");
    ModelSpec spec;
    spec.family = ModelFamily::mlp;
    spec.layer_sizes = std::move(layer_sizes);
    return spec;
}

inline ModelSpec make_quadratic(ParamVector w0, std::vector<ParamVector> centers) {
    if (centers.empty()) throw config_error("quadratic family needs at least one center");
    for (const auto& c : centers) {
        if (c.size() != w0.size()) throw config_error("quadratic centers must match w0 dimension");
        if (!all_finite(c)) throw config_error("quadratic centers must be finite");
    }
    if (!all_finite(w0)) throw config_error("quadratic w0 must be finite");
    ModelSpec spec;
    spec.family = ModelFamily::quadratic;
    spec.quad_w0 = std::move(w0);
    spec.centers = std::move(centers);
    return spec;
}

inline std::size_t param_count(const ModelSpec& spec) {
    if (spec.family == ModelFamily::quadratic) return spec.quad_w0.size();
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l)
        n += std::size_t(spec.layer_sizes[l + 1]) * (spec.layer_sizes[l] + 1);
    return n;
}

/// Seeded initial parameters: scaled-uniform weights in
/// +-sqrt(6/(fan_in+fan_out)), zero biases; quadratic returns its w0.
inline ParamVector init_params(const ModelSpec& spec, RngSpec rng) {
    if (spec.family == ModelFamily::quadratic) return spec.quad_w0;
    ParamVector w(param_count(spec));
    StreamRng gen(derive_stream(rng, {stream::kInit}));
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        const int fan_in = spec.layer_sizes[l];
        const int fan_out = spec.layer_sizes[l + 1];
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        for (std::size_t i = 0; i < std::size_t(fan_out) * fan_in; ++i)
            w[off++] = gen.uniform(-bound, bound);
        off += fan_out;  // biases stay zero
    }
    return w;
}

/// One mini-batch: b sample indices drawn from the partition of device_id.
struct Batch {
    int device_id = 0;
    std::vector<int> sample_indices;
};

namespace detail {

/// Scratch buffers for MLP forward/backward, reused across the T steps of a
/// local update. acts[0] holds the input rows; acts[l] for l >= 1 holds
/// post-activation values (probabilities for the output layer after the
/// softmax pass). deltas[l] aligns with acts[l+1]. wt[l] caches the layer
/// weights transposed to input-major order so the forward pass can run as
/// rank-1 accumulations (vectorizable without FP reassociation, and sparse
/// inputs/rectifier zeros skip their whole row).
struct MlpWorkspace {
    std::vector<std::vector<double>> acts;
    std::vector<std::vector<double>> deltas;
    std::vector<std::vector<double>> wt;
    int capacity = 0;

    void resize(const std::vector<int>& sizes, int batch) {
        const std::size_t n_layers = sizes.size();
        if (acts.size() != n_layers || capacity < batch) {
            acts.assign(n_layers, {});
            deltas.assign(n_layers - 1, {});
            wt.assign(n_layers - 1, {});
            for (std::size_t l = 0; l < n_layers; ++l)
                acts[l].resize(std::size_t(batch) * sizes[l]);
            for (std::size_t l = 0; l + 1 < n_layers; ++l) {
                deltas[l].resize(std::size_t(batch) * sizes[l + 1]);
                wt[l].resize(std::size_t(sizes[l]) * sizes[l + 1]);
            }
            capacity = batch;
        }
    }
};

/// Re-stages ws.wt from the current parameters; call whenever w changed.
inline void mlp_stage_weights(const ModelSpec& spec, const ParamVector& w, MlpWorkspace& ws) {
    const auto& sizes = spec.layer_sizes;
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const int n_in = sizes[l];
        const int n_out = sizes[l + 1];
        const double* W = &w[off];
        std::vector<double>& WT = ws.wt[l];
        for (int o = 0; o < n_out; ++o)
            for (int j = 0; j < n_in; ++j) WT[std::size_t(j) * n_out + o] = W[std::size_t(o) * n_in + j];
        off += std::size_t(n_out) * (n_in + 1);
    }
}

/// Forward pass over `b` rows already staged in ws.acts[0]; leaves class
/// probabilities in the last activation buffer and returns the mean
/// cross-entropy against `labels` (pass nullptr to skip the loss).
/// Requires mlp_stage_weights to have run for the current w.
inline double mlp_forward(const ModelSpec& spec, const ParamVector& w, int b, const int* labels,
                          MlpWorkspace& ws) {
    const auto& sizes = spec.layer_sizes;
    const std::size_t n_weight_layers = sizes.size() - 1;
    std::size_t off = 0;
    for (std::size_t l = 0; l < n_weight_layers; ++l) {
        const int n_in = sizes[l];
        const int n_out = sizes[l + 1];
        const double* WT = ws.wt[l].data();
        const double* bias = &w[off + std::size_t(n_out) * n_in];
        const std::vector<double>& src = ws.acts[l];
        std::vector<double>& dst = ws.acts[l + 1];
        const bool hidden = l + 1 < n_weight_layers;
        for (int i = 0; i < b; ++i) {
            const double* row = &src[std::size_t(i) * n_in];
            double* out = &dst[std::size_t(i) * n_out];
            for (int o = 0; o < n_out; ++o) out[o] = bias[o];
            for (int j = 0; j < n_in; ++j) {
                const double aj = row[j];
                if (aj == 0.0) continue;
                const double* wtrow = WT + std::size_t(j) * n_out;
                for (int o = 0; o < n_out; ++o) out[o] += aj * wtrow[o];
            }
            if (hidden)
                for (int o = 0; o < n_out; ++o)
                    if (out[o] < 0) out[o] = 0.0;
        }
        off += std::size_t(n_out) * (n_in + 1);
    }

    // softmax in place on the logits; accumulate cross-entropy if asked
    const int n_classes = sizes.back();
    std::vector<double>& logits = ws.acts.back();
    double loss_sum = 0;
    for (int i = 0; i < b; ++i) {
        double* row = &logits[std::size_t(i) * n_classes];
        double zmax = row[0];
        for (int c = 1; c < n_classes; ++c) zmax = std::max(zmax, row[c]);
        double denom = 0;
        for (int c = 0; c < n_classes; ++c) {
            row[c] = std::exp(row[c] - zmax);
            denom += row[c];
        }
        for (int c = 0; c < n_classes; ++c) row[c] /= denom;
        if (labels) loss_sum += -std::log(std::max(row[labels[i]], 1e-300));
    }
    return labels ? loss_sum / b : 0.0;
}

/// Full backward pass; assumes mlp_forward just ran for the same batch.
/// Writes the gradient of the mean batch loss into grad (overwritten).
inline void mlp_backward(const ModelSpec& spec, const ParamVector& w, int b, const int* labels,
                         MlpWorkspace& ws, ParamVector& grad) {
    const auto& sizes = spec.layer_sizes;
    const std::size_t n_weight_layers = sizes.size() - 1;
    grad.assign(w.size(), 0.0);

    const int n_classes = sizes.back();
    std::vector<double>& out_delta = ws.deltas[n_weight_layers - 1];
    const std::vector<double>& probs = ws.acts.back();
    const double inv_b = 1.0 / b;
    for (int i = 0; i < b; ++i)
        for (int c = 0; c < n_classes; ++c) {
            double p = probs[std::size_t(i) * n_classes + c];
            out_delta[std::size_t(i) * n_classes + c] = (p - (labels[i] == c ? 1.0 : 0.0)) * inv_b;
        }

    std::size_t off_end = w.size();
    for (std::size_t l = n_weight_layers; l-- > 0;) {
        const int n_in = sizes[l];
        const int n_out = sizes[l + 1];
        const std::size_t off = off_end - std::size_t(n_out) * (n_in + 1);
        const double* W = &w[off];
        double* gW = &grad[off];
        double* gb = &grad[off + std::size_t(n_out) * n_in];
        const std::vector<double>& delta = ws.deltas[l];
        const std::vector<double>& act_in = ws.acts[l];
        for (int i = 0; i < b; ++i) {
            const double* drow = &delta[std::size_t(i) * n_out];
            const double* arow = &act_in[std::size_t(i) * n_in];
            for (int o = 0; o < n_out; ++o) {
                const double d = drow[o];
                if (d == 0.0) continue;
                gb[o] += d;
                double* grow = gW + std::size_t(o) * n_in;
                for (int j = 0; j < n_in; ++j) grow[j] += d * arow[j];
            }
        }
        if (l > 0) {
            std::vector<double>& prev_delta = ws.deltas[l - 1];
            for (int i = 0; i < b; ++i) {
                const double* drow = &delta[std::size_t(i) * n_out];
                double* prow = &prev_delta[std::size_t(i) * n_in];
                for (int j = 0; j < n_in; ++j) prow[j] = 0.0;
                for (int o = 0; o < n_out; ++o) {
                    const double d = drow[o];
                    if (d == 0.0) continue;
                    const double* wrow = W + std::size_t(o) * n_in;
                    for (int j = 0; j < n_in; ++j) prow[j] += d * wrow[j];
                }
                const double* arow = &act_in[std::size_t(i) * n_in];
                for (int j = 0; j < n_in; ++j)
                    if (arow[j] <= 0.0) prow[j] = 0.0;  // rectifier gate
            }
        }
        off_end = off;
    }
}

inline void stage_batch(const LabeledDataset& data, const std::vector<int>& samples,
                        std::size_t first, int b, MlpWorkspace& ws, std::vector<int>& labels) {
    labels.resize(b);
    for (int i = 0; i < b; ++i) {
        const int s = samples[first + i];
        data.copy_row(s, &ws.acts[0][std::size_t(i) * data.n_features]);
        labels[i] = data.labels[s];
    }
}

}  // namespace detail

/// Mean loss over the batch and its gradient. The quadratic family ignores
/// the data (its loss 0.5*||w - c_k||^2 is batch-independent); the MLP uses
/// softmax cross-entropy over the referenced rows.
inline double loss_and_grad(const ModelSpec& spec, const ParamVector& w, const Batch& batch,
                            const LabeledDataset* data, ParamVector& grad) {
    if (w.size() != param_count(spec))
        throw config_error("parameter vector does not match model dimension");
    if (spec.family == ModelFamily::quadratic) {
        const ParamVector& c = spec.centers.at(batch.device_id);
        grad.resize(w.size());
        double loss = 0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            grad[i] = w[i] - c[i];
            loss += grad[i] * grad[i];
        }
        return 0.5 * loss;
    }
    if (!data) throw config_error("mlp loss requires a dataset");
    const int b = static_cast<int>(batch.sample_indices.size());
    if (b < 1) throw config_error("empty batch");
    detail::MlpWorkspace ws;
    ws.resize(spec.layer_sizes, b);
    detail::mlp_stage_weights(spec, w, ws);
    std::vector<int> labels;
    detail::stage_batch(*data, batch.sample_indices, 0, b, ws, labels);
    const double loss = detail::mlp_forward(spec, w, b, labels.data(), ws);
    detail::mlp_backward(spec, w, b, labels.data(), ws, grad);
    return loss;
}

/// T sequential SGD steps w <- w - eta * grad(w, fresh uniform batch).
/// Bit-reproducible for a fixed rng spec; throws divergence_error if the
/// loss or the resulting parameters go non-finite.
inline ParamVector local_update(const ModelSpec& spec, const ParamVector& w_init,
                                const LabeledDataset* data, const DevicePartition& part,
                                const HyperParams& hp, RngSpec rng) {
    if (w_init.size() != param_count(spec))
        throw config_error("parameter vector does not match model dimension");
    ParamVector w = w_init;

    if (spec.family == ModelFamily::quadratic) {
        const ParamVector& c = spec.centers.at(part.device_id);
        for (int t = 0; t < hp.local_epochs; ++t)
            for (std::size_t i = 0; i < w.size(); ++i) w[i] -= hp.learning_rate * (w[i] - c[i]);
        if (!all_finite(w)) throw divergence_error("local update diverged (device " +
                                                   std::to_string(part.device_id) + ")");
        return w;
    }

    if (!data) throw config_error("mlp training requires a dataset");
    if (part.size() < 1) throw config_error("device partition is empty");
    const int b = hp.batch_size;
    StreamRng gen(rng);
    detail::MlpWorkspace ws;
    ws.resize(spec.layer_sizes, b);
    ParamVector grad;
    std::vector<int> batch_samples(b);
    std::vector<int> labels;
    for (int t = 0; t < hp.local_epochs; ++t) {
        for (int i = 0; i < b; ++i)
            batch_samples[i] =
                part.sample_indices[gen.uniform_int(static_cast<std::uint64_t>(part.size()))];
        detail::stage_batch(*data, batch_samples, 0, b, ws, labels);
        detail::mlp_stage_weights(spec, w, ws);
        const double loss = detail::mlp_forward(spec, w, b, labels.data(), ws);
        if (!std::isfinite(loss))
            throw divergence_error("training loss went non-finite (device " +
                                   std::to_string(part.device_id) + ", step " + std::to_string(t) +
                                   ")");
        detail::mlp_backward(spec, w, b, labels.data(), ws, grad);
        vec_axpy_inplace(-hp.learning_rate, grad, w);
    }
    if (!all_finite(w))
        throw divergence_error("local update diverged (device " + std::to_string(part.device_id) +
                               ")");
    return w;
}

struct EvalResult {
    bool has_accuracy = false;
    double accuracy = 0.0;  // argmax fraction (ties -> lowest class index)
    double mean_loss = 0.0;
};

/// Deterministic test-set evaluation. MLP: argmax accuracy + mean
/// cross-entropy over the first `max_samples` rows (0 = all). Quadratic:
/// mean of the per-device objectives; accuracy is flagged absent.
inline EvalResult evaluate(const ModelSpec& spec, const ParamVector& w, const LabeledDataset* test,
                           int max_samples = 0) {
    EvalResult res;
    if (spec.family == ModelFamily::quadratic) {
        long double sum = 0;
        for (const auto& c : spec.centers) sum += 0.5L * vec_sq_dist(w, c);
        res.mean_loss = static_cast<double>(sum / spec.centers.size());
        return res;
    }
    if (!test || test->n_samples < 1) throw config_error("evaluation requires a non-empty test set");
    const int n = (max_samples > 0 && max_samples < test->n_samples) ? max_samples : test->n_samples;
    const int chunk = 256;
    detail::MlpWorkspace ws;
    ws.resize(spec.layer_sizes, chunk);
    detail::mlp_stage_weights(spec, w, ws);
    const int n_classes = spec.layer_sizes.back();
    long correct = 0;
    long double loss_sum = 0;
    std::vector<int> labels;
    std::vector<int> rows(chunk);
    for (int start = 0; start < n; start += chunk) {
        const int b = std::min(chunk, n - start);
        for (int i = 0; i < b; ++i) rows[i] = start + i;
        rows.resize(b);
        detail::stage_batch(*test, rows, 0, b, ws, labels);
        rows.resize(chunk);
        loss_sum += static_cast<long double>(detail::mlp_forward(spec, w, b, labels.data(), ws)) * b;
        const std::vector<double>& probs = ws.acts.back();
        for (int i = 0; i < b; ++i) {
            const double* row = &probs[std::size_t(i) * n_classes];
            int best = 0;
            for (int c = 1; c < n_classes; ++c)
                if (row[c] > row[best]) best = c;
            correct += best == labels[i];
        }
    }
    res.has_accuracy = true;
    res.accuracy = double(correct) / n;
    res.mean_loss = static_cast<double>(loss_sum / n);
    return res;
}

}  // namespace wfl
