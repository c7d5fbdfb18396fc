#pragma once

// Shared domain types and vector arithmetic. All model-parameter math in the
// simulator runs through the helpers here; summation order is fixed
// (ascending index) so results are bit-reproducible for a given seed.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "wfl/rng.hpp"

namespace wfl {

/// Flat model parameter vector. Dimension is fixed per experiment.
using ParamVector = std::vector<double>;

/// Thrown when user-supplied configuration is invalid (CLI exit code 1).
class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown when training produces non-finite parameters (CLI exit code 2).
class divergence_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Per-round training hyperparameters.
struct HyperParams {
    double learning_rate = 0.001;  // eta
    int local_epochs = 10;         // T gradient steps per round
    int batch_size = 50;           // b
    int rounds = 100;              // M

    void validate() const {
        if (!(learning_rate > 0.0)) throw config_error("hyper.learning_rate must be > 0");
        if (local_epochs < 1) throw config_error("hyper.local_epochs must be >= 1");
        if (batch_size < 1) throw config_error("hyper.batch_size must be >= 1");
        if (rounds < 0) throw config_error("hyper.rounds must be >= 0");
    }
};

/// The devices chosen for one round; ids sorted ascending, no duplicates.
struct SelectionSet {
    std::vector<int> device_ids;

    bool contains(int id) const {
        for (int d : device_ids)
            if (d == id) return true;
        return false;
    }
    int size() const { return static_cast<int>(device_ids.size()); }
};

inline bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline void require_same_dim(const ParamVector& x, const ParamVector& y, const char* op) {
    if (x.size() != y.size())
        throw std::invalid_argument(std::string(op) + ": dimension mismatch (" +
                                    std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
}

/// a*x + y, elementwise.
inline ParamVector vec_axpy(double a, const ParamVector& x, const ParamVector& y) {
    require_same_dim(x, y, "vec_axpy");
    ParamVector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + y[i];
    return out;
}

/// y += a*x, elementwise, in place.
inline void vec_axpy_inplace(double a, const ParamVector& x, ParamVector& y) {
    require_same_dim(x, y, "vec_axpy_inplace");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline void vec_scale_inplace(double a, ParamVector& x) {
    for (double& v : x) v *= a;
}

/// Sum of squared entries.
inline double vec_sq_norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
}

/// Squared Euclidean distance between two vectors of equal dimension.
inline double vec_sq_dist(const ParamVector& x, const ParamVector& y) {
    require_same_dim(x, y, "vec_sq_dist");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = x[i] - y[i];
        s += d * d;
    }
    return s;
}

/// Mean of a set of equal-dimension vectors, summed in index order.
inline ParamVector vec_mean(std::span<const ParamVector> vs) {
    if (vs.empty()) throw std::invalid_argument("vec_mean: empty input");
    ParamVector out(vs[0].size(), 0.0);
    for (const auto& v : vs) {
        require_same_dim(out, v, "vec_mean");
        for (std::size_t i = 0; i < v.size(); ++i) out[i] += v[i];
    }
    vec_scale_inplace(1.0 / static_cast<double>(vs.size()), out);
    return out;
}

}  // namespace wfl
