#pragma once

// Dataset ingestion and device partitioning. Image data loaded from IDX
// files stays in its original 8-bit form and is scaled to [0,1] on access,
// which keeps a 60000x784 dataset under 50 MB; synthetic data is stored as
// doubles. Partitions are index views into the dataset, equal-sized by
// construction (remainder samples are dropped).

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "wfl/core.hpp"
#include "wfl/rng.hpp"

namespace wfl {

struct LabeledDataset {
    enum class Storage { f64, u8 };

    int n_samples = 0;
    int n_features = 0;
    int n_classes = 0;
    Storage storage = Storage::f64;
    std::vector<double> dense;        // Storage::f64
    std::vector<std::uint8_t> bytes;  // Storage::u8, value/255 on access
    std::vector<int> labels;

    double feature(int sample, int j) const {
        std::size_t idx = static_cast<std::size_t>(sample) * n_features + j;
        return storage == Storage::f64 ? dense[idx] : bytes[idx] * (1.0 / 255.0);
    }

    void copy_row(int sample, double* out) const {
        std::size_t base = static_cast<std::size_t>(sample) * n_features;
        if (storage == Storage::f64) {
            for (int j = 0; j < n_features; ++j) out[j] = dense[base + j];
        } else {
            for (int j = 0; j < n_features; ++j) out[j] = bytes[base + j] * (1.0 / 255.0);
        }
    }
};

/// One device's local data: indices into a LabeledDataset plus its label
/// histogram. All partitions produced by the functions below have the same
/// size and are pairwise disjoint.
struct DevicePartition {
    int device_id = 0;
    std::vector<int> sample_indices;
    std::vector<int> label_histogram;

    int size() const { return static_cast<int>(sample_indices.size()); }
    int distinct_labels() const {
        int n = 0;
        for (int c : label_histogram) n += c > 0;
        return n;
    }
};

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};

inline std::uint32_t read_be32(std::FILE* f, const std::string& path) {
    unsigned char b[4];
    if (std::fread(b, 1, 4, f) != 4) throw config_error("truncated IDX file: " + path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

inline std::vector<int> histogram_of(const LabeledDataset& ds, const std::vector<int>& idxs) {
    std::vector<int> hist(ds.n_classes, 0);
    for (int i : idxs) ++hist[ds.labels[i]];
    return hist;
}

}  // namespace detail

/// Loads an IDX image/label file pair (big-endian, magic 0x00000803 /
/// 0x00000801). Pixels stay 8-bit and scale to [0,1] on access.
inline LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::unique_ptr<std::FILE, detail::FileCloser> fi(std::fopen(images_path.c_str(), "rb"));
    if (!fi) throw config_error("cannot open IDX image file: " + images_path);
    if (detail::read_be32(fi.get(), images_path) != 0x00000803u)
        throw config_error("bad IDX magic (expected 0x00000803): " + images_path);
    const std::uint32_t n_images = detail::read_be32(fi.get(), images_path);
    const std::uint32_t rows = detail::read_be32(fi.get(), images_path);
    const std::uint32_t cols = detail::read_be32(fi.get(), images_path);

    std::unique_ptr<std::FILE, detail::FileCloser> fl(std::fopen(labels_path.c_str(), "rb"));
    if (!fl) throw config_error("cannot open IDX label file: " + labels_path);
    if (detail::read_be32(fl.get(), labels_path) != 0x00000801u)
        throw config_error("bad IDX magic (expected 0x00000801): " + labels_path);
    const std::uint32_t n_labels = detail::read_be32(fl.get(), labels_path);
    if (n_images != n_labels)
        throw config_error("IDX image/label count mismatch: " + std::to_string(n_images) +
                           " images vs " + std::to_string(n_labels) + " labels");

    LabeledDataset ds;
    ds.n_samples = static_cast<int>(n_images);
    ds.n_features = static_cast<int>(rows * cols);
    ds.storage = LabeledDataset::Storage::u8;
    ds.bytes.resize(std::size_t(n_images) * rows * cols);
    if (std::fread(ds.bytes.data(), 1, ds.bytes.size(), fi.get()) != ds.bytes.size())
        throw config_error("truncated IDX file: " + images_path);

    std::vector<std::uint8_t> raw_labels(n_labels);
    if (std::fread(raw_labels.data(), 1, raw_labels.size(), fl.get()) != raw_labels.size())
        throw config_error("truncated IDX file: " + labels_path);
    ds.labels.assign(raw_labels.begin(), raw_labels.end());
    int max_label = 0;
    for (int l : ds.labels) max_label = std::max(max_label, l);
    ds.n_classes = max_label + 1;
    return ds;
}

/// Balanced synthetic classification data: class c is an isotropic Gaussian
/// (sigma = spread) around a seeded standard-normal center. Sample i has
/// label i % n_classes so every prefix slice stays balanced.
inline LabeledDataset synth_gaussian_clusters(int n_classes, int n_features, int n_samples,
                                              double spread, RngSpec rng) {
    if (n_classes < 1 || n_features < 1 || n_samples < 1)
        throw config_error("synth_gaussian_clusters: all counts must be positive");
    if (spread < 0) throw config_error("synth_gaussian_clusters: spread must be >= 0");

    StreamRng center_gen(derive_stream(rng, {stream::kCenter}));
    std::vector<double> centers(std::size_t(n_classes) * n_features);
    for (double& c : centers) c = center_gen.normal();

    LabeledDataset ds;
    ds.n_samples = n_samples;
    ds.n_features = n_features;
    ds.n_classes = n_classes;
    ds.dense.resize(std::size_t(n_samples) * n_features);
    ds.labels.resize(n_samples);
    StreamRng noise_gen(derive_stream(rng, {stream::kData}));
    for (int i = 0; i < n_samples; ++i) {
        int c = i % n_classes;
        ds.labels[i] = c;
        const double* center = &centers[std::size_t(c) * n_features];
        double* row = &ds.dense[std::size_t(i) * n_features];
        for (int j = 0; j < n_features; ++j) row[j] = center[j] + spread * noise_gen.normal();
    }
    return ds;
}

/// Random-permutation split into K equal slices of D = floor(n/K) samples.
inline std::vector<DevicePartition> partition_iid(const LabeledDataset& ds, int k_devices,
                                                  RngSpec rng) {
    if (k_devices < 1) throw config_error("partition_iid: K must be >= 1");
    if (ds.n_samples < k_devices) throw config_error("partition_iid: need at least K samples");

    std::vector<int> perm(ds.n_samples);
    std::iota(perm.begin(), perm.end(), 0);
    StreamRng gen(derive_stream(rng, {stream::kPartition}));
    for (int i = ds.n_samples - 1; i > 0; --i) {
        int j = static_cast<int>(gen.uniform_int(static_cast<std::uint64_t>(i) + 1));
        std::swap(perm[i], perm[j]);
    }

    const int d_per_device = ds.n_samples / k_devices;
    std::vector<DevicePartition> parts(k_devices);
    for (int k = 0; k < k_devices; ++k) {
        parts[k].device_id = k;
        parts[k].sample_indices.assign(perm.begin() + std::size_t(k) * d_per_device,
                                       perm.begin() + std::size_t(k + 1) * d_per_device);
        parts[k].label_histogram = detail::histogram_of(ds, parts[k].sample_indices);
    }
    return parts;
}

/// Label-shard non-IID split: samples are sorted by label, cut into
/// K*shards_per_device contiguous shards, and each device draws
/// shards_per_device shards without replacement. Samples beyond the largest
/// multiple of the shard grid are dropped so all partitions stay equal.
inline std::vector<DevicePartition> partition_noniid_shards(const LabeledDataset& ds, int k_devices,
                                                            int shards_per_device, RngSpec rng) {
    if (k_devices < 1) throw config_error("partition_noniid_shards: K must be >= 1");
    if (shards_per_device < 1) throw config_error("partition_noniid_shards: shards_per_device must be >= 1");
    const long total_shards = static_cast<long>(k_devices) * shards_per_device;
    const int shard_size = static_cast<int>(ds.n_samples / total_shards);
    if (shard_size == 0)
        throw config_error("partition_noniid_shards: " + std::to_string(ds.n_samples) +
                           " samples cannot fill " + std::to_string(total_shards) + " shards");

    std::vector<int> order(ds.n_samples);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return ds.labels[a] < ds.labels[b]; });

    std::vector<int> shard_ids(total_shards);
    std::iota(shard_ids.begin(), shard_ids.end(), 0);
    StreamRng gen(derive_stream(rng, {stream::kPartition}));
    for (long i = total_shards - 1; i > 0; --i) {
        long j = static_cast<long>(gen.uniform_int(static_cast<std::uint64_t>(i) + 1));
        std::swap(shard_ids[i], shard_ids[j]);
    }

    std::vector<DevicePartition> parts(k_devices);
    for (int k = 0; k < k_devices; ++k) {
        parts[k].device_id = k;
        parts[k].sample_indices.reserve(std::size_t(shards_per_device) * shard_size);
        for (int s = 0; s < shards_per_device; ++s) {
            int shard = shard_ids[std::size_t(k) * shards_per_device + s];
            auto begin = order.begin() + std::size_t(shard) * shard_size;
            parts[k].sample_indices.insert(parts[k].sample_indices.end(), begin, begin + shard_size);
        }
        parts[k].label_histogram = detail::histogram_of(ds, parts[k].sample_indices);
    }
    return parts;
}

}  // namespace wfl
