#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nnlab/tensor.hpp"

namespace nnlab {

struct LabelProvenance {
    bool randomized = false;
    double noise_level = 0.0;
    std::uint64_t seed = 0;
};

struct LabeledDataset {
    Tensor inputs;              // [n, channels, h, w] or [n, features]
    std::vector<int> labels;    // values in [0, num_classes)
    int num_classes = 0;
    LabelProvenance provenance;

    std::size_t size() const { return labels.size(); }
    Shape sample_shape() const; // shape without the leading batch dim
    void validate() const;
};

struct AugmentationPolicy {
    bool enabled = false;
    int pad_pixels = 0;
    int crop_h = 0; // 0 means "original size"
    int crop_w = 0;
    bool horizontal_flip = false;
};

// IDX pair (big-endian; magic 0x00000803 for images, 0x00000801 for labels).
// Pixel bytes map linearly from [0, 255] onto [-1, 1].
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path);

// CIFAR-10 binary: stream of 3073-byte records (label byte + 3*32*32 pixels).
LabeledDataset load_cifar10_binary(const std::string& path);

struct SynthSpec {
    int num_classes = 10;
    int per_class = 50;
    int dims = 16;
    double center_scale = 0.5;
    double noise_sigma = 0.1;
    std::uint64_t seed = 1;
    int split = 0; // same centers for every split, independent sample noise
};

// Gaussian blobs around seeded class centers.
LabeledDataset synth_clusters(const SynthSpec& spec);
std::vector<std::vector<double>> synth_cluster_centers(const SynthSpec& spec);

// Redraws the labels of exactly round(p*n) seeded sample slots, uniformly
// over all classes (the redrawn label may equal the original). For a fixed
// seed the redrawn slot set for p1 < p2 is a prefix of the one for p2, with
// identical redrawn values on the shared prefix.
LabeledDataset randomize_labels(const LabeledDataset& ds, double p, std::uint64_t seed);

// Per-image random crop from the zero-padded image plus optional
// Bernoulli(0.5) horizontal flip. Disabled policy copies the batch.
Tensor augment(const Tensor& batch, const AugmentationPolicy& policy, std::uint64_t seed);

struct Batch {
    Tensor inputs;
    std::vector<int> labels;
    std::vector<int> indices;
};

// Seeded permutation of all sample indices (a function of seed and epoch),
// split into consecutive batches; the last one may be short.
std::vector<std::vector<int>> batch_plan(std::size_t n, int batch_size,
                                         std::uint64_t shuffle_seed, int epoch);
Batch gather(const LabeledDataset& ds, const std::vector<int>& indices);
std::vector<Batch> batches(const LabeledDataset& ds, int batch_size,
                           std::uint64_t shuffle_seed, int epoch);

} // namespace nnlab
