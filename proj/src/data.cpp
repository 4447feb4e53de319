#include "nnlab/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "nnlab/errors.hpp"
#include "nnlab/rng.hpp"

namespace nnlab {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
constexpr std::size_t kCifarRecord = 3073;

constexpr std::uint64_t kTagCenters = 0x63656e74; // stream tags
constexpr std::uint64_t kTagSamples = 0x73616d70;
constexpr std::uint64_t kTagShuffle = 0x73687566;

double byte_to_unit(unsigned char b) { return static_cast<double>(b) / 255.0 * 2.0 - 1.0; }

std::vector<unsigned char> read_all(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open " + path);
    f.seekg(0, std::ios::end);
    const std::streamoff len = f.tellg();
    f.seekg(0, std::ios::beg);
    std::vector<unsigned char> buf(static_cast<std::size_t>(len));
    if (len > 0) f.read(reinterpret_cast<char*>(buf.data()), len);
    if (!f) throw io_error("short read from " + path);
    return buf;
}

std::uint32_t be32(const std::vector<unsigned char>& buf, std::size_t off, const std::string& path) {
    if (off + 4 > buf.size())
        throw io_error(path + ": truncated header (need 4 bytes at offset " +
                       std::to_string(off) + ", file has " + std::to_string(buf.size()) + ")");
    return (static_cast<std::uint32_t>(buf[off]) << 24) |
           (static_cast<std::uint32_t>(buf[off + 1]) << 16) |
           (static_cast<std::uint32_t>(buf[off + 2]) << 8) |
           static_cast<std::uint32_t>(buf[off + 3]);
}

void shuffle_indices(std::vector<int>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.below(static_cast<int>(i)))]);
}

} // namespace

Shape LabeledDataset::sample_shape() const {
    Shape s(inputs.shape().begin() + 1, inputs.shape().end());
    return s;
}

void LabeledDataset::validate() const {
    if (!inputs.defined() || labels.empty())
        throw config_error("dataset: empty dataset");
    if (static_cast<std::size_t>(inputs.shape()[0]) != labels.size())
        throw config_error("dataset: " + std::to_string(inputs.shape()[0]) + " inputs but " +
                           std::to_string(labels.size()) + " labels");
    if (num_classes < 2) throw config_error("dataset: num_classes must be >= 2");
    for (int lb : labels)
        if (lb < 0 || lb >= num_classes)
            throw config_error("dataset: label " + std::to_string(lb) + " outside [0, " +
                               std::to_string(num_classes) + ")");
}

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    const auto img = read_all(images_path);
    const auto lab = read_all(labels_path);

    const std::uint32_t img_magic = be32(img, 0, images_path);
    if (img_magic != kIdxImagesMagic) {
        char msg[128];
        std::snprintf(msg, sizeof(msg), "%s: bad magic 0x%08x at offset 0 (expected 0x%08x)",
                      images_path.c_str(), img_magic, kIdxImagesMagic);
        throw io_error(msg);
    }
    const std::uint32_t lab_magic = be32(lab, 0, labels_path);
    if (lab_magic != kIdxLabelsMagic) {
        char msg[128];
        std::snprintf(msg, sizeof(msg), "%s: bad magic 0x%08x at offset 0 (expected 0x%08x)",
                      labels_path.c_str(), lab_magic, kIdxLabelsMagic);
        throw io_error(msg);
    }
    const std::uint32_t n = be32(img, 4, images_path);
    const std::uint32_t h = be32(img, 8, images_path);
    const std::uint32_t w = be32(img, 12, images_path);
    const std::uint32_t n_lab = be32(lab, 4, labels_path);
    if (n != n_lab)
        throw io_error("idx: image count " + std::to_string(n) + " (" + images_path +
                       ") does not match label count " + std::to_string(n_lab));
    if (n == 0) throw io_error("idx: empty dataset in " + images_path);

    const std::size_t want = 16 + static_cast<std::size_t>(n) * h * w;
    if (img.size() < want)
        throw io_error(images_path + ": truncated pixel data (offset " +
                       std::to_string(img.size()) + " of " + std::to_string(want) + ")");
    if (lab.size() < 8 + static_cast<std::size_t>(n))
        throw io_error(labels_path + ": truncated label data (offset " +
                       std::to_string(lab.size()) + " of " + std::to_string(8 + n) + ")");

    std::vector<double> vals(static_cast<std::size_t>(n) * h * w);
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = byte_to_unit(img[16 + i]);

    LabeledDataset ds;
    ds.inputs = Tensor::from_data({static_cast<int>(n), 1, static_cast<int>(h), static_cast<int>(w)},
                                  std::move(vals));
    ds.labels.resize(n);
    int max_label = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
        ds.labels[i] = static_cast<int>(lab[8 + i]);
        max_label = std::max(max_label, ds.labels[i]);
    }
    ds.num_classes = std::max(max_label + 1, 2);
    ds.validate();
    return ds;
}

LabeledDataset load_cifar10_binary(const std::string& path) {
    const auto buf = read_all(path);
    if (buf.empty()) throw io_error(path + ": empty dataset (zero-length file)");
    if (buf.size() % kCifarRecord != 0)
        throw io_error(path + ": length " + std::to_string(buf.size()) +
                       " is not a multiple of " + std::to_string(kCifarRecord));
    const std::size_t n = buf.size() / kCifarRecord;
    std::vector<double> vals(n * 3072);
    LabeledDataset ds;
    ds.labels.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        const unsigned char* rec = buf.data() + r * kCifarRecord;
        const int label = rec[0];
        if (label > 9)
            throw io_error(path + ": label byte " + std::to_string(label) + " at offset " +
                           std::to_string(r * kCifarRecord) + " outside [0, 10)");
        ds.labels[r] = label;
        for (std::size_t i = 0; i < 3072; ++i) vals[r * 3072 + i] = byte_to_unit(rec[1 + i]);
    }
    ds.inputs = Tensor::from_data({static_cast<int>(n), 3, 32, 32}, std::move(vals));
    ds.num_classes = 10;
    ds.validate();
    return ds;
}

std::vector<std::vector<double>> synth_cluster_centers(const SynthSpec& spec) {
    if (spec.num_classes < 2) throw config_error("synth_clusters: num_classes must be >= 2");
    if (spec.dims < 1) throw config_error("synth_clusters: dims must be >= 1");
    Rng rng(mix64(spec.seed, kTagCenters));
    std::vector<std::vector<double>> centers(static_cast<std::size_t>(spec.num_classes));
    for (auto& c : centers) {
        c.resize(static_cast<std::size_t>(spec.dims));
        for (double& v : c) v = spec.center_scale * rng.normal();
    }
    return centers;
}

LabeledDataset synth_clusters(const SynthSpec& spec) {
    if (spec.per_class < 1) throw config_error("synth_clusters: per_class must be >= 1");
    const auto centers = synth_cluster_centers(spec);
    Rng rng(mix64(spec.seed, kTagSamples, static_cast<std::uint64_t>(spec.split)));
    const std::size_t n = static_cast<std::size_t>(spec.num_classes) * spec.per_class;
    std::vector<double> vals(n * static_cast<std::size_t>(spec.dims));
    LabeledDataset ds;
    ds.labels.resize(n);
    std::size_t row = 0;
    for (int c = 0; c < spec.num_classes; ++c) {
        for (int i = 0; i < spec.per_class; ++i, ++row) {
            ds.labels[row] = c;
            double* out = vals.data() + row * static_cast<std::size_t>(spec.dims);
            for (int d = 0; d < spec.dims; ++d)
                out[d] = centers[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)] +
                         spec.noise_sigma * rng.normal();
        }
    }
    ds.inputs = Tensor::from_data({static_cast<int>(n), spec.dims}, std::move(vals));
    ds.num_classes = spec.num_classes;
    ds.validate();
    return ds;
}

LabeledDataset randomize_labels(const LabeledDataset& ds, double p, std::uint64_t seed) {
    if (p < 0.0 || p > 1.0)
        throw config_error("randomize_labels: noise level " + std::to_string(p) +
                           " outside [0, 1]");
    ds.validate();
    const std::size_t n = ds.size();
    LabeledDataset out = ds;
    out.labels = ds.labels; // fresh copy; the source stays untouched
    out.provenance = LabelProvenance{true, p, seed};

    Rng rng(mix64(seed, kTagShuffle));
    std::vector<int> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<int>(i);
    shuffle_indices(perm, rng);
    // redraw values are drawn for every slot so the (slot, value) stream is
    // shared across noise levels under the same seed
    std::vector<int> redraw(n);
    for (std::size_t i = 0; i < n; ++i) redraw[i] = rng.below(ds.num_classes);

    const std::size_t k = static_cast<std::size_t>(std::lround(p * static_cast<double>(n)));
    for (std::size_t i = 0; i < k; ++i)
        out.labels[static_cast<std::size_t>(perm[i])] = redraw[i];
    return out;
}

Tensor augment(const Tensor& batch, const AugmentationPolicy& policy, std::uint64_t seed) {
    if (!policy.enabled) return batch.clone();
    if (batch.rank() != 4)
        throw std::invalid_argument("augment: image-shaped input required, got " +
                                    shape_str(batch.shape()));
    const int n = batch.shape()[0], c = batch.shape()[1];
    const int h = batch.shape()[2], w = batch.shape()[3];
    if (policy.pad_pixels < 0) throw config_error("augment: pad_pixels must be >= 0");
    const int ph = h + 2 * policy.pad_pixels;
    const int pw = w + 2 * policy.pad_pixels;
    const int ch = policy.crop_h > 0 ? policy.crop_h : h;
    const int cw = policy.crop_w > 0 ? policy.crop_w : w;
    if (ch > ph || cw > pw)
        throw config_error("augment: crop " + std::to_string(ch) + "x" + std::to_string(cw) +
                           " larger than padded image " + std::to_string(ph) + "x" +
                           std::to_string(pw));

    Rng rng(seed);
    Tensor out = Tensor::zeros({n, c, ch, cw});
    auto src = batch.data();
    auto dst = out.data();
    for (int img = 0; img < n; ++img) {
        const int oy = rng.below(ph - ch + 1);
        const int ox = rng.below(pw - cw + 1);
        const bool flip = policy.horizontal_flip && rng.below(2) == 1;
        for (int ci = 0; ci < c; ++ci) {
            const double* in = src.data() + (static_cast<std::size_t>(img) * c + ci) *
                                                static_cast<std::size_t>(h) * w;
            double* o = dst.data() + (static_cast<std::size_t>(img) * c + ci) *
                                         static_cast<std::size_t>(ch) * cw;
            for (int y = 0; y < ch; ++y) {
                const int sy = oy + y - policy.pad_pixels;
                for (int x = 0; x < cw; ++x) {
                    const int sx0 = ox + x - policy.pad_pixels;
                    const int sx = flip ? (ox + (cw - 1 - x) - policy.pad_pixels) : sx0;
                    double v = 0.0;
                    if (sy >= 0 && sy < h && sx >= 0 && sx < w)
                        v = in[static_cast<std::size_t>(sy) * w + sx];
                    o[static_cast<std::size_t>(y) * cw + x] = v;
                }
            }
        }
    }
    return out;
}

std::vector<std::vector<int>> batch_plan(std::size_t n, int batch_size,
                                         std::uint64_t shuffle_seed, int epoch) {
    if (batch_size < 1) throw config_error("batches: batch_size must be >= 1");
    std::vector<int> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<int>(i);
    Rng rng(mix64(shuffle_seed, kTagShuffle, static_cast<std::uint64_t>(epoch)));
    shuffle_indices(perm, rng);
    std::vector<std::vector<int>> plan;
    for (std::size_t off = 0; off < n; off += static_cast<std::size_t>(batch_size)) {
        const std::size_t hi = std::min(off + static_cast<std::size_t>(batch_size), n);
        plan.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(off),
                          perm.begin() + static_cast<std::ptrdiff_t>(hi));
    }
    return plan;
}

Batch gather(const LabeledDataset& ds, const std::vector<int>& indices) {
    const Shape sample = ds.sample_shape();
    const std::size_t stride = numel(sample);
    Shape bshape;
    bshape.push_back(static_cast<int>(indices.size()));
    bshape.insert(bshape.end(), sample.begin(), sample.end());
    std::vector<double> vals(indices.size() * stride);
    Batch b;
    b.labels.resize(indices.size());
    auto src = ds.inputs.data();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const std::size_t r = static_cast<std::size_t>(indices[i]);
        std::copy_n(src.data() + r * stride, stride, vals.data() + i * stride);
        b.labels[i] = ds.labels[r];
    }
    b.inputs = Tensor::from_data(std::move(bshape), std::move(vals));
    b.indices = indices;
    return b;
}

std::vector<Batch> batches(const LabeledDataset& ds, int batch_size,
                           std::uint64_t shuffle_seed, int epoch) {
    ds.validate();
    std::vector<Batch> out;
    for (const auto& idxs : batch_plan(ds.size(), batch_size, shuffle_seed, epoch))
        out.push_back(gather(ds, idxs));
    return out;
}

} // namespace nnlab
