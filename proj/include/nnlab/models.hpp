#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "nnlab/tensor.hpp"

namespace nnlab {

enum class Role { Classifier, Generator, Discriminator };

std::string role_name(Role r);
Role role_from_name(const std::string& s);

struct DenseSpec {
    int in = 0, out = 0;
    bool operator==(const DenseSpec&) const = default;
};
struct Conv2dSpec {
    int in_ch = 0, out_ch = 0, k = 0, stride = 1, pad = 0;
    bool operator==(const Conv2dSpec&) const = default;
};
struct TConv2dSpec {
    int in_ch = 0, out_ch = 0, k = 0, stride = 1, pad = 0;
    bool operator==(const TConv2dSpec&) const = default;
};
enum class Activation { Relu, Tanh, Sigmoid };
struct FlattenSpec {
    bool operator==(const FlattenSpec&) const = default;
};
struct ReshapeSpec {
    Shape shape; // per-sample
    bool operator==(const ReshapeSpec&) const = default;
};

using LayerSpec = std::variant<DenseSpec, Conv2dSpec, TConv2dSpec, Activation, FlattenSpec, ReshapeSpec>;

struct ArchitectureDescriptor {
    Role role = Role::Classifier;
    Shape input_shape;          // per-sample
    std::vector<LayerSpec> layers;
    int num_classes = 0;        // classifier
    int latent_dim = 0;         // generator
    std::uint64_t init_seed = 1;

    // Walks shapes layer by layer; throws config_error naming the first
    // offending pair. Returns the per-sample output shape.
    Shape validate() const;

    // Canonical text form; from_text(to_text(d)) reproduces d exactly.
    std::string to_text() const;
    static ArchitectureDescriptor from_text(const std::string& text);

    bool operator==(const ArchitectureDescriptor&) const = default;
};

struct Network {
    ArchitectureDescriptor desc;
    std::vector<Tensor> params;
    std::vector<std::string> param_names;

    // x is a batch [n, ...sample shape...]
    Tensor forward(Graph& g, const Tensor& x) const;
    std::uint64_t param_checksum() const;
};

// Fan-in-scaled uniform init, deterministic in desc.init_seed.
Network build(const ArchitectureDescriptor& desc);

Tensor logits(const Network& net, Graph& g, const Tensor& x);
Tensor predict_probs(const Network& net, Graph& g, const Tensor& x);
Tensor predict_probs(const Network& net, const Tensor& x);
Tensor generate(const Network& net, Graph& g, const Tensor& z);
Tensor generate(const Network& net, const Tensor& z);

// NNCK checkpoint: magic "NNCK", u32 version, u32 descriptor length +
// UTF-8 descriptor text, then per parameter u32 rank, u32 dims..., raw
// little-endian f32 values in descriptor order.
void save_checkpoint(const Network& net, const std::string& path);
Network load_checkpoint(const std::string& path);

struct PresetOptions {
    Shape input_shape;      // data sample shape (generator output shape)
    int num_classes = 10;
    int latent_dim = 100;   // full-scale default; 16 works well at desk scale
    int hidden = 64;        // classifier / dense-generator width knob
    std::uint64_t seed = 1;
};

// Named presets: mlp-small, mlp-alt, cnn-small (classifiers),
// gen-small, disc-small (adapt to vector vs image data).
ArchitectureDescriptor make_preset(const std::string& name, const PresetOptions& opt);
std::vector<std::string> preset_names();

} // namespace nnlab
