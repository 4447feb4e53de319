#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nnlab/data.hpp"
#include "nnlab/models.hpp"
#include "nnlab/tensor.hpp"

namespace nnlab {

// KL(p || q) = sum_i p_i * ln(p_i / max(q_i, eps)), zero-probability terms
// of p contribute nothing. Natural log.
double kl_divergence(std::span<const double> p, std::span<const double> q, double eps = 1e-12);

enum class AscentObjective { Logit, Probability };

// Anything that maps latent codes [n, latent_dim] to samples differentiably.
class Generator {
public:
    virtual ~Generator() = default;
    virtual int latent_dim() const = 0;
    virtual Shape output_shape() const = 0; // per-sample
    virtual Tensor generate(Graph& g, const Tensor& z) const = 0;
};

class NetworkGenerator final : public Generator {
public:
    explicit NetworkGenerator(Network net);
    int latent_dim() const override { return net_.desc.latent_dim; }
    Shape output_shape() const override;
    Tensor generate(Graph& g, const Tensor& z) const override;
    const Network& network() const { return net_; }

private:
    Network net_;
};

// Analytic stand-in for a trained GAN on synthetic cluster data: the first
// num_classes latent coordinates pick a cluster through a sharp softmax and
// the remaining dims add scaled gaussian noise around its center. Latent
// dim is num_classes + data dims; standard-normal latents push forward to
// (approximately) the cluster mixture.
class ClusterGenerator final : public Generator {
public:
    ClusterGenerator(std::vector<std::vector<double>> centers, double noise_sigma,
                     double selector_temperature = 10.0);
    explicit ClusterGenerator(const SynthSpec& spec, double selector_temperature = 10.0);

    int latent_dim() const override;
    Shape output_shape() const override;
    Tensor generate(Graph& g, const Tensor& z) const override;

private:
    Tensor centers_;   // [classes, dims]
    Tensor sel_proj_;  // [latent, classes]
    Tensor noise_proj_; // [latent, dims]
    double sigma_;
    double tau_;
};

struct PatternResult {
    int class_index = 0;
    std::uint64_t seed = 0;
    std::vector<double> z_init;
    std::vector<double> z_star;
    Tensor x_star; // generate(gen, z_star), recomputable bit-for-bit
    std::vector<double> objective_trace; // objective at each iterate, `iterations` entries
};

// Plain gradient ascent on an arbitrary scalar objective of z. No
// projection or norm constraint; exactly `iterations` steps.
struct AscentResult {
    std::vector<double> z_init;
    std::vector<double> z_star;
    std::vector<double> objective_trace;
};
AscentResult gradient_ascent(const std::function<Tensor(Graph&, const Tensor&)>& objective,
                             std::vector<double> z_init, double lr, int iterations);
AscentResult gradient_ascent(const std::function<Tensor(Graph&, const Tensor&)>& objective,
                             int latent_dim, std::uint64_t seed, double lr, int iterations);

// z* = argmax_z f1_j(G(z)) from a standard-normal seeded start.
PatternResult activation_maximize(const Network& f1, const Generator& gen, int class_index,
                                  std::uint64_t seed, double lr = 0.05, int iterations = 1000,
                                  AscentObjective objective = AscentObjective::Logit);

struct DissectionResult {
    std::string ref_id;
    std::string probe_id;
    struct Term {
        int class_index;
        std::uint64_t seed;
        double kl;
    };
    std::vector<Term> terms; // class-major, seed-minor
    double dist_mean = 0.0;      // (1/C) sum_j mean_s KL_js
    double dist_variance = 0.0;  // population variance over all C*S terms
};

// Patterns come from f1; KL(f1(x*) || f2(x*)) is averaged per Eq-style
// class mean. Asymmetric by construction; call with arguments swapped for
// the reverse direction.
DissectionResult dissect_pair(const Network& f1, const Network& f2, const Generator& gen,
                              int seeds_per_class, double lr = 0.05, int iterations = 1000,
                              AscentObjective objective = AscentObjective::Logit,
                              std::uint64_t base_seed = 0,
                              const std::string& ref_id = "f1",
                              const std::string& probe_id = "f2");

// CSV rows class,seed,kl followed by a dist_mean,dist_variance block.
void write_dissection_csv(const DissectionResult& res, const std::string& path);
DissectionResult read_dissection_csv(const std::string& path);

// Pattern export: PGM for 1-channel images, PPM for 3-channel, CSV vector
// otherwise. Returns the path actually written (extension depends on kind).
std::string export_pattern(const Tensor& x_star, const std::string& path_stem);

} // namespace nnlab
