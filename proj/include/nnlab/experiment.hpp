#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nnlab/data.hpp"
#include "nnlab/dissection.hpp"
#include "nnlab/models.hpp"
#include "nnlab/training.hpp"

namespace nnlab::exp {

inline constexpr const char* kToolVersion = "0.1.0";
// environment variable naming the default output root
inline constexpr const char* kOutRootEnv = "NNLAB_OUT";

struct DatasetSpec {
    std::string kind = "synth"; // synth | idx | cifar10
    SynthSpec synth;
    int synth_test_per_class = 0; // 0: same as per_class
    std::string images, labels;           // idx train pair
    std::string test_images, test_labels; // idx test pair (optional)
    std::string file, test_file;          // cifar10 binaries (test optional)
    double holdout_fraction = 0.1; // used when no test file is given

    void validate() const;
    std::string canonical_text() const;
    // train and test sets; file datasets without a test source hold out a
    // deterministic tail fraction
    std::pair<LabeledDataset, LabeledDataset> load() const;
};

struct ExperimentConfig {
    std::string kind; // train | train-gan | dissect | seed-study | noise-sweep | report
    DatasetSpec dataset;

    std::string arch = "mlp-small"; // preset name or file:<descriptor path>
    std::string gen_arch = "gen-small";
    std::string disc_arch = "disc-small";
    int hidden = 64;
    int latent_dim = 100; // full-scale default; 16 recommended at desk scale

    std::vector<std::uint64_t> seeds = {1};
    std::vector<double> noise_levels; // empty means {0}
    std::uint64_t noise_seed = 1;     // label randomization, shared within a level

    int epochs = 100;
    int batch_size = 128;
    std::string optimizer = "sgd_momentum"; // or adam
    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0;
    bool augment_on = false;
    int aug_pad = 4;
    bool track_g = true;

    int gan_epochs = 30;
    int gan_batch_size = 64;
    double gan_lr = 2e-4;

    int dissect_seeds = 10; // fast mode; the full-scale setting is 100
    double ascent_lr = 0.05;
    int ascent_iterations = 1000;
    std::string objective = "logit"; // or probability
    bool both_directions = true;
    int export_patterns = 4; // patterns written per class

    std::string generator = "analytic"; // checkpoint path or "analytic" (synth data)
    std::string reference;              // dissect: reference checkpoint
    std::vector<std::string> probes;    // dissect: probe checkpoints

    std::string out_dir; // empty: $NNLAB_OUT (or ./runs) + /<kind>

    void validate() const;
    std::string canonical_text() const; // excludes out_dir
    std::uint64_t config_hash() const;
    std::string resolved_out_dir() const;
};

struct RunManifest {
    std::uint64_t config_hash = 0;
    std::string kind;
    std::string tool_version = kToolVersion;
    double wall_seconds = 0.0;
    struct Artifact {
        std::string path; // relative to the run dir
        std::uint64_t content_hash = 0;
    };
    std::vector<Artifact> artifacts;

    void write(const std::string& dir) const;
    static RunManifest read(const std::string& dir);
    // every artifact exists and its content hash matches
    void verify(const std::string& dir) const;
};

RunManifest cmd_train(const ExperimentConfig& cfg);
RunManifest cmd_train_gan(const ExperimentConfig& cfg);
RunManifest cmd_dissect(const ExperimentConfig& cfg);
RunManifest cmd_seed_study(const ExperimentConfig& cfg);
RunManifest cmd_noise_sweep(const ExperimentConfig& cfg);
RunManifest cmd_report(const ExperimentConfig& cfg); // regenerate SVGs from CSVs

// helpers shared with tests and the CLI
ArchitectureDescriptor resolve_arch(const ExperimentConfig& cfg, const std::string& which,
                                    const Shape& sample_shape, int num_classes,
                                    std::uint64_t seed);
std::unique_ptr<Generator> resolve_generator(const ExperimentConfig& cfg);

} // namespace nnlab::exp
