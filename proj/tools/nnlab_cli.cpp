#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nnlab/errors.hpp"
#include "nnlab/experiment.hpp"
#include "nnlab/hash.hpp"
#include "nnlab/kernels.hpp"

using nnlab::exp::ExperimentConfig;
using nnlab::exp::RunManifest;

namespace {

void add_dataset_options(CLI::App* cmd, ExperimentConfig& cfg) {
    cmd->add_option("--dataset", cfg.dataset.kind, "dataset kind: synth, idx or cifar10")
        ->check(CLI::IsMember({"synth", "idx", "cifar10"}));
    cmd->add_option("--classes", cfg.dataset.synth.num_classes, "synth: number of classes");
    cmd->add_option("--per-class", cfg.dataset.synth.per_class, "synth: training samples per class");
    cmd->add_option("--test-per-class", cfg.dataset.synth_test_per_class,
                    "synth: held-out samples per class (default: per-class)");
    cmd->add_option("--dims", cfg.dataset.synth.dims, "synth: feature dimensions");
    cmd->add_option("--center-scale", cfg.dataset.synth.center_scale, "synth: center scale");
    cmd->add_option("--noise-sigma", cfg.dataset.synth.noise_sigma, "synth: within-cluster sigma");
    cmd->add_option("--data-seed", cfg.dataset.synth.seed, "synth: dataset seed");
    cmd->add_option("--images", cfg.dataset.images, "idx: training images file");
    cmd->add_option("--labels", cfg.dataset.labels, "idx: training labels file");
    cmd->add_option("--test-images", cfg.dataset.test_images, "idx: test images file");
    cmd->add_option("--test-labels", cfg.dataset.test_labels, "idx: test labels file");
    cmd->add_option("--data-file", cfg.dataset.file, "cifar10: training binary");
    cmd->add_option("--test-file", cfg.dataset.test_file, "cifar10: test binary");
    cmd->add_option("--holdout", cfg.dataset.holdout_fraction,
                    "held-out tail fraction when no test file is given");
}

void add_model_options(CLI::App* cmd, ExperimentConfig& cfg) {
    cmd->add_option("--preset,--arch", cfg.arch, "classifier preset name or file:<descriptor>");
    cmd->add_option("--gen-arch", cfg.gen_arch, "generator preset name or file:<descriptor>");
    cmd->add_option("--disc-arch", cfg.disc_arch, "discriminator preset name or file:<descriptor>");
    cmd->add_option("--hidden", cfg.hidden, "preset hidden width");
    cmd->add_option("--latent-dim", cfg.latent_dim, "generator latent dimension");
}

void add_train_options(CLI::App* cmd, ExperimentConfig& cfg) {
    cmd->add_option("--seeds", cfg.seeds, "model init/run seeds");
    cmd->add_option("--noise", cfg.noise_levels, "label noise levels in [0, 1]");
    cmd->add_option("--noise-seed", cfg.noise_seed, "label randomization seed");
    cmd->add_option("--epochs", cfg.epochs, "training epochs");
    cmd->add_option("--batch-size", cfg.batch_size, "batch size");
    cmd->add_option("--optimizer", cfg.optimizer, "sgd_momentum or adam")
        ->check(CLI::IsMember({"sgd_momentum", "adam"}));
    cmd->add_option("--lr", cfg.lr, "learning rate");
    cmd->add_option("--momentum", cfg.momentum, "sgd momentum");
    cmd->add_option("--weight-decay", cfg.weight_decay, "weight decay lambda");
    cmd->add_flag("--augment", cfg.augment_on, "enable pad/crop/flip augmentation");
    cmd->add_option("--aug-pad", cfg.aug_pad, "augmentation padding pixels");
    cmd->add_flag("!--no-track-g", cfg.track_g, "disable input-gradient tracking");
}

void add_dissect_options(CLI::App* cmd, ExperimentConfig& cfg) {
    cmd->add_option("--dissect-seeds", cfg.dissect_seeds, "ascent seeds per class");
    cmd->add_option("--ascent-lr", cfg.ascent_lr, "gradient ascent learning rate");
    cmd->add_option("--ascent-iters", cfg.ascent_iterations, "gradient ascent iterations");
    cmd->add_option("--objective", cfg.objective, "ascent objective: logit or probability")
        ->check(CLI::IsMember({"logit", "probability"}));
    cmd->add_option("--generator", cfg.generator,
                    "generator checkpoint path, or 'analytic' for synth data");
    cmd->add_flag("!--one-direction", cfg.both_directions,
                  "report only Dist(reference, probe), not the reverse");
    cmd->add_option("--export-patterns", cfg.export_patterns, "patterns written per class");
}

int run(int argc, char** argv) {
    CLI::App app{"desk-scale learning-vs-memorization laboratory"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from an INI file (CLI flags take precedence)");
    app.fallthrough();

    ExperimentConfig cfg;
    std::string backend = "parallel";
    app.add_option("--backend", backend, "kernel backend: parallel or serial")
        ->check(CLI::IsMember({"parallel", "serial"}));
    app.add_option("--out", cfg.out_dir, "output directory (default $NNLAB_OUT/<command>)");

    CLI::App* train = app.add_subcommand("train", "train classifiers per (seed, noise level)");
    add_dataset_options(train, cfg);
    add_model_options(train, cfg);
    add_train_options(train, cfg);

    CLI::App* gan = app.add_subcommand("train-gan", "train a generator/discriminator pair");
    add_dataset_options(gan, cfg);
    add_model_options(gan, cfg);
    gan->add_option("--seeds", cfg.seeds, "run seed (first entry used)");
    gan->add_option("--gan-epochs", cfg.gan_epochs, "gan epochs");
    gan->add_option("--gan-batch-size", cfg.gan_batch_size, "gan batch size");
    gan->add_option("--gan-lr", cfg.gan_lr, "adam learning rate");

    CLI::App* dissect = app.add_subcommand("dissect", "dissect probes against a reference model");
    add_dataset_options(dissect, cfg);
    add_dissect_options(dissect, cfg);
    dissect->add_option("--reference", cfg.reference, "reference checkpoint (f1)")->required();
    dissect->add_option("--probe", cfg.probes, "probe checkpoint (repeatable)")->required();

    CLI::App* study = app.add_subcommand("seed-study", "train one model per seed, overlay curves");
    add_dataset_options(study, cfg);
    add_model_options(study, cfg);
    add_train_options(study, cfg);

    CLI::App* sweep = app.add_subcommand("noise-sweep",
                                         "train+dissect a seed pair per noise level");
    add_dataset_options(sweep, cfg);
    add_model_options(sweep, cfg);
    add_train_options(sweep, cfg);
    add_dissect_options(sweep, cfg);

    CLI::App* report = app.add_subcommand("report", "regenerate SVG figures from run CSVs");
    report->add_option("--run-dir", cfg.out_dir, "run directory holding the CSVs")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return 1;
    }

    nnlab::kernels::set_backend(backend == "serial" ? nnlab::kernels::Backend::Serial
                                                    : nnlab::kernels::Backend::Parallel);

    try {
        RunManifest m;
        if (train->parsed()) {
            cfg.kind = "train";
            m = nnlab::exp::cmd_train(cfg);
        } else if (gan->parsed()) {
            cfg.kind = "train-gan";
            m = nnlab::exp::cmd_train_gan(cfg);
        } else if (dissect->parsed()) {
            cfg.kind = "dissect";
            m = nnlab::exp::cmd_dissect(cfg);
        } else if (study->parsed()) {
            cfg.kind = "seed-study";
            m = nnlab::exp::cmd_seed_study(cfg);
        } else if (sweep->parsed()) {
            cfg.kind = "noise-sweep";
            m = nnlab::exp::cmd_noise_sweep(cfg);
        } else if (report->parsed()) {
            cfg.kind = "report";
            m = nnlab::exp::cmd_report(cfg);
        }
        std::printf("%s: wrote %zu artifacts to %s (config %s, %.1fs)\n", m.kind.c_str(),
                    m.artifacts.size(), cfg.resolved_out_dir().c_str(),
                    nnlab::hash_hex(m.config_hash).c_str(), m.wall_seconds);
        return 0;
    } catch (const nnlab::config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const nnlab::io_error& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 3;
    } catch (const nnlab::train_error& e) {
        std::fprintf(stderr, "training error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}

} // namespace

int main(int argc, char** argv) { return run(argc, argv); }
