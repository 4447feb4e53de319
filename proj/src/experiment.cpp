#include "nnlab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "nnlab/errors.hpp"
#include "nnlab/hash.hpp"
#include "nnlab/rng.hpp"
#include "nnlab/svg.hpp"

namespace fs = std::filesystem;

namespace nnlab::exp {

namespace {

std::string fmt_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string noise_tag(double p) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", p);
    return buf;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io_error("cannot create output directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

void add_artifact(RunManifest& m, const std::string& dir, const std::string& name) {
    m.artifacts.push_back({name, fnv1a_file(join(dir, name))});
}

std::vector<double> effective_noise_levels(const ExperimentConfig& cfg) {
    if (cfg.noise_levels.empty()) return {0.0};
    return cfg.noise_levels;
}

LabeledDataset with_noise(const LabeledDataset& ds, double p, std::uint64_t noise_seed) {
    if (p == 0.0) return ds;
    return randomize_labels(ds, p, noise_seed);
}

AscentObjective objective_of(const ExperimentConfig& cfg) {
    if (cfg.objective == "logit") return AscentObjective::Logit;
    if (cfg.objective == "probability") return AscentObjective::Probability;
    throw config_error("objective must be 'logit' or 'probability', got '" + cfg.objective + "'");
}

TrainConfig train_config_for(const ExperimentConfig& cfg, LabeledDataset train,
                             LabeledDataset test, std::uint64_t seed) {
    TrainConfig tc;
    tc.train = std::move(train);
    tc.test = std::move(test);
    tc.arch = resolve_arch(cfg, cfg.arch, tc.train.sample_shape(), tc.train.num_classes, seed);
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    if (cfg.optimizer == "sgd_momentum")
        tc.opt = OptimizerConfig::sgd(cfg.lr, cfg.momentum, cfg.weight_decay);
    else if (cfg.optimizer == "adam")
        tc.opt = OptimizerConfig::adam(cfg.lr, 0.9, 0.999, cfg.weight_decay);
    else
        throw config_error("optimizer must be 'sgd_momentum' or 'adam', got '" + cfg.optimizer +
                           "'");
    if (cfg.augment_on) {
        tc.aug.enabled = true;
        tc.aug.pad_pixels = cfg.aug_pad;
        tc.aug.horizontal_flip = true;
    }
    tc.seed = seed;
    tc.track_input_gradients = cfg.track_g;
    return tc;
}

std::string model_name(std::uint64_t seed, double p) {
    return "model_s" + std::to_string(seed) + "_p" + noise_tag(p) + ".nnck";
}

std::string report_name(std::uint64_t seed, double p) {
    return "report_s" + std::to_string(seed) + "_p" + noise_tag(p) + ".csv";
}

void write_config_echo(const ExperimentConfig& cfg, const std::string& dir, RunManifest& m) {
    std::ofstream f(join(dir, "config.echo.ini"), std::ios::trunc);
    if (!f) throw io_error("cannot write config echo in " + dir);
    f << cfg.canonical_text();
    f.close();
    add_artifact(m, dir, "config.echo.ini");
}

} // namespace

// ---- DatasetSpec ----

void DatasetSpec::validate() const {
    if (kind == "synth") {
        if (synth.num_classes < 2 || synth.per_class < 1 || synth.dims < 1)
            throw config_error("dataset synth: bad geometry");
    } else if (kind == "idx") {
        if (images.empty() || labels.empty())
            throw config_error("dataset idx: --images and --labels required");
    } else if (kind == "cifar10") {
        if (file.empty()) throw config_error("dataset cifar10: --data-file required");
    } else {
        throw config_error("dataset kind must be synth, idx or cifar10, got '" + kind + "'");
    }
    if (holdout_fraction <= 0.0 || holdout_fraction >= 1.0)
        throw config_error("dataset: holdout fraction must be in (0, 1)");
}

std::string DatasetSpec::canonical_text() const {
    std::ostringstream os;
    os << "kind = " << kind << "\n";
    if (kind == "synth") {
        os << "classes = " << synth.num_classes << "\n";
        os << "per_class = " << synth.per_class << "\n";
        os << "test_per_class = " << (synth_test_per_class > 0 ? synth_test_per_class : synth.per_class)
           << "\n";
        os << "dims = " << synth.dims << "\n";
        os << "center_scale = " << fmt_g(synth.center_scale) << "\n";
        os << "noise_sigma = " << fmt_g(synth.noise_sigma) << "\n";
        os << "seed = " << synth.seed << "\n";
    } else if (kind == "idx") {
        os << "images = " << images << "\nlabels = " << labels << "\n";
        os << "test_images = " << test_images << "\ntest_labels = " << test_labels << "\n";
        os << "holdout = " << fmt_g(holdout_fraction) << "\n";
    } else {
        os << "file = " << file << "\ntest_file = " << test_file << "\n";
        os << "holdout = " << fmt_g(holdout_fraction) << "\n";
    }
    return os.str();
}

namespace {

std::pair<LabeledDataset, LabeledDataset> split_tail(const LabeledDataset& all, double frac) {
    const std::size_t n = all.size();
    const std::size_t ntest = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                           std::llround(frac * static_cast<double>(n))));
    if (ntest >= n) throw config_error("dataset: holdout fraction leaves no training data");
    std::vector<int> train_idx, test_idx;
    for (std::size_t i = 0; i < n - ntest; ++i) train_idx.push_back(static_cast<int>(i));
    for (std::size_t i = n - ntest; i < n; ++i) test_idx.push_back(static_cast<int>(i));
    Batch btr = gather(all, train_idx), bte = gather(all, test_idx);
    LabeledDataset tr, te;
    tr.inputs = btr.inputs;
    tr.labels = btr.labels;
    tr.num_classes = all.num_classes;
    te.inputs = bte.inputs;
    te.labels = bte.labels;
    te.num_classes = all.num_classes;
    return {std::move(tr), std::move(te)};
}

} // namespace

std::pair<LabeledDataset, LabeledDataset> DatasetSpec::load() const {
    validate();
    if (kind == "synth") {
        SynthSpec train_spec = synth;
        train_spec.split = 0;
        SynthSpec test_spec = synth;
        test_spec.split = 1;
        if (synth_test_per_class > 0) test_spec.per_class = synth_test_per_class;
        return {synth_clusters(train_spec), synth_clusters(test_spec)};
    }
    if (kind == "idx") {
        LabeledDataset train = load_idx(images, labels);
        if (!test_images.empty() && !test_labels.empty())
            return {std::move(train), load_idx(test_images, test_labels)};
        return split_tail(train, holdout_fraction);
    }
    LabeledDataset train = load_cifar10_binary(file);
    if (!test_file.empty()) return {std::move(train), load_cifar10_binary(test_file)};
    return split_tail(train, holdout_fraction);
}

// ---- ExperimentConfig ----

void ExperimentConfig::validate() const {
    dataset.validate();
    if (seeds.empty()) throw config_error("config: seeds list must be non-empty");
    const auto levels = effective_noise_levels(*this);
    for (double p : levels)
        if (p < 0.0 || p > 1.0)
            throw config_error("config: noise level " + fmt_g(p) + " outside [0, 1]");
    for (std::size_t i = 1; i < levels.size(); ++i)
        if (levels[i] <= levels[i - 1])
            throw config_error("config: noise levels must be strictly increasing (got " +
                               fmt_g(levels[i - 1]) + " then " + fmt_g(levels[i]) + ")");
    if (epochs < 1) throw config_error("config: epochs must be >= 1");
    if (dissect_seeds < 1) throw config_error("config: dissect seeds must be >= 1");
    if (ascent_iterations < 1) throw config_error("config: ascent iterations must be >= 1");
    objective_of(*this);

    if (kind == "seed-study" && seeds.size() < 2)
        throw config_error("seed-study: need at least 2 seeds");
    if (kind == "noise-sweep") {
        if (levels.size() < 3) throw config_error("noise-sweep: need at least 3 noise levels");
        if (seeds.size() < 2) throw config_error("noise-sweep: need at least 2 seeds per level");
    }
    if (kind == "dissect") {
        if (reference.empty()) throw config_error("dissect: reference checkpoint required");
        if (probes.empty()) throw config_error("dissect: at least one probe checkpoint required");
    }
}

std::string ExperimentConfig::canonical_text() const {
    std::ostringstream os;
    os << "[run]\nkind = " << kind << "\n";
    os << "[dataset]\n" << dataset.canonical_text();
    os << "[model]\n";
    os << "arch = " << arch << "\n";
    os << "gen_arch = " << gen_arch << "\ndisc_arch = " << disc_arch << "\n";
    os << "hidden = " << hidden << "\nlatent_dim = " << latent_dim << "\n";
    os << "[runs]\nseeds =";
    for (auto s : seeds) os << ' ' << s;
    os << "\nnoise_levels =";
    for (double p : effective_noise_levels(*this)) os << ' ' << fmt_g(p);
    os << "\nnoise_seed = " << noise_seed << "\n";
    os << "[training]\n";
    os << "epochs = " << epochs << "\nbatch_size = " << batch_size << "\n";
    os << "optimizer = " << optimizer << "\nlr = " << fmt_g(lr) << "\nmomentum = " << fmt_g(momentum)
       << "\nweight_decay = " << fmt_g(weight_decay) << "\n";
    os << "augment = " << (augment_on ? 1 : 0) << "\naug_pad = " << aug_pad << "\n";
    os << "track_g = " << (track_g ? 1 : 0) << "\n";
    os << "[gan]\nepochs = " << gan_epochs << "\nbatch_size = " << gan_batch_size << "\nlr = "
       << fmt_g(gan_lr) << "\n";
    os << "[dissection]\n";
    os << "seeds_per_class = " << dissect_seeds << "\nascent_lr = " << fmt_g(ascent_lr)
       << "\nascent_iterations = " << ascent_iterations << "\nobjective = " << objective << "\n";
    os << "both_directions = " << (both_directions ? 1 : 0) << "\n";
    os << "export_patterns = " << export_patterns << "\n";
    os << "generator = " << generator << "\n";
    os << "reference = " << reference << "\nprobes =";
    for (const auto& p : probes) os << ' ' << p;
    os << "\n";
    return os.str();
}

std::uint64_t ExperimentConfig::config_hash() const { return fnv1a(canonical_text()); }

std::string ExperimentConfig::resolved_out_dir() const {
    if (!out_dir.empty()) return out_dir;
    const char* root = std::getenv(kOutRootEnv);
    return join(root && *root ? root : "runs", kind.empty() ? "run" : kind);
}

// ---- manifest ----

void RunManifest::write(const std::string& dir) const {
    std::ofstream f(join(dir, "manifest.txt"), std::ios::trunc);
    if (!f) throw io_error("cannot write manifest in " + dir);
    f << "nnlab-run-manifest v1\n";
    f << "kind " << kind << "\n";
    f << "tool_version " << tool_version << "\n";
    f << "config_hash " << hash_hex(config_hash) << "\n";
    f << "wall_seconds " << fmt_g(wall_seconds) << "\n";
    for (const Artifact& a : artifacts) f << "artifact " << hash_hex(a.content_hash) << ' ' << a.path << "\n";
    if (!f) throw io_error("failed writing manifest in " + dir);
}

RunManifest RunManifest::read(const std::string& dir) {
    std::ifstream f(join(dir, "manifest.txt"));
    if (!f) throw io_error("cannot open manifest in " + dir);
    RunManifest m;
    std::string line;
    if (!std::getline(f, line) || line != "nnlab-run-manifest v1")
        throw io_error(dir + ": not a run manifest");
    while (std::getline(f, line)) {
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "kind") ls >> m.kind;
        else if (key == "tool_version") ls >> m.tool_version;
        else if (key == "config_hash") {
            std::string h;
            ls >> h;
            m.config_hash = std::stoull(h, nullptr, 16);
        } else if (key == "wall_seconds") {
            ls >> m.wall_seconds;
        } else if (key == "artifact") {
            std::string h, path;
            ls >> h >> path;
            m.artifacts.push_back({path, std::stoull(h, nullptr, 16)});
        }
    }
    return m;
}

void RunManifest::verify(const std::string& dir) const {
    for (const Artifact& a : artifacts) {
        const std::string p = join(dir, a.path);
        if (!fs::exists(p)) throw io_error("manifest: missing artifact " + p);
        const std::uint64_t h = fnv1a_file(p);
        if (h != a.content_hash)
            throw io_error("manifest: content hash mismatch for " + p + " (recorded " +
                           hash_hex(a.content_hash) + ", actual " + hash_hex(h) + ")");
    }
}

// ---- arch / generator resolution ----

ArchitectureDescriptor resolve_arch(const ExperimentConfig& cfg, const std::string& which,
                                    const Shape& sample_shape, int num_classes,
                                    std::uint64_t seed) {
    if (which.rfind("file:", 0) == 0) {
        const std::string path = which.substr(5);
        std::ifstream f(path);
        if (!f) throw io_error("cannot open descriptor file " + path);
        std::stringstream ss;
        ss << f.rdbuf();
        ArchitectureDescriptor d = ArchitectureDescriptor::from_text(ss.str());
        d.init_seed = seed;
        return d;
    }
    PresetOptions opt;
    opt.input_shape = sample_shape;
    opt.num_classes = num_classes;
    opt.latent_dim = cfg.latent_dim;
    opt.hidden = cfg.hidden;
    opt.seed = seed;
    return make_preset(which, opt);
}

std::unique_ptr<Generator> resolve_generator(const ExperimentConfig& cfg) {
    if (cfg.generator == "analytic") {
        if (cfg.dataset.kind != "synth")
            throw config_error("generator 'analytic' needs a synth dataset");
        return std::make_unique<ClusterGenerator>(cfg.dataset.synth);
    }
    return std::make_unique<NetworkGenerator>(load_checkpoint(cfg.generator));
}

// ---- commands ----

RunManifest cmd_train(const ExperimentConfig& cfg) {
    cfg.validate();
    Timer timer;
    const std::string dir = cfg.resolved_out_dir();
    ensure_dir(dir);
    RunManifest m;
    m.kind = "train";
    m.config_hash = cfg.config_hash();

    auto [train, test] = cfg.dataset.load();
    for (std::uint64_t seed : cfg.seeds) {
        for (double p : effective_noise_levels(cfg)) {
            LabeledDataset noisy = with_noise(train, p, cfg.noise_seed);
            TrainConfig tc = train_config_for(cfg, std::move(noisy), test, seed);
            auto [net, report] = train_classifier(tc);
            const std::string mn = model_name(seed, p);
            const std::string rn = report_name(seed, p);
            save_checkpoint(net, join(dir, mn));
            write_training_report_csv(report, join(dir, rn));
            add_artifact(m, dir, mn);
            add_artifact(m, dir, rn);
            add_artifact(m, dir, rn + ".config");
        }
    }
    write_config_echo(cfg, dir, m);
    m.wall_seconds = timer.seconds();
    m.write(dir);
    return m;
}

RunManifest cmd_train_gan(const ExperimentConfig& cfg) {
    cfg.validate();
    Timer timer;
    const std::string dir = cfg.resolved_out_dir();
    ensure_dir(dir);
    RunManifest m;
    m.kind = "train-gan";
    m.config_hash = cfg.config_hash();

    auto [train, test] = cfg.dataset.load();
    (void)test;
    GanConfig gc;
    gc.data = train;
    gc.gen = resolve_arch(cfg, cfg.gen_arch, train.sample_shape(), train.num_classes,
                          cfg.seeds[0]);
    gc.disc = resolve_arch(cfg, cfg.disc_arch, train.sample_shape(), train.num_classes,
                           mix64(cfg.seeds[0], 0xd15c));
    gc.epochs = cfg.gan_epochs;
    gc.batch_size = cfg.gan_batch_size;
    gc.lr = cfg.gan_lr;
    gc.seed = cfg.seeds[0];
    GanResult res = train_gan(gc);
    save_checkpoint(res.generator, join(dir, "gen.nnck"));
    save_checkpoint(res.discriminator, join(dir, "disc.nnck"));
    write_gan_report_csv(res.report, join(dir, "gan_report.csv"));
    add_artifact(m, dir, "gen.nnck");
    add_artifact(m, dir, "disc.nnck");
    add_artifact(m, dir, "gan_report.csv");
    add_artifact(m, dir, "gan_report.csv.config");
    write_config_echo(cfg, dir, m);
    m.wall_seconds = timer.seconds();
    m.write(dir);
    return m;
}

namespace {

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

} // namespace

RunManifest cmd_dissect(const ExperimentConfig& cfg) {
    cfg.validate();
    Timer timer;
    const std::string dir = cfg.resolved_out_dir();
    ensure_dir(dir);
    RunManifest m;
    m.kind = "dissect";
    m.config_hash = cfg.config_hash();

    const Network ref = load_checkpoint(cfg.reference);
    auto gen = resolve_generator(cfg);
    const AscentObjective obj = objective_of(cfg);

    svg::BarChartSpec chart;
    chart.title = "dissimilarity vs " + stem_of(cfg.reference);
    chart.ylabel = "Dist (mean KL, whisker = variance)";

    for (const std::string& probe_path : cfg.probes) {
        const Network probe = load_checkpoint(probe_path);
        const std::string ref_id = stem_of(cfg.reference);
        const std::string probe_id = stem_of(probe_path);
        DissectionResult fwd = dissect_pair(ref, probe, *gen, cfg.dissect_seeds, cfg.ascent_lr,
                                            cfg.ascent_iterations, obj, 0, ref_id, probe_id);
        const std::string fn = "dissect_" + ref_id + "_vs_" + probe_id + ".csv";
        write_dissection_csv(fwd, join(dir, fn));
        add_artifact(m, dir, fn);
        chart.bars.push_back({probe_id, fwd.dist_mean, fwd.dist_variance, 0});
        if (cfg.both_directions) {
            DissectionResult rev = dissect_pair(probe, ref, *gen, cfg.dissect_seeds, cfg.ascent_lr,
                                                cfg.ascent_iterations, obj, 0, probe_id, ref_id);
            const std::string rn = "dissect_" + probe_id + "_vs_" + ref_id + ".csv";
            write_dissection_csv(rev, join(dir, rn));
            add_artifact(m, dir, rn);
            chart.bars.push_back({probe_id + " (rev)", rev.dist_mean, rev.dist_variance, 1});
        }
    }
    svg::write_file(join(dir, "dissimilarity.svg"), svg::render_bar_chart(chart));
    add_artifact(m, dir, "dissimilarity.svg");

    // pattern exports for the reference model
    const int per_class = std::max(0, std::min(cfg.export_patterns, cfg.dissect_seeds));
    for (int j = 0; j < ref.desc.num_classes; ++j) {
        for (int s = 0; s < per_class; ++s) {
            const std::uint64_t seed = mix64(0, static_cast<std::uint64_t>(j),
                                             static_cast<std::uint64_t>(s));
            PatternResult pat = activation_maximize(ref, *gen, j, seed, cfg.ascent_lr,
                                                    cfg.ascent_iterations, obj);
            const std::string stem =
                "pattern_" + stem_of(cfg.reference) + "_c" + std::to_string(j) + "_s" +
                std::to_string(s);
            const std::string written = export_pattern(pat.x_star, join(dir, stem));
            add_artifact(m, dir, fs::path(written).filename().string());
        }
    }

    write_config_echo(cfg, dir, m);
    m.wall_seconds = timer.seconds();
    m.write(dir);
    return m;
}

RunManifest cmd_seed_study(const ExperimentConfig& cfg) {
    cfg.validate();
    Timer timer;
    const std::string dir = cfg.resolved_out_dir();
    ensure_dir(dir);
    RunManifest m;
    m.kind = "seed-study";
    m.config_hash = cfg.config_hash();

    auto [train, test] = cfg.dataset.load();
    const double p = effective_noise_levels(cfg)[0];
    LabeledDataset noisy = with_noise(train, p, cfg.noise_seed);

    std::ofstream csv(join(dir, "seed_study.csv"), std::ios::trunc);
    if (!csv) throw io_error("cannot write seed_study.csv");
    csv << "seed,epoch,train_acc,g_bar\n";

    svg::LinePlotSpec acc_panel, g_panel;
    acc_panel.title = "training accuracy (p=" + noise_tag(p) + ")";
    acc_panel.xlabel = "epoch";
    acc_panel.ylabel = "train accuracy";
    g_panel.title = "gradient magnitude (p=" + noise_tag(p) + ")";
    g_panel.xlabel = "epoch";
    g_panel.ylabel = "G bar";

    for (std::uint64_t seed : cfg.seeds) {
        TrainConfig tc = train_config_for(cfg, noisy, test, seed);
        auto [net, report] = train_classifier(tc);
        svg::Series sa{"s" + std::to_string(seed), {}};
        svg::Series sg{"s" + std::to_string(seed), {}};
        for (const EpochRecord& r : report.epochs) {
            csv << seed << ',' << r.epoch << ',' << fmt_g(r.train_acc) << ',' << fmt_g(r.g_bar)
                << '\n';
            sa.points.emplace_back(r.epoch, r.train_acc);
            sg.points.emplace_back(r.epoch, r.g_bar);
        }
        acc_panel.series.push_back(std::move(sa));
        g_panel.series.push_back(std::move(sg));
        const std::string mn = "model_s" + std::to_string(seed) + ".nnck";
        save_checkpoint(net, join(dir, mn));
        add_artifact(m, dir, mn);
    }
    csv.close();
    add_artifact(m, dir, "seed_study.csv");
    svg::write_file(join(dir, "seed_study.svg"), svg::render_line_panels({acc_panel, g_panel}));
    add_artifact(m, dir, "seed_study.svg");

    write_config_echo(cfg, dir, m);
    m.wall_seconds = timer.seconds();
    m.write(dir);
    return m;
}

RunManifest cmd_noise_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    Timer timer;
    const std::string dir = cfg.resolved_out_dir();
    ensure_dir(dir);
    RunManifest m;
    m.kind = "noise-sweep";
    m.config_hash = cfg.config_hash();

    auto [train, test] = cfg.dataset.load();
    auto gen = resolve_generator(cfg);
    const AscentObjective obj = objective_of(cfg);

    std::ofstream csv(join(dir, "sweep.csv"), std::ios::trunc);
    if (!csv) throw io_error("cannot write sweep.csv");
    csv << "noise_level,dist_mean,dist_variance\n";
    svg::LinePlotSpec plot;
    plot.title = "dissimilarity vs label noise";
    plot.xlabel = "noise level p";
    plot.ylabel = "Dist (mean KL)";
    svg::Series line{"dist_mean", {}};

    // the dataset noise seed is shared inside a level; only init seeds vary
    for (double p : effective_noise_levels(cfg)) {
        LabeledDataset noisy = with_noise(train, p, cfg.noise_seed);
        std::vector<Network> nets;
        for (std::size_t i = 0; i < 2; ++i) {
            TrainConfig tc = train_config_for(cfg, noisy, test, cfg.seeds[i]);
            auto [net, report] = train_classifier(tc);
            const std::string rn = "report_s" + std::to_string(cfg.seeds[i]) + "_p" + noise_tag(p) +
                                   ".csv";
            write_training_report_csv(report, join(dir, rn));
            add_artifact(m, dir, rn);
            add_artifact(m, dir, rn + ".config");
            const std::string mn = model_name(cfg.seeds[i], p);
            save_checkpoint(net, join(dir, mn));
            add_artifact(m, dir, mn);
            nets.push_back(std::move(net));
        }
        DissectionResult res = dissect_pair(nets[0], nets[1], *gen, cfg.dissect_seeds,
                                            cfg.ascent_lr, cfg.ascent_iterations, obj, 0,
                                            "s" + std::to_string(cfg.seeds[0]),
                                            "s" + std::to_string(cfg.seeds[1]));
        const std::string dn = "dissect_p" + noise_tag(p) + ".csv";
        write_dissection_csv(res, join(dir, dn));
        add_artifact(m, dir, dn);
        csv << noise_tag(p) << ',' << fmt_g(res.dist_mean) << ',' << fmt_g(res.dist_variance)
            << '\n';
        line.points.emplace_back(p, res.dist_mean);
    }
    csv.close();
    add_artifact(m, dir, "sweep.csv");
    plot.series.push_back(std::move(line));
    svg::write_file(join(dir, "sweep.svg"), svg::render_line_plot(plot));
    add_artifact(m, dir, "sweep.svg");

    write_config_echo(cfg, dir, m);
    m.wall_seconds = timer.seconds();
    m.write(dir);
    return m;
}

RunManifest cmd_report(const ExperimentConfig& cfg) {
    Timer timer;
    const std::string dir = cfg.resolved_out_dir();
    if (!fs::exists(dir)) throw io_error("report: no such run directory " + dir);
    RunManifest m;
    m.kind = "report";
    m.config_hash = cfg.config_hash();

    // regenerate figures from whatever CSVs the directory holds
    bool any = false;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("report_", 0) == 0 && entry.path().extension() == ".csv") {
            TrainingReport rep = read_training_report_csv(entry.path().string());
            svg::LinePlotSpec acc, g;
            acc.title = stem_of(name);
            acc.xlabel = "epoch";
            acc.ylabel = "accuracy";
            svg::Series tr{"train", {}}, te{"test", {}};
            g.title = stem_of(name) + " gradient magnitude";
            g.xlabel = "epoch";
            g.ylabel = "G bar";
            svg::Series gs{"g_bar", {}};
            for (const EpochRecord& r : rep.epochs) {
                tr.points.emplace_back(r.epoch, r.train_acc);
                te.points.emplace_back(r.epoch, r.test_acc);
                gs.points.emplace_back(r.epoch, r.g_bar);
            }
            acc.series = {tr, te};
            g.series = {gs};
            const std::string out = stem_of(name) + ".svg";
            svg::write_file(join(dir, out), svg::render_line_panels({acc, g}));
            add_artifact(m, dir, out);
            any = true;
        } else if (name == "sweep.csv") {
            std::ifstream f(entry.path());
            std::string line;
            std::getline(f, line);
            svg::LinePlotSpec plot;
            plot.title = "dissimilarity vs label noise";
            plot.xlabel = "noise level p";
            plot.ylabel = "Dist (mean KL)";
            svg::Series s{"dist_mean", {}};
            double p, dm, dv;
            while (std::getline(f, line))
                if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &p, &dm, &dv) == 3)
                    s.points.emplace_back(p, dm);
            plot.series.push_back(std::move(s));
            svg::write_file(join(dir, "sweep.svg"), svg::render_line_plot(plot));
            add_artifact(m, dir, "sweep.svg");
            any = true;
        }
    }
    if (!any) throw io_error("report: no reportable CSVs in " + dir);
    m.wall_seconds = timer.seconds();
    return m;
}

} // namespace nnlab::exp
