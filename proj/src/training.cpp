#include "nnlab/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nnlab/errors.hpp"
#include "nnlab/kernels.hpp"
#include "nnlab/rng.hpp"

namespace nnlab {

namespace {

constexpr std::uint64_t kTagAugment = 0x6175676d;
constexpr std::uint64_t kTagGanZ = 0x67616e7a;
constexpr std::uint64_t kTagProbe = 0x70726f62;
constexpr double kDivergenceCap = 1e6;

void check_finite(double loss, int epoch, int batch) {
    if (!std::isfinite(loss) || loss > kDivergenceCap)
        throw train_error("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                          std::to_string(batch) + " (loss=" + std::to_string(loss) + ")");
}

std::string fmt_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

int argmax_row(std::span<const double> row) {
    int best = 0;
    for (std::size_t j = 1; j < row.size(); ++j)
        if (row[j] > row[static_cast<std::size_t>(best)]) best = static_cast<int>(j);
    return best;
}

// per-sample G from the adjoint of the mean loss: rescale by batch size
std::vector<double> g_from_input_grad(std::span<const double> grad, std::size_t rows,
                                      std::size_t cols) {
    std::vector<double> g(rows);
    kernels::rowwise_abs_sum(grad.data(), rows, cols, g.data());
    const double scale = static_cast<double>(rows);
    for (double& v : g) v *= scale;
    return g;
}

std::string aug_text(const AugmentationPolicy& a) {
    std::ostringstream os;
    os << "enabled=" << (a.enabled ? 1 : 0) << " pad=" << a.pad_pixels << " crop=" << a.crop_h
       << "x" << a.crop_w << " flip=" << (a.horizontal_flip ? 1 : 0);
    return os.str();
}

std::string dataset_summary(const LabeledDataset& ds) {
    std::ostringstream os;
    os << "n=" << ds.size() << " classes=" << ds.num_classes << " shape="
       << shape_str(ds.sample_shape());
    if (ds.provenance.randomized)
        os << " labels=randomized(p=" << fmt_g(ds.provenance.noise_level)
           << ",seed=" << ds.provenance.seed << ")";
    else
        os << " labels=true";
    return os.str();
}

// reshape a batch to the descriptor's input layout when only the layout
// differs (e.g. an mlp fed image data)
Tensor adapt_batch(Graph& g, const Network& net, const Tensor& x) {
    const Shape& want = net.desc.input_shape;
    const int n = x.shape()[0];
    const bool same = x.rank() == static_cast<int>(want.size()) + 1 &&
                      std::equal(want.begin(), want.end(), x.shape().begin() + 1);
    if (same || numel(want) != x.size() / static_cast<std::size_t>(n)) return x;
    Shape s;
    s.push_back(n);
    s.insert(s.end(), want.begin(), want.end());
    return g.reshape(x, std::move(s));
}

} // namespace

void TrainConfig::validate() const {
    train.validate();
    test.validate();
    if (epochs < 1) throw config_error("train: epochs must be >= 1");
    if (batch_size < 1) throw config_error("train: batch_size must be >= 1");
    if (opt.lr <= 0.0) throw config_error("train: lr must be positive");
    if (opt.weight_decay < 0.0) throw config_error("train: weight decay must be >= 0");
    const ArchitectureDescriptor& d = arch;
    d.validate();
    if (d.role != Role::Classifier) throw config_error("train: descriptor role must be classifier");
    if (d.num_classes != train.num_classes)
        throw config_error("train: descriptor has " + std::to_string(d.num_classes) +
                           " classes but dataset has " + std::to_string(train.num_classes));
    Shape in = d.input_shape;
    if (numel(in) != numel(train.sample_shape()))
        throw config_error("train: descriptor input " + shape_str(in) +
                           " does not match sample shape " + shape_str(train.sample_shape()));
}

std::string TrainConfig::echo_text() const {
    std::ostringstream os;
    os << "[train]\n";
    os << "train_data = " << dataset_summary(train) << "\n";
    os << "test_data = " << dataset_summary(test) << "\n";
    os << "epochs = " << epochs << "\n";
    os << "batch_size = " << batch_size << "\n";
    os << "optimizer = " << (opt.kind == OptimizerKind::SgdMomentum ? "sgd_momentum" : "adam") << "\n";
    os << "lr = " << fmt_g(opt.lr) << "\n";
    if (opt.kind == OptimizerKind::SgdMomentum) os << "momentum = " << fmt_g(opt.momentum) << "\n";
    else os << "beta1 = " << fmt_g(opt.beta1) << "\nbeta2 = " << fmt_g(opt.beta2) << "\n";
    os << "weight_decay = " << fmt_g(opt.weight_decay) << "\n";
    os << "augment = " << aug_text(aug) << "\n";
    os << "seed = " << seed << "\n";
    os << "track_input_gradients = " << (track_input_gradients ? 1 : 0) << "\n";
    os << "[arch]\n" << arch.to_text();
    return os.str();
}

std::vector<double> input_gradient_magnitude(const Network& net, const Tensor& inputs,
                                             const std::vector<int>& labels) {
    if (net.desc.role != Role::Classifier)
        throw std::invalid_argument("input_gradient_magnitude: network role is " +
                                    role_name(net.desc.role) + ", expected classifier");
    Tensor x = inputs.clone();
    x.set_requires_grad(true);
    Graph g;
    g.leaf(x);
    Tensor loss = g.mean(g.cross_entropy_with_logits(net.forward(g, adapt_batch(g, net, x)), labels));
    GradientMap grads = g.backward(loss);
    const std::size_t rows = static_cast<std::size_t>(x.shape()[0]);
    return g_from_input_grad(grads.at(x), rows, x.size() / rows);
}

double accuracy(const Network& net, const LabeledDataset& ds, int batch_size) {
    std::size_t correct = 0;
    const std::size_t n = ds.size();
    const int c = ds.num_classes;
    for (std::size_t off = 0; off < n; off += static_cast<std::size_t>(batch_size)) {
        std::vector<int> idxs;
        for (std::size_t i = off; i < std::min(off + static_cast<std::size_t>(batch_size), n); ++i)
            idxs.push_back(static_cast<int>(i));
        Batch b = gather(ds, idxs);
        Graph g;
        Tensor out = net.forward(g, adapt_batch(g, net, b.inputs));
        auto rows = out.data();
        for (std::size_t i = 0; i < idxs.size(); ++i) {
            const int pred = argmax_row(rows.subspan(i * static_cast<std::size_t>(c),
                                                     static_cast<std::size_t>(c)));
            if (pred == b.labels[i]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

std::pair<Network, TrainingReport> train_classifier(const TrainConfig& cfg) {
    cfg.validate();
    Network net = build(cfg.arch);
    Optimizer opt(cfg.opt);
    TrainingReport report;
    report.config_echo = cfg.echo_text();

    const std::size_t n = cfg.train.size();

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double loss_sum = 0.0;
        double g_sum = 0.0;
        const auto plan = batch_plan(n, cfg.batch_size, cfg.seed, epoch);
        for (std::size_t bi = 0; bi < plan.size(); ++bi) {
            Batch b = gather(cfg.train, plan[bi]);
            Tensor x = b.inputs;
            if (cfg.aug.enabled)
                x = augment(x, cfg.aug, mix64(cfg.seed, kTagAugment,
                                              mix64(static_cast<std::uint64_t>(epoch),
                                                    static_cast<std::uint64_t>(bi))));
            const std::size_t bs = static_cast<std::size_t>(x.shape()[0]);
            if (cfg.track_input_gradients) x.set_requires_grad(true);

            Graph g;
            g.leaf(x);
            Tensor xin = adapt_batch(g, net, x);
            Tensor loss = g.mean(g.cross_entropy_with_logits(net.forward(g, xin), b.labels));
            const double loss_v = loss.item();
            check_finite(loss_v, epoch, static_cast<int>(bi));
            loss_sum += loss_v * static_cast<double>(bs);

            GradientMap grads = g.backward(loss);
            if (cfg.track_input_gradients) {
                const auto gvals = g_from_input_grad(grads.at(x), bs, x.size() / bs);
                for (double v : gvals) g_sum += v;
            }
            opt.step(net.params, grads);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = loss_sum / static_cast<double>(n);
        rec.g_bar = cfg.track_input_gradients ? g_sum / static_cast<double>(n) : 0.0;
        rec.train_acc = accuracy(net, cfg.train);
        rec.test_acc = accuracy(net, cfg.test);
        report.epochs.push_back(rec);
    }
    return {std::move(net), std::move(report)};
}

void GanConfig::validate() const {
    data.validate();
    if (epochs < 1) throw config_error("train-gan: epochs must be >= 1");
    if (batch_size < 1) throw config_error("train-gan: batch_size must be >= 1");
    if (lr <= 0.0) throw config_error("train-gan: lr must be positive");
    if (gen.role != Role::Generator) throw config_error("train-gan: gen descriptor role must be generator");
    if (disc.role != Role::Discriminator)
        throw config_error("train-gan: disc descriptor role must be discriminator");
    const Shape out = gen.validate();
    Shape want = data.sample_shape();
    if (out != want)
        throw config_error("train-gan: generator output " + shape_str(out) +
                           " does not match data sample shape " + shape_str(want));
    disc.validate();
}

std::string GanConfig::echo_text() const {
    std::ostringstream os;
    os << "[train-gan]\n";
    os << "data = " << dataset_summary(data) << "\n";
    os << "epochs = " << epochs << "\n";
    os << "batch_size = " << batch_size << "\n";
    os << "lr = " << fmt_g(lr) << "\n";
    os << "beta1 = " << fmt_g(beta1) << "\nbeta2 = " << fmt_g(beta2) << "\n";
    os << "seed = " << seed << "\n";
    os << "[gen]\n" << gen.to_text();
    os << "[disc]\n" << disc.to_text();
    return os.str();
}

namespace {

Tensor sample_latents(Rng& rng, int n, int latent) {
    std::vector<double> z(static_cast<std::size_t>(n) * latent);
    for (double& v : z) v = rng.normal();
    return Tensor::from_data({n, latent}, std::move(z));
}

// discriminator sees images or flat vectors depending on its descriptor
Tensor disc_input(Graph& g, const Network& disc, const Tensor& x) {
    if (disc.desc.input_shape.size() == 1 && x.rank() > 2) return g.flatten(x);
    return x;
}

} // namespace

GanResult train_gan(const GanConfig& cfg) {
    cfg.validate();
    GanResult res;
    res.generator = build(cfg.gen);
    res.discriminator = build(cfg.disc);
    res.report.config_echo = cfg.echo_text();
    Network& G = res.generator;
    Network& D = res.discriminator;

    Optimizer opt_g(OptimizerConfig::adam(cfg.lr, cfg.beta1, cfg.beta2));
    Optimizer opt_d(OptimizerConfig::adam(cfg.lr, cfg.beta1, cfg.beta2));
    Rng zrng(mix64(cfg.seed, kTagGanZ));

    // fixed held-out probes for the per-epoch discriminator score
    const int probe_n = static_cast<int>(std::min<std::size_t>(256, cfg.data.size()));
    Rng prng(mix64(cfg.seed, kTagProbe));
    std::vector<int> probe_idx(cfg.data.size());
    for (std::size_t i = 0; i < probe_idx.size(); ++i) probe_idx[i] = static_cast<int>(i);
    for (std::size_t i = probe_idx.size(); i > 1; --i)
        std::swap(probe_idx[i - 1], probe_idx[static_cast<std::size_t>(prng.below(static_cast<int>(i)))]);
    probe_idx.resize(static_cast<std::size_t>(probe_n));
    const Batch probe_real = gather(cfg.data, probe_idx);
    const Tensor probe_z = sample_latents(prng, probe_n, cfg.gen.latent_dim);

    const std::size_t n = cfg.data.size();
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double d_loss_sum = 0.0, g_loss_sum = 0.0;
        std::size_t nb = 0;
        const auto plan = batch_plan(n, cfg.batch_size, cfg.seed, epoch);
        for (std::size_t bi = 0; bi < plan.size(); ++bi, ++nb) {
            Batch real = gather(cfg.data, plan[bi]);
            const int bs = real.inputs.shape()[0];

            // discriminator step: push real logits up, fake logits down
            {
                Tensor z = sample_latents(zrng, bs, cfg.gen.latent_dim);
                Tensor fake;
                {
                    Graph gg;
                    fake = generate(G, gg, z); // detached from G below
                }
                Tensor fake_det = Tensor::from_data(
                    fake.shape(), std::vector<double>(fake.data().begin(), fake.data().end()));
                Graph g;
                Tensor lr_real = g.bce_with_logits(
                    g.flatten(D.forward(g, disc_input(g, D, real.inputs))),
                    std::vector<double>(static_cast<std::size_t>(bs), 1.0));
                Tensor lr_fake = g.bce_with_logits(
                    g.flatten(D.forward(g, disc_input(g, D, fake_det))),
                    std::vector<double>(static_cast<std::size_t>(bs), 0.0));
                Tensor loss = g.add(g.mean(lr_real), g.mean(lr_fake));
                const double lv = loss.item();
                check_finite(lv, epoch, static_cast<int>(bi));
                d_loss_sum += lv;
                GradientMap grads = g.backward(loss);
                opt_d.step(D.params, grads);
            }

            // generator step: non-saturating, label fakes as real
            {
                Tensor z = sample_latents(zrng, bs, cfg.gen.latent_dim);
                Graph g;
                Tensor fake = generate(G, g, z);
                Tensor loss = g.mean(g.bce_with_logits(
                    g.flatten(D.forward(g, disc_input(g, D, fake))),
                    std::vector<double>(static_cast<std::size_t>(bs), 1.0)));
                const double lv = loss.item();
                check_finite(lv, epoch, static_cast<int>(bi));
                g_loss_sum += lv;
                GradientMap grads = g.backward(loss);
                opt_g.step(G.params, grads);
            }
        }

        // held-out real-vs-fake accuracy at threshold 0.5 (logit 0)
        std::size_t correct = 0;
        {
            Graph g;
            Tensor fake = generate(G, g, probe_z);
            Tensor lr = g.flatten(D.forward(g, disc_input(g, D, probe_real.inputs)));
            Tensor lf = g.flatten(D.forward(g, disc_input(g, D, fake)));
            for (double v : lr.data()) correct += v > 0.0 ? 1 : 0;
            for (double v : lf.data()) correct += v <= 0.0 ? 1 : 0;
        }
        GanEpochRecord rec;
        rec.epoch = epoch;
        rec.d_loss = d_loss_sum / static_cast<double>(nb);
        rec.g_loss = g_loss_sum / static_cast<double>(nb);
        rec.d_acc = static_cast<double>(correct) / static_cast<double>(2 * probe_n);
        res.report.epochs.push_back(rec);
    }
    return res;
}

// ---- report io ----

void write_training_report_csv(const TrainingReport& rep, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw io_error("cannot write " + path);
    f << "epoch,train_acc,test_acc,loss,g_bar\n";
    for (const EpochRecord& r : rep.epochs)
        f << r.epoch << ',' << fmt_g(r.train_acc) << ',' << fmt_g(r.test_acc) << ','
          << fmt_g(r.loss) << ',' << fmt_g(r.g_bar) << '\n';
    if (!f) throw io_error("failed writing " + path);
    std::ofstream side(path + ".config", std::ios::trunc);
    if (!side) throw io_error("cannot write " + path + ".config");
    side << rep.config_echo;
}

TrainingReport read_training_report_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line != "epoch,train_acc,test_acc,loss,g_bar")
        throw io_error(path + ": unexpected header '" + line + "'");
    TrainingReport rep;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        EpochRecord r;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf", &r.epoch, &r.train_acc, &r.test_acc,
                        &r.loss, &r.g_bar) != 5)
            throw io_error(path + ": malformed row '" + line + "'");
        rep.epochs.push_back(r);
    }
    return rep;
}

void write_gan_report_csv(const GanReport& rep, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw io_error("cannot write " + path);
    f << "epoch,d_loss,g_loss,d_acc\n";
    for (const GanEpochRecord& r : rep.epochs)
        f << r.epoch << ',' << fmt_g(r.d_loss) << ',' << fmt_g(r.g_loss) << ',' << fmt_g(r.d_acc)
          << '\n';
    std::ofstream side(path + ".config", std::ios::trunc);
    if (!side) throw io_error("cannot write " + path + ".config");
    side << rep.config_echo;
}

} // namespace nnlab
