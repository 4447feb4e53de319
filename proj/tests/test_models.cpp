#include <cmath>
#include <cstring>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "nnlab/errors.hpp"
#include "nnlab/models.hpp"
#include "nnlab/rng.hpp"

using namespace nnlab;
using testutil::TempDir;
using testutil::worst_grad_err;

namespace {

ArchitectureDescriptor tiny_classifier(std::uint64_t seed = 1) {
    ArchitectureDescriptor d;
    d.role = Role::Classifier;
    d.input_shape = {2};
    d.num_classes = 2;
    d.init_seed = seed;
    d.layers = {DenseSpec{2, 2}};
    return d;
}

} // namespace

TEST_CASE("descriptor validation: dense 2->3 followed by dense 4->5 is rejected") {
    ArchitectureDescriptor d;
    d.role = Role::Discriminator;
    d.input_shape = {2};
    d.layers = {DenseSpec{2, 3}, DenseSpec{4, 5}};
    CHECK_THROWS_WITH_AS(d.validate(), doctest::Contains("incompatible with incoming shape [3]"),
                         config_error);
}

TEST_CASE("descriptor validation: role-specific terminal constraints") {
    ArchitectureDescriptor d;
    d.role = Role::Classifier;
    d.input_shape = {4};
    d.num_classes = 10;
    d.layers = {DenseSpec{4, 10}};
    CHECK(d.validate() == Shape{10});
    d.layers = {DenseSpec{4, 7}};
    CHECK_THROWS_AS(d.validate(), config_error);

    ArchitectureDescriptor g;
    g.role = Role::Generator;
    g.latent_dim = 3;
    g.input_shape = {3};
    g.layers = {DenseSpec{3, 5}}; // missing terminal tanh
    CHECK_THROWS_WITH_AS(g.validate(), doctest::Contains("must end in tanh"), config_error);
    g.layers.emplace_back(Activation::Tanh);
    CHECK(g.validate() == Shape{5});
}

TEST_CASE("build: same descriptor+seed twice gives bitwise-identical parameters") {
    PresetOptions opt;
    opt.input_shape = {6};
    opt.num_classes = 3;
    opt.seed = 44;
    const ArchitectureDescriptor d = make_preset("mlp-small", opt);
    Network a = build(d), b = build(d);
    REQUIRE(a.params.size() == b.params.size());
    for (std::size_t i = 0; i < a.params.size(); ++i)
        CHECK(std::memcmp(a.params[i].data().data(), b.params[i].data().data(),
                          a.params[i].size() * sizeof(double)) == 0);
    // classifier head has num_classes output columns
    CHECK(a.params[a.params.size() - 2].shape().back() == 3);
}

TEST_CASE("logits: zero weights give zero logits; identity-ish weights pass x through") {
    Network net = build(tiny_classifier());
    for (Tensor& p : net.params) std::fill(p.data().begin(), p.data().end(), 0.0);
    Graph g;
    Tensor out = logits(net, g, Tensor::from_data({1, 2}, {1.0, 2.0}));
    CHECK(out.data()[0] == 0.0);
    CHECK(out.data()[1] == 0.0);

    // W = I, b = 0
    net.params[0].data()[0] = 1.0;
    net.params[0].data()[1] = 0.0;
    net.params[0].data()[2] = 0.0;
    net.params[0].data()[3] = 1.0;
    Graph g2;
    Tensor out2 = logits(net, g2, Tensor::from_data({1, 2}, {1.0, 2.0}));
    CHECK(out2.data()[0] == 1.0);
    CHECK(out2.data()[1] == 2.0);
}

TEST_CASE("logits: gradient with respect to the input matches central differences") {
    PresetOptions opt;
    opt.input_shape = {5};
    opt.num_classes = 4;
    opt.hidden = 8;
    opt.seed = 3;
    Network net = build(make_preset("mlp-small", opt));
    Tensor x = Tensor::zeros({1, 5}, true);
    Rng rng(10);
    for (double& v : x.data()) v = rng.normal();
    Tensor mask = Tensor::from_data({1, 4}, {0.0, 0.0, 1.0, 0.0});

    auto forward = [&](Graph& g) { return g.sum(g.mul(logits(net, g, x), mask)); };
    Graph g;
    GradientMap gm = g.backward(forward(g));
    auto loss_value = [&] {
        Graph gg;
        return forward(gg).item();
    };
    CHECK(worst_grad_err(loss_value, x, gm.at(x)) < 1e-6);
}

TEST_CASE("predict_probs: uniform at zero logits, (0.75, 0.25) at (ln 3, 0)") {
    PresetOptions opt;
    opt.input_shape = {2};
    opt.num_classes = 10;
    opt.hidden = 4;
    Network net = build(make_preset("mlp-small", opt));
    for (Tensor& p : net.params) std::fill(p.data().begin(), p.data().end(), 0.0);
    Tensor probs = predict_probs(net, Tensor::from_data({1, 2}, {0.4, -0.2}));
    for (double v : probs.data()) CHECK(v == doctest::Approx(0.1).epsilon(1e-12));

    Network two = build(tiny_classifier());
    for (Tensor& p : two.params) std::fill(p.data().begin(), p.data().end(), 0.0);
    two.params[1].data()[0] = std::log(3.0);
    Tensor probs2 = predict_probs(two, Tensor::from_data({1, 2}, {0.0, 0.0}));
    CHECK(probs2.data()[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(probs2.data()[1] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("predict_probs rows always sum to 1 within 1e-12, argmax matches logits") {
    PresetOptions opt;
    opt.input_shape = {4};
    opt.num_classes = 6;
    opt.seed = 12;
    Network net = build(make_preset("mlp-alt", opt));
    Rng rng(77);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<double> v(4);
        for (double& e : v) e = 3.0 * rng.normal();
        Tensor x = Tensor::from_data({1, 4}, std::move(v));
        Graph g;
        Tensor lg = logits(net, g, x);
        Tensor pr = g.softmax(lg);
        double sum = 0.0;
        int am_l = 0, am_p = 0;
        for (int c = 0; c < 6; ++c) {
            sum += pr.data()[static_cast<std::size_t>(c)];
            if (lg.data()[static_cast<std::size_t>(c)] > lg.data()[static_cast<std::size_t>(am_l)])
                am_l = c;
            if (pr.data()[static_cast<std::size_t>(c)] > pr.data()[static_cast<std::size_t>(am_p)])
                am_p = c;
        }
        CHECK(std::fabs(sum - 1.0) < 1e-12);
        CHECK(am_l == am_p);
    }
}

TEST_CASE("generate: zero weights give tanh(0)=0; outputs stay inside (-1, 1)") {
    PresetOptions opt;
    opt.input_shape = {3};
    opt.latent_dim = 4;
    opt.hidden = 8;
    opt.seed = 5;
    Network gen = build(make_preset("gen-small", opt));
    {
        Network zeroed = build(gen.desc);
        for (Tensor& p : zeroed.params) std::fill(p.data().begin(), p.data().end(), 0.0);
        Tensor out = generate(zeroed, Tensor::zeros({1, 4}));
        for (double v : out.data()) CHECK(v == 0.0);
    }
    Rng rng(8);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> z(4);
        for (double& v : z) v = rng.normal();
        Tensor out = generate(gen, Tensor::from_data({1, 4}, std::move(z)));
        for (double v : out.data()) {
            CHECK(v > -1.0);
            CHECK(v < 1.0);
        }
    }
}

TEST_CASE("generate: output gradient with respect to z matches central differences") {
    PresetOptions opt;
    opt.input_shape = {3};
    opt.latent_dim = 4;
    opt.seed = 21;
    Network gen = build(make_preset("gen-small", opt));
    Tensor z = Tensor::zeros({1, 4}, true);
    Rng rng(31);
    for (double& v : z.data()) v = rng.normal();
    Tensor mask = Tensor::from_data({1, 3}, {0.0, 1.0, 0.0});
    auto forward = [&](Graph& g) { return g.sum(g.mul(generate(gen, g, z), mask)); };
    Graph g;
    GradientMap gm = g.backward(forward(g));
    auto loss_value = [&] {
        Graph gg;
        return forward(gg).item();
    };
    CHECK(worst_grad_err(loss_value, z, gm.at(z)) < 1e-6);
}

TEST_CASE("descriptor text round trip is exact") {
    PresetOptions opt;
    opt.input_shape = {1, 8, 8};
    opt.num_classes = 4;
    opt.seed = 99;
    for (const std::string& name : {"mlp-small", "mlp-alt", "cnn-small"}) {
        const ArchitectureDescriptor d = make_preset(name, opt);
        CHECK(ArchitectureDescriptor::from_text(d.to_text()) == d);
    }
    PresetOptions gopt;
    gopt.input_shape = {1, 8, 8};
    gopt.latent_dim = 6;
    for (const std::string& name : {"gen-small", "disc-small"}) {
        const ArchitectureDescriptor d = make_preset(name, gopt);
        CHECK(ArchitectureDescriptor::from_text(d.to_text()) == d);
    }
}

TEST_CASE("checkpoint round trip: probe outputs within 1e-6, argmax exact") {
    TempDir tmp("nnlab_ckpt");
    PresetOptions opt;
    opt.input_shape = {1, 8, 8};
    opt.num_classes = 5;
    opt.seed = 13;
    Network net = build(make_preset("cnn-small", opt));
    const std::string path = tmp.file("model.nnck");
    save_checkpoint(net, path);
    Network back = load_checkpoint(path);
    CHECK(back.desc == net.desc);

    Rng rng(14);
    std::vector<double> probe(256 * 64);
    for (double& v : probe) v = rng.uniform(-1.0, 1.0);
    Tensor x = Tensor::from_data({256, 1, 8, 8}, std::move(probe));
    Tensor pa = predict_probs(net, x);
    Tensor pb = predict_probs(back, x);
    double worst = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i)
        worst = std::max(worst, std::fabs(pa.data()[i] - pb.data()[i]));
    CHECK(worst < 1e-6);
    for (int r = 0; r < 256; ++r) {
        int aa = 0, ab = 0;
        for (int c = 0; c < 5; ++c) {
            if (pa.data()[static_cast<std::size_t>(r) * 5 + c] >
                pa.data()[static_cast<std::size_t>(r) * 5 + aa])
                aa = c;
            if (pb.data()[static_cast<std::size_t>(r) * 5 + c] >
                pb.data()[static_cast<std::size_t>(r) * 5 + ab])
                ab = c;
        }
        CHECK(aa == ab);
    }
}

TEST_CASE("checkpoint: bad magic, truncation and version errors") {
    TempDir tmp("nnlab_ckpt_bad");
    PresetOptions opt;
    opt.input_shape = {4};
    opt.num_classes = 2;
    opt.hidden = 3;
    Network net = build(make_preset("mlp-small", opt));
    const std::string path = tmp.file("model.nnck");
    save_checkpoint(net, path);

    {
        std::ofstream f(tmp.file("bad.nnck"), std::ios::binary);
        f << "XXXX";
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(tmp.file("bad.nnck")), doctest::Contains("bad magic"),
                         io_error);

    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    {
        std::ofstream f(tmp.file("trunc.nnck"), std::ios::binary);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 7));
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(tmp.file("trunc.nnck")),
                         doctest::Contains("truncated tensor block"), io_error);
    {
        std::string v = bytes;
        v[4] = 9; // bump the version field
        std::ofstream f(tmp.file("ver.nnck"), std::ios::binary);
        f.write(v.data(), static_cast<std::streamsize>(v.size()));
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(tmp.file("ver.nnck")),
                         doctest::Contains("unsupported checkpoint version"), io_error);
}

TEST_CASE("presets reject unusable input shapes") {
    PresetOptions opt;
    opt.input_shape = {7};
    CHECK_THROWS_AS(make_preset("cnn-small", opt), config_error);
    CHECK_THROWS_AS(make_preset("no-such-preset", opt), config_error);
}
