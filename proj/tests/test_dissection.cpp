#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "nnlab/dissection.hpp"
#include "nnlab/errors.hpp"
#include "nnlab/rng.hpp"
#include "nnlab/training.hpp"

using namespace nnlab;

namespace {

std::vector<double> random_dist(Rng& rng, int n) {
    std::vector<double> p(static_cast<std::size_t>(n));
    double sum = 0.0;
    for (double& v : p) {
        v = -std::log(1.0 - rng.uniform());
        sum += v;
    }
    for (double& v : p) v /= sum;
    return p;
}

Network trained_toy_classifier(std::uint64_t seed, double noise_p, const SynthSpec& spec,
                               int epochs = 60) {
    SynthSpec test_spec = spec;
    test_spec.split = 1;
    TrainConfig cfg;
    cfg.train = noise_p > 0.0 ? randomize_labels(synth_clusters(spec), noise_p, 17)
                              : synth_clusters(spec);
    cfg.test = synth_clusters(test_spec);
    PresetOptions opt;
    opt.input_shape = {spec.dims};
    opt.num_classes = spec.num_classes;
    opt.hidden = 48;
    opt.seed = seed;
    cfg.arch = make_preset("mlp-small", opt);
    cfg.epochs = epochs;
    cfg.batch_size = 16;
    cfg.opt = OptimizerConfig::sgd(0.05, 0.9, 0.0);
    cfg.seed = seed;
    cfg.track_input_gradients = false;
    return train_classifier(cfg).first;
}

} // namespace

TEST_CASE("kl_divergence: identity, hand values, clamping") {
    const std::vector<double> p = {0.2, 0.5, 0.3};
    CHECK(kl_divergence(p, p) == 0.0);

    const std::vector<double> a = {1.0, 0.0};
    const std::vector<double> b = {0.5, 0.5};
    CHECK(kl_divergence(a, b) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

    // 0.5*ln(0.5) + 0.5*ln(0.5/1e-12), evaluated directly
    CHECK(kl_divergence(b, a) == doctest::Approx(13.122363377404328).epsilon(1e-9));
    CHECK(kl_divergence(b, a) >= 0.0);
}

TEST_CASE("kl_divergence: nonnegative on random pairs and zero only at equality") {
    Rng rng(55);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + rng.below(9);
        const auto p = random_dist(rng, n);
        const auto q = random_dist(rng, n);
        const double kl = kl_divergence(p, q);
        CHECK(kl >= 0.0);
        CHECK(kl_divergence(p, p) == 0.0);
    }
}

TEST_CASE("kl_divergence: rejects bad inputs") {
    const std::vector<double> p = {0.5, 0.5};
    const std::vector<double> q3 = {0.3, 0.3, 0.4};
    CHECK_THROWS_AS(kl_divergence(p, q3), std::invalid_argument);
    const std::vector<double> not_norm = {0.7, 0.7};
    CHECK_THROWS_AS(kl_divergence(p, not_norm), std::invalid_argument);
    const std::vector<double> neg = {1.2, -0.2};
    CHECK_THROWS_AS(kl_divergence(neg, p), std::invalid_argument);
}

TEST_CASE("gradient ascent on the concave quadratic contracts by 0.9 per step") {
    // obj(z) = -||z - c||^2, lr = 0.05 -> factor 1 - 2*lr = 0.9
    const std::vector<double> target = {0.7, -0.3, 1.1};
    Tensor c = Tensor::from_data({1, 3}, std::vector<double>(target));
    auto obj = [&c](Graph& g, const Tensor& z) {
        Tensor d = g.add(z, g.scale(c, -1.0));
        return g.scale(g.sum(g.mul(d, d)), -1.0);
    };
    const std::vector<double> z0 = {2.0, 1.5, -1.0};
    double dist0 = 0.0;
    for (std::size_t i = 0; i < 3; ++i) dist0 += (z0[i] - target[i]) * (z0[i] - target[i]);
    dist0 = std::sqrt(dist0);

    for (int t : {1, 5, 17, 50}) {
        AscentResult res = gradient_ascent(obj, std::vector<double>(z0), 0.05, t);
        double dist = 0.0;
        for (std::size_t i = 0; i < 3; ++i)
            dist += (res.z_star[i] - target[i]) * (res.z_star[i] - target[i]);
        dist = std::sqrt(dist);
        CHECK(std::fabs(dist - std::pow(0.9, t) * dist0) < 1e-9);
    }

    // deep contraction measured against a maximizer at the origin, where
    // double precision is relative and the 0.9^t decay runs unobstructed;
    // a nonzero maximizer floors the iterate at ~1 ulp of the target
    auto origin_obj = [](Graph& g, const Tensor& z) { return g.scale(g.sum(g.mul(z, z)), -1.0); };
    AscentResult deep = gradient_ascent(origin_obj, std::vector<double>(z0), 0.05, 1000);
    double dist = 0.0;
    for (std::size_t i = 0; i < 3; ++i) dist += deep.z_star[i] * deep.z_star[i];
    CHECK(std::sqrt(dist) < 1e-40);

    // trace is non-decreasing below the curvature bound
    AscentResult tr = gradient_ascent(obj, std::vector<double>(z0), 0.05, 60);
    for (std::size_t i = 1; i < tr.objective_trace.size(); ++i)
        CHECK(tr.objective_trace[i] >= tr.objective_trace[i - 1]);
    CHECK(tr.objective_trace.size() == 60);
}

TEST_CASE("gradient ascent on a linear objective hits the closed form exactly") {
    // lr*w kept dyadic so repeated addition is exact in binary floating point
    const std::vector<double> w = {2.0, -4.0, 0.5};
    Tensor wt = Tensor::from_data({1, 3}, std::vector<double>(w));
    auto obj = [&wt](Graph& g, const Tensor& z) { return g.sum(g.mul(z, wt)); };
    const std::vector<double> z0 = {0.5, -0.25, 1.0};
    const double lr = 0.0625;
    const int iters = 1000;
    AscentResult res = gradient_ascent(obj, std::vector<double>(z0), lr, iters);
    for (std::size_t i = 0; i < 3; ++i) {
        const double closed = z0[i] + static_cast<double>(iters) * lr * w[i];
        CHECK(res.z_star[i] == closed);
    }
}

TEST_CASE("cluster generator pushes standard normals near the centers") {
    std::vector<std::vector<double>> centers = {{1.0, 0.0}, {-1.0, 0.5}, {0.0, -1.0}};
    ClusterGenerator gen(centers, 0.05);
    CHECK(gen.latent_dim() == 5);
    CHECK(gen.output_shape() == Shape{2});
    Rng rng(123);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> z(5);
        for (double& v : z) v = rng.normal();
        Graph g;
        Tensor x = gen.generate(g, Tensor::from_data({1, 5}, std::move(z)));
        double best = 1e9;
        for (const auto& ct : centers) {
            const double d = std::hypot(x.data()[0] - ct[0], x.data()[1] - ct[1]);
            best = std::min(best, d);
        }
        // soft selector can blend adjacent centers; stay within the hull scale
        CHECK(best < 1.0);
    }
}

TEST_CASE("activation_maximize: deterministic, non-mutating, recomputable") {
    SynthSpec spec;
    spec.num_classes = 3;
    spec.per_class = 30;
    spec.dims = 4;
    spec.seed = 2;
    Network f1 = trained_toy_classifier(1, 0.0, spec, 40);
    ClusterGenerator gen(spec);

    const std::uint64_t ck_f1 = f1.param_checksum();
    PatternResult a = activation_maximize(f1, gen, 1, 77, 0.05, 50);
    PatternResult b = activation_maximize(f1, gen, 1, 77, 0.05, 50);
    CHECK(f1.param_checksum() == ck_f1);
    CHECK(a.z_init == b.z_init);
    CHECK(a.z_star == b.z_star);
    CHECK(a.objective_trace == b.objective_trace);
    CHECK(a.objective_trace.size() == 50);
    CHECK(std::memcmp(a.x_star.data().data(), b.x_star.data().data(),
                      a.x_star.size() * sizeof(double)) == 0);

    // x_star is exactly generate(z_star)
    Graph g;
    Tensor again = gen.generate(
        g, Tensor::from_data({1, gen.latent_dim()}, std::vector<double>(a.z_star)));
    CHECK(std::memcmp(a.x_star.data().data(), again.data().data(),
                      a.x_star.size() * sizeof(double)) == 0);

    // the ascent pushes the class-1 objective up from its start
    CHECK(a.objective_trace.back() >= a.objective_trace.front());
}

TEST_CASE("dissect_pair: self-dissection is exactly zero") {
    SynthSpec spec;
    spec.num_classes = 3;
    spec.per_class = 30;
    spec.dims = 4;
    spec.seed = 4;
    Network f = trained_toy_classifier(5, 0.0, spec, 40);
    ClusterGenerator gen(spec);
    DissectionResult res = dissect_pair(f, f, gen, 2, 0.05, 40);
    CHECK(res.dist_mean <= 1e-12);
    CHECK(res.dist_variance <= 1e-12);
    CHECK(res.terms.size() == 6);
    for (const auto& t : res.terms) CHECK(t.kl == 0.0);
}

TEST_CASE("dissect_pair: swapping two output classes yields positive distance") {
    SynthSpec spec;
    spec.num_classes = 3;
    spec.per_class = 30;
    spec.dims = 4;
    spec.seed = 6;
    Network f1 = trained_toy_classifier(7, 0.0, spec, 40);
    Network f2 = f1;
    f2.params.clear();
    for (const Tensor& p : f1.params) f2.params.push_back(p.clone());
    // swap the last dense layer's output columns 0 and 1
    Tensor& w = f2.params[f2.params.size() - 2];
    Tensor& b = f2.params[f2.params.size() - 1];
    const int out = w.shape()[1];
    for (int r = 0; r < w.shape()[0]; ++r)
        std::swap(w.data()[static_cast<std::size_t>(r) * out],
                  w.data()[static_cast<std::size_t>(r) * out + 1]);
    std::swap(b.data()[0], b.data()[1]);

    ClusterGenerator gen(spec);
    DissectionResult res = dissect_pair(f1, f2, gen, 2, 0.05, 60);
    CHECK(res.dist_mean > 0.0);
}

TEST_CASE("dissect_pair: mean is permutation-invariant over per-term values") {
    SynthSpec spec;
    spec.num_classes = 3;
    spec.per_class = 30;
    spec.dims = 4;
    spec.seed = 8;
    Network f1 = trained_toy_classifier(9, 0.0, spec, 30);
    Network f2 = trained_toy_classifier(10, 0.0, spec, 30);
    ClusterGenerator gen(spec);
    DissectionResult res = dissect_pair(f1, f2, gen, 3, 0.05, 30);
    std::vector<double> kls;
    for (const auto& t : res.terms) kls.push_back(t.kl);
    std::mt19937 shuffler(4);
    std::shuffle(kls.begin(), kls.end(), shuffler);
    double mean = 0.0;
    for (double v : kls) mean += v;
    mean /= static_cast<double>(kls.size());
    CHECK(mean == doctest::Approx(res.dist_mean).epsilon(1e-12));

    // asymmetry is a real computation, not a mirrored value
    DissectionResult rev = dissect_pair(f2, f1, gen, 3, 0.05, 30);
    CHECK(rev.dist_mean != doctest::Approx(res.dist_mean).epsilon(1e-15));
}

TEST_CASE("dissect_pair: class-count mismatch is rejected naming both models") {
    SynthSpec spec3;
    spec3.num_classes = 3;
    spec3.per_class = 20;
    spec3.dims = 4;
    SynthSpec spec4 = spec3;
    spec4.num_classes = 4;
    Network f1 = trained_toy_classifier(1, 0.0, spec3, 10);
    Network f2 = trained_toy_classifier(1, 0.0, spec4, 10);
    ClusterGenerator gen(spec3);
    CHECK_THROWS_WITH_AS(dissect_pair(f1, f2, gen, 1, 0.05, 5),
                         doctest::Contains("class-count mismatch"), std::invalid_argument);
}

TEST_CASE("dissection csv round trip") {
    testutil::TempDir tmp("nnlab_dissect_csv");
    DissectionResult res;
    res.ref_id = "a";
    res.probe_id = "b";
    res.terms = {{0, 1, 0.5}, {0, 2, 0.25}, {1, 1, 1.5}, {1, 2, 0.75}};
    res.dist_mean = 0.75;
    res.dist_variance = 0.21875;
    const std::string path = tmp.file("d.csv");
    write_dissection_csv(res, path);
    DissectionResult back = read_dissection_csv(path);
    REQUIRE(back.terms.size() == 4);
    CHECK(back.dist_mean == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(back.dist_variance == doctest::Approx(0.21875).epsilon(1e-12));
    CHECK(back.terms[2].kl == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("export_pattern writes csv for vectors and pgm/ppm for images") {
    testutil::TempDir tmp("nnlab_patterns");
    Tensor vec = Tensor::from_data({1, 3}, {0.1, -0.5, 0.9});
    CHECK(export_pattern(vec, tmp.file("v")).ends_with(".csv"));
    Tensor gray = Tensor::zeros({1, 1, 4, 4});
    CHECK(export_pattern(gray, tmp.file("g")).ends_with(".pgm"));
    Tensor rgb = Tensor::zeros({1, 3, 4, 4});
    CHECK(export_pattern(rgb, tmp.file("c")).ends_with(".ppm"));
}
