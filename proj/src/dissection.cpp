#include "nnlab/dissection.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>

#include "nnlab/errors.hpp"
#include "nnlab/rng.hpp"

namespace nnlab {

double kl_divergence(std::span<const double> p, std::span<const double> q, double eps) {
    if (p.size() != q.size())
        throw std::invalid_argument("kl_divergence: length mismatch (" + std::to_string(p.size()) +
                                    " vs " + std::to_string(q.size()) + ")");
    if (p.empty()) throw std::invalid_argument("kl_divergence: empty distributions");
    double ps = 0.0, qs = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0 || q[i] < 0.0)
            throw std::invalid_argument("kl_divergence: negative entry at index " +
                                        std::to_string(i));
        ps += p[i];
        qs += q[i];
    }
    if (std::fabs(ps - 1.0) > 1e-9 || std::fabs(qs - 1.0) > 1e-9)
        throw std::invalid_argument("kl_divergence: inputs must sum to 1 within 1e-9 (got " +
                                    std::to_string(ps) + " and " + std::to_string(qs) + ")");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        // identical entries contribute ln(1) = 0 even below the clamp floor
        if (p[i] == q[i]) continue;
        kl += p[i] * std::log(p[i] / std::max(q[i], eps));
    }
    // the clamp can only push sub-eps terms below their true value, and the
    // true divergence is nonnegative; floor the residue
    return kl < 0.0 ? 0.0 : kl;
}

NetworkGenerator::NetworkGenerator(Network net) : net_(std::move(net)) {
    if (net_.desc.role != Role::Generator)
        throw std::invalid_argument("NetworkGenerator: network role is " +
                                    role_name(net_.desc.role) + ", expected generator");
}

Shape NetworkGenerator::output_shape() const { return net_.desc.validate(); }

Tensor NetworkGenerator::generate(Graph& g, const Tensor& z) const {
    return nnlab::generate(net_, g, z);
}

ClusterGenerator::ClusterGenerator(std::vector<std::vector<double>> centers, double noise_sigma,
                                   double selector_temperature)
    : sigma_(noise_sigma), tau_(selector_temperature) {
    if (centers.empty() || centers[0].empty())
        throw std::invalid_argument("ClusterGenerator: need at least one non-empty center");
    const int c = static_cast<int>(centers.size());
    const int d = static_cast<int>(centers[0].size());
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(c) * d);
    for (const auto& row : centers) {
        if (static_cast<int>(row.size()) != d)
            throw std::invalid_argument("ClusterGenerator: ragged center matrix");
        flat.insert(flat.end(), row.begin(), row.end());
    }
    centers_ = Tensor::from_data({c, d}, std::move(flat));
    // constant 0/1 projections split z into selector and noise parts
    const int latent = c + d;
    std::vector<double> sel(static_cast<std::size_t>(latent) * c, 0.0);
    for (int i = 0; i < c; ++i) sel[static_cast<std::size_t>(i) * c + i] = 1.0;
    sel_proj_ = Tensor::from_data({latent, c}, std::move(sel));
    std::vector<double> noi(static_cast<std::size_t>(latent) * d, 0.0);
    for (int i = 0; i < d; ++i) noi[static_cast<std::size_t>(c + i) * d + i] = 1.0;
    noise_proj_ = Tensor::from_data({latent, d}, std::move(noi));
}

ClusterGenerator::ClusterGenerator(const SynthSpec& spec, double selector_temperature)
    : ClusterGenerator(synth_cluster_centers(spec), spec.noise_sigma, selector_temperature) {}

int ClusterGenerator::latent_dim() const {
    return centers_.shape()[0] + centers_.shape()[1];
}

Shape ClusterGenerator::output_shape() const { return {centers_.shape()[1]}; }

Tensor ClusterGenerator::generate(Graph& g, const Tensor& z) const {
    Tensor zin = z;
    if (z.rank() == 1)
        zin = Tensor::from_data({1, z.shape()[0]},
                                std::vector<double>(z.data().begin(), z.data().end()),
                                z.requires_grad());
    if (zin.rank() != 2 || zin.shape()[1] != latent_dim())
        throw std::invalid_argument("ClusterGenerator: latent " + shape_str(z.shape()) +
                                    " does not match latent_dim " + std::to_string(latent_dim()));
    Tensor sel = g.softmax(g.scale(g.matmul(zin, sel_proj_), tau_));
    Tensor mix = g.matmul(sel, centers_);
    Tensor noise = g.scale(g.matmul(zin, noise_proj_), sigma_);
    return g.add(mix, noise);
}

AscentResult gradient_ascent(const std::function<Tensor(Graph&, const Tensor&)>& objective,
                             std::vector<double> z_init, double lr, int iterations) {
    if (iterations < 1) throw std::invalid_argument("gradient_ascent: iterations must be >= 1");
    const int latent = static_cast<int>(z_init.size());
    AscentResult res;
    res.z_init = z_init;
    res.objective_trace.reserve(static_cast<std::size_t>(iterations));

    Tensor z = Tensor::from_data({1, latent}, std::move(z_init), true);
    for (int t = 0; t < iterations; ++t) {
        Graph g;
        g.leaf(z);
        Tensor obj = objective(g, z);
        const double v = obj.item();
        if (!std::isfinite(v))
            throw train_error("gradient ascent: non-finite objective at iteration " +
                              std::to_string(t));
        res.objective_trace.push_back(v);
        GradientMap grads = g.backward(obj);
        auto gz = grads.at(z);
        auto zd = z.data();
        for (std::size_t i = 0; i < zd.size(); ++i) zd[i] += lr * gz[i];
    }
    res.z_star.assign(z.data().begin(), z.data().end());
    return res;
}

AscentResult gradient_ascent(const std::function<Tensor(Graph&, const Tensor&)>& objective,
                             int latent_dim, std::uint64_t seed, double lr, int iterations) {
    Rng rng(seed);
    std::vector<double> z0(static_cast<std::size_t>(latent_dim));
    for (double& v : z0) v = rng.normal();
    return gradient_ascent(objective, std::move(z0), lr, iterations);
}

namespace {

void check_gen_matches(const Network& f1, const Generator& gen) {
    const Shape out = gen.output_shape();
    if (numel(out) != numel(f1.desc.input_shape))
        throw std::invalid_argument("dissection: generator output " + shape_str(out) +
                                    " does not match classifier input " +
                                    shape_str(f1.desc.input_shape));
}

// generated samples may be laid out flat while the classifier expects
// images (or vice versa); element counts already checked
Tensor classifier_input(const Network& f, const Tensor& x) {
    Shape want;
    want.push_back(x.shape()[0]);
    want.insert(want.end(), f.desc.input_shape.begin(), f.desc.input_shape.end());
    if (x.shape() == want) return x;
    return Tensor::from_data(want, std::vector<double>(x.data().begin(), x.data().end()),
                             x.requires_grad());
}

std::vector<double> probs_row(const Network& f, const Tensor& x_star) {
    Graph g;
    Tensor p = predict_probs(f, g, classifier_input(f, x_star));
    return std::vector<double>(p.data().begin(), p.data().end());
}

} // namespace

PatternResult activation_maximize(const Network& f1, const Generator& gen, int class_index,
                                  std::uint64_t seed, double lr, int iterations,
                                  AscentObjective objective) {
    if (f1.desc.role != Role::Classifier)
        throw std::invalid_argument("activation_maximize: f1 must be a classifier");
    if (class_index < 0 || class_index >= f1.desc.num_classes)
        throw std::invalid_argument("activation_maximize: class " + std::to_string(class_index) +
                                    " out of range [0, " + std::to_string(f1.desc.num_classes) +
                                    ")");
    check_gen_matches(f1, gen);

    const int c = f1.desc.num_classes;
    std::vector<double> mask(static_cast<std::size_t>(c), 0.0);
    mask[static_cast<std::size_t>(class_index)] = 1.0;
    // one-hot mask picks the class score out of the [1, C] row
    Tensor mask_t = Tensor::from_data({1, c}, std::move(mask));
    auto obj = [&f1, &gen, &mask_t, objective](Graph& g, const Tensor& z) {
        Tensor x = classifier_input(f1, gen.generate(g, z));
        Tensor lg = logits(f1, g, x);
        Tensor score = objective == AscentObjective::Logit ? lg : g.softmax(lg);
        return g.sum(g.mul(score, mask_t));
    };

    AscentResult asc = gradient_ascent(obj, gen.latent_dim(), seed, lr, iterations);

    PatternResult res;
    res.class_index = class_index;
    res.seed = seed;
    res.z_init = std::move(asc.z_init);
    res.objective_trace = std::move(asc.objective_trace);
    Graph g;
    res.x_star = gen.generate(
        g, Tensor::from_data({1, gen.latent_dim()},
                             std::vector<double>(asc.z_star.begin(), asc.z_star.end())));
    res.z_star = std::move(asc.z_star);
    return res;
}

DissectionResult dissect_pair(const Network& f1, const Network& f2, const Generator& gen,
                              int seeds_per_class, double lr, int iterations,
                              AscentObjective objective, std::uint64_t base_seed,
                              const std::string& ref_id, const std::string& probe_id) {
    if (f1.desc.role != Role::Classifier || f2.desc.role != Role::Classifier)
        throw std::invalid_argument("dissect_pair: both networks must be classifiers");
    if (f1.desc.num_classes != f2.desc.num_classes)
        throw std::invalid_argument("dissect_pair: class-count mismatch between " + ref_id + " (" +
                                    std::to_string(f1.desc.num_classes) + ") and " + probe_id +
                                    " (" + std::to_string(f2.desc.num_classes) + ")");
    if (seeds_per_class < 1)
        throw std::invalid_argument("dissect_pair: seeds_per_class must be >= 1");
    check_gen_matches(f1, gen);
    check_gen_matches(f2, gen);

    const int c = f1.desc.num_classes;
    const int total = c * seeds_per_class;
    DissectionResult res;
    res.ref_id = ref_id;
    res.probe_id = probe_id;
    res.terms.resize(static_cast<std::size_t>(total));

    // every (class, seed) ascent is independent; nets and gen are read-only
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
#pragma omp parallel for schedule(dynamic)
    for (int t = 0; t < total; ++t) {
        if (failed.load(std::memory_order_relaxed)) continue;
        try {
            const int j = t / seeds_per_class;
            const int s = t % seeds_per_class;
            const std::uint64_t seed = mix64(base_seed, static_cast<std::uint64_t>(j),
                                             static_cast<std::uint64_t>(s));
            PatternResult pat = activation_maximize(f1, gen, j, seed, lr, iterations, objective);
            const auto p = probs_row(f1, pat.x_star);
            const auto q = probs_row(f2, pat.x_star);
            res.terms[static_cast<std::size_t>(t)] =
                DissectionResult::Term{j, seed, kl_divergence(p, q)};
        } catch (...) {
#pragma omp critical
            {
                if (!first_error) first_error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
            }
        }
    }
    if (first_error) std::rethrow_exception(first_error);

    double mean = 0.0;
    for (const auto& term : res.terms) mean += term.kl;
    mean /= static_cast<double>(total);
    double var = 0.0;
    for (const auto& term : res.terms) var += (term.kl - mean) * (term.kl - mean);
    var /= static_cast<double>(total);
    res.dist_mean = mean;
    res.dist_variance = var;
    return res;
}

void write_dissection_csv(const DissectionResult& res, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw io_error("cannot write " + path);
    char buf[64];
    f << "class,seed,kl\n";
    for (const auto& t : res.terms) {
        std::snprintf(buf, sizeof(buf), "%.10g", t.kl);
        f << t.class_index << ',' << t.seed << ',' << buf << '\n';
    }
    f << "dist_mean,dist_variance\n";
    std::snprintf(buf, sizeof(buf), "%.10g", res.dist_mean);
    f << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.10g", res.dist_variance);
    f << buf << '\n';
    if (!f) throw io_error("failed writing " + path);
}

DissectionResult read_dissection_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line != "class,seed,kl")
        throw io_error(path + ": unexpected header '" + line + "'");
    DissectionResult res;
    bool in_summary = false;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line == "dist_mean,dist_variance") {
            in_summary = true;
            continue;
        }
        if (in_summary) {
            if (std::sscanf(line.c_str(), "%lf,%lf", &res.dist_mean, &res.dist_variance) != 2)
                throw io_error(path + ": malformed summary row '" + line + "'");
            continue;
        }
        DissectionResult::Term t{};
        unsigned long long seed = 0;
        if (std::sscanf(line.c_str(), "%d,%llu,%lf", &t.class_index, &seed, &t.kl) != 3)
            throw io_error(path + ": malformed row '" + line + "'");
        t.seed = seed;
        res.terms.push_back(t);
    }
    return res;
}

std::string export_pattern(const Tensor& x_star, const std::string& path_stem) {
    Shape s = x_star.shape();
    // drop a leading batch dim of 1
    if (s.size() == 4 && s[0] == 1) s = Shape(s.begin() + 1, s.end());
    if (s.size() == 2 && s[0] == 1) s = Shape{s[1]};
    auto vals = x_star.data();

    if (s.size() == 3 && (s[0] == 1 || s[0] == 3)) {
        const bool color = s[0] == 3;
        const std::string path = path_stem + (color ? ".ppm" : ".pgm");
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw io_error("cannot write " + path);
        const int h = s[1], w = s[2];
        f << (color ? "P6" : "P5") << '\n' << w << ' ' << h << '\n' << 255 << '\n';
        // [-1, 1] -> [0, 255]; PPM wants pixel-major rgb, tensors are channel-major
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < (color ? 3 : 1); ++c) {
                    const double v = vals[(static_cast<std::size_t>(c) * h + y) * w + x];
                    const double u = std::clamp((v + 1.0) / 2.0, 0.0, 1.0);
                    f.put(static_cast<char>(static_cast<int>(std::lround(u * 255.0))));
                }
        if (!f) throw io_error("failed writing " + path);
        return path;
    }

    const std::string path = path_stem + ".csv";
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw io_error("cannot write " + path);
    f << "dim,value\n";
    char buf[64];
    for (std::size_t i = 0; i < vals.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.10g", vals[i]);
        f << i << ',' << buf << '\n';
    }
    return path;
}

} // namespace nnlab
