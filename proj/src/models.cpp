#include "nnlab/models.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "nnlab/errors.hpp"
#include "nnlab/hash.hpp"
#include "nnlab/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

namespace nnlab {

namespace {

constexpr char kMagic[4] = {'N', 'N', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

std::string dims_x(const Shape& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += 'x';
        out += std::to_string(s[i]);
    }
    return out;
}

Shape parse_dims_x(const std::string& s) {
    Shape out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t next = s.find('x', pos);
        if (next == std::string::npos) next = s.size();
        out.push_back(std::stoi(s.substr(pos, next - pos)));
        pos = next + 1;
    }
    return out;
}

std::string layer_text(const LayerSpec& l) {
    std::ostringstream os;
    if (const auto* d = std::get_if<DenseSpec>(&l)) {
        os << "dense " << d->in << ' ' << d->out;
    } else if (const auto* c = std::get_if<Conv2dSpec>(&l)) {
        os << "conv " << c->in_ch << ' ' << c->out_ch << ' ' << c->k << ' ' << c->stride << ' '
           << c->pad;
    } else if (const auto* t = std::get_if<TConv2dSpec>(&l)) {
        os << "tconv " << t->in_ch << ' ' << t->out_ch << ' ' << t->k << ' ' << t->stride << ' '
           << t->pad;
    } else if (const auto* a = std::get_if<Activation>(&l)) {
        os << (*a == Activation::Relu ? "relu" : *a == Activation::Tanh ? "tanh" : "sigmoid");
    } else if (std::holds_alternative<FlattenSpec>(l)) {
        os << "flatten";
    } else {
        os << "reshape " << dims_x(std::get<ReshapeSpec>(l).shape);
    }
    return os.str();
}

std::string layer_desc(const LayerSpec& l) { return "(" + layer_text(l) + ")"; }

} // namespace

std::string role_name(Role r) {
    switch (r) {
        case Role::Classifier: return "classifier";
        case Role::Generator: return "generator";
        case Role::Discriminator: return "discriminator";
    }
    return "?";
}

Role role_from_name(const std::string& s) {
    if (s == "classifier") return Role::Classifier;
    if (s == "generator") return Role::Generator;
    if (s == "discriminator") return Role::Discriminator;
    throw config_error("unknown network role '" + s + "'");
}

Shape ArchitectureDescriptor::validate() const {
    if (input_shape.empty()) throw config_error("descriptor: missing input shape");
    for (int d : input_shape)
        if (d <= 0) throw config_error("descriptor: bad input shape " + shape_str(input_shape));
    if (layers.empty()) throw config_error("descriptor: no layers");
    if (role == Role::Classifier && num_classes < 2)
        throw config_error("descriptor: classifier needs num_classes >= 2");
    if (role == Role::Generator) {
        if (latent_dim < 1) throw config_error("descriptor: generator needs latent_dim >= 1");
        if (input_shape != Shape{latent_dim})
            throw config_error("descriptor: generator input shape " + shape_str(input_shape) +
                               " must equal [latent_dim=" + std::to_string(latent_dim) + "]");
    }

    Shape cur = input_shape;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        const std::string where = "layer " + std::to_string(i) + " " + layer_desc(l);
        if (const auto* d = std::get_if<DenseSpec>(&l)) {
            if (d->in < 1 || d->out < 1) throw config_error(where + ": sizes must be positive");
            if (cur != Shape{d->in})
                throw config_error(where + ": incompatible with incoming shape " + shape_str(cur));
            cur = {d->out};
        } else if (const auto* c = std::get_if<Conv2dSpec>(&l)) {
            if (cur.size() != 3 || cur[0] != c->in_ch)
                throw config_error(where + ": incompatible with incoming shape " + shape_str(cur));
            if (c->k < 1 || c->stride < 1 || c->pad < 0 || c->out_ch < 1)
                throw config_error(where + ": bad conv geometry");
            const int h = (cur[1] + 2 * c->pad - c->k) / c->stride + 1;
            const int w = (cur[2] + 2 * c->pad - c->k) / c->stride + 1;
            if (cur[1] + 2 * c->pad < c->k || cur[2] + 2 * c->pad < c->k || h < 1 || w < 1)
                throw config_error(where + ": kernel does not fit input " + shape_str(cur));
            cur = {c->out_ch, h, w};
        } else if (const auto* t = std::get_if<TConv2dSpec>(&l)) {
            if (cur.size() != 3 || cur[0] != t->in_ch)
                throw config_error(where + ": incompatible with incoming shape " + shape_str(cur));
            if (t->k < 1 || t->stride < 1 || t->pad < 0 || t->out_ch < 1)
                throw config_error(where + ": bad tconv geometry");
            const int h = (cur[1] - 1) * t->stride - 2 * t->pad + t->k;
            const int w = (cur[2] - 1) * t->stride - 2 * t->pad + t->k;
            if (h < 1 || w < 1)
                throw config_error(where + ": output collapses for input " + shape_str(cur));
            cur = {t->out_ch, h, w};
        } else if (std::holds_alternative<FlattenSpec>(l)) {
            cur = {static_cast<int>(numel(cur))};
        } else if (const auto* r = std::get_if<ReshapeSpec>(&l)) {
            if (numel(r->shape) != numel(cur))
                throw config_error(where + ": element count mismatch with incoming shape " +
                                   shape_str(cur));
            cur = r->shape;
        }
    }

    if (role == Role::Classifier) {
        const auto* last = std::get_if<DenseSpec>(&layers.back());
        if (!last || last->out != num_classes)
            throw config_error("descriptor: classifier must end in dense with out == num_classes (" +
                               std::to_string(num_classes) + "), final layer is " +
                               layer_desc(layers.back()));
    }
    if (role == Role::Generator) {
        const auto* last = std::get_if<Activation>(&layers.back());
        if (!last || *last != Activation::Tanh)
            throw config_error("descriptor: generator must end in tanh, final layer is " +
                               layer_desc(layers.back()));
    }
    return cur;
}

std::string ArchitectureDescriptor::to_text() const {
    std::ostringstream os;
    os << "role " << role_name(role) << '\n';
    os << "input " << dims_x(input_shape) << '\n';
    if (role == Role::Classifier) os << "classes " << num_classes << '\n';
    if (role == Role::Generator) os << "latent " << latent_dim << '\n';
    os << "seed " << init_seed << '\n';
    for (const auto& l : layers) os << "layer " << layer_text(l) << '\n';
    return os.str();
}

ArchitectureDescriptor ArchitectureDescriptor::from_text(const std::string& text) {
    ArchitectureDescriptor d;
    d.init_seed = 1;
    std::istringstream is(text);
    std::string line;
    bool saw_role = false, saw_input = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "role") {
            std::string r;
            ls >> r;
            d.role = role_from_name(r);
            saw_role = true;
        } else if (key == "input") {
            std::string dims;
            ls >> dims;
            d.input_shape = parse_dims_x(dims);
            saw_input = true;
        } else if (key == "classes") {
            ls >> d.num_classes;
        } else if (key == "latent") {
            ls >> d.latent_dim;
        } else if (key == "seed") {
            ls >> d.init_seed;
        } else if (key == "layer") {
            std::string kind;
            ls >> kind;
            if (kind == "dense") {
                DenseSpec s;
                ls >> s.in >> s.out;
                d.layers.emplace_back(s);
            } else if (kind == "conv") {
                Conv2dSpec s;
                ls >> s.in_ch >> s.out_ch >> s.k >> s.stride >> s.pad;
                d.layers.emplace_back(s);
            } else if (kind == "tconv") {
                TConv2dSpec s;
                ls >> s.in_ch >> s.out_ch >> s.k >> s.stride >> s.pad;
                d.layers.emplace_back(s);
            } else if (kind == "relu") {
                d.layers.emplace_back(Activation::Relu);
            } else if (kind == "tanh") {
                d.layers.emplace_back(Activation::Tanh);
            } else if (kind == "sigmoid") {
                d.layers.emplace_back(Activation::Sigmoid);
            } else if (kind == "flatten") {
                d.layers.emplace_back(FlattenSpec{});
            } else if (kind == "reshape") {
                std::string dims;
                ls >> dims;
                d.layers.emplace_back(ReshapeSpec{parse_dims_x(dims)});
            } else {
                throw config_error("descriptor: unknown layer kind '" + kind + "'");
            }
        } else {
            throw config_error("descriptor: unknown directive '" + key + "'");
        }
        if (ls.fail()) throw config_error("descriptor: malformed line '" + line + "'");
    }
    if (!saw_role || !saw_input) throw config_error("descriptor: missing role or input line");
    d.validate();
    return d;
}

Network build(const ArchitectureDescriptor& desc) {
    desc.validate();
    Network net;
    net.desc = desc;
    Rng rng(desc.init_seed);
    auto uniform_fanin = [&rng](Shape shape, int fan_in) {
        const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Tensor t = Tensor::zeros(std::move(shape), true);
        for (double& v : t.data()) v = rng.uniform(-a, a);
        return t;
    };
    for (std::size_t i = 0; i < desc.layers.size(); ++i) {
        const std::string prefix = "layer" + std::to_string(i);
        if (const auto* d = std::get_if<DenseSpec>(&desc.layers[i])) {
            net.params.push_back(uniform_fanin({d->in, d->out}, d->in));
            net.param_names.push_back(prefix + ".dense.weight");
            net.params.push_back(Tensor::zeros({d->out}, true));
            net.param_names.push_back(prefix + ".dense.bias");
        } else if (const auto* c = std::get_if<Conv2dSpec>(&desc.layers[i])) {
            net.params.push_back(uniform_fanin({c->out_ch, c->in_ch, c->k, c->k},
                                               c->in_ch * c->k * c->k));
            net.param_names.push_back(prefix + ".conv.weight");
            net.params.push_back(Tensor::zeros({c->out_ch}, true));
            net.param_names.push_back(prefix + ".conv.bias");
        } else if (const auto* t = std::get_if<TConv2dSpec>(&desc.layers[i])) {
            net.params.push_back(uniform_fanin({t->in_ch, t->out_ch, t->k, t->k},
                                               t->in_ch * t->k * t->k));
            net.param_names.push_back(prefix + ".tconv.weight");
            net.params.push_back(Tensor::zeros({t->out_ch}, true));
            net.param_names.push_back(prefix + ".tconv.bias");
        }
    }
    return net;
}

Tensor Network::forward(Graph& g, const Tensor& x) const {
    const Shape expect = desc.input_shape;
    if (x.rank() != static_cast<int>(expect.size()) + 1 ||
        !std::equal(expect.begin(), expect.end(), x.shape().begin() + 1))
        throw std::invalid_argument("forward: input " + shape_str(x.shape()) +
                                    " does not match descriptor input " + shape_str(expect));
    Tensor h = x;
    std::size_t pi = 0;
    const int n = x.shape()[0];
    for (const auto& l : desc.layers) {
        if (std::holds_alternative<DenseSpec>(l)) {
            const Tensor& w = params[pi];
            const Tensor& b = params[pi + 1];
            pi += 2;
            h = g.bias_add(g.matmul(h, w), b);
        } else if (const auto* c = std::get_if<Conv2dSpec>(&l)) {
            const Tensor& w = params[pi];
            const Tensor& b = params[pi + 1];
            pi += 2;
            h = g.bias_add(g.conv2d(h, w, c->stride, c->pad), b);
        } else if (const auto* t = std::get_if<TConv2dSpec>(&l)) {
            const Tensor& w = params[pi];
            const Tensor& b = params[pi + 1];
            pi += 2;
            h = g.bias_add(g.tconv2d(h, w, t->stride, t->pad), b);
        } else if (const auto* a = std::get_if<Activation>(&l)) {
            h = *a == Activation::Relu ? g.relu(h)
              : *a == Activation::Tanh ? g.tanh(h)
                                       : g.sigmoid(h);
        } else if (std::holds_alternative<FlattenSpec>(l)) {
            h = g.flatten(h);
        } else if (const auto* r = std::get_if<ReshapeSpec>(&l)) {
            Shape s;
            s.push_back(n);
            s.insert(s.end(), r->shape.begin(), r->shape.end());
            h = g.reshape(h, std::move(s));
        }
    }
    return h;
}

std::uint64_t Network::param_checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const Tensor& p : params)
        h = fnv1a(p.data().data(), p.size() * sizeof(double), h);
    return h;
}

namespace {

Tensor batchify(const Tensor& x, const Shape& sample) {
    if (x.shape() == sample) {
        Shape s;
        s.push_back(1);
        s.insert(s.end(), sample.begin(), sample.end());
        return Tensor::from_data(s, std::vector<double>(x.data().begin(), x.data().end()),
                                 x.requires_grad());
    }
    return x;
}

} // namespace

Tensor logits(const Network& net, Graph& g, const Tensor& x) {
    if (net.desc.role != Role::Classifier)
        throw std::invalid_argument("logits: network role is " + role_name(net.desc.role) +
                                    ", expected classifier");
    return net.forward(g, batchify(x, net.desc.input_shape));
}

Tensor predict_probs(const Network& net, Graph& g, const Tensor& x) {
    return g.softmax(logits(net, g, x));
}

Tensor predict_probs(const Network& net, const Tensor& x) {
    Graph g;
    return predict_probs(net, g, x);
}

Tensor generate(const Network& net, Graph& g, const Tensor& z) {
    if (net.desc.role != Role::Generator)
        throw std::invalid_argument("generate: network role is " + role_name(net.desc.role) +
                                    ", expected generator");
    return net.forward(g, batchify(z, net.desc.input_shape));
}

Tensor generate(const Network& net, const Tensor& z) {
    Graph g;
    return generate(net, g, z);
}

// ---- checkpoints ----

namespace {

void write_u32(std::ofstream& f, std::uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t read_u32(std::ifstream& f, const std::string& path, const char* what) {
    std::uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    if (!f) throw io_error(path + ": truncated " + what);
    return v;
}

} // namespace

void save_checkpoint(const Network& net, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("cannot write checkpoint " + path);
    f.write(kMagic, 4);
    write_u32(f, kVersion);
    const std::string desc = net.desc.to_text();
    write_u32(f, static_cast<std::uint32_t>(desc.size()));
    f.write(desc.data(), static_cast<std::streamsize>(desc.size()));
    for (const Tensor& p : net.params) {
        write_u32(f, static_cast<std::uint32_t>(p.rank()));
        for (int d : p.shape()) write_u32(f, static_cast<std::uint32_t>(d));
        std::vector<float> vals(p.size());
        auto src = p.data();
        for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<float>(src[i]);
        f.write(reinterpret_cast<const char*>(vals.data()),
                static_cast<std::streamsize>(vals.size() * sizeof(float)));
    }
    if (!f) throw io_error("failed writing checkpoint " + path);
}

Network load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open checkpoint " + path);
    char magic[4] = {};
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
        throw io_error(path + ": bad magic (expected NNCK)");
    const std::uint32_t version = read_u32(f, path, "version field");
    if (version != kVersion)
        throw io_error(path + ": unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t desc_len = read_u32(f, path, "descriptor length");
    std::string desc_text(desc_len, '\0');
    f.read(desc_text.data(), desc_len);
    if (!f) throw io_error(path + ": truncated descriptor text");
    const ArchitectureDescriptor desc = ArchitectureDescriptor::from_text(desc_text);

    // structure comes from the descriptor; stored tensors must agree with it
    Network net = build(desc);
    for (std::size_t i = 0; i < net.params.size(); ++i) {
        const std::uint32_t rank = read_u32(f, path, "tensor block");
        Shape s(rank);
        for (std::uint32_t d = 0; d < rank; ++d)
            s[d] = static_cast<int>(read_u32(f, path, "tensor block"));
        if (s != net.params[i].shape())
            throw io_error(path + ": descriptor/parameter inconsistency at " +
                           net.param_names[i] + " (stored " + shape_str(s) + ", descriptor needs " +
                           shape_str(net.params[i].shape()) + ")");
        std::vector<float> vals(numel(s));
        f.read(reinterpret_cast<char*>(vals.data()),
               static_cast<std::streamsize>(vals.size() * sizeof(float)));
        if (!f) throw io_error(path + ": truncated tensor block at " + net.param_names[i]);
        auto dst = net.params[i].data();
        for (std::size_t j = 0; j < vals.size(); ++j) dst[j] = static_cast<double>(vals[j]);
    }
    f.peek();
    if (!f.eof()) throw io_error(path + ": trailing bytes after last tensor block");
    return net;
}

// ---- presets ----

std::vector<std::string> preset_names() {
    return {"mlp-small", "mlp-alt", "cnn-small", "gen-small", "disc-small"};
}

ArchitectureDescriptor make_preset(const std::string& name, const PresetOptions& opt) {
    if (opt.input_shape.empty()) throw config_error("preset: input shape required");
    const bool image = opt.input_shape.size() == 3;
    const int flat = static_cast<int>(numel(opt.input_shape));
    ArchitectureDescriptor d;
    d.input_shape = opt.input_shape;
    d.init_seed = opt.seed;

    if (name == "mlp-small") {
        d.role = Role::Classifier;
        d.num_classes = opt.num_classes;
        if (image) d.layers.emplace_back(FlattenSpec{});
        d.layers.emplace_back(DenseSpec{flat, opt.hidden});
        d.layers.emplace_back(Activation::Relu);
        d.layers.emplace_back(DenseSpec{opt.hidden, opt.num_classes});
        if (!image) d.input_shape = {flat};
    } else if (name == "mlp-alt") {
        d.role = Role::Classifier;
        d.num_classes = opt.num_classes;
        const int h1 = opt.hidden + opt.hidden / 2;
        const int h2 = std::max(opt.hidden / 2, opt.num_classes);
        if (image) d.layers.emplace_back(FlattenSpec{});
        d.layers.emplace_back(DenseSpec{flat, h1});
        d.layers.emplace_back(Activation::Relu);
        d.layers.emplace_back(DenseSpec{h1, h2});
        d.layers.emplace_back(Activation::Relu);
        d.layers.emplace_back(DenseSpec{h2, opt.num_classes});
        if (!image) d.input_shape = {flat};
    } else if (name == "cnn-small") {
        if (!image) throw config_error("preset cnn-small: needs an image input shape");
        d.role = Role::Classifier;
        d.num_classes = opt.num_classes;
        const int c = opt.input_shape[0], h = opt.input_shape[1], w = opt.input_shape[2];
        d.layers.emplace_back(Conv2dSpec{c, 8, 3, 1, 1});
        d.layers.emplace_back(Activation::Relu);
        d.layers.emplace_back(Conv2dSpec{8, 16, 3, 2, 1});
        d.layers.emplace_back(Activation::Relu);
        const int h2 = (h + 2 - 3) / 2 + 1, w2 = (w + 2 - 3) / 2 + 1;
        d.layers.emplace_back(FlattenSpec{});
        d.layers.emplace_back(DenseSpec{16 * h2 * w2, 32});
        d.layers.emplace_back(Activation::Relu);
        d.layers.emplace_back(DenseSpec{32, opt.num_classes});
    } else if (name == "gen-small") {
        d.role = Role::Generator;
        d.latent_dim = opt.latent_dim;
        d.input_shape = {opt.latent_dim};
        if (!image) {
            d.layers.emplace_back(DenseSpec{opt.latent_dim, opt.hidden});
            d.layers.emplace_back(Activation::Relu);
            d.layers.emplace_back(DenseSpec{opt.hidden, flat});
            d.layers.emplace_back(Activation::Tanh);
        } else {
            const int c = opt.input_shape[0], h = opt.input_shape[1], w = opt.input_shape[2];
            if (h % 4 != 0 || w % 4 != 0)
                throw config_error("preset gen-small: image sides must be multiples of 4, got " +
                                   shape_str(opt.input_shape));
            const int h0 = h / 4, w0 = w / 4;
            d.layers.emplace_back(DenseSpec{opt.latent_dim, 32 * h0 * w0});
            d.layers.emplace_back(ReshapeSpec{{32, h0, w0}});
            d.layers.emplace_back(Activation::Relu);
            d.layers.emplace_back(TConv2dSpec{32, 16, 4, 2, 1});
            d.layers.emplace_back(Activation::Relu);
            d.layers.emplace_back(TConv2dSpec{16, c, 4, 2, 1});
            d.layers.emplace_back(Activation::Tanh);
        }
    } else if (name == "disc-small") {
        d.role = Role::Discriminator;
        if (!image) {
            d.input_shape = {flat};
            d.layers.emplace_back(DenseSpec{flat, opt.hidden});
            d.layers.emplace_back(Activation::Relu);
            d.layers.emplace_back(DenseSpec{opt.hidden, 1});
        } else {
            const int c = opt.input_shape[0], h = opt.input_shape[1], w = opt.input_shape[2];
            if (h % 4 != 0 || w % 4 != 0)
                throw config_error("preset disc-small: image sides must be multiples of 4, got " +
                                   shape_str(opt.input_shape));
            d.layers.emplace_back(Conv2dSpec{c, 16, 4, 2, 1});
            d.layers.emplace_back(Activation::Relu);
            d.layers.emplace_back(Conv2dSpec{16, 32, 4, 2, 1});
            d.layers.emplace_back(Activation::Relu);
            d.layers.emplace_back(FlattenSpec{});
            d.layers.emplace_back(DenseSpec{32 * (h / 4) * (w / 4), 1});
        }
    } else {
        throw config_error("unknown preset '" + name + "'");
    }
    d.validate();
    return d;
}

} // namespace nnlab
