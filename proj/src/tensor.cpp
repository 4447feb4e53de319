#include "nnlab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nnlab/kernels.hpp"

namespace nnlab {

std::size_t numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return n;
}

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

namespace {

void check_shape_positive(const Shape& s, const char* what) {
    for (int d : s)
        if (d <= 0)
            throw std::invalid_argument(std::string(what) + ": dimensions must be positive, got " +
                                        shape_str(s));
}

[[noreturn]] void shape_error(const char* prim, const Shape& a, const Shape& b) {
    throw std::invalid_argument(std::string(prim) + ": incompatible shapes " + shape_str(a) +
                                " and " + shape_str(b));
}

} // namespace

Tensor Tensor::zeros(Shape s, bool requires_grad) {
    check_shape_positive(s, "Tensor::zeros");
    auto p = std::make_shared<detail::TensorData>();
    p->data.assign(numel(s), 0.0);
    p->shape = std::move(s);
    p->requires_grad = requires_grad;
    return Tensor(std::move(p));
}

Tensor Tensor::full(Shape s, double v, bool requires_grad) {
    Tensor t = zeros(std::move(s), requires_grad);
    std::fill(t.data().begin(), t.data().end(), v);
    return t;
}

Tensor Tensor::from_data(Shape s, std::vector<double> d, bool requires_grad) {
    check_shape_positive(s, "Tensor::from_data");
    if (numel(s) != d.size())
        throw std::invalid_argument("Tensor::from_data: shape " + shape_str(s) + " needs " +
                                    std::to_string(numel(s)) + " values, got " +
                                    std::to_string(d.size()));
    auto p = std::make_shared<detail::TensorData>();
    p->shape = std::move(s);
    p->data = std::move(d);
    p->requires_grad = requires_grad;
    return Tensor(std::move(p));
}

Tensor Tensor::scalar(double v) { return from_data({1}, {v}); }

const Shape& Tensor::shape() const {
    if (!p_) throw std::logic_error("Tensor: undefined");
    return p_->shape;
}

int Tensor::rank() const { return static_cast<int>(shape().size()); }
std::size_t Tensor::size() const { return p_ ? p_->data.size() : 0; }

std::span<double> Tensor::data() {
    if (!p_) throw std::logic_error("Tensor: undefined");
    return p_->data;
}

std::span<const double> Tensor::data() const {
    if (!p_) throw std::logic_error("Tensor: undefined");
    return p_->data;
}

double Tensor::item() const {
    if (size() != 1) throw std::invalid_argument("Tensor::item: not a scalar, shape " + shape_str(shape()));
    return p_->data[0];
}

bool Tensor::requires_grad() const { return p_ && p_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
    if (!p_) throw std::logic_error("Tensor: undefined");
    p_->requires_grad = on;
}

Tensor Tensor::clone() const {
    if (!p_) return Tensor();
    return from_data(p_->shape, p_->data, p_->requires_grad);
}

bool GradientMap::contains(const Tensor& t) const { return grads_.count(t.id()) > 0; }

std::span<const double> GradientMap::at(const Tensor& t) const {
    auto it = grads_.find(t.id());
    if (it == grads_.end())
        throw std::out_of_range("GradientMap: no gradient recorded for tensor");
    return it->second;
}

Tensor GradientMap::grad_tensor(const Tensor& t) const {
    auto g = at(t);
    return Tensor::from_data(t.shape(), std::vector<double>(g.begin(), g.end()));
}

// ---- Graph internals ----

Tensor Graph::make_out(Shape s, std::vector<double> d, bool requires_grad) {
    Tensor out = Tensor::from_data(std::move(s), std::move(d), requires_grad);
    produced_.insert(out.id());
    return out;
}

void Graph::note_inputs(std::initializer_list<const Tensor*> ins) {
    for (const Tensor* t : ins) {
        if (!produced_.count(t->id()) && !leaf_set_.count(t->id())) {
            leaf_set_.insert(t->id());
            leaves_.push_back(*t);
        }
    }
}

void Graph::push(Tensor out, std::function<void(Graph&, std::span<const double>)> back) {
    nodes_.push_back(Node{std::move(out), std::move(back)});
}

bool Graph::wants_grad(const Tensor& t) const {
    return t.requires_grad() || produced_.count(t.id()) > 0;
}

std::vector<double>& Graph::adj(const Tensor& t) {
    auto& buf = adj_[t.id()];
    if (buf.empty()) buf.assign(t.size(), 0.0);
    return buf;
}

Tensor Graph::leaf(const Tensor& t) {
    note_inputs({&t});
    return t;
}

void Graph::record_signs(const Tensor& x) {
    if (!record_kinks_) return;
    for (double v : x.data())
        kink_signs_.push_back(v > 0.0 ? 2 : (v == 0.0 ? 1 : 0));
}

// ---- primitives ----

Tensor Graph::matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0])
        shape_error("matmul", a.shape(), b.shape());
    const int n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
    std::vector<double> y(static_cast<std::size_t>(n) * m);
    kernels::gemm(false, false, n, m, k, a.data().data(), b.data().data(), y.data());
    note_inputs({&a, &b});
    Tensor out = make_out({n, m}, std::move(y), a.requires_grad() || b.requires_grad());
    push(out, [a, b, n, k, m](Graph& g, std::span<const double> go) {
        if (g.wants_grad(a)) {
            std::vector<double> da(static_cast<std::size_t>(n) * k);
            kernels::gemm(false, true, n, k, m, go.data(), b.data().data(), da.data());
            auto& buf = g.adj(a);
            for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += da[i];
        }
        if (g.wants_grad(b)) {
            std::vector<double> db(static_cast<std::size_t>(k) * m);
            kernels::gemm(true, false, k, m, n, a.data().data(), go.data(), db.data());
            auto& buf = g.adj(b);
            for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += db[i];
        }
    });
    return out;
}

Tensor Graph::bias_add(const Tensor& x, const Tensor& b) {
    const bool ok2 = x.rank() == 2 && b.rank() == 1 && b.shape()[0] == x.shape()[1];
    const bool ok4 = x.rank() == 4 && b.rank() == 1 && b.shape()[0] == x.shape()[1];
    if (!ok2 && !ok4) shape_error("bias_add", x.shape(), b.shape());

    std::vector<double> y(x.data().begin(), x.data().end());
    const int channels = b.shape()[0];
    const std::size_t inner = ok2 ? 1 : static_cast<std::size_t>(x.shape()[2]) * x.shape()[3];
    const std::size_t rows = x.size() / (static_cast<std::size_t>(channels) * inner);
    for (std::size_t r = 0; r < rows; ++r)
        for (int c = 0; c < channels; ++c) {
            const double bv = b.data()[static_cast<std::size_t>(c)];
            double* base = y.data() + (r * channels + c) * inner;
            for (std::size_t i = 0; i < inner; ++i) base[i] += bv;
        }
    note_inputs({&x, &b});
    Tensor out = make_out(x.shape(), std::move(y), x.requires_grad() || b.requires_grad());
    push(out, [x, b, channels, inner, rows](Graph& g, std::span<const double> go) {
        if (g.wants_grad(x)) {
            auto& buf = g.adj(x);
            for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += go[i];
        }
        if (g.wants_grad(b)) {
            auto& buf = g.adj(b);
            for (std::size_t r = 0; r < rows; ++r)
                for (int c = 0; c < channels; ++c) {
                    const double* base = go.data() + (r * channels + c) * inner;
                    double acc = 0.0;
                    for (std::size_t i = 0; i < inner; ++i) acc += base[i];
                    buf[static_cast<std::size_t>(c)] += acc;
                }
        }
    });
    return out;
}

Tensor Graph::add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_error("add", a.shape(), b.shape());
    std::vector<double> y(a.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] + b.data()[i];
    note_inputs({&a, &b});
    Tensor out = make_out(a.shape(), std::move(y), a.requires_grad() || b.requires_grad());
    push(out, [a, b](Graph& g, std::span<const double> go) {
        if (g.wants_grad(a)) {
            auto& buf = g.adj(a);
            for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += go[i];
        }
        if (g.wants_grad(b)) {
            auto& buf = g.adj(b);
            for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += go[i];
        }
    });
    return out;
}

Tensor Graph::mul(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_error("mul", a.shape(), b.shape());
    std::vector<double> y(a.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] * b.data()[i];
    note_inputs({&a, &b});
    Tensor out = make_out(a.shape(), std::move(y), a.requires_grad() || b.requires_grad());
    push(out, [a, b](Graph& g, std::span<const double> go) {
        if (g.wants_grad(a)) {
            auto& buf = g.adj(a);
            for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += go[i] * b.data()[i];
        }
        if (g.wants_grad(b)) {
            auto& buf = g.adj(b);
            for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += go[i] * a.data()[i];
        }
    });
    return out;
}

Tensor Graph::scale(const Tensor& x, double c) {
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x.data()[i] * c;
    note_inputs({&x});
    Tensor out = make_out(x.shape(), std::move(y), x.requires_grad());
    push(out, [x, c](Graph& g, std::span<const double> go) {
        if (!g.wants_grad(x)) return;
        auto& buf = g.adj(x);
        for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += go[i] * c;
    });
    return out;
}

Tensor Graph::relu(const Tensor& x) {
    record_signs(x);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
    note_inputs({&x});
    Tensor out = make_out(x.shape(), std::move(y), x.requires_grad());
    push(out, [x](Graph& g, std::span<const double> go) {
        if (!g.wants_grad(x)) return;
        auto& buf = g.adj(x);
        // subgradient at 0 is 0
        for (std::size_t i = 0; i < buf.size(); ++i)
            if (x.data()[i] > 0.0) buf[i] += go[i];
    });
    return out;
}

Tensor Graph::tanh(const Tensor& x) {
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(x.data()[i]);
    note_inputs({&x});
    Tensor out = make_out(x.shape(), std::move(y), x.requires_grad());
    push(out, [x, out](Graph& g, std::span<const double> go) {
        if (!g.wants_grad(x)) return;
        auto& buf = g.adj(x);
        auto yv = out.data();
        for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += go[i] * (1.0 - yv[i] * yv[i]);
    });
    return out;
}

Tensor Graph::sigmoid(const Tensor& x) {
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double v = x.data()[i];
        y[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
    note_inputs({&x});
    Tensor out = make_out(x.shape(), std::move(y), x.requires_grad());
    push(out, [x, out](Graph& g, std::span<const double> go) {
        if (!g.wants_grad(x)) return;
        auto& buf = g.adj(x);
        auto yv = out.data();
        for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += go[i] * yv[i] * (1.0 - yv[i]);
    });
    return out;
}

namespace {

kernels::Conv2dDims conv_dims(const Tensor& x, const Tensor& w, int stride, int pad) {
    if (x.rank() != 4 || w.rank() != 4 || x.shape()[1] != w.shape()[1])
        shape_error("conv2d", x.shape(), w.shape());
    if (w.shape()[2] != w.shape()[3])
        throw std::invalid_argument("conv2d: kernel must be square, got " + shape_str(w.shape()));
    if (stride < 1 || pad < 0)
        throw std::invalid_argument("conv2d: stride must be >= 1 and pad >= 0");
    kernels::Conv2dDims d{};
    d.n = x.shape()[0];
    d.cin = x.shape()[1];
    d.h = x.shape()[2];
    d.w = x.shape()[3];
    d.cout = w.shape()[0];
    d.k = w.shape()[2];
    d.stride = stride;
    d.pad = pad;
    d.hout = (d.h + 2 * pad - d.k) / stride + 1;
    d.wout = (d.w + 2 * pad - d.k) / stride + 1;
    if (d.h + 2 * pad < d.k || d.w + 2 * pad < d.k)
        shape_error("conv2d", x.shape(), w.shape());
    return d;
}

kernels::TConv2dDims tconv_dims(const Tensor& x, const Tensor& w, int stride, int pad) {
    if (x.rank() != 4 || w.rank() != 4 || x.shape()[1] != w.shape()[0])
        shape_error("tconv2d", x.shape(), w.shape());
    if (w.shape()[2] != w.shape()[3])
        throw std::invalid_argument("tconv2d: kernel must be square, got " + shape_str(w.shape()));
    if (stride < 1 || pad < 0)
        throw std::invalid_argument("tconv2d: stride must be >= 1 and pad >= 0");
    kernels::TConv2dDims d{};
    d.n = x.shape()[0];
    d.cin = x.shape()[1];
    d.h = x.shape()[2];
    d.w = x.shape()[3];
    d.cout = w.shape()[1];
    d.k = w.shape()[2];
    d.stride = stride;
    d.pad = pad;
    d.hout = (d.h - 1) * stride - 2 * pad + d.k;
    d.wout = (d.w - 1) * stride - 2 * pad + d.k;
    if (d.hout < 1 || d.wout < 1) shape_error("tconv2d", x.shape(), w.shape());
    return d;
}

} // namespace

Tensor Graph::conv2d(const Tensor& x, const Tensor& w, int stride, int pad) {
    const kernels::Conv2dDims d = conv_dims(x, w, stride, pad);
    std::vector<double> y(static_cast<std::size_t>(d.n) * d.cout * d.hout * d.wout);
    kernels::conv2d_fwd(d, x.data().data(), w.data().data(), y.data());
    note_inputs({&x, &w});
    Tensor out = make_out({d.n, d.cout, d.hout, d.wout}, std::move(y),
                          x.requires_grad() || w.requires_grad());
    push(out, [x, w, d](Graph& g, std::span<const double> go) {
        if (g.wants_grad(x)) {
            std::vector<double> dx(x.size());
            kernels::conv2d_dx(d, go.data(), w.data().data(), dx.data());
            auto& buf = g.adj(x);
            for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += dx[i];
        }
        if (g.wants_grad(w)) {
            std::vector<double> dw(w.size());
            kernels::conv2d_dw(d, x.data().data(), go.data(), dw.data());
            auto& buf = g.adj(w);
            for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += dw[i];
        }
    });
    return out;
}

Tensor Graph::tconv2d(const Tensor& x, const Tensor& w, int stride, int pad) {
    const kernels::TConv2dDims d = tconv_dims(x, w, stride, pad);
    std::vector<double> y(static_cast<std::size_t>(d.n) * d.cout * d.hout * d.wout);
    kernels::tconv2d_fwd(d, x.data().data(), w.data().data(), y.data());
    note_inputs({&x, &w});
    Tensor out = make_out({d.n, d.cout, d.hout, d.wout}, std::move(y),
                          x.requires_grad() || w.requires_grad());
    push(out, [x, w, d](Graph& g, std::span<const double> go) {
        if (g.wants_grad(x)) {
            std::vector<double> dx(x.size());
            kernels::tconv2d_dx(d, go.data(), w.data().data(), dx.data());
            auto& buf = g.adj(x);
            for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += dx[i];
        }
        if (g.wants_grad(w)) {
            std::vector<double> dw(w.size());
            kernels::tconv2d_dw(d, x.data().data(), go.data(), dw.data());
            auto& buf = g.adj(w);
            for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += dw[i];
        }
    });
    return out;
}

Tensor Graph::reshape(const Tensor& x, Shape s) {
    check_shape_positive(s, "reshape");
    if (numel(s) != x.size()) shape_error("reshape", x.shape(), s);
    std::vector<double> y(x.data().begin(), x.data().end());
    note_inputs({&x});
    Tensor out = make_out(std::move(s), std::move(y), x.requires_grad());
    push(out, [x](Graph& g, std::span<const double> go) {
        if (!g.wants_grad(x)) return;
        auto& buf = g.adj(x);
        for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += go[i];
    });
    return out;
}

Tensor Graph::flatten(const Tensor& x) {
    if (x.rank() < 2)
        throw std::invalid_argument("flatten: needs a batched input, got " + shape_str(x.shape()));
    const int n = x.shape()[0];
    const int rest = static_cast<int>(x.size() / static_cast<std::size_t>(n));
    return reshape(x, {n, rest});
}

namespace {

struct RowView {
    std::size_t rows, cols;
};

RowView rows_of(const Tensor& x, const char* prim) {
    if (x.rank() < 1) throw std::invalid_argument(std::string(prim) + ": empty tensor");
    const std::size_t cols = static_cast<std::size_t>(x.shape().back());
    return RowView{x.size() / cols, cols};
}

} // namespace

Tensor Graph::softmax(const Tensor& x) {
    const RowView rv = rows_of(x, "softmax");
    std::vector<double> y(x.size());
    for (std::size_t r = 0; r < rv.rows; ++r) {
        const double* in = x.data().data() + r * rv.cols;
        double* outp = y.data() + r * rv.cols;
        double mx = in[0];
        for (std::size_t c = 1; c < rv.cols; ++c) mx = std::max(mx, in[c]);
        double s = 0.0;
        for (std::size_t c = 0; c < rv.cols; ++c) {
            outp[c] = std::exp(in[c] - mx);
            s += outp[c];
        }
        for (std::size_t c = 0; c < rv.cols; ++c) outp[c] /= s;
    }
    note_inputs({&x});
    Tensor out = make_out(x.shape(), std::move(y), x.requires_grad());
    push(out, [x, out, rv](Graph& g, std::span<const double> go) {
        if (!g.wants_grad(x)) return;
        auto& buf = g.adj(x);
        auto yv = out.data();
        for (std::size_t r = 0; r < rv.rows; ++r) {
            const double* yr = yv.data() + r * rv.cols;
            const double* gr = go.data() + r * rv.cols;
            double dot = 0.0;
            for (std::size_t c = 0; c < rv.cols; ++c) dot += yr[c] * gr[c];
            double* br = buf.data() + r * rv.cols;
            for (std::size_t c = 0; c < rv.cols; ++c) br[c] += yr[c] * (gr[c] - dot);
        }
    });
    return out;
}

Tensor Graph::log_softmax(const Tensor& x) {
    const RowView rv = rows_of(x, "log_softmax");
    std::vector<double> y(x.size());
    for (std::size_t r = 0; r < rv.rows; ++r) {
        const double* in = x.data().data() + r * rv.cols;
        double* outp = y.data() + r * rv.cols;
        double mx = in[0];
        for (std::size_t c = 1; c < rv.cols; ++c) mx = std::max(mx, in[c]);
        double s = 0.0;
        for (std::size_t c = 0; c < rv.cols; ++c) s += std::exp(in[c] - mx);
        const double lse = mx + std::log(s);
        for (std::size_t c = 0; c < rv.cols; ++c) outp[c] = in[c] - lse;
    }
    note_inputs({&x});
    Tensor out = make_out(x.shape(), std::move(y), x.requires_grad());
    push(out, [x, out, rv](Graph& g, std::span<const double> go) {
        if (!g.wants_grad(x)) return;
        auto& buf = g.adj(x);
        auto yv = out.data();
        for (std::size_t r = 0; r < rv.rows; ++r) {
            const double* yr = yv.data() + r * rv.cols;
            const double* gr = go.data() + r * rv.cols;
            double gsum = 0.0;
            for (std::size_t c = 0; c < rv.cols; ++c) gsum += gr[c];
            double* br = buf.data() + r * rv.cols;
            for (std::size_t c = 0; c < rv.cols; ++c) br[c] += gr[c] - std::exp(yr[c]) * gsum;
        }
    });
    return out;
}

Tensor Graph::cross_entropy_with_logits(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2)
        throw std::invalid_argument("cross_entropy_with_logits: logits must be [n, classes], got " +
                                    shape_str(logits.shape()));
    const int n = logits.shape()[0], c = logits.shape()[1];
    if (labels.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("cross_entropy_with_logits: " + std::to_string(n) +
                                    " rows but " + std::to_string(labels.size()) + " labels");
    for (int lb : labels)
        if (lb < 0 || lb >= c)
            throw std::invalid_argument("cross_entropy_with_logits: label " + std::to_string(lb) +
                                        " out of range [0, " + std::to_string(c) + ")");
    std::vector<double> y(static_cast<std::size_t>(n));
    // softmax rows are kept for the backward pass
    auto probs = std::make_shared<std::vector<double>>(logits.size());
    for (int r = 0; r < n; ++r) {
        const double* in = logits.data().data() + static_cast<std::size_t>(r) * c;
        double* pr = probs->data() + static_cast<std::size_t>(r) * c;
        double mx = in[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, in[j]);
        double s = 0.0;
        for (int j = 0; j < c; ++j) {
            pr[j] = std::exp(in[j] - mx);
            s += pr[j];
        }
        for (int j = 0; j < c; ++j) pr[j] /= s;
        y[static_cast<std::size_t>(r)] = (mx + std::log(s)) - in[labels[static_cast<std::size_t>(r)]];
    }
    note_inputs({&logits});
    Tensor out = make_out({n}, std::move(y), logits.requires_grad());
    push(out, [logits, labels, probs, n, c](Graph& g, std::span<const double> go) {
        if (!g.wants_grad(logits)) return;
        auto& buf = g.adj(logits);
        for (int r = 0; r < n; ++r) {
            const double gr = go[static_cast<std::size_t>(r)];
            const double* pr = probs->data() + static_cast<std::size_t>(r) * c;
            double* br = buf.data() + static_cast<std::size_t>(r) * c;
            for (int j = 0; j < c; ++j) br[j] += gr * pr[j];
            br[labels[static_cast<std::size_t>(r)]] -= gr;
        }
    });
    return out;
}

Tensor Graph::bce_with_logits(const Tensor& logits, const std::vector<double>& targets) {
    if (logits.size() != targets.size())
        throw std::invalid_argument("bce_with_logits: " + std::to_string(logits.size()) +
                                    " logits but " + std::to_string(targets.size()) + " targets");
    std::vector<double> y(logits.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double v = logits.data()[i];
        const double t = targets[i];
        // max(v,0) - v*t + log(1 + exp(-|v|))
        y[i] = std::max(v, 0.0) - v * t + std::log1p(std::exp(-std::fabs(v)));
    }
    note_inputs({&logits});
    Tensor out = make_out(logits.shape(), std::move(y), logits.requires_grad());
    push(out, [logits, targets](Graph& g, std::span<const double> go) {
        if (!g.wants_grad(logits)) return;
        auto& buf = g.adj(logits);
        for (std::size_t i = 0; i < buf.size(); ++i) {
            const double v = logits.data()[i];
            const double s = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
            buf[i] += go[i] * (s - targets[i]);
        }
    });
    return out;
}

Tensor Graph::mean(const Tensor& x) {
    const double n = static_cast<double>(x.size());
    const double v = kernels::reduce_sum(x.data().data(), x.size()) / n;
    note_inputs({&x});
    Tensor out = make_out({1}, {v}, x.requires_grad());
    push(out, [x, n](Graph& g, std::span<const double> go) {
        if (!g.wants_grad(x)) return;
        auto& buf = g.adj(x);
        const double gi = go[0] / n;
        for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += gi;
    });
    return out;
}

Tensor Graph::sum(const Tensor& x) {
    const double v = kernels::reduce_sum(x.data().data(), x.size());
    note_inputs({&x});
    Tensor out = make_out({1}, {v}, x.requires_grad());
    push(out, [x](Graph& g, std::span<const double> go) {
        if (!g.wants_grad(x)) return;
        auto& buf = g.adj(x);
        for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += go[0];
    });
    return out;
}

Tensor Graph::abs(const Tensor& x) {
    record_signs(x);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::fabs(x.data()[i]);
    note_inputs({&x});
    Tensor out = make_out(x.shape(), std::move(y), x.requires_grad());
    push(out, [x](Graph& g, std::span<const double> go) {
        if (!g.wants_grad(x)) return;
        auto& buf = g.adj(x);
        // subgradient at 0 is 0
        for (std::size_t i = 0; i < buf.size(); ++i) {
            const double v = x.data()[i];
            if (v > 0.0) buf[i] += go[i];
            else if (v < 0.0) buf[i] -= go[i];
        }
    });
    return out;
}

GradientMap Graph::backward(const Tensor& loss) {
    if (loss.size() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                    shape_str(loss.shape()));
    adj_.clear();
    adj(loss)[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        auto found = adj_.find(it->out.id());
        if (found == adj_.end() || found->second.empty()) continue;
        it->back(*this, found->second);
    }
    GradientMap gm;
    for (const Tensor& lf : leaves_) {
        if (!lf.requires_grad()) continue;
        auto found = adj_.find(lf.id());
        if (found != adj_.end() && !found->second.empty())
            gm.grads_[lf.id()] = std::move(found->second);
        else
            gm.grads_[lf.id()] = std::vector<double>(lf.size(), 0.0);
    }
    adj_.clear();
    return gm;
}

FiniteDiffReport finite_diff_check(
    const std::function<Tensor(Graph&, const Tensor&)>& build_loss,
    const Tensor& point, double step, double tolerance, double denom_floor) {
    Tensor x = point.clone();
    x.set_requires_grad(true);

    Graph g;
    g.leaf(x);
    Tensor loss = build_loss(g, x);
    GradientMap grads = g.backward(loss);
    auto analytic = grads.at(x);

    auto eval_at = [&](std::size_t idx, double v, std::vector<std::uint8_t>& signs) {
        Tensor xp = point.clone();
        xp.data()[idx] = v;
        Graph ge;
        ge.set_record_kink_signs(true);
        const double out = build_loss(ge, xp).item();
        signs = ge.kink_signs();
        return out;
    };

    FiniteDiffReport rep;
    rep.pass = true;
    for (std::size_t i = 0; i < point.size(); ++i) {
        const double v0 = point.data()[i];
        std::vector<std::uint8_t> sp, sm;
        const double fp = eval_at(i, v0 + step, sp);
        const double fm = eval_at(i, v0 - step, sm);
        if (sp != sm) {
            // perturbation crossed a relu/abs kink; central difference invalid here
            ++rep.excluded;
            continue;
        }
        const double numeric = (fp - fm) / (2.0 * step);
        const double a = analytic[i];
        const double denom = std::max({std::fabs(a), std::fabs(numeric), denom_floor});
        const double rel = std::fabs(a - numeric) / denom;
        ++rep.checked;
        if (rel > rep.worst_rel_error) {
            rep.worst_rel_error = rel;
            rep.worst_index = i;
        }
    }
    rep.pass = rep.worst_rel_error < tolerance;
    return rep;
}

} // namespace nnlab
