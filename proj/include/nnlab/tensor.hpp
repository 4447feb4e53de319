#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace nnlab {

using Shape = std::vector<int>;

std::size_t numel(const Shape& s);
std::string shape_str(const Shape& s); // "[2, 3]"

namespace detail {
struct TensorData {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
};
} // namespace detail

// Value-semantic handle to a dense 64-bit tensor. Copies share storage;
// clone() makes a deep copy.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape s, bool requires_grad = false);
    static Tensor full(Shape s, double v, bool requires_grad = false);
    static Tensor from_data(Shape s, std::vector<double> d, bool requires_grad = false);
    static Tensor scalar(double v);

    bool defined() const { return static_cast<bool>(p_); }
    const Shape& shape() const;
    int rank() const;
    std::size_t size() const;
    std::span<double> data();
    std::span<const double> data() const;
    double item() const; // scalar tensors only

    bool requires_grad() const;
    void set_requires_grad(bool on);

    Tensor clone() const;

    const detail::TensorData* id() const { return p_.get(); }
    bool same_storage(const Tensor& o) const { return p_ == o.p_; }

private:
    explicit Tensor(std::shared_ptr<detail::TensorData> p) : p_(std::move(p)) {}
    std::shared_ptr<detail::TensorData> p_;
    friend class Graph;
};

// Gradients of a backward pass, keyed by tensor identity. Leaves that the
// loss never touched map to zeros.
class GradientMap {
public:
    bool contains(const Tensor& t) const;
    std::span<const double> at(const Tensor& t) const;
    Tensor grad_tensor(const Tensor& t) const;
    std::size_t size() const { return grads_.size(); }

private:
    friend class Graph;
    std::unordered_map<const detail::TensorData*, std::vector<double>> grads_;
};

// Records primitive applications on a tape (topological by construction)
// and replays it in reverse for gradients. One graph per forward pass;
// a graph and its tensors belong to a single thread at a time.
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // Registers a tensor as a leaf even if no op consumes it.
    Tensor leaf(const Tensor& t);

    Tensor matmul(const Tensor& a, const Tensor& b);     // [n,k] x [k,m]
    Tensor bias_add(const Tensor& x, const Tensor& b);   // [n,f]+[f] or [n,c,h,w]+[c]
    Tensor add(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);
    Tensor scale(const Tensor& x, double c);
    Tensor relu(const Tensor& x);
    Tensor tanh(const Tensor& x);
    Tensor sigmoid(const Tensor& x);
    Tensor conv2d(const Tensor& x, const Tensor& w, int stride = 1, int pad = 0);
    Tensor tconv2d(const Tensor& x, const Tensor& w, int stride = 1, int pad = 0);
    Tensor reshape(const Tensor& x, Shape s);
    Tensor flatten(const Tensor& x); // [n, ...] -> [n, prod]
    Tensor softmax(const Tensor& x);      // over last dim
    Tensor log_softmax(const Tensor& x);  // over last dim
    // per-sample losses, shape [n]
    Tensor cross_entropy_with_logits(const Tensor& logits, const std::vector<int>& labels);
    Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& targets);
    Tensor mean(const Tensor& x); // scalar
    Tensor sum(const Tensor& x);  // scalar
    Tensor abs(const Tensor& x);

    GradientMap backward(const Tensor& loss);

    std::size_t node_count() const { return nodes_.size(); }

    // Sign classes (neg/zero/pos) of every relu/abs input, in node order.
    // Used by finite_diff_check to detect kink crossings.
    void set_record_kink_signs(bool on) { record_kinks_ = on; }
    const std::vector<std::uint8_t>& kink_signs() const { return kink_signs_; }

private:
    struct Node {
        Tensor out;
        std::function<void(Graph&, std::span<const double>)> back;
    };

    Tensor make_out(Shape s, std::vector<double> d, bool requires_grad);
    void note_inputs(std::initializer_list<const Tensor*> ins);
    void push(Tensor out, std::function<void(Graph&, std::span<const double>)> back);
    bool wants_grad(const Tensor& t) const;
    std::vector<double>& adj(const Tensor& t);
    void record_signs(const Tensor& x);

    std::vector<Node> nodes_;
    std::unordered_set<const detail::TensorData*> produced_;
    std::vector<Tensor> leaves_;
    std::unordered_set<const detail::TensorData*> leaf_set_;
    std::unordered_map<const detail::TensorData*, std::vector<double>> adj_;
    bool record_kinks_ = false;
    std::vector<std::uint8_t> kink_signs_;
};

struct FiniteDiffReport {
    bool pass = false;
    double worst_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t excluded = 0; // coordinates skipped because a kink was crossed
    std::size_t worst_index = 0;
};

// Compares backward() against central differences, coordinate by
// coordinate. Relative error uses max(|analytic|, |numeric|, floor) as
// denominator so near-zero gradients are judged on an absolute scale.
FiniteDiffReport finite_diff_check(
    const std::function<Tensor(Graph&, const Tensor&)>& build_loss,
    const Tensor& point, double step = 1e-5, double tolerance = 1e-6,
    double denom_floor = 1e-3);

} // namespace nnlab
