#include <cmath>
#include <vector>

#include "doctest.h"
#include "nnlab/optim.hpp"
#include "nnlab/tensor.hpp"

using namespace nnlab;

namespace {

// one-parameter step driving the optimizer through a real backward pass
GradientMap grad_of(Graph& g, Tensor& theta, double target_grad) {
    // loss = target_grad * theta  ->  dloss/dtheta = target_grad
    Tensor loss = g.sum(g.scale(theta, target_grad));
    return g.backward(loss);
}

} // namespace

TEST_CASE("sgd without momentum: theta 1, g 2, lr 0.1 -> 0.8") {
    Tensor theta = Tensor::from_data({1}, {1.0}, true);
    Optimizer opt(OptimizerConfig::sgd(0.1, 0.0, 0.0));
    Graph g;
    GradientMap gm = grad_of(g, theta, 2.0);
    std::vector<Tensor> params = {theta};
    opt.step(params, gm);
    CHECK(theta.item() == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("sgd momentum: two unit gradients give 0.9 then 0.71") {
    Tensor theta = Tensor::from_data({1}, {1.0}, true);
    Optimizer opt(OptimizerConfig::sgd(0.1, 0.9, 0.0));
    std::vector<Tensor> params = {theta};
    for (int step = 0; step < 2; ++step) {
        Graph g;
        GradientMap gm = grad_of(g, theta, 1.0);
        opt.step(params, gm);
        if (step == 0) CHECK(theta.item() == doctest::Approx(0.9).epsilon(1e-15));
    }
    // v2 = 0.9*1 + 1 = 1.9; theta = 0.9 - 0.19
    CHECK(theta.item() == doctest::Approx(0.71).epsilon(1e-15));
}

TEST_CASE("weight decay alone: theta 1 -> 0.999999 at lambda 1e-4, lr 0.01") {
    Tensor theta = Tensor::from_data({1}, {1.0}, true);
    Optimizer opt(OptimizerConfig::sgd(0.01, 0.0, 1e-4));
    Graph g;
    GradientMap gm = grad_of(g, theta, 0.0);
    std::vector<Tensor> params = {theta};
    opt.step(params, gm);
    CHECK(theta.item() == doctest::Approx(1.0 - 0.01 * 1e-4).epsilon(1e-15));
}

TEST_CASE("weight decay contributes nothing when lambda is zero") {
    Tensor theta = Tensor::from_data({2}, {0.5, -0.25}, true);
    Optimizer opt(OptimizerConfig::sgd(0.1, 0.0, 0.0));
    Graph g;
    GradientMap gm = grad_of(g, theta, 0.0);
    std::vector<Tensor> params = {theta};
    opt.step(params, gm);
    CHECK(theta.data()[0] == 0.5);
    CHECK(theta.data()[1] == -0.25);
}

TEST_CASE("decay with zero data gradient shrinks parameters monotonically") {
    Tensor theta = Tensor::from_data({3}, {1.0, -2.0, 0.5}, true);
    Optimizer opt(OptimizerConfig::sgd(0.05, 0.9, 1e-2));
    std::vector<Tensor> params = {theta};
    double prev_norm = std::sqrt(1.0 + 4.0 + 0.25);
    for (int step = 0; step < 50; ++step) {
        Graph g;
        GradientMap gm = grad_of(g, theta, 0.0);
        opt.step(params, gm);
        double norm = 0.0;
        for (double v : theta.data()) norm += v * v;
        norm = std::sqrt(norm);
        CHECK(norm < prev_norm);
        prev_norm = norm;
    }
}

TEST_CASE("adam: first step moves by ~lr against the gradient sign") {
    Tensor theta = Tensor::from_data({1}, {1.0}, true);
    Optimizer opt(OptimizerConfig::adam(0.1));
    Graph g;
    GradientMap gm = grad_of(g, theta, 3.0);
    std::vector<Tensor> params = {theta};
    opt.step(params, gm);
    // bias correction makes mhat/sqrt(vhat) = g/|g| on the first step
    CHECK(theta.item() == doctest::Approx(1.0 - 0.1).epsilon(1e-6));
}

TEST_CASE("adam: hand-iterated two steps on a constant gradient") {
    // g=1 both steps, lr=0.5, b1=0.5, b2=0.5, eps=0
    // step1: m=0.5, v=0.5, mhat=1, vhat=1        -> theta 1 - 0.5 = 0.5
    // step2: m=0.75, v=0.75, mhat=1, vhat=1      -> theta 0
    Tensor theta = Tensor::from_data({1}, {1.0}, true);
    Optimizer opt(OptimizerConfig::adam(0.5, 0.5, 0.5, 0.0, 0.0));
    std::vector<Tensor> params = {theta};
    for (int step = 0; step < 2; ++step) {
        Graph g;
        GradientMap gm = grad_of(g, theta, 1.0);
        opt.step(params, gm);
        if (step == 0) CHECK(theta.item() == doctest::Approx(0.5).epsilon(1e-12));
    }
    CHECK(theta.item() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("optimizer rejects gradient/parameter mismatches") {
    Tensor theta = Tensor::from_data({2}, {1.0, 1.0}, true);
    Tensor other = Tensor::from_data({3}, {1.0, 1.0, 1.0}, true);
    Optimizer opt(OptimizerConfig::sgd(0.1));
    Graph g;
    Tensor loss = g.sum(other);
    GradientMap gm = g.backward(loss);
    std::vector<Tensor> params = {theta};
    CHECK_THROWS(opt.step(params, gm)); // theta has no gradient in the map
}

TEST_CASE("optimizer rejects invalid hyperparameters") {
    CHECK_THROWS_AS(Optimizer(OptimizerConfig::sgd(0.0)), std::invalid_argument);
    CHECK_THROWS_AS(Optimizer(OptimizerConfig::sgd(0.1, 0.9, -1.0)), std::invalid_argument);
}
