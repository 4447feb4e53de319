#include "nnlab/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace nnlab {

OptimizerConfig OptimizerConfig::sgd(double lr, double momentum, double weight_decay) {
    OptimizerConfig c;
    c.kind = OptimizerKind::SgdMomentum;
    c.lr = lr;
    c.momentum = momentum;
    c.weight_decay = weight_decay;
    return c;
}

OptimizerConfig OptimizerConfig::adam(double lr, double beta1, double beta2,
                                      double weight_decay, double eps) {
    OptimizerConfig c;
    c.kind = OptimizerKind::Adam;
    c.lr = lr;
    c.beta1 = beta1;
    c.beta2 = beta2;
    c.eps = eps;
    c.weight_decay = weight_decay;
    return c;
}

Optimizer::Optimizer(OptimizerConfig cfg) : cfg_(cfg) {
    if (cfg_.lr <= 0.0) throw std::invalid_argument("Optimizer: lr must be positive");
    if (cfg_.weight_decay < 0.0) throw std::invalid_argument("Optimizer: weight decay must be >= 0");
}

void Optimizer::step(std::span<Tensor> params, const GradientMap& grads) {
    if (!initialized_) {
        buf1_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i)
            buf1_[i].assign(params[i].size(), 0.0);
        if (cfg_.kind == OptimizerKind::Adam) {
            buf2_.resize(params.size());
            for (std::size_t i = 0; i < params.size(); ++i)
                buf2_[i].assign(params[i].size(), 0.0);
        }
        initialized_ = true;
    }
    if (buf1_.size() != params.size())
        throw std::invalid_argument("optimizer_step: parameter count changed from " +
                                    std::to_string(buf1_.size()) + " to " +
                                    std::to_string(params.size()));
    ++steps_;
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i];
        if (buf1_[i].size() != p.size())
            throw std::invalid_argument("optimizer_step: state/parameter shape mismatch at index " +
                                        std::to_string(i));
        std::span<const double> g = grads.at(p);
        if (g.size() != p.size())
            throw std::invalid_argument("optimizer_step: gradient/parameter shape mismatch at index " +
                                        std::to_string(i) + " (" + std::to_string(g.size()) +
                                        " vs " + std::to_string(p.size()) + ")");
        auto pd = p.data();
        if (cfg_.kind == OptimizerKind::SgdMomentum) {
            auto& v = buf1_[i];
            for (std::size_t j = 0; j < pd.size(); ++j) {
                const double ge = g[j] + cfg_.weight_decay * pd[j];
                v[j] = cfg_.momentum * v[j] + ge;
                pd[j] -= cfg_.lr * v[j];
            }
        } else {
            auto& m = buf1_[i];
            auto& v = buf2_[i];
            const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
            const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
            for (std::size_t j = 0; j < pd.size(); ++j) {
                const double ge = g[j] + cfg_.weight_decay * pd[j];
                m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * ge;
                v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * ge * ge;
                const double mhat = m[j] / bc1;
                const double vhat = v[j] / bc2;
                pd[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }
}

} // namespace nnlab
