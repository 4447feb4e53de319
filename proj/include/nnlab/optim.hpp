#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nnlab/tensor.hpp"

namespace nnlab {

enum class OptimizerKind { SgdMomentum, Adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::SgdMomentum;
    double lr = 0.01;
    double momentum = 0.9;       // sgd
    double beta1 = 0.9;          // adam
    double beta2 = 0.999;        // adam
    double eps = 1e-8;           // adam
    double weight_decay = 0.0;   // lambda; adds lambda*theta to the gradient

    static OptimizerConfig sgd(double lr, double momentum = 0.0, double weight_decay = 0.0);
    static OptimizerConfig adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                                double weight_decay = 0.0, double eps = 1e-8);
};

// Per-parameter state buffers are sized on the first step and must match
// parameter shapes afterwards.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg);

    void step(std::span<Tensor> params, const GradientMap& grads);

    const OptimizerConfig& config() const { return cfg_; }
    long step_count() const { return steps_; }

private:
    OptimizerConfig cfg_;
    std::vector<std::vector<double>> buf1_; // velocity / first moment
    std::vector<std::vector<double>> buf2_; // second moment (adam)
    long steps_ = 0;
    bool initialized_ = false;
};

} // namespace nnlab
