#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "nnlab/tensor.hpp"

namespace testutil {

inline double rel_err(double a, double n, double floor = 1e-3) {
    return std::fabs(a - n) / std::max({std::fabs(a), std::fabs(n), floor});
}

// Central differences computed directly from a loss functional; independent
// of Graph::backward and of finite_diff_check.
inline std::vector<double> numeric_grad(const std::function<double()>& loss_value,
                                        nnlab::Tensor& leaf, double h = 1e-5) {
    std::vector<double> out(leaf.size());
    auto d = leaf.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double v0 = d[i];
        d[i] = v0 + h;
        const double fp = loss_value();
        d[i] = v0 - h;
        const double fm = loss_value();
        d[i] = v0;
        out[i] = (fp - fm) / (2.0 * h);
    }
    return out;
}

// worst relative error of an analytic gradient against central differences
inline double worst_grad_err(const std::function<double()>& loss_value, nnlab::Tensor& leaf,
                             std::span<const double> analytic, double h = 1e-5) {
    const auto numeric = numeric_grad(loss_value, leaf, h);
    double worst = 0.0;
    for (std::size_t i = 0; i < numeric.size(); ++i)
        worst = std::max(worst, rel_err(analytic[i], numeric[i]));
    return worst;
}

struct TempDir {
    std::string path;
    explicit TempDir(const std::string& name) {
        path = (std::filesystem::temp_directory_path() / name).string();
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const {
        return (std::filesystem::path(path) / name).string();
    }
};

// minimal well-formedness check: tags balance and attributes are quoted
bool xml_well_formed(const std::string& text);

} // namespace testutil
