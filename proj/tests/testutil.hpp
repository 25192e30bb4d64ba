#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ecgad/autodiff.hpp"
#include "ecgad/rng.hpp"

namespace testutil {

// Scratch directory under the build tree, wiped on construction.
class TempDir {
public:
    explicit TempDir(const std::string& name) {
        path_ = (std::filesystem::temp_directory_path() / ("ecgad_test_" + name)).string();
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    const std::string& path() const { return path_; }
    std::string sub(const std::string& name) const {
        auto p = std::filesystem::path(path_) / name;
        std::filesystem::create_directories(p);
        return p.string();
    }

private:
    std::string path_;
};

// Central finite-difference gradient check. `loss_fn` must rebuild the graph
// from the leaves' current values on every call. Returns the worst relative
// error over up to `coords_per_leaf` sampled coordinates per leaf.
inline double grad_check(std::vector<ecgad::ad::Tensor> leaves,
                         const std::function<ecgad::ad::Tensor()>& loss_fn,
                         int coords_per_leaf = 20, uint64_t seed = 0, double eps = 5e-5) {
    using ecgad::ad::Tensor;
    for (auto& leaf : leaves) leaf.grad() = ecgad::ad::Array();
    Tensor loss = loss_fn();
    ecgad::ad::backward(loss);

    std::vector<ecgad::ad::Array> analytic;
    for (auto& leaf : leaves) {
        analytic.push_back(leaf.grad().size() > 0 ? leaf.grad()
                                                  : ecgad::ad::Array::Zero(leaf.numel()));
    }

    double worst = 0.0;
    ecgad::Rng rng(seed * 977 + 13);
    for (size_t li = 0; li < leaves.size(); ++li) {
        auto& leaf = leaves[li];
        const int n = leaf.numel();
        const int n_checks = std::min(coords_per_leaf, n);
        for (int c = 0; c < n_checks; ++c) {
            const int idx = n_checks == n ? c : rng.uniform_int(0, n - 1);
            const double saved = leaf.value()[idx];
            leaf.value()[idx] = saved + eps;
            const double up = loss_fn().item();
            leaf.value()[idx] = saved - eps;
            const double down = loss_fn().item();
            leaf.value()[idx] = saved;
            const double fd = (up - down) / (2.0 * eps);
            const double an = analytic[li][idx];
            const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-3});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

// Goertzel single-bin DFT magnitude at frequency f (Hz).
inline double goertzel(const Eigen::VectorXd& x, double f, double fs) {
    const int n = static_cast<int>(x.size());
    const double w = 2.0 * 3.14159265358979323846 * f / fs;
    const double coeff = 2.0 * std::cos(w);
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        s0 = x[i] + coeff * s1 - s2;
        s2 = s1;
        s1 = s0;
    }
    const double re = s1 - s2 * std::cos(w);
    const double im = s2 * std::sin(w);
    return std::sqrt(re * re + im * im) * 2.0 / n;
}

}  // namespace testutil
