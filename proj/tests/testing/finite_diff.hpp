#pragma once

// Central-difference gradient oracle for tests. It only reads and perturbs
// leaf values and re-evaluates the loss; it never consults backward().

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "sdt/numcore/rng.hpp"
#include "sdt/numcore/tensor.hpp"

namespace sdt::testing {

inline std::vector<double> numeric_grad(const std::function<double()>& loss, Tensor leaf, double h = 1e-5) {
    auto w = leaf.mutable_data();
    std::vector<double> g(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double orig = w[i];
        w[i] = orig + h;
        const double up = loss();
        w[i] = orig - h;
        const double down = loss();
        w[i] = orig;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

/// ||a - n|| / max(||a||, ||n||, floor), Euclidean norms over the tensor.
inline double relative_error(std::span<const double> analytic, std::span<const double> numeric,
                             double floor = 1e-10) {
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
        na += analytic[i] * analytic[i];
        nn += numeric[i] * numeric[i];
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), floor});
}

/// Builds the graph with `build`, backpropagates, and compares every leaf
/// in `leaves` against central differences. Returns the worst error.
inline double check_gradients(const std::function<Tensor()>& build, std::vector<Tensor> leaves,
                              double h = 1e-5) {
    for (auto& l : leaves) l.zero_grad();
    build().backward();
    double worst = 0.0;
    for (auto& l : leaves) {
        std::vector<double> analytic(l.grad().begin(), l.grad().end());
        auto numeric = numeric_grad([&] { return build().item(); }, l, h);
        worst = std::max(worst, relative_error(analytic, numeric));
    }
    return worst;
}

/// Writable view of a parameter held by const reference.
inline std::span<double> writable(Tensor t) { return t.mutable_data(); }

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool requires_grad = true) {
    std::vector<double> v(numel_of(shape));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

}  // namespace sdt::testing
