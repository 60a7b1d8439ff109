#include "sdt/numcore/adam.hpp"

#include <cmath>

#include "sdt/errors.hpp"

namespace sdt {

Adam::Adam(std::vector<Parameter> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
    if (options_.lr < 0 || options_.eps <= 0 || options_.weight_decay < 0 || options_.beta1 < 0 ||
        options_.beta1 >= 1 || options_.beta2 < 0 || options_.beta2 >= 1) {
        throw ConfigError("invalid Adam hyperparameters");
    }
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        if (!p.tensor.requires_grad()) throw UsageError("parameter '" + p.name + "' does not require grad");
        m_.emplace_back(p.tensor.numel(), 0.0);
        v_.emplace_back(p.tensor.numel(), 0.0);
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
}

void Adam::step() {
    for (const auto& p : params_) {
        if (!p.tensor.has_grad()) throw UsageError("parameter '" + p.name + "' has no gradient");
    }
    ++step_;
    const double b1 = options_.beta1, b2 = options_.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    const double wd = options_.weight_decay;
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto& t = params_[k].tensor;
        auto w = t.mutable_data();
        auto g = t.grad();
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = g[i] + wd * w[i];
            m[i] = b1 * m[i] + (1.0 - b1) * gi;
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= options_.lr * mhat / (std::sqrt(vhat) + options_.eps);
        }
    }
}

}  // namespace sdt
