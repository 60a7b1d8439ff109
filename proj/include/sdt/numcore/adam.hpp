#pragma once

#include <cstdint>
#include <vector>

#include "sdt/numcore/tensor.hpp"

namespace sdt {

struct AdamOptions {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    // Classic L2: added to the gradient before the moment updates.
    double weight_decay = 0.0;
};

/// Adam with bias correction over a fixed list of parameters.
class Adam {
public:
    Adam(std::vector<Parameter> params, AdamOptions options);

    /// Applies one update. Throws UsageError if a parameter has no gradient
    /// buffer (call zero_grad() before the forward pass).
    void step();
    /// Zeroes (allocating if needed) every parameter gradient.
    void zero_grad();

    std::uint64_t steps() const { return step_; }
    const AdamOptions& options() const { return options_; }
    void set_lr(double lr) { options_.lr = lr; }
    const std::vector<Parameter>& params() const { return params_; }
    std::span<const double> first_moment(std::size_t i) const { return m_[i]; }
    std::span<const double> second_moment(std::size_t i) const { return v_[i]; }

private:
    std::vector<Parameter> params_;
    AdamOptions options_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::uint64_t step_ = 0;
};

}  // namespace sdt
