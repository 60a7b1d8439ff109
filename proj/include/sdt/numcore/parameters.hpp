#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sdt/numcore/rng.hpp"
#include "sdt/numcore/tensor.hpp"

namespace sdt {

/// Creates and owns the named trainable parameters of a model.
///
/// Each parameter is initialised from an RNG stream split off by a hash of
/// its name, so two models built from the same seed agree on every
/// parameter they share even when one of them omits some components.
class ParameterRegistry {
public:
    explicit ParameterRegistry(std::uint64_t seed) : root_(seed) {}

    /// U(-sqrt(1/fan_in), +sqrt(1/fan_in)).
    Tensor uniform(const std::string& name, Shape shape, std::size_t fan_in);
    Tensor zeros(const std::string& name, Shape shape);
    Tensor ones(const std::string& name, Shape shape);

    const std::vector<Parameter>& params() const { return params_; }
    std::size_t count() const;
    /// Null when absent.
    const Parameter* find(std::string_view name) const;

private:
    Tensor add(const std::string& name, Tensor t);

    Rng root_;
    std::vector<Parameter> params_;
};

std::uint64_t fnv1a(std::string_view text);

}  // namespace sdt
