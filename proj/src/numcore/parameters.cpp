#include "sdt/numcore/parameters.hpp"

#include <cmath>

#include "sdt/errors.hpp"

namespace sdt {

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

Tensor ParameterRegistry::add(const std::string& name, Tensor t) {
    if (find(name)) throw UsageError("duplicate parameter name '" + name + "'");
    params_.push_back({name, t});
    return t;
}

Tensor ParameterRegistry::uniform(const std::string& name, Shape shape, std::size_t fan_in) {
    if (fan_in == 0) throw ConfigError("fan_in must be positive for '" + name + "'");
    Rng rng = root_.split(fnv1a(name));
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    std::vector<double> values(numel_of(shape));
    for (auto& v : values) v = rng.uniform(-bound, bound);
    return add(name, Tensor::from(std::move(shape), std::move(values), true));
}

Tensor ParameterRegistry::zeros(const std::string& name, Shape shape) {
    return add(name, Tensor::zeros(std::move(shape), true));
}

Tensor ParameterRegistry::ones(const std::string& name, Shape shape) {
    return add(name, Tensor::full(std::move(shape), 1.0, true));
}

std::size_t ParameterRegistry::count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.tensor.numel();
    return n;
}

const Parameter* ParameterRegistry::find(std::string_view name) const {
    for (const auto& p : params_)
        if (p.name == name) return &p;
    return nullptr;
}

}  // namespace sdt
