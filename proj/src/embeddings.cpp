#include "sdt/embeddings.hpp"

#include <cmath>
#include <vector>

#include "sdt/errors.hpp"
#include "sdt/numcore/ops.hpp"

namespace sdt {

namespace {

void fill_positional(std::vector<double>& out, std::size_t n, std::size_t d) {
    out.resize(n * d);
    for (std::size_t pos = 0; pos < n; ++pos) {
        for (std::size_t i = 0; 2 * i < d; ++i) {
            const double angle =
                static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d));
            out[pos * d + 2 * i] = std::sin(angle);
            if (2 * i + 1 < d) out[pos * d + 2 * i + 1] = std::cos(angle);
        }
    }
}

}  // namespace

Tensor positional_embed(std::size_t n, std::size_t d) {
    if (d == 0 || d % 2 != 0) throw ConfigError("positional embedding dimension must be even, got " + std::to_string(d));
    std::vector<double> v;
    fill_positional(v, n, d);
    return Tensor::from({n, d}, std::move(v));
}

PositionalTable::PositionalTable(std::size_t max_len, std::size_t dim) : max_len_(max_len), dim_(dim) {
    if (dim_ == 0 || dim_ % 2 != 0) throw ConfigError("positional embedding dimension must be even");
    build();
}

void PositionalTable::build() { table_ = positional_embed(max_len_, dim_); }

Tensor PositionalTable::rows(std::size_t n) const {
    if (n > max_len_) {
        throw CapacityError("positional table holds " + std::to_string(max_len_) + " rows, " + std::to_string(n) +
                            " requested");
    }
    auto all = table_.data();
    return Tensor::from({n, dim_}, std::vector<double>(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n * dim_)));
}

void PositionalTable::ensure_capacity(std::size_t n) {
    if (n <= max_len_) return;
    while (max_len_ < n) max_len_ = std::max<std::size_t>(1, max_len_ * 2);
    build();
}

SpeakerTable::SpeakerTable(ParameterRegistry& registry, const std::string& name, std::size_t num_speakers,
                           std::size_t dim)
    : num_speakers_(num_speakers),
      matrix_(registry.uniform(name, {dim, num_speakers + 1}, num_speakers + 1)) {}

Tensor SpeakerTable::embed(std::span<const std::int64_t> ids) const {
    std::vector<std::size_t> cols(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0) throw DimensionError("speaker id must be non-negative");
        cols[i] = static_cast<std::size_t>(ids[i]) >= num_speakers_ ? num_speakers_ : static_cast<std::size_t>(ids[i]);
    }
    return gather_columns(matrix_, cols);
}

Tensor augment(const Tensor& projected, const Tensor& pe, const Tensor& se) {
    Tensor h = projected;
    if (pe.defined()) h = add(h, pe);
    if (se.defined()) h = add(h, se);
    return h;
}

}  // namespace sdt
