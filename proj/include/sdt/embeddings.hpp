#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "sdt/numcore/parameters.hpp"
#include "sdt/numcore/tensor.hpp"

namespace sdt {

/// Sinusoidal table: row pos, column 2i holds sin(pos / 10000^(2i/d)),
/// column 2i+1 holds cos of the same angle.
class PositionalTable {
public:
    PositionalTable(std::size_t max_len, std::size_t dim);

    /// First n rows. Throws CapacityError if n > max_len().
    Tensor rows(std::size_t n) const;
    /// Rebuilds the table to hold at least n rows (doubling).
    void ensure_capacity(std::size_t n);

    std::size_t max_len() const { return max_len_; }
    std::size_t dim() const { return dim_; }
    const Tensor& table() const { return table_; }

private:
    void build();

    std::size_t max_len_;
    std::size_t dim_;
    Tensor table_;
};

/// Direct construction of an [n x d] positional block.
Tensor positional_embed(std::size_t n, std::size_t d);

/// Trainable V_s in R^{d x (M+1)}; column M is the UNK speaker.
class SpeakerTable {
public:
    SpeakerTable(ParameterRegistry& registry, const std::string& name, std::size_t num_speakers, std::size_t dim);

    /// Row i = column min(ids[i], M) of V_s.
    Tensor embed(std::span<const std::int64_t> ids) const;

    std::size_t num_speakers() const { return num_speakers_; }
    std::size_t unk_index() const { return num_speakers_; }
    const Tensor& matrix() const { return matrix_; }

private:
    std::size_t num_speakers_;
    Tensor matrix_;
};

/// H_m = U'_m + PE + SE. Undefined pe/se tensors are treated as absent terms.
Tensor augment(const Tensor& projected, const Tensor& pe, const Tensor& se);

}  // namespace sdt
