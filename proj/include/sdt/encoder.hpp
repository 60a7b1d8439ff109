#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdt/modality.hpp"
#include "sdt/numcore/parameters.hpp"
#include "sdt/numcore/rng.hpp"
#include "sdt/numcore/tensor.hpp"

namespace sdt {

/// Attention probabilities of one block layer, [heads x T_q x T_k], captured
/// before dropout.
struct AttentionRecord {
    std::string block;  // e.g. "a->t"
    std::size_t layer = 0;
    Tensor weights;
};

/// Per-forward-pass state shared by every component.
struct ForwardContext {
    bool training = false;
    double dropout = 0.0;
    Rng* rng = nullptr;
    std::vector<AttentionRecord>* attention = nullptr;

    bool dropout_active() const { return training && dropout > 0.0; }
    Tensor drop(const Tensor& x) const;
};

/// Conv1D(U_m, k_m): [N x d_m] -> [N x d] with same padding.
class TemporalProjection {
public:
    TemporalProjection(ParameterRegistry& registry, const std::string& prefix, std::size_t d_in, std::size_t d,
                       std::size_t kernel_size);
    Tensor project(const Tensor& features) const;

    std::size_t input_dim() const { return d_in_; }
    const Tensor& kernel() const { return kernel_; }
    const Tensor& bias() const { return bias_; }

private:
    std::size_t d_in_;
    Tensor kernel_;
    Tensor bias_;
};

/// Scaled dot-product multi-head attention with input and output projections.
class MultiHeadAttention {
public:
    MultiHeadAttention(ParameterRegistry& registry, const std::string& prefix, std::size_t d, std::size_t heads);

    /// queries[T_q x d] attend over keys/values[T_k x d]. key_valid has T_k
    /// entries; masked keys receive exactly zero weight. When weights_out is
    /// non-null it receives the [heads x T_q x T_k] probabilities.
    Tensor forward(const Tensor& queries, const Tensor& keys_values, std::span<const std::uint8_t> key_valid,
                   const ForwardContext& ctx, Tensor* weights_out = nullptr) const;

    std::size_t heads() const { return heads_; }
    const Tensor& wq() const { return wq_; }
    const Tensor& wk() const { return wk_; }
    const Tensor& wv() const { return wv_; }
    const Tensor& wo() const { return wo_; }
    const Tensor& bq() const { return bq_; }
    const Tensor& bk() const { return bk_; }
    const Tensor& bv() const { return bv_; }
    const Tensor& bo() const { return bo_; }

private:
    std::size_t d_;
    std::size_t heads_;
    Tensor wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_;
};

/// One post-norm encoder layer:
///   x   = LN1(Q + Drop(Attn(Q, KV, KV)))
///   out = LN2(x + Drop(W2 ReLU(W1 x + b1) + b2))
class EncoderLayer {
public:
    EncoderLayer(ParameterRegistry& registry, const std::string& prefix, std::size_t d, std::size_t heads,
                 std::size_t d_ff, double ln_eps);

    Tensor forward(const Tensor& queries, const Tensor& keys_values, std::span<const std::uint8_t> key_valid,
                   const ForwardContext& ctx, Tensor* weights_out = nullptr) const;

    const MultiHeadAttention& attention() const { return attention_; }
    const Tensor& ffn_w1() const { return w1_; }
    const Tensor& ffn_b1() const { return b1_; }
    const Tensor& ffn_w2() const { return w2_; }
    const Tensor& ffn_b2() const { return b2_; }
    const Tensor& ln1_gamma() const { return ln1_g_; }
    const Tensor& ln1_beta() const { return ln1_b_; }
    const Tensor& ln2_gamma() const { return ln2_g_; }
    const Tensor& ln2_beta() const { return ln2_b_; }
    double ln_eps() const { return ln_eps_; }

private:
    MultiHeadAttention attention_;
    Tensor w1_, b1_, w2_, b2_;
    Tensor ln1_g_, ln1_b_, ln2_g_, ln2_b_;
    double ln_eps_;
};

/// Transformer(Q, K, V) for one (source -> target) pair. With several layers,
/// queries are the previous layer's output; keys/values stay the source
/// sequence for cross-modal blocks and follow the queries for intra blocks.
class TransformerBlock {
public:
    TransformerBlock(ParameterRegistry& registry, const std::string& prefix, std::string label, bool self_attention,
                     std::size_t d, std::size_t heads, std::size_t d_ff, std::size_t layers, double ln_eps);

    Tensor encode(const Tensor& queries, const Tensor& keys_values, std::span<const std::uint8_t> key_valid,
                  const ForwardContext& ctx) const;

    const std::string& label() const { return label_; }
    const std::vector<EncoderLayer>& layers() const { return layers_; }

private:
    std::string label_;
    bool self_attention_;
    std::vector<EncoderLayer> layers_;
};

/// H_{n->m} for every source n and target m, indexed [source][target].
struct EncodedModality {
    std::array<std::array<Tensor, 3>, 3> h;

    const Tensor& at(Modality source, Modality target) const { return h[index_of(source)][index_of(target)]; }
    Tensor& at(Modality source, Modality target) { return h[index_of(source)][index_of(target)]; }
};

struct EncoderOptions {
    std::size_t d = 1024;
    std::size_t heads = 8;
    std::size_t d_ff = 1024;
    std::size_t layers = 1;
    double ln_eps = 1e-5;
    ModalitySet modalities = ModalitySet::all();
    bool intra = true;
    bool inter = true;
};

/// The |S|^2 intra-/inter-modal transformers over the active modalities.
/// Disabled pairs pass their target sequence through unchanged.
class ModalityEncoder {
public:
    ModalityEncoder(ParameterRegistry& registry, const EncoderOptions& options);

    /// inputs[m] is H_m [N x d] for active m; entries for inactive
    /// modalities are ignored.
    EncodedModality encode_all(const std::array<Tensor, 3>& inputs, std::span<const std::uint8_t> key_valid,
                               const ForwardContext& ctx) const;

    const TransformerBlock* block(Modality source, Modality target) const;
    std::size_t block_count() const;
    const EncoderOptions& options() const { return options_; }

private:
    EncoderOptions options_;
    std::array<std::array<std::optional<TransformerBlock>, 3>, 3> blocks_;
};

std::string pair_label(Modality source, Modality target);

}  // namespace sdt
