#include "sdt/encoder.hpp"

#include <cmath>

#include "sdt/errors.hpp"
#include "sdt/numcore/ops.hpp"

namespace sdt {

Tensor ForwardContext::drop(const Tensor& x) const {
    if (!dropout_active()) return x;
    if (!rng) throw UsageError("dropout in training mode needs an RNG");
    return sdt::dropout(x, dropout, true, *rng);
}

std::string pair_label(Modality source, Modality target) {
    return std::string(1, tag_of(source)) + "->" + std::string(1, tag_of(target));
}

TemporalProjection::TemporalProjection(ParameterRegistry& registry, const std::string& prefix, std::size_t d_in,
                                       std::size_t d, std::size_t kernel_size)
    : d_in_(d_in) {
    if (kernel_size % 2 == 0) throw ConfigError("convolution kernel size must be odd");
    kernel_ = registry.uniform(prefix + ".kernel", {kernel_size, d_in, d}, kernel_size * d_in);
    bias_ = registry.zeros(prefix + ".bias", {d});
}

Tensor TemporalProjection::project(const Tensor& features) const {
    if (features.rank() != 2 || features.dim(1) != d_in_) {
        throw DimensionError("projection expects [N x " + std::to_string(d_in_) + "] features, got " +
                             shape_str(features.shape()));
    }
    return conv1d(features, kernel_, bias_);
}

MultiHeadAttention::MultiHeadAttention(ParameterRegistry& registry, const std::string& prefix, std::size_t d,
                                       std::size_t heads)
    : d_(d), heads_(heads) {
    if (heads == 0 || d % heads != 0) {
        throw ConfigError("model dimension " + std::to_string(d) + " is not divisible by " + std::to_string(heads) +
                          " heads");
    }
    wq_ = registry.uniform(prefix + ".Wq", {d, d}, d);
    bq_ = registry.zeros(prefix + ".bq", {d});
    wk_ = registry.uniform(prefix + ".Wk", {d, d}, d);
    bk_ = registry.zeros(prefix + ".bk", {d});
    wv_ = registry.uniform(prefix + ".Wv", {d, d}, d);
    bv_ = registry.zeros(prefix + ".bv", {d});
    wo_ = registry.uniform(prefix + ".Wo", {d, d}, d);
    bo_ = registry.zeros(prefix + ".bo", {d});
}

Tensor MultiHeadAttention::forward(const Tensor& queries, const Tensor& keys_values,
                                   std::span<const std::uint8_t> key_valid, const ForwardContext& ctx,
                                   Tensor* weights_out) const {
    if (queries.rank() != 2 || keys_values.rank() != 2 || queries.dim(1) != d_ || keys_values.dim(1) != d_) {
        throw DimensionError("attention inputs must be [T x " + std::to_string(d_) + "]");
    }
    const std::size_t tq = queries.dim(0), tk = keys_values.dim(0);
    const std::size_t dh = d_ / heads_;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    auto q = linear(queries, wq_, bq_);
    auto k = linear(keys_values, wk_, bk_);
    auto v = linear(keys_values, wv_, bv_);
    std::vector<Tensor> head_out;
    std::vector<double> captured;
    if (weights_out) captured.reserve(heads_ * tq * tk);
    for (std::size_t h = 0; h < heads_; ++h) {
        auto qh = slice_cols(q, h * dh, dh);
        auto kh = slice_cols(k, h * dh, dh);
        auto vh = slice_cols(v, h * dh, dh);
        auto probs = masked_softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt), key_valid);
        if (weights_out) captured.insert(captured.end(), probs.data().begin(), probs.data().end());
        head_out.push_back(matmul(ctx.drop(probs), vh));
    }
    if (weights_out) *weights_out = Tensor::from({heads_, tq, tk}, std::move(captured));
    auto merged = heads_ == 1 ? head_out.front() : concat(head_out, 1);
    return linear(merged, wo_, bo_);
}

EncoderLayer::EncoderLayer(ParameterRegistry& registry, const std::string& prefix, std::size_t d, std::size_t heads,
                           std::size_t d_ff, double ln_eps)
    : attention_(registry, prefix + ".attn", d, heads), ln_eps_(ln_eps) {
    w1_ = registry.uniform(prefix + ".ffn.W1", {d, d_ff}, d);
    b1_ = registry.zeros(prefix + ".ffn.b1", {d_ff});
    w2_ = registry.uniform(prefix + ".ffn.W2", {d_ff, d}, d_ff);
    b2_ = registry.zeros(prefix + ".ffn.b2", {d});
    ln1_g_ = registry.ones(prefix + ".ln1.gamma", {d});
    ln1_b_ = registry.zeros(prefix + ".ln1.beta", {d});
    ln2_g_ = registry.ones(prefix + ".ln2.gamma", {d});
    ln2_b_ = registry.zeros(prefix + ".ln2.beta", {d});
}

Tensor EncoderLayer::forward(const Tensor& queries, const Tensor& keys_values, std::span<const std::uint8_t> key_valid,
                             const ForwardContext& ctx, Tensor* weights_out) const {
    auto attended = attention_.forward(queries, keys_values, key_valid, ctx, weights_out);
    auto x = layer_norm(add(queries, ctx.drop(attended)), ln1_g_, ln1_b_, ln_eps_);
    auto ffn = linear(relu(linear(x, w1_, b1_)), w2_, b2_);
    return layer_norm(add(x, ctx.drop(ffn)), ln2_g_, ln2_b_, ln_eps_);
}

TransformerBlock::TransformerBlock(ParameterRegistry& registry, const std::string& prefix, std::string label,
                                   bool self_attention, std::size_t d, std::size_t heads, std::size_t d_ff,
                                   std::size_t layers, double ln_eps)
    : label_(std::move(label)), self_attention_(self_attention) {
    if (layers == 0) throw ConfigError("transformer needs at least one layer");
    layers_.reserve(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        // Single-layer blocks keep the flat name, e.g. "encoder.t_to_a.attn.Wq".
        const std::string p = layers == 1 ? prefix : prefix + ".layer" + std::to_string(l);
        layers_.emplace_back(registry, p, d, heads, d_ff, ln_eps);
    }
}

Tensor TransformerBlock::encode(const Tensor& queries, const Tensor& keys_values,
                                std::span<const std::uint8_t> key_valid, const ForwardContext& ctx) const {
    Tensor q = queries;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Tensor& kv = self_attention_ ? q : keys_values;
        Tensor weights;
        q = layers_[l].forward(q, kv, key_valid, ctx, ctx.attention ? &weights : nullptr);
        if (ctx.attention) ctx.attention->push_back({label_, l, weights});
    }
    return q;
}

ModalityEncoder::ModalityEncoder(ParameterRegistry& registry, const EncoderOptions& options) : options_(options) {
    if (options_.modalities.empty()) throw ConfigError("at least one modality is required");
    options_.modalities.for_each([&](Modality target) {
        options_.modalities.for_each([&](Modality source) {
            const bool intra = source == target;
            if ((intra && !options_.intra) || (!intra && !options_.inter)) return;
            const std::string prefix =
                std::string("encoder.") + tag_of(source) + "_to_" + std::string(1, tag_of(target));
            blocks_[index_of(source)][index_of(target)].emplace(registry, prefix, pair_label(source, target), intra,
                                                                 options_.d, options_.heads, options_.d_ff,
                                                                 options_.layers, options_.ln_eps);
        });
    });
}

EncodedModality ModalityEncoder::encode_all(const std::array<Tensor, 3>& inputs,
                                            std::span<const std::uint8_t> key_valid,
                                            const ForwardContext& ctx) const {
    EncodedModality out;
    options_.modalities.for_each([&](Modality target) {
        const Tensor& h_target = inputs[index_of(target)];
        if (!h_target.defined()) throw UsageError("missing input for active modality");
        options_.modalities.for_each([&](Modality source) {
            const auto& blk = blocks_[index_of(source)][index_of(target)];
            out.at(source, target) =
                blk ? blk->encode(h_target, inputs[index_of(source)], key_valid, ctx) : h_target;
        });
    });
    return out;
}

const TransformerBlock* ModalityEncoder::block(Modality source, Modality target) const {
    const auto& b = blocks_[index_of(source)][index_of(target)];
    return b ? &*b : nullptr;
}

std::size_t ModalityEncoder::block_count() const {
    std::size_t n = 0;
    for (const auto& row : blocks_)
        for (const auto& b : row) n += b.has_value();
    return n;
}

}  // namespace sdt
