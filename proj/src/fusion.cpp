#include "sdt/fusion.hpp"

#include "sdt/errors.hpp"
#include "sdt/numcore/ops.hpp"

namespace sdt {

FusionKind parse_fusion_kind(std::string_view s) {
    if (s == "gated") return FusionKind::Gated;
    if (s == "add") return FusionKind::Add;
    if (s == "concat") return FusionKind::Concat;
    throw ConfigError("unknown fusion kind '" + std::string(s) + "' (expected gated, add or concat)");
}

std::string_view fusion_kind_name(FusionKind kind) {
    switch (kind) {
        case FusionKind::Gated: return "gated";
        case FusionKind::Add: return "add";
        case FusionKind::Concat: return "concat";
    }
    return "?";
}

namespace {

std::vector<Modality> sources_for(Modality target, ModalitySet active) {
    std::vector<Modality> out{target};
    active.for_each([&](Modality m) {
        if (m != target) out.push_back(m);
    });
    return out;
}

}  // namespace

UnimodalGate::UnimodalGate(ParameterRegistry& registry, Modality target, std::vector<Modality> sources,
                           std::vector<bool> gated, std::size_t d)
    : target_(target), sources_(std::move(sources)) {
    if (sources_.empty() || sources_.front() != target_ || gated.size() != sources_.size()) {
        throw ConfigError("unimodal gate sources must start with the target modality");
    }
    for (std::size_t s = 0; s < sources_.size(); ++s) {
        gates_.push_back(gated[s] ? registry.uniform(std::string("fusion.gate.") + tag_of(sources_[s]) + "_to_" +
                                                         tag_of(target_) + ".W",
                                                     {d, d}, d)
                                  : Tensor());
    }
    const std::size_t in = sources_.size() * d;
    const std::string prefix = std::string("fusion.unimodal.") + tag_of(target_);
    weight_ = registry.uniform(prefix + ".W", {in, d}, in);
    bias_ = registry.zeros(prefix + ".b", {d});
}

Tensor UnimodalGate::fuse(const EncodedModality& encoded) const {
    std::vector<Tensor> parts;
    parts.reserve(sources_.size());
    for (std::size_t s = 0; s < sources_.size(); ++s) {
        const Tensor& h = encoded.at(sources_[s], target_);
        if (!h.defined()) throw UsageError("encoded representation missing for " + pair_label(sources_[s], target_));
        parts.push_back(gates_[s].defined() ? mul(h, sigmoid(matmul(h, gates_[s]))) : h);
    }
    auto joined = parts.size() == 1 ? parts.front() : concat(parts, 1);
    return linear(joined, weight_, bias_);
}

MultimodalGate::MultimodalGate(ParameterRegistry& registry, std::size_t d)
    : weight_(registry.uniform("fusion.multimodal.W", {d, d}, d)) {}

MultimodalGate::Result MultimodalGate::fuse(std::span<const Tensor> enhanced) const {
    if (enhanced.empty()) throw UsageError("multimodal fusion needs at least one modality");
    std::vector<Tensor> logits;
    for (const auto& h : enhanced) logits.push_back(matmul(h, weight_));
    // [M x N x d], softmax across the modality axis for every (i, k).
    auto gates = softmax(stack(logits), 0);
    Result r;
    for (std::size_t m = 0; m < enhanced.size(); ++m) {
        r.gates.push_back(select(gates, m));
        auto term = mul(enhanced[m], r.gates.back());
        r.fused = r.fused.defined() ? add(r.fused, term) : term;
    }
    return r;
}

HierarchicalFusion::HierarchicalFusion(ParameterRegistry& registry, const FusionOptions& options) : options_(options) {
    const std::size_t d = options_.d;
    const std::size_t count = options_.modalities.size();
    switch (options_.kind) {
        case FusionKind::Gated:
            options_.modalities.for_each([&](Modality m) {
                auto sources = sources_for(m, options_.modalities);
                std::vector<bool> gated;
                for (Modality s : sources) gated.push_back(s == m ? options_.gate_intra : options_.gate_inter);
                unimodal_[index_of(m)].emplace(registry, m, std::move(sources), std::move(gated), d);
            });
            multimodal_.emplace(registry, d);
            break;
        case FusionKind::Concat:
            options_.modalities.for_each([&](Modality m) {
                const std::string prefix = std::string("fusion.concat.") + tag_of(m);
                concat_w_[index_of(m)] = registry.uniform(prefix + ".W", {count * d, d}, count * d);
                concat_b_[index_of(m)] = registry.zeros(prefix + ".b", {d});
            });
            concat_fused_w_ = registry.uniform("fusion.concat.fused.W", {count * d, d}, count * d);
            concat_fused_b_ = registry.zeros("fusion.concat.fused.b", {d});
            break;
        case FusionKind::Add:
            break;
    }
}

const UnimodalGate* HierarchicalFusion::unimodal(Modality m) const {
    const auto& g = unimodal_[index_of(m)];
    return g ? &*g : nullptr;
}

FusionOutput HierarchicalFusion::forward(const EncodedModality& encoded) const {
    FusionOutput out;
    std::vector<Tensor> enhanced;
    options_.modalities.for_each([&](Modality m) {
        Tensor h;
        switch (options_.kind) {
            case FusionKind::Gated:
                h = unimodal_[index_of(m)]->fuse(encoded);
                break;
            case FusionKind::Add:
                for (Modality s : sources_for(m, options_.modalities)) {
                    h = h.defined() ? add(h, encoded.at(s, m)) : encoded.at(s, m);
                }
                break;
            case FusionKind::Concat: {
                std::vector<Tensor> parts;
                for (Modality s : sources_for(m, options_.modalities)) parts.push_back(encoded.at(s, m));
                h = linear(parts.size() == 1 ? parts.front() : concat(parts, 1), concat_w_[index_of(m)],
                           concat_b_[index_of(m)]);
                break;
            }
        }
        out.enhanced[index_of(m)] = h;
        enhanced.push_back(h);
    });

    switch (options_.kind) {
        case FusionKind::Gated: {
            auto r = multimodal_->fuse(enhanced);
            out.fused = r.fused;
            std::size_t slot = 0;
            options_.modalities.for_each([&](Modality m) { out.gates[index_of(m)] = r.gates[slot++]; });
            break;
        }
        case FusionKind::Add:
            for (const auto& h : enhanced) out.fused = out.fused.defined() ? add(out.fused, h) : h;
            break;
        case FusionKind::Concat:
            out.fused = linear(enhanced.size() == 1 ? enhanced.front() : concat(enhanced, 1), concat_fused_w_,
                               concat_fused_b_);
            break;
    }
    return out;
}

std::vector<ModalityWeights> export_gates(const FusionOutput& output, std::size_t rows) {
    std::vector<ModalityWeights> out;
    bool any = false;
    for (const auto& g : output.gates) any = any || g.defined();
    if (!any) return out;
    for (std::size_t i = 0; i < rows; ++i) {
        ModalityWeights w;
        w.utterance = i;
        for (Modality m : kModalities) {
            const Tensor& g = output.gates[index_of(m)];
            if (!g.defined()) continue;
            if (i >= g.dim(0)) throw DimensionError("export_gates: row out of range");
            const std::size_t d = g.dim(1);
            double acc = 0.0;
            for (std::size_t k = 0; k < d; ++k) acc += g.at(i, k);
            w.weight[index_of(m)] = acc / static_cast<double>(d);
        }
        out.push_back(w);
    }
    return out;
}

}  // namespace sdt
