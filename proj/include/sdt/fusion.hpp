#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sdt/encoder.hpp"
#include "sdt/modality.hpp"
#include "sdt/numcore/parameters.hpp"
#include "sdt/numcore/tensor.hpp"

namespace sdt {

enum class FusionKind { Gated, Add, Concat };

FusionKind parse_fusion_kind(std::string_view s);
std::string_view fusion_kind_name(FusionKind kind);

/// Unimodal-level fusion for one target modality m:
///   g_{n->m}  = sigmoid(H_{n->m} W_{n->m})
///   H'_m      = [H_{m->m} * g_{m->m}; H_{n1->m} * g_{n1->m}; ...] W_m + b_m
/// Sources are ordered m first, then the remaining active modalities in
/// t, a, v order. A source without a gate weight enters ungated.
class UnimodalGate {
public:
    UnimodalGate(ParameterRegistry& registry, Modality target, std::vector<Modality> sources,
                 std::vector<bool> gated, std::size_t d);

    Tensor fuse(const EncodedModality& encoded) const;

    Modality target() const { return target_; }
    const std::vector<Modality>& sources() const { return sources_; }
    /// Undefined when the source enters ungated.
    const Tensor& gate_weight(std::size_t source_slot) const { return gates_[source_slot]; }
    const Tensor& weight() const { return weight_; }
    const Tensor& bias() const { return bias_; }

private:
    Modality target_;
    std::vector<Modality> sources_;
    std::vector<Tensor> gates_;
    Tensor weight_;
    Tensor bias_;
};

/// Multimodal-level fusion: per utterance i and feature k,
///   [g_t; g_a; g_v][k] = softmax over modalities of (h'_{mi} W)[k]
///   h'_i = sum_m h'_{mi} * g_{mi}
/// W is shared by all modalities.
class MultimodalGate {
public:
    MultimodalGate(ParameterRegistry& registry, std::size_t d);

    struct Result {
        Tensor fused;
        std::vector<Tensor> gates;  // one [N x d] per input, same order
    };
    Result fuse(std::span<const Tensor> enhanced) const;

    const Tensor& weight() const { return weight_; }

private:
    Tensor weight_;
};

struct FusionOptions {
    std::size_t d = 1024;
    ModalitySet modalities = ModalitySet::all();
    FusionKind kind = FusionKind::Gated;
    // Pass-through pairs from an ablated encoder enter ungated when false.
    bool gate_intra = true;
    bool gate_inter = true;
};

struct FusionOutput {
    std::array<Tensor, 3> enhanced;  // H'_m, defined for active modalities
    Tensor fused;                    // H'
    std::array<Tensor, 3> gates;     // multimodal g_m, gated fusion only
};

/// Both fusion levels, or the Add / Concat baselines in their place.
class HierarchicalFusion {
public:
    HierarchicalFusion(ParameterRegistry& registry, const FusionOptions& options);

    FusionOutput forward(const EncodedModality& encoded) const;

    const FusionOptions& options() const { return options_; }
    const UnimodalGate* unimodal(Modality m) const;
    const MultimodalGate* multimodal() const { return multimodal_ ? &*multimodal_ : nullptr; }

private:
    FusionOptions options_;
    std::array<std::optional<UnimodalGate>, 3> unimodal_;
    std::optional<MultimodalGate> multimodal_;
    // Concat baseline parameters.
    std::array<Tensor, 3> concat_w_, concat_b_;
    Tensor concat_fused_w_, concat_fused_b_;
};

/// Mean-over-features multimodal weight of each modality per utterance.
struct ModalityWeights {
    std::size_t utterance = 0;
    std::array<double, 3> weight{};  // t, a, v; zero for inactive modalities
};

/// One row per utterance among the first `rows` rows; empty for non-gated fusion.
std::vector<ModalityWeights> export_gates(const FusionOutput& output, std::size_t rows);

}  // namespace sdt
