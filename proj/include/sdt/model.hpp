#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdt/embeddings.hpp"
#include "sdt/encoder.hpp"
#include "sdt/fusion.hpp"
#include "sdt/heads_losses.hpp"
#include "sdt/modality.hpp"
#include "sdt/numcore/parameters.hpp"

namespace sdt {

/// Every architectural and objective hyperparameter.
struct ModelConfig {
    std::array<std::size_t, 3> feature_dims{1024, 1582, 342};  // d_t, d_a, d_v
    std::size_t d_model = 1024;
    std::size_t heads = 8;
    std::size_t d_ff = 1024;
    std::size_t layers = 1;
    std::array<std::size_t, 3> kernel_sizes{1, 1, 1};
    double dropout = 0.5;
    double tau = 1.0;
    std::array<double, 3> gammas{1.0, 1.0, 1.0};
    std::size_t num_classes = 6;
    std::size_t num_speakers = 2;
    std::size_t max_len = 256;
    double ln_eps = 1e-5;

    bool positional = true;
    bool speaker = true;
    bool intra = true;
    bool inter = true;
    ModalitySet modalities = ModalitySet::all();
    FusionKind fusion = FusionKind::Gated;
    bool kl_backprop_teacher = false;

    std::size_t feature_dim(Modality m) const { return feature_dims[index_of(m)]; }
    /// Throws ConfigError on inconsistent settings.
    void validate() const;
};

/// One (possibly padded) conversation ready for the model.
struct ConversationInput {
    std::array<Tensor, 3> features;       // [N x d_m]; inactive modalities may be undefined
    std::vector<std::int64_t> speakers;   // N
    std::vector<std::uint8_t> valid;      // N; 0 marks padding

    std::size_t length() const { return speakers.size(); }
    std::size_t real_length() const;
};

struct ForwardOptions {
    bool training = false;
    // Run the student heads even outside training (diagnostics, gradcheck).
    bool students = false;
    bool capture_attention = false;
};

struct ModelOutput {
    std::array<Tensor, 3> embedded;  // H_m
    EncodedModality encoded;
    FusionOutput fusion;
    TeacherOutput teacher;
    std::array<std::optional<StudentOutput>, 3> students;
    std::vector<AttentionRecord> attention;
};

/// Differentiable objective plus its scalar breakdown.
struct LossTerms {
    Tensor total;
    LossReport report;
    KlDiagnostics kl_diagnostics;
};

class SdtModel {
public:
    SdtModel(const ModelConfig& config, std::uint64_t seed);

    SdtModel(const SdtModel&) = delete;
    SdtModel& operator=(const SdtModel&) = delete;
    SdtModel(SdtModel&&) = default;
    SdtModel& operator=(SdtModel&&) = default;

    /// dropout_rng is required when options.training and dropout > 0.
    ModelOutput forward(const ConversationInput& input, const ForwardOptions& options, Rng* dropout_rng = nullptr);

    /// Objective over labelled rows (label < 0 = padding). Each mean is
    /// divided by `normalizer`, which defaults to the number of labelled rows;
    /// batch training passes the batch-wide utterance count so per-conversation
    /// terms sum to the batch mean. `teacher_soft_override`, when given,
    /// replaces the softened teacher distribution (constant targets).
    LossTerms losses(const ModelOutput& output, std::span<const int> labels, std::optional<double> normalizer = {},
                     const Tensor* teacher_soft_override = nullptr) const;

    const ModelConfig& config() const { return config_; }
    const std::vector<Parameter>& parameters() const { return registry_.params(); }
    std::size_t parameter_count() const { return registry_.count(); }
    const Parameter* find_parameter(std::string_view name) const { return registry_.find(name); }

    const ModalityEncoder& encoder() const { return encoder_; }
    const HierarchicalFusion& fusion() const { return fusion_; }
    const ClassifierHead& teacher_head() const { return teacher_; }
    const ClassifierHead* student_head(Modality m) const;
    const SpeakerTable& speaker_table() const { return speakers_; }
    const PositionalTable& positional_table() const { return positions_; }
    const TemporalProjection* projection(Modality m) const;
    /// Grows the positional table so conversations of length n fit.
    void reserve_length(std::size_t n) { positions_.ensure_capacity(n); }

    /// Parameters that collectively make up the three student heads.
    bool is_student_parameter(std::string_view name) const;

private:
    ModelConfig config_;
    ParameterRegistry registry_;
    std::array<std::optional<TemporalProjection>, 3> projections_;
    PositionalTable positions_;
    SpeakerTable speakers_;
    ModalityEncoder encoder_;
    HierarchicalFusion fusion_;
    ClassifierHead teacher_;
    std::array<std::optional<ClassifierHead>, 3> students_;
};

}  // namespace sdt
