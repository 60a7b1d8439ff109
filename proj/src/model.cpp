#include "sdt/model.hpp"

#include <algorithm>

#include "sdt/errors.hpp"
#include "sdt/numcore/ops.hpp"

namespace sdt {

void ModelConfig::validate() const {
    if (d_model == 0 || d_model % 2 != 0) throw ConfigError("d_model must be positive and even");
    if (heads == 0 || d_model % heads != 0) throw ConfigError("d_model must be divisible by heads");
    if (d_ff == 0) throw ConfigError("d_ff must be positive");
    if (layers == 0) throw ConfigError("layers must be at least 1");
    if (modalities.empty()) throw ConfigError("at least one modality must be enabled");
    for (Modality m : kModalities) {
        if (!modalities.contains(m)) continue;
        if (feature_dims[index_of(m)] == 0) throw ConfigError(std::string(name_of(m)) + " feature dimension is zero");
        if (kernel_sizes[index_of(m)] % 2 == 0) throw ConfigError("convolution kernel sizes must be odd");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
    if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
    for (double g : gammas)
        if (g < 0.0) throw ConfigError("loss weights must be non-negative");
    if (num_classes < 2) throw ConfigError("need at least two classes");
    if (max_len == 0) throw ConfigError("max_len must be positive");
}

std::size_t ConversationInput::real_length() const {
    return static_cast<std::size_t>(std::count_if(valid.begin(), valid.end(), [](std::uint8_t v) { return v != 0; }));
}

namespace {

const ModelConfig& validated(const ModelConfig& c) {
    c.validate();
    return c;
}

std::array<std::optional<TemporalProjection>, 3> make_projections(ParameterRegistry& reg, const ModelConfig& c) {
    std::array<std::optional<TemporalProjection>, 3> out;
    c.modalities.for_each([&](Modality m) {
        out[index_of(m)].emplace(reg, std::string("projection.") + tag_of(m), c.feature_dim(m), c.d_model,
                                 c.kernel_sizes[index_of(m)]);
    });
    return out;
}

EncoderOptions encoder_options(const ModelConfig& c) {
    return {c.d_model, c.heads, c.d_ff, c.layers, c.ln_eps, c.modalities, c.intra, c.inter};
}

FusionOptions fusion_options(const ModelConfig& c) {
    // Inter-modal pass-through pairs carry no transformer and no gate.
    return {c.d_model, c.modalities, c.fusion, true, c.inter};
}

std::array<std::optional<ClassifierHead>, 3> make_students(ParameterRegistry& reg, const ModelConfig& c) {
    std::array<std::optional<ClassifierHead>, 3> out;
    constexpr std::array<HeadRole, 3> roles{HeadRole::StudentText, HeadRole::StudentAudio, HeadRole::StudentVisual};
    c.modalities.for_each([&](Modality m) {
        out[index_of(m)].emplace(reg, std::string("student.") + tag_of(m), roles[index_of(m)], c.d_model,
                                 c.num_classes);
    });
    return out;
}

}  // namespace

SdtModel::SdtModel(const ModelConfig& config, std::uint64_t seed)
    : config_(validated(config)),
      registry_(seed),
      projections_(make_projections(registry_, config_)),
      positions_(config_.max_len, config_.d_model),
      speakers_(registry_, "speaker.V", config_.num_speakers, config_.d_model),
      encoder_(registry_, encoder_options(config_)),
      fusion_(registry_, fusion_options(config_)),
      teacher_(registry_, "teacher", HeadRole::Teacher, config_.d_model, config_.num_classes),
      students_(make_students(registry_, config_)) {}

const ClassifierHead* SdtModel::student_head(Modality m) const {
    const auto& s = students_[index_of(m)];
    return s ? &*s : nullptr;
}

const TemporalProjection* SdtModel::projection(Modality m) const {
    const auto& p = projections_[index_of(m)];
    return p ? &*p : nullptr;
}

bool SdtModel::is_student_parameter(std::string_view name) const { return name.starts_with("student."); }

ModelOutput SdtModel::forward(const ConversationInput& input, const ForwardOptions& options, Rng* dropout_rng) {
    const std::size_t n = input.length();
    if (n == 0) throw DimensionError("conversation must contain at least one utterance");
    if (input.valid.size() != n) throw DimensionError("mask length differs from conversation length");
    if (input.real_length() == 0) throw UsageError("conversation has no real utterances");

    ModelOutput out;
    ForwardContext ctx;
    ctx.training = options.training;
    ctx.dropout = config_.dropout;
    ctx.rng = dropout_rng;
    ctx.attention = options.capture_attention ? &out.attention : nullptr;
    if (ctx.dropout_active() && !dropout_rng) throw UsageError("training forward with dropout needs an RNG");

    Tensor pe;
    if (config_.positional) {
        positions_.ensure_capacity(n);
        pe = positions_.rows(n);
    }
    Tensor se = config_.speaker ? speakers_.embed(input.speakers) : Tensor();

    config_.modalities.for_each([&](Modality m) {
        const Tensor& u = input.features[index_of(m)];
        if (!u.defined()) throw UsageError(std::string("missing ") + std::string(name_of(m)) + " features");
        if (u.rank() != 2 || u.dim(0) != n) throw DimensionError("feature rows differ from conversation length");
        out.embedded[index_of(m)] = augment(projections_[index_of(m)]->project(u), pe, se);
    });

    out.encoded = encoder_.encode_all(out.embedded, input.valid, ctx);
    out.fusion = fusion_.forward(out.encoded);
    out.teacher = teacher_forward(out.fusion.fused, teacher_);
    if (options.training || options.students) {
        config_.modalities.for_each([&](Modality m) {
            out.students[index_of(m)] =
                student_forward(out.fusion.enhanced[index_of(m)], *students_[index_of(m)], config_.tau);
        });
    }
    return out;
}

LossTerms SdtModel::losses(const ModelOutput& output, std::span<const int> labels, std::optional<double> normalizer,
                           const Tensor* teacher_soft_override) const {
    const auto& g = config_.gammas;
    LossTerms terms;
    auto task = task_loss(output.teacher.probs, labels, normalizer);
    Tensor total = g[0] == 1.0 ? task : scale(task, g[0]);

    std::array<double, 3> ce{}, kl{};
    const bool any_student =
        std::any_of(output.students.begin(), output.students.end(), [](const auto& s) { return s.has_value(); });
    if (any_student) {
        std::vector<std::uint8_t> valid(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) valid[i] = labels[i] >= 0;
        Tensor teacher_soft;
        if (teacher_soft_override) {
            teacher_soft = *teacher_soft_override;
        } else {
            teacher_soft = soften(output.teacher.logits, config_.tau);
            if (!config_.kl_backprop_teacher) teacher_soft = teacher_soft.detach();
        }
        for (Modality m : kModalities) {
            const auto& s = output.students[index_of(m)];
            if (!s) continue;
            auto ce_m = student_ce_loss(s->probs, labels, normalizer);
            auto kl_m = kl_loss(s->soft_probs, teacher_soft, valid, normalizer, &terms.kl_diagnostics);
            ce[index_of(m)] = ce_m.item();
            kl[index_of(m)] = kl_m.item();
            // Zero-weighted terms stay out of the graph so their heads get exactly zero gradient.
            if (g[1] != 0.0) total = add(total, scale(ce_m, g[1]));
            if (g[2] != 0.0) total = add(total, scale(kl_m, g[2]));
        }
    }
    terms.total = total;
    terms.report = total_loss(task.item(), ce, kl, g, config_.tau);
    return terms;
}

}  // namespace sdt
