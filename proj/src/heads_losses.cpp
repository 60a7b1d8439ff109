#include "sdt/heads_losses.hpp"

#include <algorithm>
#include <cmath>

#include "sdt/errors.hpp"
#include "sdt/numcore/ops.hpp"

namespace sdt {

ClassifierHead::ClassifierHead(ParameterRegistry& registry, const std::string& prefix, HeadRole role, std::size_t d,
                               std::size_t num_classes)
    : role_(role) {
    if (num_classes < 2) throw ConfigError("a classifier needs at least two classes");
    weight_ = registry.uniform(prefix + ".W", {d, num_classes}, d);
    bias_ = registry.zeros(prefix + ".b", {num_classes});
}

Tensor ClassifierHead::logits(const Tensor& h) const { return linear(h, weight_, bias_); }

TeacherOutput teacher_forward(const Tensor& fused, const ClassifierHead& head) {
    TeacherOutput out;
    out.logits = head.logits(fused);
    out.probs = softmax(out.logits, 1);
    const std::size_t n = out.probs.dim(0), c = out.probs.dim(1);
    auto p = out.probs.data();
    out.predictions.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = p.subspan(i * c, c);
        out.predictions[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

Tensor soften(const Tensor& logits, double tau) {
    if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
    return softmax(tau == 1.0 ? logits : scale(logits, 1.0 / tau), 1);
}

StudentOutput student_forward(const Tensor& enhanced, const ClassifierHead& head, double tau) {
    if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
    StudentOutput out;
    out.logits = head.logits(relu(enhanced));
    out.probs = softmax(out.logits, 1);
    out.soft_probs = tau == 1.0 ? out.probs : soften(out.logits, tau);
    return out;
}

Tensor cross_entropy(const Tensor& probs, std::span<const int> labels, std::optional<double> normalizer) {
    if (probs.rank() != 2) throw DimensionError("cross_entropy expects [N x C] probabilities");
    const std::size_t n = probs.dim(0), c = probs.dim(1);
    if (labels.size() != n) throw DimensionError("cross_entropy: label count differs from rows");
    std::size_t counted = 0;
    for (int y : labels) {
        if (y >= static_cast<int>(c)) throw DimensionError("label " + std::to_string(y) + " out of range");
        counted += y >= 0;
    }
    const double denom = normalizer.value_or(static_cast<double>(counted));
    auto p = probs.data();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] < 0) continue;
        total -= std::log(std::max(p[i * c + static_cast<std::size_t>(labels[i])], kLogFloor));
    }
    const double value = denom > 0 ? total / denom : 0.0;
    std::vector<int> ys(labels.begin(), labels.end());
    return Tensor::record({}, {value}, {probs},
                          [probs, ys = std::move(ys), c, denom](const detail::BackwardContext& ctx) {
                              double* d = ctx.in_grads[0];
                              if (!d || denom <= 0) return;
                              auto p = probs.data();
                              for (std::size_t i = 0; i < ys.size(); ++i) {
                                  if (ys[i] < 0) continue;
                                  const std::size_t idx = i * c + static_cast<std::size_t>(ys[i]);
                                  // Clamped region is flat.
                                  if (p[idx] > kLogFloor) d[idx] -= ctx.out_grad[0] / (denom * p[idx]);
                              }
                          },
                          "cross_entropy");
}

Tensor task_loss(const Tensor& probs, std::span<const int> labels, std::optional<double> normalizer) {
    return cross_entropy(probs, labels, normalizer);
}

Tensor student_ce_loss(const Tensor& probs, std::span<const int> labels, std::optional<double> normalizer) {
    return cross_entropy(probs, labels, normalizer);
}

Tensor kl_loss(const Tensor& student_soft, const Tensor& teacher_soft, std::span<const std::uint8_t> row_valid,
               std::optional<double> normalizer, KlDiagnostics* diagnostics) {
    if (student_soft.rank() != 2 || student_soft.shape() != teacher_soft.shape()) {
        throw DimensionError("kl_loss: student " + shape_str(student_soft.shape()) + " vs teacher " +
                             shape_str(teacher_soft.shape()));
    }
    const std::size_t n = student_soft.dim(0), c = student_soft.dim(1);
    if (!row_valid.empty() && row_valid.size() != n) throw DimensionError("kl_loss: mask length differs from rows");
    std::vector<std::uint8_t> valid(n, 1);
    if (!row_valid.empty()) valid.assign(row_valid.begin(), row_valid.end());
    std::size_t counted = 0;
    for (auto v : valid) counted += v != 0;
    const double denom = normalizer.value_or(static_cast<double>(counted));
    auto s = student_soft.data();
    auto t = teacher_soft.data();
    double total = 0.0;
    std::size_t clamped = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!valid[i]) continue;
        for (std::size_t j = 0; j < c; ++j) {
            const double sp = s[i * c + j];
            if (sp <= 0.0) continue;
            double tp = t[i * c + j];
            if (tp < kLogFloor) {
                tp = kLogFloor;
                ++clamped;
            }
            total += sp * (std::log(std::max(sp, kLogFloor)) - std::log(tp));
        }
    }
    if (diagnostics) diagnostics->clamped += clamped;
    // A divergence is non-negative; rounding can leave -1e-17 on equal inputs.
    const double value = denom > 0 ? std::max(0.0, total / denom) : 0.0;
    return Tensor::record(
        {}, {value}, {student_soft, teacher_soft},
        [student_soft, teacher_soft, valid = std::move(valid), c, denom](const detail::BackwardContext& ctx) {
            if (denom <= 0) return;
            auto s = student_soft.data();
            auto t = teacher_soft.data();
            const double g = ctx.out_grad[0] / denom;
            double* ds = ctx.in_grads[0];
            double* dt = ctx.in_grads[1];
            for (std::size_t i = 0; i < valid.size(); ++i) {
                if (!valid[i]) continue;
                for (std::size_t j = 0; j < c; ++j) {
                    const std::size_t idx = i * c + j;
                    const double sp = std::max(s[idx], kLogFloor);
                    const double tp = std::max(t[idx], kLogFloor);
                    if (ds) ds[idx] += g * (std::log(sp) - std::log(tp) + 1.0);
                    if (dt && t[idx] >= kLogFloor) dt[idx] -= g * s[idx] / tp;
                }
            }
        },
        "kl_loss");
}

LossReport total_loss(double task, const std::array<double, 3>& ce, const std::array<double, 3>& kl,
                      const std::array<double, 3>& gammas, double tau) {
    LossReport r;
    r.task = task;
    r.ce = ce;
    r.kl = kl;
    r.gammas = gammas;
    r.tau = tau;
    r.total = gammas[0] * task + gammas[1] * r.ce_sum() + gammas[2] * r.kl_sum();
    return r;
}

}  // namespace sdt
