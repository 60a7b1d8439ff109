#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdt/numcore/parameters.hpp"
#include "sdt/numcore/tensor.hpp"

namespace sdt {

/// Probabilities below this are clamped inside every logarithm.
inline constexpr double kLogFloor = 1e-12;

enum class HeadRole { Teacher, StudentText, StudentAudio, StudentVisual };

/// Fully connected layer d -> C.
class ClassifierHead {
public:
    ClassifierHead(ParameterRegistry& registry, const std::string& prefix, HeadRole role, std::size_t d,
                   std::size_t num_classes);

    Tensor logits(const Tensor& h) const;

    HeadRole role() const { return role_; }
    std::size_t num_classes() const { return weight_.dim(1); }
    const Tensor& weight() const { return weight_; }
    const Tensor& bias() const { return bias_; }

private:
    HeadRole role_;
    Tensor weight_;
    Tensor bias_;
};

struct TeacherOutput {
    Tensor logits;  // E
    Tensor probs;   // softmax(E)
    std::vector<int> predictions;
};

/// E = H' W_e + b_e, probabilities softmax over classes, argmax predictions.
TeacherOutput teacher_forward(const Tensor& fused, const ClassifierHead& head);

struct StudentOutput {
    Tensor logits;      // E_m
    Tensor probs;       // softmax(E_m)
    Tensor soft_probs;  // softmax(E_m / tau)
};

/// E_m = ReLU(H'_m) W'_m + b'_m. tau must be positive.
StudentOutput student_forward(const Tensor& enhanced, const ClassifierHead& head, double tau);

/// softmax(logits / tau) along classes.
Tensor soften(const Tensor& logits, double tau);

/// Cross-entropy of row-stochastic probs[N x C] against class labels.
/// Rows with label < 0 are padding and contribute nothing. The sum is
/// divided by `normalizer`, defaulting to the number of labelled rows.
Tensor cross_entropy(const Tensor& probs, std::span<const int> labels, std::optional<double> normalizer = {});

/// L_Task: cross-entropy of teacher probabilities.
Tensor task_loss(const Tensor& probs, std::span<const int> labels, std::optional<double> normalizer = {});
/// L_CE^m: cross-entropy of one student's probabilities.
Tensor student_ce_loss(const Tensor& probs, std::span<const int> labels, std::optional<double> normalizer = {});

struct KlDiagnostics {
    std::size_t clamped = 0;  // entries where teacher prob < floor and student prob > 0
};

/// L_KL^m = (1/N) sum_i sum_j s_ij log(s_ij / t_ij), computed as written
/// (student first). 0 log 0 = 0. Rows with row_valid[i] == 0 are skipped;
/// empty row_valid means every row counts. Gradients flow into `teacher`
/// only if it is attached to the graph.
Tensor kl_loss(const Tensor& student_soft, const Tensor& teacher_soft, std::span<const std::uint8_t> row_valid = {},
               std::optional<double> normalizer = {}, KlDiagnostics* diagnostics = nullptr);

/// Scalar breakdown of the objective.
struct LossReport {
    double task = 0.0;
    std::array<double, 3> ce{};  // t, a, v
    std::array<double, 3> kl{};
    double total = 0.0;
    std::array<double, 3> gammas{1.0, 1.0, 1.0};
    double tau = 1.0;

    double ce_sum() const { return ce[0] + ce[1] + ce[2]; }
    double kl_sum() const { return kl[0] + kl[1] + kl[2]; }
};

/// L = g1 L_Task + g2 sum_m L_CE^m + g3 sum_m L_KL^m.
LossReport total_loss(double task, const std::array<double, 3>& ce, const std::array<double, 3>& kl,
                      const std::array<double, 3>& gammas, double tau);

}  // namespace sdt
