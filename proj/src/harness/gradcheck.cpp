#include "sdt/harness/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "sdt/model.hpp"
#include "sdt/numcore/ops.hpp"

namespace sdt {

GradcheckReport gradcheck(const GradcheckOptions& o) {
    const auto start = std::chrono::steady_clock::now();
    ModelConfig c;
    c.feature_dims = o.feature_dims;
    c.d_model = o.d_model;
    c.heads = o.heads;
    c.d_ff = o.d_ff;
    c.num_classes = o.num_classes;
    c.num_speakers = 2;
    c.dropout = 0.0;
    c.tau = o.tau;
    c.max_len = std::max<std::size_t>(o.length, 1);
    c.kl_backprop_teacher = o.kl_backprop_teacher;
    SdtModel model(c, o.seed);

    Rng rng = Rng(o.seed).split(0x6C);
    ConversationInput input;
    for (Modality m : kModalities) {
        std::vector<double> v(o.length * o.feature_dims[index_of(m)]);
        for (auto& x : v) x = rng.uniform(-1.0, 1.0);
        input.features[index_of(m)] = Tensor::from({o.length, o.feature_dims[index_of(m)]}, std::move(v));
    }
    std::vector<int> labels;
    for (std::size_t i = 0; i < o.length; ++i) {
        input.speakers.push_back(static_cast<std::int64_t>(rng.below(2)));
        labels.push_back(static_cast<int>(rng.below(o.num_classes)));
    }
    input.valid.assign(o.length, 1);

    Tensor frozen;
    if (!o.kl_backprop_teacher) {
        NoGradGuard guard;
        frozen = soften(model.forward(input, {.students = true}).teacher.logits, c.tau);
    }
    const Tensor* override_soft = o.kl_backprop_teacher ? nullptr : &frozen;
    auto loss_value = [&] {
        NoGradGuard guard;
        return model.losses(model.forward(input, {.students = true}), labels, {}, override_soft).total.item();
    };

    for (const auto& p : model.parameters()) Tensor(p.tensor).zero_grad();
    model.losses(model.forward(input, {.students = true}), labels, {}, override_soft).total.backward();

    GradcheckReport report;
    for (const auto& p : model.parameters()) {
        Tensor t = p.tensor;
        auto w = t.mutable_data();
        auto analytic = t.grad();
        double diff = 0.0, na = 0.0, nn = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double orig = w[i];
            w[i] = orig + o.step;
            const double up = loss_value();
            w[i] = orig - o.step;
            const double down = loss_value();
            w[i] = orig;
            const double numeric = (up - down) / (2.0 * o.step);
            diff += (analytic[i] - numeric) * (analytic[i] - numeric);
            na += analytic[i] * analytic[i];
            nn += numeric * numeric;
        }
        const double err = std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-10});
        report.entries.push_back({p.name, w.size(), err});
        if (report.worst.empty() || err > report.max_error) {
            report.max_error = err;
            report.worst = p.name;
        }
    }
    report.passed = report.max_error < o.tolerance;
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

nlohmann::json to_json(const GradcheckReport& r) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : r.entries) entries.push_back({{"name", e.name}, {"size", e.size}, {"relative_error", e.relative_error}});
    return {{"passed", r.passed},
            {"max_relative_error", r.max_error},
            {"worst", r.worst},
            {"seconds", r.seconds},
            {"parameters", entries}};
}

}  // namespace sdt
