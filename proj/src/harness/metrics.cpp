#include "sdt/harness/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "sdt/errors.hpp"

namespace sdt {

EvalReport compute_metrics(std::span<const int> truth, std::span<const int> predicted, std::size_t num_classes) {
    if (truth.size() != predicted.size()) throw DimensionError("truth and predictions differ in length");
    EvalReport r;
    r.count = truth.size();
    r.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || predicted[i] < 0 || static_cast<std::size_t>(truth[i]) >= num_classes ||
            static_cast<std::size_t>(predicted[i]) >= num_classes) {
            throw DimensionError("label out of range at position " + std::to_string(i));
        }
        ++r.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
    }
    r.per_class.resize(num_classes);
    std::size_t correct = 0;
    double weighted = 0.0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        auto& m = r.per_class[c];
        m.correct = r.confusion[c][c];
        for (std::size_t k = 0; k < num_classes; ++k) {
            m.support += r.confusion[c][k];
            m.predicted += r.confusion[k][c];
        }
        correct += m.correct;
        m.undefined = m.support == 0 && m.predicted == 0;
        m.recall = m.support ? static_cast<double>(m.correct) / static_cast<double>(m.support) : 0.0;
        m.accuracy = m.recall;
        m.precision = m.predicted ? static_cast<double>(m.correct) / static_cast<double>(m.predicted) : 0.0;
        m.f1 = m.precision + m.recall > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
        weighted += static_cast<double>(m.support) * m.f1;
    }
    if (r.count) {
        r.accuracy = static_cast<double>(correct) / static_cast<double>(r.count);
        r.weighted_f1 = weighted / static_cast<double>(r.count);
    }
    return r;
}

nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json classes = nlohmann::json::array();
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        const auto& m = r.per_class[c];
        classes.push_back({{"label", c < r.label_names.size() ? r.label_names[c] : std::to_string(c)},
                           {"support", m.support},
                           {"predicted", m.predicted},
                           {"accuracy", m.accuracy},
                           {"precision", m.precision},
                           {"recall", m.recall},
                           {"f1", m.f1},
                           {"undefined", m.undefined}});
    }
    return {{"count", r.count},
            {"accuracy", r.accuracy},
            {"weighted_f1", r.weighted_f1},
            {"loss", r.loss},
            {"per_class", classes},
            {"confusion", r.confusion},
            {"shift",
             {{"shift_count", r.shift.shift_count},
              {"shift_accuracy", r.shift.shift_accuracy()},
              {"noshift_count", r.shift.noshift_count},
              {"noshift_accuracy", r.shift.noshift_accuracy()}}}};
}

std::string format_report_table(const EvalReport& r, const std::string& title) {
    std::ostringstream os;
    char buf[128];
    os << "### " << title << "\n\n| Class | ACC | F1 |\n|---|---|---|\n";
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        const std::string name = c < r.label_names.size() ? r.label_names[c] : std::to_string(c);
        std::snprintf(buf, sizeof buf, "| %s | %.2f | %.2f |\n", name.c_str(), 100.0 * r.per_class[c].accuracy,
                      100.0 * r.per_class[c].f1);
        os << buf;
    }
    std::snprintf(buf, sizeof buf, "| **Overall** | %.2f (ACC) | %.2f (w-F1) |\n", 100.0 * r.accuracy,
                  100.0 * r.weighted_f1);
    os << buf;
    if (r.shift.shift_count + r.shift.noshift_count > 0) {
        std::snprintf(buf, sizeof buf, "\nEmotional shift: %zu utterances, ACC %.2f; no shift: %zu, ACC %.2f\n",
                      r.shift.shift_count, 100.0 * r.shift.shift_accuracy(), r.shift.noshift_count,
                      100.0 * r.shift.noshift_accuracy());
        os << buf;
    }
    return os.str();
}

}  // namespace sdt
