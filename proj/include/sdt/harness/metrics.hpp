#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdt/data.hpp"

namespace sdt {

struct ClassMetrics {
    std::size_t support = 0;    // true count
    std::size_t predicted = 0;  // predicted count
    std::size_t correct = 0;
    double accuracy = 0.0;  // correct / support
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    // Absent from both truth and predictions; F1 reported as 0.
    bool undefined = false;
};

struct EvalReport {
    std::size_t count = 0;
    double accuracy = 0.0;
    double weighted_f1 = 0.0;
    std::vector<ClassMetrics> per_class;
    std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
    ShiftSplit shift;
    double loss = 0.0;  // mean teacher cross-entropy
    std::vector<std::string> label_names;
};

/// Accuracy, per-class precision/recall/F1, support-weighted F1 and the
/// confusion matrix. Labels must lie in [0, num_classes).
EvalReport compute_metrics(std::span<const int> truth, std::span<const int> predicted, std::size_t num_classes);

nlohmann::json to_json(const EvalReport& report);
/// Per-class rows (ACC and F1) followed by overall ACC and w-F1.
std::string format_report_table(const EvalReport& report, const std::string& title);

}  // namespace sdt
