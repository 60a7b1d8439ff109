#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "sdt/harness/metrics.hpp"
#include "sdt/harness/run_config.hpp"

namespace sdt {

struct AblationSetting {
    std::string name;   // e.g. "no_inter"
    std::string label;  // human-readable row title
};

/// The 13 settings in table order: full model, four architecture removals,
/// two loss removals, six modality subsets.
const std::vector<AblationSetting>& ablation_grid();

/// `base` with one named setting applied on top.
RunConfig ablation_config(const RunConfig& base, const std::string& name);

struct AblationRow {
    AblationSetting setting;
    std::size_t parameters = 0;
    EvalReport report;
    double seconds = 0.0;
};

/// Trains and evaluates every setting with the base seed. `only`, when
/// non-empty, restricts the run to the named settings (grid order kept).
std::vector<AblationRow> run_ablation(const RunConfig& base, const Dataset& train, const std::vector<Conversation>& val,
                                      const Dataset& test, const std::vector<std::string>& only = {});

std::string ablation_markdown(const std::vector<AblationRow>& rows);
nlohmann::json ablation_json(const std::vector<AblationRow>& rows);

}  // namespace sdt
