#include "sdt/harness/ablation.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>

#include "sdt/errors.hpp"
#include "sdt/harness/trainer.hpp"

namespace sdt {

const std::vector<AblationSetting>& ablation_grid() {
    static const std::vector<AblationSetting> grid{
        {"full", "Full model (T+A+V)"},
        {"no_pe", "w/o positional embeddings"},
        {"no_se", "w/o speaker embeddings"},
        {"no_intra", "w/o intra-modal transformers"},
        {"no_inter", "w/o inter-modal transformers"},
        {"no_ce", "w/o student CE loss"},
        {"no_kl", "w/o student KL loss"},
        {"t", "Text"},
        {"a", "Audio"},
        {"v", "Visual"},
        {"ta", "Text + Audio"},
        {"tv", "Text + Visual"},
        {"av", "Audio + Visual"},
    };
    return grid;
}

RunConfig ablation_config(const RunConfig& base, const std::string& name) {
    RunConfig c = base;
    auto& a = c.ablation;
    if (name == "full") {
        a.modalities = "tav";
    } else if (name == "no_pe") {
        a.no_pe = true;
    } else if (name == "no_se") {
        a.no_se = true;
    } else if (name == "no_intra") {
        a.no_intra = true;
    } else if (name == "no_inter") {
        a.no_inter = true;
    } else if (name == "no_ce") {
        a.no_ce = true;
    } else if (name == "no_kl") {
        a.no_kl = true;
    } else if (name == "t" || name == "a" || name == "v" || name == "ta" || name == "tv" || name == "av") {
        a.modalities = name;
    } else {
        throw ConfigError("unknown ablation setting '" + name + "'");
    }
    return c;
}

std::vector<AblationRow> run_ablation(const RunConfig& base, const Dataset& train, const std::vector<Conversation>& val,
                                      const Dataset& test, const std::vector<std::string>& only) {
    for (const auto& n : only) ablation_config(base, n);
    std::vector<AblationRow> rows;
    for (const auto& setting : ablation_grid()) {
        if (!only.empty() && std::find(only.begin(), only.end(), setting.name) == only.end()) continue;
        const auto start = std::chrono::steady_clock::now();
        auto config = ablation_config(base, setting.name);
        auto trained = train_model(config, train, val);
        AblationRow row;
        row.setting = setting;
        row.parameters = trained.model.parameter_count();
        row.report = evaluate(trained.model, test.conversations, test.header, config.train.eval_threads);
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string ablation_markdown(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << "| Setting | ACC | w-F1 | Parameters |\n|---|---|---|---|\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "| %s | %.2f | %.2f | %zu |\n", r.setting.label.c_str(),
                      100.0 * r.report.accuracy, 100.0 * r.report.weighted_f1, r.parameters);
        os << buf;
    }
    return os.str();
}

nlohmann::json ablation_json(const std::vector<AblationRow>& rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows) {
        out.push_back({{"setting", r.setting.name},
                       {"label", r.setting.label},
                       {"parameters", r.parameters},
                       {"seconds", r.seconds},
                       {"report", to_json(r.report)}});
    }
    return out;
}

}  // namespace sdt
