#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdt/data.hpp"
#include "sdt/harness/run_config.hpp"
#include "sdt/harness/trainer.hpp"
#include "sdt/model.hpp"

namespace sdt {

/// Short commit hash of the source tree at configure time, or "unknown".
const char* git_commit();

/// {"config", "seed", "git_commit", "command"} for reproducing a run.
nlohmann::json run_manifest(const RunConfig& config, const std::string& command);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

/// Attention probabilities of every block for one conversation:
/// {"conversation", "length", "blocks": [{"block", "layer", "heads": [[[...]]]}]}.
nlohmann::json dump_attention(SdtModel& model, const Conversation& conversation, const std::array<std::size_t, 3>& dims);

/// Per-utterance multimodal modality weights (feature-averaged gates):
/// {"conversation", "utterances": [{"index", "speaker", "label", "t", "a", "v"}]}.
nlohmann::json dump_gates(SdtModel& model, const Conversation& conversation, const std::array<std::size_t, 3>& dims);

/// Training pool split into train/val and an optional test set whose speaker
/// ids are remapped onto the training vocabulary.
struct PreparedData {
    Dataset train;
    std::vector<Conversation> val;
    std::optional<Dataset> test;
};

PreparedData prepare_data(const RunConfig& config);

struct TrainRunSummary {
    TrainResult result;
    std::optional<EvalReport> test_report;
};

/// Full train command: trains, evaluates on the test set when present and,
/// when output_dir is set, writes checkpoint.bin, train_log.jsonl,
/// manifest.json and (with a test set) eval.json there.
TrainRunSummary run_training(const RunConfig& config, const std::string& command, std::ostream* progress = nullptr);

}  // namespace sdt
