#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdt/model.hpp"

namespace sdt {

struct TrainOptions {
    double lr = 1e-4;
    double weight_decay = 1e-5;
    std::size_t batch_size = 16;
    std::size_t epochs = 100;
    // Epochs without validation weighted-F1 improvement before stopping; 0 disables.
    std::size_t patience = 20;
    double val_fraction = 0.1;
    std::uint64_t seed = 0;
    bool shuffle = true;
    // Evaluate the training set after every epoch (adds train_accuracy to the log).
    bool eval_train = false;
    // Stop once training accuracy reaches this value (requires eval_train); 0 disables.
    double target_train_accuracy = 0.0;
    // Worker threads for evaluation passes; results are reduced in a fixed order.
    std::size_t eval_threads = 1;
};

/// Table-style removals applied on top of the model settings.
struct AblationFlags {
    bool no_pe = false;
    bool no_se = false;
    bool no_intra = false;
    bool no_inter = false;
    bool no_ce = false;
    bool no_kl = false;
    std::string modalities = "tav";
    FusionKind fusion = FusionKind::Gated;
};

struct RunConfig {
    std::string dataset;       // training pool directory
    std::string test_dataset;  // optional held-out directory
    std::string output_dir;    // checkpoint, logs and manifest
    ModelConfig model;
    TrainOptions train;
    AblationFlags ablation;

    /// Model settings with the ablation flags folded in.
    ModelConfig effective_model() const;
    /// Throws ConfigError on inconsistent settings.
    void validate() const;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Applies "dotted.key=value" (e.g. "model.d_model=32", "train.lr=1e-3").
/// The value is parsed as JSON when possible, otherwise taken as a string.
void apply_override(nlohmann::json& config, const std::string& assignment);

}  // namespace sdt
