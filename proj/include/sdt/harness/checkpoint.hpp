#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sdt/model.hpp"

namespace sdt {

struct CheckpointMeta {
    std::vector<std::string> speaker_vocab;
    std::vector<std::string> label_names;
    std::size_t epoch = 0;
};

struct Checkpoint {
    SdtModel model;
    CheckpointMeta meta;
};

/// Binary layout (all integers little-endian):
///   8 bytes   magic "SDTCKPT1"
///   u64       length L of the JSON header, then L bytes of UTF-8 JSON
///             {"model": ModelConfig, "speaker_vocab", "label_names", "epoch"}
///   u64       parameter count P, then P records of
///             u64 name length, name bytes, u64 rank, rank x u64 dims,
///             prod(dims) x binary64 values
void save_checkpoint(const SdtModel& model, const CheckpointMeta& meta, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies parameter values between models with identical structure.
void copy_parameters(const SdtModel& from, SdtModel& to);
std::vector<std::vector<double>> snapshot_parameters(const SdtModel& model);
void restore_parameters(SdtModel& model, const std::vector<std::vector<double>>& values);

}  // namespace sdt
