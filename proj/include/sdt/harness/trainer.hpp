#pragma once

#include <cmath>
#include <optional>
#include <ostream>
#include <vector>

#include "sdt/data.hpp"
#include "sdt/harness/metrics.hpp"
#include "sdt/harness/run_config.hpp"
#include "sdt/model.hpp"

namespace sdt {

struct StepRecord {
    std::size_t epoch = 0;
    std::size_t batch = 0;
    LossReport loss;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    LossReport loss;        // utterance-weighted mean over the epoch
    double train_accuracy = NAN;
    double val_accuracy = NAN;
    double val_weighted_f1 = NAN;
};

struct TrainResult {
    SdtModel model;
    std::vector<EpochRecord> epochs;
    std::vector<StepRecord> steps;
    std::size_t best_epoch = 0;  // 0 when no validation set was used
    double best_val_weighted_f1 = NAN;
    bool stopped_early = false;
};

/// Model settings fitted to a dataset: feature dims, class count and the
/// speaker vocabulary size come from the data.
ModelConfig fit_to_dataset(ModelConfig config, const DatasetHeader& header);

/// Trains on `train`, tracking `val` (may be empty) for early stopping and
/// best-checkpoint selection. Each step is one batch; the batch loss is the
/// mean over every real utterance in the batch. When `log` is set, one JSON
/// object per step and per epoch is written to it.
TrainResult train_model(const RunConfig& config, const Dataset& train, const std::vector<Conversation>& val,
                        std::ostream* log = nullptr);

/// Teacher-argmax predictions, one vector per conversation. Dropout and
/// student heads are off. With threads > 1 conversations are split across
/// workers and gathered back in input order.
std::vector<std::vector<int>> predict(SdtModel& model, const std::vector<Conversation>& conversations,
                                      const std::array<std::size_t, 3>& dims, std::size_t threads = 1,
                                      std::vector<double>* loss_sums = nullptr);

EvalReport evaluate(SdtModel& model, const std::vector<Conversation>& conversations, const DatasetHeader& header,
                    std::size_t threads = 1);

/// Loss of every conversation in `batch`, each normalised by its own real
/// utterance count, with dropout off and students on.
std::vector<LossReport> conversation_losses(SdtModel& model, const Batch& batch);

/// Sums the components of `r` into `into`.
void accumulate(LossReport& into, const LossReport& r, double weight = 1.0);

nlohmann::json to_json(const LossReport& r);

struct SeedSweep {
    std::vector<std::uint64_t> seeds;
    std::vector<EvalReport> reports;
    double mean_accuracy = 0.0;
    double mean_weighted_f1 = 0.0;
};

/// Trains k models with seeds seed, seed+1, ... and averages test metrics.
SeedSweep seed_sweep(const RunConfig& config, const Dataset& train, const std::vector<Conversation>& val,
                     const Dataset& test, std::size_t k);

}  // namespace sdt
