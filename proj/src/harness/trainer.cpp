#include "sdt/harness/trainer.hpp"

#include <algorithm>
#include <thread>

#include "sdt/errors.hpp"
#include "sdt/harness/checkpoint.hpp"
#include "sdt/numcore/adam.hpp"
#include "sdt/numcore/ops.hpp"

namespace sdt {

namespace {

constexpr std::uint64_t kDropoutStream = 0xD0;
constexpr std::uint64_t kShuffleStream = 0x5F;

void check_finite(const LossReport& r, std::size_t epoch, std::size_t batch) {
    auto fail = [&](const std::string& component) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) +
                             " in " + component);
    };
    if (!std::isfinite(r.task)) fail("task");
    for (Modality m : kModalities) {
        if (!std::isfinite(r.ce[index_of(m)])) fail(std::string("ce_") + tag_of(m));
        if (!std::isfinite(r.kl[index_of(m)])) fail(std::string("kl_") + tag_of(m));
    }
    if (!std::isfinite(r.total)) fail("total");
}

void log_line(std::ostream* log, const nlohmann::json& j) {
    if (log) *log << j.dump() << '\n';
}

}  // namespace

void accumulate(LossReport& into, const LossReport& r, double weight) {
    into.task += weight * r.task;
    for (std::size_t m = 0; m < 3; ++m) {
        into.ce[m] += weight * r.ce[m];
        into.kl[m] += weight * r.kl[m];
    }
    into.total += weight * r.total;
    into.gammas = r.gammas;
    into.tau = r.tau;
}

nlohmann::json to_json(const LossReport& r) {
    return {{"task", r.task}, {"ce", r.ce}, {"kl", r.kl}, {"total", r.total}};
}

ModelConfig fit_to_dataset(ModelConfig config, const DatasetHeader& header) {
    config.feature_dims = header.dims;
    config.num_classes = header.num_classes;
    config.num_speakers = std::max<std::size_t>(1, header.speaker_vocab.size());
    return config;
}

std::vector<std::vector<int>> predict(SdtModel& model, const std::vector<Conversation>& conversations,
                                      const std::array<std::size_t, 3>& dims, std::size_t threads,
                                      std::vector<double>* loss_sums) {
    std::vector<std::vector<int>> out(conversations.size());
    std::vector<double> losses(conversations.size(), 0.0);
    std::size_t longest = 0;
    for (const auto& c : conversations) longest = std::max(longest, c.size());
    model.reserve_length(longest);

    auto run = [&](std::size_t begin, std::size_t stride) {
        NoGradGuard guard;
        for (std::size_t c = begin; c < conversations.size(); c += stride) {
            auto input = to_input(conversations[c], dims);
            auto result = model.forward(input, {});
            out[c] = result.teacher.predictions;
            std::vector<int> labels;
            for (const auto& u : conversations[c].utterances) labels.push_back(u.label);
            losses[c] = task_loss(result.teacher.probs, labels, 1.0).item();
        }
    };
    threads = std::max<std::size_t>(1, std::min(threads, conversations.size()));
    if (threads == 1) {
        run(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(run, t, threads);
        for (auto& th : pool) th.join();
    }
    if (loss_sums) *loss_sums = std::move(losses);
    return out;
}

EvalReport evaluate(SdtModel& model, const std::vector<Conversation>& conversations, const DatasetHeader& header,
                    std::size_t threads) {
    std::vector<double> loss_sums;
    auto preds = predict(model, conversations, header.dims, threads, &loss_sums);
    std::vector<int> truth, flat;
    double loss = 0.0;
    for (std::size_t c = 0; c < conversations.size(); ++c) {
        for (std::size_t i = 0; i < conversations[c].size(); ++i) {
            truth.push_back(conversations[c].utterances[i].label);
            flat.push_back(preds[c][i]);
        }
        loss += loss_sums[c];
    }
    auto report = compute_metrics(truth, flat, header.num_classes);
    report.shift = emotional_shift_split(conversations, preds);
    report.loss = truth.empty() ? 0.0 : loss / static_cast<double>(truth.size());
    report.label_names = header.label_names;
    return report;
}

std::vector<LossReport> conversation_losses(SdtModel& model, const Batch& batch) {
    NoGradGuard guard;
    std::vector<LossReport> out;
    for (std::size_t b = 0; b < batch.size; ++b) {
        auto input = batch.conversation(b);
        auto result = model.forward(input, {.students = true});
        out.push_back(model.losses(result, batch.labels_of(b)).report);
    }
    return out;
}

TrainResult train_model(const RunConfig& config, const Dataset& train, const std::vector<Conversation>& val,
                        std::ostream* log) {
    config.validate();
    train.validate();
    const ModelConfig mc = fit_to_dataset(config.effective_model(), train.header);
    const auto& opts = config.train;
    TrainResult result{SdtModel(mc, opts.seed), {}, {}, 0, NAN, false};
    SdtModel& model = result.model;

    Adam optimizer(model.parameters(), {.lr = opts.lr, .weight_decay = opts.weight_decay});
    const Rng root(opts.seed);
    Rng dropout_rng = root.split(kDropoutStream);
    const Rng shuffle_root = root.split(kShuffleStream);

    std::size_t longest = 0;
    for (const auto& c : train.conversations) longest = std::max(longest, c.size());
    for (const auto& c : val) longest = std::max(longest, c.size());
    model.reserve_length(longest);

    std::optional<std::vector<std::vector<double>>> best;
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= opts.epochs; ++epoch) {
        std::optional<std::uint64_t> shuffle_seed;
        if (opts.shuffle) shuffle_seed = shuffle_root.split(epoch).key();
        auto batches = make_batches(train.conversations, opts.batch_size, shuffle_seed, &train.header.dims);

        EpochRecord record;
        record.epoch = epoch;
        std::size_t seen = 0;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const Batch& batch = batches[bi];
            const auto normalizer = static_cast<double>(batch.real_utterances());
            optimizer.zero_grad();
            LossReport step{};
            try {
                for (std::size_t b = 0; b < batch.size; ++b) {
                    auto input = batch.conversation(b);
                    auto out = model.forward(input, {.training = true}, &dropout_rng);
                    auto terms = model.losses(out, batch.labels_of(b), normalizer);
                    check_finite(terms.report, epoch, bi);
                    terms.total.backward();
                    accumulate(step, terms.report);
                }
            } catch (const NumericalError& e) {
                const std::string what = e.what();
                if (what.rfind("non-finite loss at epoch", 0) == 0) throw;
                throw NumericalError("non-finite value at epoch " + std::to_string(epoch) + ", batch " +
                                     std::to_string(bi) + ": " + what);
            }
            optimizer.step();
            accumulate(record.loss, step, normalizer);
            seen += batch.real_utterances();
            result.steps.push_back({epoch, bi, step});
            log_line(log, {{"type", "step"}, {"epoch", epoch}, {"batch", bi}, {"loss", to_json(step)}});
        }
        if (seen) {
            const double inv = 1.0 / static_cast<double>(seen);
            LossReport mean{};
            accumulate(mean, record.loss, inv);
            record.loss = mean;
        }

        if (opts.eval_train) {
            record.train_accuracy = evaluate(model, train.conversations, train.header, opts.eval_threads).accuracy;
        }
        bool stop = false;
        if (!val.empty()) {
            auto report = evaluate(model, val, train.header, opts.eval_threads);
            record.val_accuracy = report.accuracy;
            record.val_weighted_f1 = report.weighted_f1;
            if (!best || report.weighted_f1 > result.best_val_weighted_f1) {
                best = snapshot_parameters(model);
                result.best_epoch = epoch;
                result.best_val_weighted_f1 = report.weighted_f1;
                since_best = 0;
            } else if (opts.patience && ++since_best >= opts.patience) {
                stop = result.stopped_early = true;
            }
        }
        if (opts.target_train_accuracy > 0.0 && record.train_accuracy >= opts.target_train_accuracy) stop = true;

        nlohmann::json line{{"type", "epoch"}, {"epoch", epoch}, {"loss", to_json(record.loss)}};
        if (!std::isnan(record.train_accuracy)) line["train_accuracy"] = record.train_accuracy;
        if (!std::isnan(record.val_weighted_f1)) {
            line["val_accuracy"] = record.val_accuracy;
            line["val_weighted_f1"] = record.val_weighted_f1;
        }
        log_line(log, line);
        result.epochs.push_back(record);
        if (stop) break;
    }
    if (best) restore_parameters(model, *best);
    return result;
}

SeedSweep seed_sweep(const RunConfig& config, const Dataset& train, const std::vector<Conversation>& val,
                     const Dataset& test, std::size_t k) {
    if (k == 0) throw ConfigError("seed sweep needs k >= 1");
    SeedSweep sweep;
    for (std::size_t i = 0; i < k; ++i) {
        RunConfig c = config;
        c.train.seed = config.train.seed + i;
        auto trained = train_model(c, train, val);
        auto report = evaluate(trained.model, test.conversations, test.header, c.train.eval_threads);
        sweep.seeds.push_back(c.train.seed);
        sweep.mean_accuracy += report.accuracy / static_cast<double>(k);
        sweep.mean_weighted_f1 += report.weighted_f1 / static_cast<double>(k);
        sweep.reports.push_back(std::move(report));
    }
    return sweep;
}

}  // namespace sdt
