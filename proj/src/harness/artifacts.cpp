#include "sdt/harness/artifacts.hpp"

#include <fstream>

#include "sdt/errors.hpp"
#include "sdt/harness/checkpoint.hpp"
#include "sdt/numcore/tensor.hpp"

namespace sdt {

const char* git_commit() { return SDT_GIT_COMMIT; }

nlohmann::json run_manifest(const RunConfig& config, const std::string& command) {
    return {{"config", to_json(config)},
            {"seed", config.train.seed},
            {"git_commit", git_commit()},
            {"command", command}};
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot read " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

nlohmann::json dump_attention(SdtModel& model, const Conversation& conversation, const std::array<std::size_t, 3>& dims) {
    model.reserve_length(conversation.size());
    NoGradGuard guard;
    auto out = model.forward(to_input(conversation, dims), {.capture_attention = true});
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& rec : out.attention) {
        const auto& s = rec.weights.shape();
        const auto v = rec.weights.data();
        nlohmann::json heads = nlohmann::json::array();
        for (std::size_t h = 0; h < s[0]; ++h) {
            nlohmann::json rows = nlohmann::json::array();
            for (std::size_t i = 0; i < s[1]; ++i) {
                rows.push_back(std::vector<double>(v.begin() + (h * s[1] + i) * s[2],
                                                   v.begin() + (h * s[1] + i + 1) * s[2]));
            }
            heads.push_back(std::move(rows));
        }
        blocks.push_back({{"block", rec.block}, {"layer", rec.layer}, {"heads", std::move(heads)}});
    }
    return {{"conversation", conversation.id}, {"length", conversation.size()}, {"blocks", std::move(blocks)}};
}

nlohmann::json dump_gates(SdtModel& model, const Conversation& conversation, const std::array<std::size_t, 3>& dims) {
    model.reserve_length(conversation.size());
    NoGradGuard guard;
    auto out = model.forward(to_input(conversation, dims), {});
    const auto weights = export_gates(out.fusion, conversation.size());
    if (weights.empty()) throw UsageError("gate export needs gated fusion");
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& w : weights) {
        const auto& u = conversation.utterances[w.utterance];
        rows.push_back({{"index", w.utterance},
                        {"speaker", u.speaker},
                        {"label", u.label},
                        {"t", w.weight[0]},
                        {"a", w.weight[1]},
                        {"v", w.weight[2]}});
    }
    return {{"conversation", conversation.id}, {"utterances", std::move(rows)}};
}

PreparedData prepare_data(const RunConfig& config) {
    if (config.dataset.empty()) throw ConfigError("dataset path is required");
    Dataset pool = load_dataset(config.dataset);
    PreparedData prepared;
    auto [train, val] = split_train_val(pool.conversations, config.train.val_fraction, config.train.seed);
    prepared.train.header = pool.header;
    prepared.train.conversations = std::move(train);
    prepared.val = std::move(val);
    if (!config.test_dataset.empty()) {
        Dataset test = load_dataset(config.test_dataset);
        if (test.header.dims != pool.header.dims) throw ConfigError("test set feature dims differ from training set");
        if (test.header.num_classes != pool.header.num_classes)
            throw ConfigError("test set class count differs from training set");
        remap_speakers(test, pool.header.speaker_vocab);
        test.header.label_names = pool.header.label_names;
        prepared.test = std::move(test);
    }
    return prepared;
}

TrainRunSummary run_training(const RunConfig& config, const std::string& command, std::ostream* progress) {
    config.validate();
    PreparedData data = prepare_data(config);
    std::filesystem::path dir;
    std::ofstream log;
    if (!config.output_dir.empty()) {
        dir = config.output_dir;
        std::filesystem::create_directories(dir);
        write_json(dir / "manifest.json", run_manifest(config, command));
        log.open(dir / "train_log.jsonl");
        if (!log) throw ParseError("cannot write " + (dir / "train_log.jsonl").string());
    }

    struct Tee : std::streambuf {
        std::streambuf* a;
        std::streambuf* b;
        int overflow(int c) override {
            if (c == EOF) return 0;
            if (a) a->sputc(static_cast<char>(c));
            if (b) b->sputc(static_cast<char>(c));
            return c;
        }
    } tee;
    tee.a = log.is_open() ? log.rdbuf() : nullptr;
    tee.b = progress ? progress->rdbuf() : nullptr;
    std::ostream sink(&tee);
    std::ostream* log_stream = (tee.a || tee.b) ? &sink : nullptr;

    TrainRunSummary summary{train_model(config, data.train, data.val, log_stream), {}};
    sink.flush();
    if (data.test) {
        summary.test_report = evaluate(summary.result.model, data.test->conversations, data.test->header,
                                       config.train.eval_threads);
    }
    if (!dir.empty()) {
        CheckpointMeta meta{data.train.header.speaker_vocab, data.train.header.label_names,
                            summary.result.best_epoch ? summary.result.best_epoch : summary.result.epochs.size()};
        save_checkpoint(summary.result.model, meta, dir / "checkpoint.bin");
        if (summary.test_report) write_json(dir / "eval.json", to_json(*summary.test_report));
    }
    return summary;
}

}  // namespace sdt
