#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sdt/errors.hpp"
#include "sdt/harness/ablation.hpp"
#include "sdt/harness/artifacts.hpp"
#include "sdt/harness/checkpoint.hpp"
#include "sdt/harness/gradcheck.hpp"
#include "sdt/harness/trainer.hpp"

using namespace sdt;

namespace {

struct ConfigArgs {
    std::string path;
    std::vector<std::string> overrides;
    std::string dataset, test_dataset, output_dir;

    void attach(CLI::App* app) {
        app->add_option("-c,--config", path, "JSON run config");
        app->add_option("-s,--set", overrides, "Override, e.g. model.d_model=32 (repeatable)");
        app->add_option("--dataset", dataset, "Training pool directory");
        app->add_option("--test", test_dataset, "Test set directory");
        app->add_option("-o,--out", output_dir, "Output directory");
    }

    RunConfig resolve() const {
        nlohmann::json j = path.empty() ? to_json(RunConfig{}) : read_json(path);
        if (!dataset.empty()) j["dataset"] = dataset;
        if (!test_dataset.empty()) j["test_dataset"] = test_dataset;
        if (!output_dir.empty()) j["output_dir"] = output_dir;
        for (const auto& o : overrides) apply_override(j, o);
        return run_config_from_json(j);
    }
};

std::string command_line(int argc, char** argv) {
    std::string s;
    for (int i = 0; i < argc; ++i) s += (i ? " " : "") + std::string(argv[i]);
    return s;
}

void emit(const nlohmann::json& j, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << '\n';
    } else {
        write_json(path, j);
    }
}

Dataset load_for_checkpoint(const std::string& dir, const CheckpointMeta& meta, const ModelConfig& model) {
    Dataset ds = load_dataset(dir);
    if (ds.header.dims != model.feature_dims) throw ConfigError("dataset feature dims do not match the checkpoint");
    if (ds.header.num_classes != model.num_classes) throw ConfigError("dataset class count does not match the checkpoint");
    remap_speakers(ds, meta.speaker_vocab);
    if (!meta.label_names.empty()) ds.header.label_names = meta.label_names;
    return ds;
}

const Conversation& pick(const Dataset& ds, const std::string& which) {
    for (const auto& c : ds.conversations)
        if (c.id == which) return c;
    std::size_t idx = 0;
    try {
        idx = std::stoul(which);
    } catch (const std::exception&) {
        throw ConfigError("no conversation '" + which + "'");
    }
    if (idx >= ds.conversations.size()) throw ConfigError("conversation index out of range: " + which);
    return ds.conversations[idx];
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multimodal emotion recognition in conversations with self-distillation"};
    app.require_subcommand(1);
    const std::string invoked = command_line(argc, argv);

    auto* train = app.add_subcommand("train", "Train a model and evaluate it on the test set");
    ConfigArgs train_cfg;
    train_cfg.attach(train);
    bool quiet = false;
    train->add_flag("-q,--quiet", quiet, "Do not echo the JSON-lines log");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    std::string eval_ckpt, eval_data, eval_json;
    std::size_t eval_threads = 1;
    eval->add_option("--checkpoint", eval_ckpt)->required();
    eval->add_option("--dataset", eval_data)->required();
    eval->add_option("--threads", eval_threads);
    eval->add_option("--json", eval_json, "Write the report here");

    auto* ablate = app.add_subcommand("ablate", "Train and evaluate the ablation grid");
    ConfigArgs ablate_cfg;
    ablate_cfg.attach(ablate);
    std::vector<std::string> only;
    ablate->add_option("--only", only, "Restrict to these settings");

    auto* grad = app.add_subcommand("gradcheck", "Compare analytic and numeric gradients on a tiny model");
    GradcheckOptions gopt;
    std::string grad_json;
    grad->add_option("--seed", gopt.seed);
    grad->add_option("--length", gopt.length);
    grad->add_option("--tolerance", gopt.tolerance);
    grad->add_flag("--backprop-teacher", gopt.kl_backprop_teacher);
    grad->add_option("--json", grad_json);

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    SynthOptions sopt;
    std::string synth_out;
    synth->add_option("-o,--out", synth_out)->required();
    synth->add_option("--seed", sopt.seed);
    synth->add_option("--conversations", sopt.conversations);
    synth->add_option("--min-length", sopt.min_length);
    synth->add_option("--max-length", sopt.max_length);
    synth->add_option("--speakers", sopt.speakers);
    synth->add_option("--classes", sopt.num_classes);
    synth->add_option("--sample-seed", sopt.sample_seed, "Utterance seed; class means still follow --seed");
    synth->add_option("--dims", sopt.dims);
    synth->add_option("--separability", sopt.separability);
    synth->add_option("--shift-rate", sopt.shift_rate);

    auto* convert = app.add_subcommand("convert", "Convert JSON lines into the binary dataset format");
    std::string conv_in, conv_out;
    ConvertOptions copt;
    convert->add_option("-i,--input", conv_in)->required();
    convert->add_option("-o,--out", conv_out)->required();
    convert->add_option("--name", copt.name);
    convert->add_option("--labels", copt.label_names, "Class names in index order");

    std::string dump_ckpt, dump_data, dump_conv = "0", dump_out;
    auto add_dump = [&](const char* name, const char* help) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--checkpoint", dump_ckpt)->required();
        sub->add_option("--dataset", dump_data)->required();
        sub->add_option("--conversation", dump_conv, "Conversation id or index");
        sub->add_option("-o,--out", dump_out);
        return sub;
    };
    auto* dump_attn = add_dump("dump-attn", "Export attention maps of one conversation");
    auto* dump_gates_cmd = add_dump("dump-gates", "Export per-utterance modality weights of one conversation");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            const auto config = train_cfg.resolve();
            const auto summary = run_training(config, invoked, quiet ? nullptr : &std::cerr);
            const auto& r = summary.result;
            std::cout << "epochs: " << r.epochs.size() << ", best epoch: " << r.best_epoch << '\n';
            if (summary.test_report) std::cout << format_report_table(*summary.test_report, "test");
        } else if (*eval) {
            auto ckpt = load_checkpoint(eval_ckpt);
            const auto ds = load_for_checkpoint(eval_data, ckpt.meta, ckpt.model.config());
            const auto report = evaluate(ckpt.model, ds.conversations, ds.header, eval_threads);
            std::cout << format_report_table(report, ds.header.name);
            if (!eval_json.empty()) write_json(eval_json, to_json(report));
        } else if (*ablate) {
            const auto config = ablate_cfg.resolve();
            const auto data = prepare_data(config);
            if (!data.test) throw ConfigError("ablate needs a test set");
            const auto rows = run_ablation(config, data.train, data.val, *data.test, only);
            std::cout << ablation_markdown(rows);
            if (!config.output_dir.empty()) {
                std::filesystem::create_directories(config.output_dir);
                const std::filesystem::path dir = config.output_dir;
                write_json(dir / "ablation.json", ablation_json(rows));
                std::ofstream(dir / "ablation.md") << ablation_markdown(rows);
                write_json(dir / "manifest.json", run_manifest(config, invoked));
            }
        } else if (*grad) {
            const auto report = gradcheck(gopt);
            for (const auto& e : report.entries) std::cout << e.name << ' ' << e.relative_error << '\n';
            std::cout << (report.passed ? "PASS" : "FAIL") << " max relative error " << report.max_error << " at "
                      << report.worst << '\n';
            if (!grad_json.empty()) emit(to_json(report), grad_json);
            return report.passed ? 0 : 1;
        } else if (*synth) {
            const auto ds = synth_generate(sopt);
            save_dataset(ds, synth_out);
            std::cout << ds.conversations.size() << " conversations, " << ds.utterance_count() << " utterances\n";
        } else if (*convert) {
            std::ifstream in(conv_in);
            if (!in) throw ParseError("cannot open " + conv_in);
            const auto ds = convert_jsonl(in, copt);
            save_dataset(ds, conv_out);
            std::cout << ds.conversations.size() << " conversations, " << ds.utterance_count() << " utterances\n";
        } else if (*dump_attn || *dump_gates_cmd) {
            auto ckpt = load_checkpoint(dump_ckpt);
            const auto ds = load_for_checkpoint(dump_data, ckpt.meta, ckpt.model.config());
            const auto& conv = pick(ds, dump_conv);
            emit(*dump_attn ? dump_attention(ckpt.model, conv, ds.header.dims)
                            : dump_gates(ckpt.model, conv, ds.header.dims),
                 dump_out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
