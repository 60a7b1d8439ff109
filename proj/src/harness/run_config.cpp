#include "sdt/harness/run_config.hpp"

#include <fstream>
#include <set>

#include "sdt/errors.hpp"

namespace sdt {

using nlohmann::json;

ModelConfig RunConfig::effective_model() const {
    ModelConfig m = model;
    if (ablation.no_pe) m.positional = false;
    if (ablation.no_se) m.speaker = false;
    if (ablation.no_intra) m.intra = false;
    if (ablation.no_inter) m.inter = false;
    if (ablation.no_ce) m.gammas[1] = 0.0;
    if (ablation.no_kl) m.gammas[2] = 0.0;
    m.modalities = ModalitySet::parse(ablation.modalities);
    m.fusion = ablation.fusion;
    return m;
}

void RunConfig::validate() const {
    effective_model().validate();
    if (ablation.no_intra && ablation.no_inter) throw ConfigError("no_intra and no_inter together leave no encoder");
    if (train.batch_size == 0) throw ConfigError("batch_size must be at least 1");
    if (!(train.lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
    if (!(train.weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
    if (!(train.val_fraction >= 0.0 && train.val_fraction < 1.0)) throw ConfigError("val_fraction must be in [0, 1)");
    if (train.eval_threads == 0) throw ConfigError("eval_threads must be at least 1");
    if (train.target_train_accuracy > 0.0 && !train.eval_train) {
        throw ConfigError("target_train_accuracy requires eval_train");
    }
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : j.items()) {
        if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

}  // namespace

json to_json(const ModelConfig& c) {
    return {
        {"feature_dims", c.feature_dims},
        {"d_model", c.d_model},
        {"heads", c.heads},
        {"d_ff", c.d_ff},
        {"layers", c.layers},
        {"kernel_sizes", c.kernel_sizes},
        {"dropout", c.dropout},
        {"tau", c.tau},
        {"gammas", c.gammas},
        {"num_classes", c.num_classes},
        {"num_speakers", c.num_speakers},
        {"max_len", c.max_len},
        {"ln_eps", c.ln_eps},
        {"positional", c.positional},
        {"speaker", c.speaker},
        {"intra", c.intra},
        {"inter", c.inter},
        {"modalities", c.modalities.str()},
        {"fusion", std::string(fusion_kind_name(c.fusion))},
        {"kl_backprop_teacher", c.kl_backprop_teacher},
    };
}

ModelConfig model_config_from_json(const json& j) {
    reject_unknown(j,
                   {"feature_dims", "d_model", "heads", "d_ff", "layers", "kernel_sizes", "dropout", "tau", "gammas",
                    "num_classes", "num_speakers", "max_len", "ln_eps", "positional", "speaker", "intra", "inter",
                    "modalities", "fusion", "kl_backprop_teacher"},
                   "model");
    ModelConfig c;
    read(j, "feature_dims", c.feature_dims);
    read(j, "d_model", c.d_model);
    read(j, "heads", c.heads);
    read(j, "d_ff", c.d_ff);
    read(j, "layers", c.layers);
    read(j, "kernel_sizes", c.kernel_sizes);
    read(j, "dropout", c.dropout);
    read(j, "tau", c.tau);
    read(j, "gammas", c.gammas);
    read(j, "num_classes", c.num_classes);
    read(j, "num_speakers", c.num_speakers);
    read(j, "max_len", c.max_len);
    read(j, "ln_eps", c.ln_eps);
    read(j, "positional", c.positional);
    read(j, "speaker", c.speaker);
    read(j, "intra", c.intra);
    read(j, "inter", c.inter);
    read(j, "kl_backprop_teacher", c.kl_backprop_teacher);
    std::string s;
    if (j.contains("modalities")) {
        read(j, "modalities", s);
        c.modalities = ModalitySet::parse(s);
    }
    if (j.contains("fusion")) {
        read(j, "fusion", s);
        c.fusion = parse_fusion_kind(s);
    }
    return c;
}

json to_json(const RunConfig& c) {
    const auto& t = c.train;
    const auto& a = c.ablation;
    return {
        {"dataset", c.dataset},
        {"test_dataset", c.test_dataset},
        {"output_dir", c.output_dir},
        {"model", to_json(c.model)},
        {"train",
         {{"lr", t.lr},
          {"weight_decay", t.weight_decay},
          {"batch_size", t.batch_size},
          {"epochs", t.epochs},
          {"patience", t.patience},
          {"val_fraction", t.val_fraction},
          {"seed", t.seed},
          {"shuffle", t.shuffle},
          {"eval_train", t.eval_train},
          {"target_train_accuracy", t.target_train_accuracy},
          {"eval_threads", t.eval_threads}}},
        {"ablation",
         {{"no_pe", a.no_pe},
          {"no_se", a.no_se},
          {"no_intra", a.no_intra},
          {"no_inter", a.no_inter},
          {"no_ce", a.no_ce},
          {"no_kl", a.no_kl},
          {"modalities", a.modalities},
          {"fusion", std::string(fusion_kind_name(a.fusion))}}},
    };
}

RunConfig run_config_from_json(const json& j) {
    reject_unknown(j, {"dataset", "test_dataset", "output_dir", "model", "train", "ablation"}, "config");
    RunConfig c;
    read(j, "dataset", c.dataset);
    read(j, "test_dataset", c.test_dataset);
    read(j, "output_dir", c.output_dir);
    if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
    if (j.contains("train")) {
        const auto& t = j.at("train");
        reject_unknown(t,
                       {"lr", "weight_decay", "batch_size", "epochs", "patience", "val_fraction", "seed", "shuffle",
                        "eval_train", "target_train_accuracy", "eval_threads"},
                       "train");
        read(t, "lr", c.train.lr);
        read(t, "weight_decay", c.train.weight_decay);
        read(t, "batch_size", c.train.batch_size);
        read(t, "epochs", c.train.epochs);
        read(t, "patience", c.train.patience);
        read(t, "val_fraction", c.train.val_fraction);
        read(t, "seed", c.train.seed);
        read(t, "shuffle", c.train.shuffle);
        read(t, "eval_train", c.train.eval_train);
        read(t, "target_train_accuracy", c.train.target_train_accuracy);
        read(t, "eval_threads", c.train.eval_threads);
    }
    if (j.contains("ablation")) {
        const auto& a = j.at("ablation");
        reject_unknown(a, {"no_pe", "no_se", "no_intra", "no_inter", "no_ce", "no_kl", "modalities", "fusion"},
                       "ablation");
        read(a, "no_pe", c.ablation.no_pe);
        read(a, "no_se", c.ablation.no_se);
        read(a, "no_intra", c.ablation.no_intra);
        read(a, "no_inter", c.ablation.no_inter);
        read(a, "no_ce", c.ablation.no_ce);
        read(a, "no_kl", c.ablation.no_kl);
        read(a, "modalities", c.ablation.modalities);
        std::string f;
        if (a.contains("fusion")) {
            read(a, "fusion", f);
            c.ablation.fusion = parse_fusion_kind(f);
        }
    }
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    try {
        return run_config_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void apply_override(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: " + assignment);
    std::string pointer = "/" + assignment.substr(0, eq);
    for (auto& ch : pointer)
        if (ch == '.') ch = '/';
    const std::string raw = assignment.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    config[json::json_pointer(pointer)] = std::move(value);
}

}  // namespace sdt
