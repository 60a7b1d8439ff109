#include "sdt/harness/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "sdt/errors.hpp"
#include "sdt/harness/run_config.hpp"

namespace sdt {

namespace {

constexpr char kMagic[8] = {'S', 'D', 'T', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(b, 8);
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw ParseError("checkpoint truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

std::string get_bytes(std::istream& is, std::uint64_t n) {
    if (n > (1ull << 32)) throw ParseError("checkpoint field too large");
    std::string s(n, '\0');
    if (!is.read(s.data(), static_cast<std::streamsize>(n))) throw ParseError("checkpoint truncated");
    return s;
}

}  // namespace

void save_checkpoint(const SdtModel& model, const CheckpointMeta& meta, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ParseError("cannot write checkpoint " + path.string());
    os.write(kMagic, 8);
    const nlohmann::json header = {{"model", to_json(model.config())},
                                   {"speaker_vocab", meta.speaker_vocab},
                                   {"label_names", meta.label_names},
                                   {"epoch", meta.epoch}};
    const std::string h = header.dump();
    put_u64(os, h.size());
    os.write(h.data(), static_cast<std::streamsize>(h.size()));
    const auto& params = model.parameters();
    put_u64(os, params.size());
    for (const auto& p : params) {
        put_u64(os, p.name.size());
        os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        put_u64(os, p.tensor.rank());
        for (auto d : p.tensor.shape()) put_u64(os, d);
        for (double v : p.tensor.data()) put_u64(os, std::bit_cast<std::uint64_t>(v));
    }
    if (!os) throw ParseError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("cannot open checkpoint " + path.string());
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw ParseError("not a checkpoint: " + path.string());
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(get_bytes(is, get_u64(is)));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("checkpoint header: ") + e.what());
    }
    CheckpointMeta meta;
    meta.speaker_vocab = header.value("speaker_vocab", std::vector<std::string>{});
    meta.label_names = header.value("label_names", std::vector<std::string>{});
    meta.epoch = header.value("epoch", std::size_t{0});
    SdtModel model(model_config_from_json(header.at("model")), 0);

    const auto count = get_u64(is);
    if (count != model.parameters().size()) {
        throw ParseError("checkpoint has " + std::to_string(count) + " parameters, model expects " +
                         std::to_string(model.parameters().size()));
    }
    for (std::uint64_t k = 0; k < count; ++k) {
        const std::string name = get_bytes(is, get_u64(is));
        const Parameter* p = model.find_parameter(name);
        if (!p) throw ParseError("checkpoint parameter '" + name + "' not in model");
        const auto rank = get_u64(is);
        Shape shape;
        for (std::uint64_t r = 0; r < rank; ++r) shape.push_back(get_u64(is));
        if (shape != p->tensor.shape()) {
            throw ParseError("checkpoint parameter '" + name + "' has shape " + shape_str(shape) + ", expected " +
                             shape_str(p->tensor.shape()));
        }
        Tensor t = p->tensor;
        for (auto& v : t.mutable_data()) v = std::bit_cast<double>(get_u64(is));
    }
    return {std::move(model), std::move(meta)};
}

std::vector<std::vector<double>> snapshot_parameters(const SdtModel& model) {
    std::vector<std::vector<double>> out;
    for (const auto& p : model.parameters()) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
    return out;
}

void restore_parameters(SdtModel& model, const std::vector<std::vector<double>>& values) {
    const auto& params = model.parameters();
    if (values.size() != params.size()) throw UsageError("snapshot does not match model");
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor t = params[i].tensor;
        auto d = t.mutable_data();
        if (d.size() != values[i].size()) throw UsageError("snapshot does not match model");
        std::copy(values[i].begin(), values[i].end(), d.begin());
    }
}

void copy_parameters(const SdtModel& from, SdtModel& to) {
    for (const auto& p : to.parameters()) {
        const Parameter* src = from.find_parameter(p.name);
        if (!src || src->tensor.shape() != p.tensor.shape()) throw UsageError("models differ at '" + p.name + "'");
        Tensor t = p.tensor;
        std::copy(src->tensor.data().begin(), src->tensor.data().end(), t.mutable_data().begin());
    }
}

}  // namespace sdt
