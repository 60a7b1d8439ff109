#include "sdt/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "sdt/errors.hpp"
#include "sdt/numcore/ops.hpp"
#include "sdt/numcore/rng.hpp"

namespace sdt {

using nlohmann::json;

namespace {

static_assert(std::numeric_limits<double>::is_iec559, "binary64 doubles required");

void write_le_double(std::ostream& os, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    os.write(buf, 8);
}

double read_le_double(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

}  // namespace

std::size_t Dataset::utterance_count() const {
    std::size_t n = 0;
    for (const auto& c : conversations) n += c.size();
    return n;
}

void Dataset::validate() const {
    if (conversations.empty()) throw ParseError("dataset must contain >=1 conversation");
    for (auto d : header.dims)
        if (d == 0) throw ParseError("feature dimensions must be positive");
    if (header.num_classes < 2) throw ParseError("dataset needs at least two classes");
    if (header.label_names.size() != header.num_classes) {
        throw ParseError("label_names has " + std::to_string(header.label_names.size()) + " entries, expected " +
                         std::to_string(header.num_classes));
    }
    std::size_t record = 0;
    for (std::size_t c = 0; c < conversations.size(); ++c) {
        const auto& conv = conversations[c];
        if (conv.utterances.empty()) throw ParseError("conversation " + std::to_string(c) + " is empty");
        for (const auto& u : conv.utterances) {
            for (Modality m : kModalities) {
                if (u.feature(m).size() != header.dim(m)) {
                    throw ParseError("record " + std::to_string(record) + ": " + std::string(name_of(m)) +
                                     " feature has " + std::to_string(u.feature(m).size()) + " values, expected " +
                                     std::to_string(header.dim(m)));
                }
            }
            if (u.label < 0 || static_cast<std::size_t>(u.label) >= header.num_classes) {
                throw ParseError("record " + std::to_string(record) + ": unknown label " + std::to_string(u.label));
            }
            if (u.speaker < 0) throw ParseError("record " + std::to_string(record) + ": negative speaker id");
            ++record;
        }
    }
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
    dataset.validate();
    std::filesystem::create_directories(dir);
    json header;
    header["format"] = "sdt-dataset";
    header["version"] = 1;
    header["name"] = dataset.header.name;
    header["dims"] = dataset.header.dims;
    header["num_classes"] = dataset.header.num_classes;
    header["label_names"] = dataset.header.label_names;
    header["speaker_vocab"] = dataset.header.speaker_vocab;
    json convs = json::array();

    std::ofstream bin(dir / "data.bin", std::ios::binary | std::ios::trunc);
    if (!bin) throw ParseError("cannot write " + (dir / "data.bin").string());
    std::uint64_t offset = 0;
    const std::size_t per_utt = dataset.header.dims[0] + dataset.header.dims[1] + dataset.header.dims[2];
    for (const auto& conv : dataset.conversations) {
        json c;
        c["id"] = conv.id;
        c["offset"] = offset;
        c["length"] = conv.size();
        std::vector<std::int64_t> speakers;
        std::vector<int> labels;
        for (const auto& u : conv.utterances) {
            speakers.push_back(u.speaker);
            labels.push_back(u.label);
            for (Modality m : kModalities)
                for (double v : u.feature(m)) write_le_double(bin, v);
        }
        c["speakers"] = speakers;
        c["labels"] = labels;
        convs.push_back(std::move(c));
        offset += conv.size() * per_utt * 8;
    }
    header["conversations"] = std::move(convs);
    std::ofstream hj(dir / "header.json", std::ios::trunc);
    if (!hj) throw ParseError("cannot write " + (dir / "header.json").string());
    hj << header.dump(1) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream hj(dir / "header.json");
    if (!hj) throw ParseError("cannot open " + (dir / "header.json").string());
    json header;
    try {
        header = json::parse(hj);
    } catch (const json::exception& e) {
        throw ParseError(std::string("header.json: ") + e.what());
    }
    std::ifstream bin(dir / "data.bin", std::ios::binary);
    if (!bin) throw ParseError("cannot open " + (dir / "data.bin").string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

    Dataset ds;
    try {
        if (header.value("format", std::string()) != "sdt-dataset") throw ParseError("header.json: not an sdt dataset");
        ds.header.name = header.at("name").get<std::string>();
        ds.header.dims = header.at("dims").get<std::array<std::size_t, 3>>();
        ds.header.num_classes = header.at("num_classes").get<std::size_t>();
        ds.header.label_names = header.at("label_names").get<std::vector<std::string>>();
        ds.header.speaker_vocab = header.value("speaker_vocab", std::vector<std::string>{});
        const auto& convs = header.at("conversations");
        if (!convs.is_array() || convs.empty()) throw ParseError("dataset must contain >=1 conversation");
        const std::size_t per_utt = ds.header.dims[0] + ds.header.dims[1] + ds.header.dims[2];
        std::size_t record = 0;
        for (const auto& c : convs) {
            Conversation conv;
            conv.id = c.at("id").get<std::string>();
            const auto offset = c.at("offset").get<std::uint64_t>();
            const auto length = c.at("length").get<std::size_t>();
            const auto speakers = c.at("speakers").get<std::vector<std::int64_t>>();
            const auto labels = c.at("labels").get<std::vector<int>>();
            if (speakers.size() != length || labels.size() != length) {
                throw ParseError("record " + std::to_string(record) + ": conversation '" + conv.id +
                                 "' has mismatched speaker/label counts");
            }
            if (offset + length * per_utt * 8 > bytes.size()) {
                throw ParseError("record " + std::to_string(record) + ": conversation '" + conv.id +
                                 "' runs past the end of data.bin");
            }
            const unsigned char* p = bytes.data() + offset;
            for (std::size_t i = 0; i < length; ++i, ++record) {
                Utterance u;
                u.speaker = speakers[i];
                u.label = labels[i];
                for (Modality m : kModalities) {
                    auto& f = u.features[index_of(m)];
                    f.resize(ds.header.dim(m));
                    for (auto& v : f) {
                        v = read_le_double(p);
                        p += 8;
                    }
                }
                conv.utterances.push_back(std::move(u));
            }
            ds.conversations.push_back(std::move(conv));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("header.json: ") + e.what());
    }
    ds.validate();
    return ds;
}

Dataset convert_jsonl(std::istream& in, const ConvertOptions& options) {
    Dataset ds;
    ds.header.name = options.name;
    ds.header.label_names = options.label_names;
    std::map<std::string, int> label_ids;
    for (std::size_t i = 0; i < options.label_names.size(); ++i) label_ids[options.label_names[i]] = static_cast<int>(i);
    std::unordered_map<std::string, std::int64_t> speaker_ids;
    std::string line;
    std::size_t line_no = 0, record = 0;
    bool dims_known = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            Conversation conv;
            conv.id = j.contains("id") ? j.at("id").get<std::string>() : "conv" + std::to_string(ds.conversations.size());
            for (const auto& ju : j.at("utterances")) {
                Utterance u;
                const std::string spk = ju.at("speaker").is_string() ? ju.at("speaker").get<std::string>()
                                                                      : ju.at("speaker").dump();
                auto [it, inserted] = speaker_ids.try_emplace(spk, static_cast<std::int64_t>(speaker_ids.size()));
                if (inserted) ds.header.speaker_vocab.push_back(spk);
                u.speaker = it->second;
                const auto& jl = ju.at("label");
                if (jl.is_number_integer()) {
                    u.label = jl.get<int>();
                } else {
                    const auto name = jl.get<std::string>();
                    auto lit = label_ids.find(name);
                    if (lit == label_ids.end()) {
                        if (!options.label_names.empty()) {
                            throw ParseError("record " + std::to_string(record) + ": unknown label '" + name + "'");
                        }
                        lit = label_ids.emplace(name, static_cast<int>(ds.header.label_names.size())).first;
                        ds.header.label_names.push_back(name);
                    }
                    u.label = lit->second;
                }
                constexpr std::array<const char*, 3> keys{"text", "audio", "visual"};
                for (Modality m : kModalities) {
                    u.features[index_of(m)] = ju.at(keys[index_of(m)]).get<std::vector<double>>();
                    if (!dims_known) ds.header.dims[index_of(m)] = u.features[index_of(m)].size();
                }
                dims_known = true;
                conv.utterances.push_back(std::move(u));
                ++record;
            }
            ds.conversations.push_back(std::move(conv));
        } catch (const json::exception& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (ds.header.label_names.empty()) {
        int max_label = -1;
        for (const auto& c : ds.conversations)
            for (const auto& u : c.utterances) max_label = std::max(max_label, u.label);
        for (int i = 0; i <= max_label; ++i) ds.header.label_names.push_back("class" + std::to_string(i));
    }
    ds.header.num_classes = ds.header.label_names.size();
    ds.validate();
    return ds;
}

Dataset synth_generate(const SynthOptions& o) {
    if (o.conversations == 0 || o.min_length == 0 || o.max_length < o.min_length || o.speakers == 0 ||
        o.num_classes < 2) {
        throw ConfigError("synthetic dataset parameters must be positive");
    }
    for (auto d : o.dims)
        if (d == 0) throw ConfigError("synthetic feature dimensions must be positive");
    Rng root(o.seed);
    const Rng sample_root = o.sample_seed ? Rng(*o.sample_seed) : root;
    Rng mean_rng = root.split(1), noise_rng = sample_root.split(2), label_rng = sample_root.split(3);

    Dataset ds;
    ds.header.name = "synthetic";
    ds.header.dims = o.dims;
    ds.header.num_classes = o.num_classes;
    for (std::size_t c = 0; c < o.num_classes; ++c) ds.header.label_names.push_back("class" + std::to_string(c));
    for (std::size_t s = 0; s < o.speakers; ++s) ds.header.speaker_vocab.push_back("spk" + std::to_string(s));

    // means[class][modality]
    std::vector<std::array<std::vector<double>, 3>> means(o.num_classes);
    for (auto& cm : means)
        for (Modality m : kModalities) {
            cm[index_of(m)].resize(o.dims[index_of(m)]);
            for (auto& v : cm[index_of(m)]) v = mean_rng.normal();
        }
    const double noise = 1.0 - o.separability;

    for (std::size_t c = 0; c < o.conversations; ++c) {
        Conversation conv;
        conv.id = "synth" + std::to_string(c);
        const std::size_t len = o.min_length + static_cast<std::size_t>(label_rng.below(o.max_length - o.min_length + 1));
        std::vector<int> last_label(o.speakers, -1);
        for (std::size_t i = 0; i < len; ++i) {
            Utterance u;
            u.speaker = static_cast<std::int64_t>(label_rng.below(o.speakers));
            int& prev = last_label[static_cast<std::size_t>(u.speaker)];
            if (prev < 0) {
                u.label = static_cast<int>(label_rng.below(o.num_classes));
            } else if (label_rng.uniform() < o.shift_rate) {
                // Uniform over the other classes.
                auto other = static_cast<int>(label_rng.below(o.num_classes - 1));
                u.label = other >= prev ? other + 1 : other;
            } else {
                u.label = prev;
            }
            prev = u.label;
            for (Modality m : kModalities) {
                const auto& mu = means[static_cast<std::size_t>(u.label)][index_of(m)];
                auto& f = u.features[index_of(m)];
                f.resize(mu.size());
                for (std::size_t k = 0; k < mu.size(); ++k) f[k] = mu[k] + (noise > 0 ? noise * noise_rng.normal() : 0.0);
            }
            conv.utterances.push_back(std::move(u));
        }
        ds.conversations.push_back(std::move(conv));
    }
    return ds;
}

std::size_t Batch::real_utterances() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

ConversationInput Batch::conversation(std::size_t b) const {
    if (b >= size) throw DimensionError("batch index out of range");
    ConversationInput in;
    for (Modality m : kModalities) {
        const Tensor& f = features[index_of(m)];
        if (f.defined()) in.features[index_of(m)] = sdt::select(f, b);
    }
    in.speakers.assign(speakers.begin() + static_cast<std::ptrdiff_t>(b * max_len),
                       speakers.begin() + static_cast<std::ptrdiff_t>((b + 1) * max_len));
    in.valid.assign(mask.begin() + static_cast<std::ptrdiff_t>(b * max_len),
                    mask.begin() + static_cast<std::ptrdiff_t>((b + 1) * max_len));
    return in;
}

std::span<const int> Batch::labels_of(std::size_t b) const {
    return std::span<const int>(labels).subspan(b * max_len, max_len);
}

std::vector<Batch> make_batches(const std::vector<Conversation>& conversations, std::size_t batch_size,
                                std::optional<std::uint64_t> shuffle_seed, const std::array<std::size_t, 3>* dims) {
    if (batch_size == 0) throw ConfigError("batch size must be at least 1");
    std::vector<std::size_t> order(conversations.size());
    std::iota(order.begin(), order.end(), 0);
    if (shuffle_seed) order = permutation(conversations.size(), *shuffle_seed);

    std::array<std::size_t, 3> d{};
    if (dims) {
        d = *dims;
    } else if (!conversations.empty() && !conversations.front().utterances.empty()) {
        for (Modality m : kModalities) d[index_of(m)] = conversations.front().utterances.front().feature(m).size();
    }

    std::vector<Batch> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(order.size(), start + batch_size);
        Batch b;
        b.size = end - start;
        for (std::size_t k = start; k < end; ++k) b.max_len = std::max(b.max_len, conversations[order[k]].size());
        const std::size_t cells = b.size * b.max_len;
        b.mask.assign(cells, 0);
        b.labels.assign(cells, -1);
        b.speakers.assign(cells, 0);
        std::array<std::vector<double>, 3> feats;
        for (Modality m : kModalities) feats[index_of(m)].assign(cells * d[index_of(m)], 0.0);
        for (std::size_t k = start; k < end; ++k) {
            const std::size_t row = k - start;
            const auto& conv = conversations[order[k]];
            b.conversation_index.push_back(order[k]);
            for (std::size_t i = 0; i < conv.size(); ++i) {
                const auto& u = conv.utterances[i];
                const std::size_t cell = row * b.max_len + i;
                b.mask[cell] = 1;
                b.labels[cell] = u.label;
                b.speakers[cell] = u.speaker;
                for (Modality m : kModalities) {
                    const std::size_t dm = d[index_of(m)];
                    if (u.feature(m).size() != dm) throw DimensionError("utterance feature size differs from dataset");
                    std::copy(u.feature(m).begin(), u.feature(m).end(),
                              feats[index_of(m)].begin() + static_cast<std::ptrdiff_t>(cell * dm));
                }
            }
        }
        for (Modality m : kModalities) {
            b.features[index_of(m)] =
                Tensor::from({b.size, b.max_len, d[index_of(m)]}, std::move(feats[index_of(m)]));
        }
        batches.push_back(std::move(b));
    }
    return batches;
}

ConversationInput to_input(const Conversation& conversation, const std::array<std::size_t, 3>& dims) {
    const std::size_t n = conversation.size();
    ConversationInput in;
    for (Modality m : kModalities) {
        const std::size_t dm = dims[index_of(m)];
        std::vector<double> v;
        v.reserve(n * dm);
        for (const auto& u : conversation.utterances) {
            if (u.feature(m).size() != dm) throw DimensionError("utterance feature size differs from dataset");
            v.insert(v.end(), u.feature(m).begin(), u.feature(m).end());
        }
        in.features[index_of(m)] = Tensor::from({n, dm}, std::move(v));
    }
    for (const auto& u : conversation.utterances) in.speakers.push_back(u.speaker);
    in.valid.assign(n, 1);
    return in;
}

double ShiftSplit::shift_accuracy() const {
    return shift_count ? static_cast<double>(shift_correct) / static_cast<double>(shift_count) : 0.0;
}

double ShiftSplit::noshift_accuracy() const {
    return noshift_count ? static_cast<double>(noshift_correct) / static_cast<double>(noshift_count) : 0.0;
}

ShiftSplit emotional_shift_split(const std::vector<Conversation>& conversations,
                                 const std::vector<std::vector<int>>& predictions) {
    if (predictions.size() != conversations.size()) throw DimensionError("one prediction list per conversation");
    ShiftSplit out;
    for (std::size_t c = 0; c < conversations.size(); ++c) {
        const auto& conv = conversations[c];
        if (predictions[c].size() != conv.size()) throw DimensionError("predictions misaligned with utterances");
        std::unordered_map<std::int64_t, int> previous;
        for (std::size_t i = 0; i < conv.size(); ++i) {
            const auto& u = conv.utterances[i];
            auto it = previous.find(u.speaker);
            if (it != previous.end()) {
                const bool correct = predictions[c][i] == u.label;
                if (it->second != u.label) {
                    ++out.shift_count;
                    out.shift_correct += correct;
                } else {
                    ++out.noshift_count;
                    out.noshift_correct += correct;
                }
            }
            previous[u.speaker] = u.label;
        }
    }
    return out;
}

std::pair<std::vector<Conversation>, std::vector<Conversation>> split_train_val(
    const std::vector<Conversation>& conversations, double val_fraction, std::uint64_t seed) {
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("val fraction must be in [0, 1)");
    const auto n_val = static_cast<std::size_t>(std::lround(val_fraction * static_cast<double>(conversations.size())));
    auto order = permutation(conversations.size(), seed);
    std::vector<std::uint8_t> is_val(conversations.size(), 0);
    for (std::size_t k = 0; k < n_val; ++k) is_val[order[k]] = 1;
    std::pair<std::vector<Conversation>, std::vector<Conversation>> out;
    for (std::size_t i = 0; i < conversations.size(); ++i) (is_val[i] ? out.second : out.first).push_back(conversations[i]);
    return out;
}

void remap_speakers(Dataset& dataset, const std::vector<std::string>& vocab) {
    std::unordered_map<std::string, std::int64_t> index;
    for (std::size_t i = 0; i < vocab.size(); ++i) index.emplace(vocab[i], static_cast<std::int64_t>(i));
    const auto unk = static_cast<std::int64_t>(vocab.size());
    for (auto& conv : dataset.conversations) {
        for (auto& u : conv.utterances) {
            const auto s = static_cast<std::size_t>(u.speaker);
            if (s < dataset.header.speaker_vocab.size()) {
                auto it = index.find(dataset.header.speaker_vocab[s]);
                u.speaker = it == index.end() ? unk : it->second;
            } else {
                u.speaker = unk;
            }
        }
    }
    dataset.header.speaker_vocab = vocab;
}

}  // namespace sdt
