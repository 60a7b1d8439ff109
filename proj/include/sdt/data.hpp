#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "sdt/model.hpp"
#include "sdt/modality.hpp"
#include "sdt/numcore/tensor.hpp"

namespace sdt {

struct Utterance {
    std::array<std::vector<double>, 3> features;  // t, a, v
    std::int64_t speaker = 0;                     // index into DatasetHeader::speaker_vocab
    int label = 0;

    const std::vector<double>& feature(Modality m) const { return features[index_of(m)]; }
};

struct Conversation {
    std::string id;
    std::vector<Utterance> utterances;

    std::size_t size() const { return utterances.size(); }
};

struct DatasetHeader {
    std::string name;
    std::array<std::size_t, 3> dims{};  // d_t, d_a, d_v
    std::size_t num_classes = 0;
    std::vector<std::string> label_names;
    std::vector<std::string> speaker_vocab;

    std::size_t dim(Modality m) const { return dims[index_of(m)]; }
};

struct Dataset {
    DatasetHeader header;
    std::vector<Conversation> conversations;

    std::size_t utterance_count() const;
    /// Throws ParseError describing the first inconsistency.
    void validate() const;
};

/// On-disk layout, a directory holding:
///   header.json  {"format": "sdt-dataset", "version": 1, "name", "dims": [d_t, d_a, d_v],
///                 "num_classes", "label_names": [...], "speaker_vocab": [...],
///                 "conversations": [{"id", "offset", "length", "speakers": [...], "labels": [...]}]}
///   data.bin     little-endian IEEE-754 binary64 values; for each conversation
///                in header order, for each utterance, d_t text values, then
///                d_a audio values, then d_v visual values. "offset" is the
///                byte offset of the conversation's first value.
Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Converts JSON lines, one conversation per line:
///   {"id": "c1", "utterances": [{"speaker": "A", "label": "joy" | 3,
///                                "text": [...], "audio": [...], "visual": [...]}]}
/// String labels are resolved against `label_names` (or, when empty, assigned
/// in order of first appearance). Speakers map to ids in first-appearance order.
struct ConvertOptions {
    std::string name = "converted";
    std::vector<std::string> label_names;
};
Dataset convert_jsonl(std::istream& in, const ConvertOptions& options);

struct SynthOptions {
    std::uint64_t seed = 0;
    // Draws utterances from this seed while keeping the class means of `seed`,
    // so train and test sets share one underlying distribution.
    std::optional<std::uint64_t> sample_seed;
    std::size_t conversations = 8;
    std::size_t min_length = 10;
    std::size_t max_length = 10;
    std::size_t speakers = 2;
    std::size_t num_classes = 6;
    std::array<std::size_t, 3> dims{16, 12, 8};
    // Noise standard deviation is (1 - separability).
    double separability = 1.0;
    // Probability that a speaker's next utterance changes emotion.
    double shift_rate = 0.3;
};

/// Class-conditional Gaussian features: every (class, modality) pair gets a
/// mean drawn from N(0, 1); each utterance is its class mean plus
/// N(0, (1 - separability)^2) noise. Speakers are drawn uniformly per
/// utterance; a speaker's first label is uniform and each later one shifts to
/// a different uniform class with probability shift_rate.
Dataset synth_generate(const SynthOptions& options);

/// Padded batch of whole conversations.
struct Batch {
    std::size_t size = 0;     // B
    std::size_t max_len = 0;  // N_max
    std::array<Tensor, 3> features;       // [B x N_max x d_m], zero on padding
    std::vector<std::uint8_t> mask;       // [B x N_max], 1 on real utterances
    std::vector<int> labels;              // [B x N_max], -1 on padding
    std::vector<std::int64_t> speakers;   // [B x N_max], 0 on padding
    std::vector<std::size_t> conversation_index;  // source index per row b

    std::size_t real_utterances() const;
    /// Slice b as model input (N_max rows with its padding mask).
    ConversationInput conversation(std::size_t b) const;
    std::span<const int> labels_of(std::size_t b) const;
};

/// Groups conversations into padded batches. With a shuffle seed the order is
/// a Fisher-Yates permutation driven by Rng(seed); otherwise input order.
std::vector<Batch> make_batches(const std::vector<Conversation>& conversations, std::size_t batch_size,
                                std::optional<std::uint64_t> shuffle_seed = {},
                                const std::array<std::size_t, 3>* dims = nullptr);

/// Unpadded single-conversation input.
ConversationInput to_input(const Conversation& conversation, const std::array<std::size_t, 3>& dims);

struct ShiftSplit {
    std::size_t shift_count = 0;
    std::size_t shift_correct = 0;
    std::size_t noshift_count = 0;
    std::size_t noshift_correct = 0;
    double shift_accuracy() const;
    double noshift_accuracy() const;
};

/// Buckets every utterance that has an earlier utterance by the same speaker
/// in its conversation: "shift" when its label differs from that previous
/// same-speaker utterance, otherwise "no shift". predictions[c][i] aligns to
/// conversations[c].utterances[i].
ShiftSplit emotional_shift_split(const std::vector<Conversation>& conversations,
                                 const std::vector<std::vector<int>>& predictions);

/// Deterministic split of whole conversations; val gets round(fraction * n)
/// conversations chosen by an Rng(seed) permutation, order otherwise kept.
std::pair<std::vector<Conversation>, std::vector<Conversation>> split_train_val(
    const std::vector<Conversation>& conversations, double val_fraction, std::uint64_t seed);

/// Re-expresses speaker ids of `dataset` in `vocab` by name; unknown names
/// get id vocab.size() (the UNK slot).
void remap_speakers(Dataset& dataset, const std::vector<std::string>& vocab);

}  // namespace sdt
