#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "sdt/data.hpp"
#include "sdt/errors.hpp"

using namespace sdt;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        path_ = fs::temp_directory_path() / ("sdt_data_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                                             ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

Conversation make_conversation(const std::string& id, std::vector<std::int64_t> speakers, std::vector<int> labels,
                               std::array<std::size_t, 3> dims = {2, 1, 1}) {
    Conversation c;
    c.id = id;
    for (std::size_t i = 0; i < speakers.size(); ++i) {
        Utterance u;
        u.speaker = speakers[i];
        u.label = labels[i];
        for (std::size_t m = 0; m < 3; ++m) u.features[m].assign(dims[m], static_cast<double>(i) + 0.5 * m);
        c.utterances.push_back(std::move(u));
    }
    return c;
}

bool same(const Dataset& a, const Dataset& b) {
    if (a.header.name != b.header.name || a.header.dims != b.header.dims ||
        a.header.num_classes != b.header.num_classes || a.header.label_names != b.header.label_names ||
        a.header.speaker_vocab != b.header.speaker_vocab || a.conversations.size() != b.conversations.size()) {
        return false;
    }
    for (std::size_t c = 0; c < a.conversations.size(); ++c) {
        const auto& x = a.conversations[c];
        const auto& y = b.conversations[c];
        if (x.id != y.id || x.size() != y.size()) return false;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const auto& u = x.utterances[i];
            const auto& v = y.utterances[i];
            if (u.speaker != v.speaker || u.label != v.label || u.features != v.features) return false;
        }
    }
    return true;
}

}  // namespace

TEST(Dataset, RoundTripIsExact) {
    SynthOptions o;
    o.seed = 3;
    o.conversations = 4;
    o.min_length = 2;
    o.max_length = 6;
    o.separability = 0.6;
    auto ds = synth_generate(o);
    TempDir dir;
    save_dataset(ds, dir.path());
    auto back = load_dataset(dir.path());
    EXPECT_TRUE(same(ds, back));
}

TEST(Dataset, RejectsEmptyAndInconsistentInput) {
    Dataset empty;
    empty.header.dims = {1, 1, 1};
    empty.header.num_classes = 2;
    empty.header.label_names = {"a", "b"};
    try {
        empty.validate();
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_STREQ(e.what(), "dataset must contain >=1 conversation");
    }
    auto ds = empty;
    ds.conversations.push_back(make_conversation("c", {0, 1}, {0, 1}, {1, 1, 1}));
    ds.conversations[0].utterances[1].features[1].push_back(2.0);
    EXPECT_THROW(ds.validate(), ParseError);
    ds.conversations[0].utterances[1].features[1].pop_back();
    ds.conversations[0].utterances[0].label = 5;
    EXPECT_THROW(ds.validate(), ParseError);
}

TEST(Dataset, TruncatedBinaryIsReported) {
    auto ds = synth_generate({});
    TempDir dir;
    save_dataset(ds, dir.path());
    fs::resize_file(dir.path() / "data.bin", fs::file_size(dir.path() / "data.bin") - 8);
    EXPECT_THROW(load_dataset(dir.path()), ParseError);
    EXPECT_THROW(load_dataset(dir.path() / "missing"), ParseError);
}

TEST(Dataset, ReferenceShapedHeader) {
    SynthOptions o;
    o.dims = {1024, 1582, 342};
    o.conversations = 1;
    o.min_length = o.max_length = 2;
    auto ds = synth_generate(o);
    TempDir dir;
    save_dataset(ds, dir.path());
    auto back = load_dataset(dir.path());
    EXPECT_EQ(back.header.dims, (std::array<std::size_t, 3>{1024, 1582, 342}));
    EXPECT_EQ(back.header.num_classes, 6u);
}

TEST(Synth, DeterministicAndNoiseFree) {
    SynthOptions o;
    o.seed = 11;
    auto a = synth_generate(o);
    auto b = synth_generate(o);
    EXPECT_TRUE(same(a, b));
    o.seed = 12;
    EXPECT_FALSE(same(a, synth_generate(o)));

    TempDir d1, d2;
    save_dataset(a, d1.path() / "x");
    save_dataset(b, d2.path() / "x");
    auto slurp = [](const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    };
    EXPECT_EQ(slurp(d1.path() / "x" / "data.bin"), slurp(d2.path() / "x" / "data.bin"));

    // same class => identical features per modality
    std::map<int, const Utterance*> first;
    for (const auto& c : a.conversations)
        for (const auto& u : c.utterances) {
            auto [it, inserted] = first.emplace(u.label, &u);
            if (!inserted) EXPECT_EQ(u.features, it->second->features);
        }
}

TEST(Synth, NearestClassMeanIsPerfect) {
    SynthOptions o;
    o.seed = 5;
    auto ds = synth_generate(o);
    for (Modality m : kModalities) {
        std::vector<std::vector<double>> mean(o.num_classes, std::vector<double>(o.dims[index_of(m)], 0.0));
        std::vector<double> count(o.num_classes, 0.0);
        for (const auto& c : ds.conversations)
            for (const auto& u : c.utterances) {
                for (std::size_t k = 0; k < mean[0].size(); ++k) mean[u.label][k] += u.feature(m)[k];
                count[u.label] += 1;
            }
        for (std::size_t c = 0; c < o.num_classes; ++c)
            for (auto& v : mean[c]) v = count[c] > 0 ? v / count[c] : 1e300;
        for (const auto& c : ds.conversations)
            for (const auto& u : c.utterances) {
                int best = -1;
                double best_d = INFINITY;
                for (std::size_t cl = 0; cl < o.num_classes; ++cl) {
                    if (count[cl] == 0) continue;
                    double dist = 0.0;
                    for (std::size_t k = 0; k < mean[cl].size(); ++k)
                        dist += (u.feature(m)[k] - mean[cl][k]) * (u.feature(m)[k] - mean[cl][k]);
                    if (dist < best_d) best_d = dist, best = static_cast<int>(cl);
                }
                EXPECT_EQ(best, u.label);
            }
    }
}

TEST(Synth, ShiftRateExtremes) {
    SynthOptions o;
    o.shift_rate = 0.0;
    auto calm = synth_generate(o);
    std::vector<std::vector<int>> truth;
    for (const auto& c : calm.conversations) {
        truth.emplace_back();
        for (const auto& u : c.utterances) truth.back().push_back(u.label);
    }
    EXPECT_EQ(emotional_shift_split(calm.conversations, truth).shift_count, 0u);
    o.shift_rate = 1.0;
    auto busy = synth_generate(o);
    truth.clear();
    for (const auto& c : busy.conversations) {
        truth.emplace_back();
        for (const auto& u : c.utterances) truth.back().push_back(u.label);
    }
    EXPECT_EQ(emotional_shift_split(busy.conversations, truth).noshift_count, 0u);
}

TEST(Batching, UnitBatchesHaveNoPadding) {
    auto ds = synth_generate({.conversations = 3, .min_length = 2, .max_length = 5});
    auto batches = make_batches(ds.conversations, 1);
    ASSERT_EQ(batches.size(), 3u);
    for (const auto& b : batches) {
        EXPECT_EQ(b.max_len, ds.conversations[b.conversation_index[0]].size());
        for (auto v : b.mask) EXPECT_EQ(v, 1);
    }
}

TEST(Batching, MixedLengthsPadTail) {
    std::vector<Conversation> convs{make_conversation("a", {0, 1, 0}, {1, 2, 3}),
                                    make_conversation("b", {1, 1, 0, 0, 1}, {0, 0, 1, 1, 2})};
    auto batches = make_batches(convs, 2);
    ASSERT_EQ(batches.size(), 1u);
    const auto& b = batches[0];
    EXPECT_EQ(b.max_len, 5u);
    EXPECT_EQ(b.mask, (std::vector<std::uint8_t>{1, 1, 1, 0, 0, 1, 1, 1, 1, 1}));
    EXPECT_EQ(b.labels[3], -1);
    EXPECT_EQ(b.features[0].shape(), (Shape{2, 5, 2}));
    EXPECT_EQ(b.features[0].at((0 * 5 + 4) * 2), 0.0);
    auto in = b.conversation(0);
    EXPECT_EQ(in.length(), 5u);
    EXPECT_EQ(in.real_length(), 3u);
    EXPECT_EQ(in.features[0].at(2, 0), convs[0].utterances[2].features[0][0]);
}

TEST(Batching, MaskCountsEveryUtteranceOnce) {
    auto ds = synth_generate({.seed = 2, .conversations = 11, .min_length = 1, .max_length = 9});
    auto batches = make_batches(ds.conversations, 3, 77);
    std::size_t total = 0;
    std::vector<int> seen(ds.conversations.size(), 0);
    for (const auto& b : batches) {
        total += b.real_utterances();
        for (auto idx : b.conversation_index) ++seen[idx];
    }
    EXPECT_EQ(total, ds.utterance_count());
    for (int s : seen) EXPECT_EQ(s, 1);
    auto again = make_batches(ds.conversations, 3, 77);
    for (std::size_t i = 0; i < batches.size(); ++i) EXPECT_EQ(again[i].conversation_index, batches[i].conversation_index);
    EXPECT_THROW(make_batches(ds.conversations, 0), ConfigError);
}

TEST(EmotionalShift, SpeakerPairsAreBucketed) {
    // Speaker A: joy, anger, anger. The first is excluded, then one shift and one no-shift.
    auto conv = make_conversation("a", {0, 0, 0}, {0, 1, 1});
    auto split = emotional_shift_split({conv}, {{0, 1, 1}});
    EXPECT_EQ(split.shift_count, 1u);
    EXPECT_EQ(split.noshift_count, 1u);
    auto flat = make_conversation("b", {0, 1, 0, 1}, {2, 3, 2, 3});
    EXPECT_EQ(emotional_shift_split({flat}, {{0, 0, 0, 0}}).shift_count, 0u);
}

TEST(EmotionalShift, SixUtteranceFixture) {
    // A: u0 joy, u2 anger (shift), u4 anger (no shift)
    // B: u1 neutral, u3 neutral (no shift), u5 sad (shift)
    auto conv = make_conversation("f", {0, 1, 0, 1, 0, 1}, {0, 1, 2, 1, 2, 3});
    auto split = emotional_shift_split({conv}, {{0, 1, 1, 1, 2, 3}});
    EXPECT_EQ(split.shift_count, 2u);
    EXPECT_EQ(split.shift_correct, 1u);
    EXPECT_EQ(split.noshift_count, 2u);
    EXPECT_EQ(split.noshift_correct, 2u);
    EXPECT_EQ(split.shift_accuracy(), 0.5);
    EXPECT_EQ(split.noshift_accuracy(), 1.0);
    EXPECT_THROW(emotional_shift_split({conv}, {{0, 1}}), DimensionError);
}

TEST(Convert, JsonLines) {
    std::istringstream in(
        R"({"id": "d1", "utterances": [{"speaker": "Ross", "label": "joy", "text": [1, 2], "audio": [3], "visual": [4]},)"
        R"( {"speaker": "Rachel", "label": "sad", "text": [5, 6], "audio": [7], "visual": [8]}]})"
        "\n\n"
        R"({"id": "d2", "utterances": [{"speaker": "Rachel", "label": "joy", "text": [0, 0], "audio": [0], "visual": [1]}]})"
        "\n");
    auto ds = convert_jsonl(in, {.name = "toy"});
    EXPECT_EQ(ds.header.name, "toy");
    EXPECT_EQ(ds.header.dims, (std::array<std::size_t, 3>{2, 1, 1}));
    EXPECT_EQ(ds.header.label_names, (std::vector<std::string>{"joy", "sad"}));
    EXPECT_EQ(ds.header.speaker_vocab, (std::vector<std::string>{"Ross", "Rachel"}));
    ASSERT_EQ(ds.conversations.size(), 2u);
    EXPECT_EQ(ds.conversations[1].utterances[0].speaker, 1);
    EXPECT_EQ(ds.conversations[0].utterances[1].label, 1);
    EXPECT_EQ(ds.conversations[0].utterances[1].features[0], (std::vector<double>{5, 6}));

    std::istringstream bad_label(R"({"utterances": [{"speaker": "x", "label": "meh", "text": [1], "audio": [1], "visual": [1]}]})");
    EXPECT_THROW(convert_jsonl(bad_label, {.label_names = {"joy", "sad"}}), ParseError);
    std::istringstream bad_json("{not json}\n");
    EXPECT_THROW(convert_jsonl(bad_json, {}), ParseError);
    std::istringstream ragged(
        R"({"utterances": [{"speaker": "x", "label": 0, "text": [1], "audio": [1], "visual": [1]},)"
        R"( {"speaker": "x", "label": 1, "text": [1, 2], "audio": [1], "visual": [1]}]})");
    EXPECT_THROW(convert_jsonl(ragged, {}), ParseError);
}

TEST(Split, DeterministicWholeConversations) {
    auto ds = synth_generate({.conversations = 10});
    auto [train, val] = split_train_val(ds.conversations, 0.2, 4);
    EXPECT_EQ(train.size(), 8u);
    EXPECT_EQ(val.size(), 2u);
    auto [train2, val2] = split_train_val(ds.conversations, 0.2, 4);
    for (std::size_t i = 0; i < val.size(); ++i) EXPECT_EQ(val[i].id, val2[i].id);
    auto [all, none] = split_train_val(ds.conversations, 0.0, 4);
    EXPECT_EQ(all.size(), 10u);
    EXPECT_TRUE(none.empty());
    EXPECT_THROW(split_train_val(ds.conversations, 1.0, 4), ConfigError);
}

TEST(Speakers, RemapByNameWithUnknownSlot) {
    auto ds = synth_generate({.conversations = 1, .speakers = 3});
    ds.header.speaker_vocab = {"Joey", "Monica", "Guest"};
    ds.conversations[0].utterances[0].speaker = 0;
    ds.conversations[0].utterances[1].speaker = 2;
    ds.conversations[0].utterances[2].speaker = 1;
    remap_speakers(ds, {"Monica", "Joey"});
    EXPECT_EQ(ds.conversations[0].utterances[0].speaker, 1);
    EXPECT_EQ(ds.conversations[0].utterances[1].speaker, 2);
    EXPECT_EQ(ds.conversations[0].utterances[2].speaker, 0);
}

TEST(Synth, SampleSeedKeepsClassMeans) {
    SynthOptions o;
    o.separability = 1.0;
    o.conversations = 4;
    auto base = synth_generate(o);
    o.sample_seed = 77;
    auto other = synth_generate(o);
    std::map<int, std::vector<double>> means;
    for (const auto& c : base.conversations)
        for (const auto& u : c.utterances) means[u.label] = u.features[0];
    bool differs = false;
    for (const auto& c : other.conversations)
        for (const auto& u : c.utterances) {
            if (means.count(u.label)) EXPECT_EQ(u.features[0], means[u.label]);
        }
    for (std::size_t c = 0; c < base.conversations.size(); ++c)
        for (std::size_t i = 0; i < std::min(base.conversations[c].size(), other.conversations[c].size()); ++i)
            differs |= base.conversations[c].utterances[i].label != other.conversations[c].utterances[i].label;
    EXPECT_TRUE(differs);
}
