#include <gtest/gtest.h>

#include <cmath>

#include "sdt/embeddings.hpp"
#include "sdt/errors.hpp"
#include "sdt/numcore/ops.hpp"
#include "testing/finite_diff.hpp"

using namespace sdt;

TEST(Positional, FirstEntries) {
    auto pe = positional_embed(4, 8);
    ASSERT_EQ(pe.shape(), (Shape{4, 8}));
    EXPECT_EQ(pe.at(0, 0), 0.0);
    EXPECT_EQ(pe.at(0, 1), 1.0);
    // sin(1) to 18 digits.
    EXPECT_NEAR(pe.at(1, 0), 0.841470984807896507, 1e-15);
    EXPECT_NEAR(pe.at(1, 1), 0.540302305868139717, 1e-15);
}

TEST(Positional, HigherFrequencyColumns) {
    const std::size_t d = 8;
    auto pe = positional_embed(6, d);
    for (std::size_t pos = 0; pos < 6; ++pos) {
        for (std::size_t i = 0; i < d / 2; ++i) {
            const double angle = static_cast<double>(pos) / std::pow(10000.0, 2.0 * i / d);
            EXPECT_NEAR(pe.at(pos, 2 * i), std::sin(angle), 1e-15);
            EXPECT_NEAR(pe.at(pos, 2 * i + 1), std::cos(angle), 1e-15);
        }
    }
}

TEST(Positional, OddDimensionOrOverflowRejected) {
    EXPECT_THROW(positional_embed(3, 5), ConfigError);
    PositionalTable table(4, 6);
    EXPECT_THROW(table.rows(5), CapacityError);
    table.ensure_capacity(5);
    EXPECT_GE(table.max_len(), 5u);
    auto rows = table.rows(5);
    auto direct = positional_embed(5, 6);
    for (std::size_t i = 0; i < rows.numel(); ++i) EXPECT_EQ(rows.at(i), direct.at(i));
}

TEST(Speaker, LookupIsColumnOfTable) {
    ParameterRegistry reg(7);
    SpeakerTable table(reg, "speaker.V", 3, 4);
    ASSERT_EQ(table.matrix().shape(), (Shape{4, 4}));
    std::vector<std::int64_t> ids{2, 0, 2, 9};
    auto se = table.embed(ids);
    ASSERT_EQ(se.shape(), (Shape{4, 4}));
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_EQ(se.at(0, k), table.matrix().at(k, 2));
        EXPECT_EQ(se.at(1, k), table.matrix().at(k, 0));
        EXPECT_EQ(se.at(0, k), se.at(2, k));
        EXPECT_EQ(se.at(3, k), table.matrix().at(k, table.unk_index()));
    }
}

TEST(Speaker, GradientMarksLookedUpColumns) {
    ParameterRegistry reg(3);
    SpeakerTable table(reg, "speaker.V", 3, 5);
    std::vector<std::int64_t> ids{1, 1, 3};
    Tensor v = table.matrix();
    v.zero_grad();
    sum(table.embed(ids)).backward();
    for (std::size_t k = 0; k < 5; ++k) {
        for (std::size_t j = 0; j < 4; ++j) {
            const double want = j == 1 ? 2.0 : (j == 3 ? 1.0 : 0.0);
            EXPECT_EQ(v.grad()[k * 4 + j], want);
        }
    }
    auto numeric = sdt::testing::numeric_grad([&] { return sum(table.embed(ids)).item(); }, v);
    for (std::size_t i = 0; i < numeric.size(); ++i) EXPECT_NEAR(numeric[i], v.grad()[i], 1e-9);
}

TEST(Augment, SumOfTerms) {
    Rng rng(11);
    auto u = sdt::testing::random_tensor({3, 4}, rng, -1, 1, false);
    auto pe = sdt::testing::random_tensor({3, 4}, rng, -1, 1, false);
    auto se = sdt::testing::random_tensor({3, 4}, rng, -1, 1, false);
    auto h = augment(u, pe, se);
    for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(h.at(i), (u.at(i) + pe.at(i)) + se.at(i));

    auto only_u = augment(u, Tensor(), Tensor());
    for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(only_u.at(i), u.at(i));
    auto only_pe = augment(Tensor::zeros({3, 4}), pe, Tensor::zeros({3, 4}));
    for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(only_pe.at(i), pe.at(i));
    EXPECT_THROW(augment(u, Tensor::zeros({2, 4}), Tensor()), DimensionError);
}
