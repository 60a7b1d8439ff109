#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "sdt/errors.hpp"
#include "sdt/numcore/adam.hpp"
#include "sdt/numcore/ops.hpp"
#include "sdt/numcore/parameters.hpp"
#include "testing/finite_diff.hpp"

using namespace sdt;
using sdt::testing::check_gradients;
using sdt::testing::random_tensor;

namespace {

Tensor mat(std::size_t r, std::size_t c, std::vector<double> v, bool rg = false) {
    return Tensor::from({r, c}, std::move(v), rg);
}

void expect_values(const Tensor& t, const std::vector<double>& want, double tol = 0.0) {
    ASSERT_EQ(t.numel(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(t.at(i), want[i], tol) << "index " << i;
}

}  // namespace

TEST(Matmul, IdentityAnnihilatorAndHandCase) {
    auto eye = mat(2, 2, {1, 0, 0, 1});
    auto a = mat(2, 2, {1, 2, 3, 4});
    expect_values(matmul(eye, a), {1, 2, 3, 4});
    expect_values(matmul(mat(1, 2, {1, 2}), mat(2, 1, {3, 4})), {11});
    expect_values(matmul(a, Tensor::zeros({2, 3})), {0, 0, 0, 0, 0, 0});
}

TEST(Matmul, ShapeMismatchThrows) {
    EXPECT_THROW(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), DimensionError);
    EXPECT_THROW(matmul(Tensor::zeros({3}), Tensor::zeros({3, 1})), DimensionError);
}

TEST(Softmax, ClosedFormValues) {
    expect_values(softmax(Tensor::from({2}, {0, 0}), 0), {0.5, 0.5});
    expect_values(softmax(Tensor::from({2}, {1000, 1000}), 0), {0.5, 0.5});
    // High-precision reference: e^k / (e + e^2 + e^3).
    expect_values(softmax(Tensor::from({3}, {1, 2, 3}), 0),
                  {0.0900305731703804580, 0.2447284710547976525, 0.6652409557748218895}, 1e-15);
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        auto x = random_tensor({4, 5}, rng, -30, 30, false);
        const double shift = rng.uniform(-500, 500);
        auto shifted = Tensor::from({4, 5}, [&] {
            std::vector<double> v(x.data().begin(), x.data().end());
            for (auto& e : v) e += shift;
            return v;
        }());
        for (std::size_t axis : {0u, 1u}) {
            auto y = softmax(x, axis);
            auto ys = softmax(shifted, axis);
            for (std::size_t i = 0; i < y.numel(); ++i) EXPECT_NEAR(y.at(i), ys.at(i), 1e-12);
        }
        auto y = softmax(x, 1);
        for (std::size_t i = 0; i < 4; ++i) {
            double s = 0;
            for (std::size_t j = 0; j < 5; ++j) s += y.at(i, j);
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
    }
}

TEST(Softmax, AxisOutOfRange) { EXPECT_THROW(softmax(Tensor::zeros({2, 2}), 2), DimensionError); }

TEST(MaskedSoftmax, MaskedKeysGetExactZero) {
    std::vector<std::uint8_t> mask{1, 0, 1};
    auto y = masked_softmax_rows(mat(2, 3, {1, 50, 1, 0, -3, 2}), mask);
    EXPECT_EQ(y.at(0, 1), 0.0);
    EXPECT_EQ(y.at(1, 1), 0.0);
    EXPECT_NEAR(y.at(0, 0), 0.5, 1e-15);
    EXPECT_NEAR(y.at(1, 0) + y.at(1, 2), 1.0, 1e-15);
    std::vector<std::uint8_t> none{0, 0, 0};
    EXPECT_THROW(masked_softmax_rows(Tensor::zeros({1, 3}), none), UsageError);
}

TEST(Elementwise, BasicValues) {
    EXPECT_EQ(sigmoid(Tensor::scalar(0)).item(), 0.5);
    expect_values(relu(Tensor::from({2}, {-1, 2})), {0, 2});
    expect_values(mul(Tensor::from({2}, {1, 2}), Tensor::from({2}, {3, 4})), {3, 8});
    expect_values(scale(Tensor::from({2}, {1, -2}), 3), {3, -6});
    expect_values(transpose(mat(2, 3, {1, 2, 3, 4, 5, 6})), {1, 4, 2, 5, 3, 6});
    expect_values(concat({mat(2, 1, {1, 2}), mat(2, 2, {3, 4, 5, 6})}, 1), {1, 3, 4, 2, 5, 6});
    expect_values(concat({mat(1, 2, {1, 2}), mat(1, 2, {3, 4})}, 0), {1, 2, 3, 4});
    // Large magnitudes stay finite and inside [0, 1].
    auto s = sigmoid(Tensor::from({2}, {-800, 800}));
    EXPECT_GE(s.at(0), 0.0);
    EXPECT_LE(s.at(1), 1.0);
    EXPECT_THROW(add(Tensor::zeros({2}), Tensor::zeros({3})), DimensionError);
    EXPECT_THROW(concat({Tensor::zeros({2, 1}), Tensor::zeros({3, 1})}, 1), DimensionError);
}

TEST(LayerNorm, HandCases) {
    auto ones = Tensor::full({3}, 1.0);
    auto zeros = Tensor::zeros({3});
    expect_values(layer_norm(mat(1, 3, {4, 4, 4}), ones, zeros, 1e-5), {0, 0, 0});
    expect_values(layer_norm(mat(1, 3, {4, 4, 4}), ones, Tensor::full({3}, 5.0), 1e-5), {5, 5, 5});
    // [1, -1]: mean 0, variance 1, so output is x / sqrt(1 + eps).
    auto y = layer_norm(mat(1, 2, {1, -1}), Tensor::full({2}, 1.0), Tensor::zeros({2}), 1e-5);
    expect_values(y, {1 / std::sqrt(1 + 1e-5), -1 / std::sqrt(1 + 1e-5)}, 1e-15);
    EXPECT_NEAR(y.at(0), 1.0, 1e-5);
}

TEST(Dropout, EvalAndZeroRateAreIdentity) {
    Rng rng(1);
    auto x = random_tensor({3, 4}, rng, -1, 1, false);
    EXPECT_TRUE(dropout(x, 0.5, false, rng).same_storage(x));
    EXPECT_TRUE(dropout(x, 0.0, true, rng).same_storage(x));
    EXPECT_THROW(dropout(x, 1.0, true, rng), ConfigError);
    EXPECT_THROW(dropout(x, -0.1, true, rng), ConfigError);
}

TEST(Dropout, MonteCarloMeanPreserved) {
    Rng rng(2024);
    constexpr std::size_t n = 100000;
    std::vector<double> v(n);
    for (auto& e : v) e = rng.uniform(0.5, 1.5);
    const double input_mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    auto y = dropout(Tensor::from({n}, v), 0.5, true, rng);
    double out_mean = 0.0;
    std::size_t zeros = 0;
    for (double e : y.data()) {
        out_mean += e;
        zeros += (e == 0.0);
    }
    out_mean /= n;
    EXPECT_NEAR(out_mean / input_mean, 1.0, 0.02);
    EXPECT_NEAR(static_cast<double>(zeros) / n, 0.5, 0.01);
}

TEST(Conv1d, IdentityAndHandConvolution) {
    // k=1, identity kernel, zero bias.
    auto x = mat(2, 2, {1, 2, 3, 4});
    auto eye = Tensor::from({1, 2, 2}, {1, 0, 0, 1});
    expect_values(conv1d(x, eye, Tensor::zeros({2})), {1, 2, 3, 4});
    // k=3, N=3, all ones, d=1: edges see one zero pad.
    auto y = conv1d(Tensor::full({3, 1}, 1.0), Tensor::full({3, 1, 1}, 1.0), Tensor::zeros({1}));
    expect_values(y, {2, 3, 2});
    EXPECT_THROW(conv1d(x, Tensor::zeros({2, 2, 2}), Tensor::zeros({2})), ConfigError);
    EXPECT_THROW(conv1d(x, Tensor::zeros({1, 3, 2}), Tensor::zeros({2})), DimensionError);
}

TEST(Conv1d, KernelOneIsLinearMap) {
    Rng rng(3);
    auto x = random_tensor({4, 3}, rng, -1, 1, false);
    auto w = random_tensor({3, 5}, rng, -1, 1, false);
    auto b = random_tensor({5}, rng, -1, 1, false);
    auto kernel = Tensor::from({1, 3, 5}, std::vector<double>(w.data().begin(), w.data().end()));
    auto got = conv1d(x, kernel, b);
    auto want = linear(x, w, b);
    for (std::size_t i = 0; i < got.numel(); ++i) EXPECT_NEAR(got.at(i), want.at(i), 1e-14);
}

TEST(Backward, SumAndSquare) {
    Rng rng(5);
    auto p = random_tensor({2, 3}, rng);
    sum(p).backward();
    for (double g : p.grad()) EXPECT_EQ(g, 1.0);
    p.zero_grad();
    sum(mul(p, p)).backward();
    for (std::size_t i = 0; i < p.numel(); ++i) EXPECT_DOUBLE_EQ(p.grad()[i], 2.0 * p.at(i));
}

TEST(Backward, AccumulatesAdditively) {
    auto p = Tensor::from({2}, {1, 2}, true);
    sum(p).backward();
    sum(p).backward();
    EXPECT_EQ(p.grad()[0], 2.0);
}

TEST(Backward, NonScalarIsUsageError) {
    auto p = Tensor::zeros({2}, true);
    EXPECT_THROW(scale(p, 2.0).backward(), UsageError);
}

TEST(Backward, NoGradGuardSkipsRecording) {
    auto p = Tensor::zeros({2}, true);
    NoGradGuard guard;
    auto y = scale(p, 2.0);
    EXPECT_FALSE(y.requires_grad());
}

TEST(Backward, NonFiniteIsNumericalError) {
    EXPECT_THROW(scale(Tensor::from({1}, {1e308}), 10.0), NumericalError);
}

TEST(GradCheck, CompositeMatmulSigmoidSum) {
    Rng rng(11);
    auto a = random_tensor({3, 3}, rng);
    auto b = random_tensor({3, 3}, rng);
    auto err = check_gradients([&] { return sum(sigmoid(matmul(a, b))); }, {a, b});
    EXPECT_LT(err, 1e-6);
}

// Every differentiable op against central differences (h = 1e-5).
TEST(GradCheck, EveryOp) {
    Rng rng(42);
    auto a = random_tensor({3, 4}, rng);
    auto b = random_tensor({3, 4}, rng);
    auto w = random_tensor({4, 2}, rng);
    auto bias = random_tensor({4}, rng);
    auto gamma = random_tensor({4}, rng, 0.5, 1.5);
    auto beta = random_tensor({4}, rng);
    auto kernel = random_tensor({3, 4, 2}, rng);
    auto kbias = random_tensor({2}, rng);
    auto weights = random_tensor({3, 4}, rng);  // breaks symmetry of sum()
    auto weighted = [&](const Tensor& t) { return sum(mul(t, weights)); };
    std::vector<std::uint8_t> mask{1, 1, 0, 1};

    struct Case {
        const char* name;
        std::function<Tensor()> build;
        std::vector<Tensor> leaves;
    };
    std::vector<Case> cases{
        {"matmul", [&] { return sum(mul(matmul(a, w), matmul(b, w))); }, {a, b, w}},
        {"transpose", [&] { return sum(mul(matmul(transpose(a), b), matmul(transpose(a), b))); }, {a, b}},
        {"add", [&] { return weighted(add(a, b)); }, {a, b}},
        {"sub", [&] { return weighted(sub(a, b)); }, {a, b}},
        {"mul", [&] { return weighted(mul(a, b)); }, {a, b}},
        {"scale", [&] { return weighted(scale(a, -1.7)); }, {a}},
        {"add_bias", [&] { return weighted(mul(add_bias(a, bias), add_bias(a, bias))); }, {a, bias}},
        {"sigmoid", [&] { return weighted(sigmoid(a)); }, {a}},
        {"relu", [&] { return weighted(relu(a)); }, {a}},
        {"softmax0", [&] { return weighted(softmax(scale(a, 2.0), 0)); }, {a}},
        {"softmax1", [&] { return weighted(softmax(scale(a, 2.0), 1)); }, {a}},
        {"masked_softmax", [&] { return weighted(masked_softmax_rows(scale(a, 2.0), mask)); }, {a}},
        {"concat", [&] { return sum(mul(concat({a, b}, 1), concat({b, a}, 1))); }, {a, b}},
        {"slice_cols", [&] { return sum(mul(slice_cols(a, 1, 2), slice_cols(b, 0, 2))); }, {a, b}},
        {"stack_select", [&] { return weighted(mul(select(stack({a, b}), 1), select(stack({a, b}), 0))); }, {a, b}},
        {"stack_softmax", [&] { return weighted(select(softmax(stack({a, b, weights}), 0), 2)); }, {a, b}},
        {"layer_norm", [&] { return weighted(layer_norm(a, gamma, beta, 1e-5)); }, {a, gamma, beta}},
        {"conv1d", [&] { return sum(mul(conv1d(a, kernel, kbias), conv1d(b, kernel, kbias))); }, {a, b, kernel, kbias}},
        {"mean", [&] { return mean(mul(a, a)); }, {a}},
    };
    for (auto& c : cases) {
        EXPECT_LT(check_gradients(c.build, c.leaves), 1e-6) << c.name;
    }

    auto table = random_tensor({3, 4}, rng);
    std::vector<std::size_t> ids{2, 0, 2};
    auto g = random_tensor({3, 3}, rng, -1, 1, false);
    EXPECT_LT(check_gradients([&] { return sum(mul(gather_columns(table, ids), g)); }, {table}), 1e-6);
}

TEST(Adam, ZeroLearningRateLeavesParams) {
    auto p = Tensor::from({2}, {1, -1}, true);
    Adam opt({{"p", p}}, {.lr = 0.0});
    opt.zero_grad();
    sum(mul(p, p)).backward();
    opt.step();
    EXPECT_EQ(p.at(0), 1.0);
    EXPECT_EQ(p.at(1), -1.0);
}

TEST(Adam, OneStepMovesAgainstGradient) {
    auto p = Tensor::from({2}, {0, 0}, true);
    Adam opt({{"p", p}}, {.lr = 0.01});
    opt.zero_grad();
    sum(mul(p, Tensor::from({2}, {3, -2}))).backward();
    opt.step();
    EXPECT_LT(p.at(0), 0.0);
    EXPECT_GT(p.at(1), 0.0);
    // First bias-corrected step has magnitude lr * |g| / (|g| + eps).
    EXPECT_NEAR(p.at(0), -0.01, 1e-9);
}

TEST(Adam, ConvergesOnQuadratic) {
    auto w = Tensor::from({1}, {0.0}, true);
    Adam opt({{"w", w}}, {.lr = 0.1});
    auto three = Tensor::from({1}, {3.0});
    for (int i = 0; i < 200; ++i) {
        opt.zero_grad();
        auto diff = sub(w, three);
        sum(mul(diff, diff)).backward();
        opt.step();
    }
    EXPECT_LT(std::abs(w.at(0) - 3.0), 1e-2);
    EXPECT_EQ(opt.steps(), 200u);
}

TEST(Adam, WeightDecayIsAddedToGradient) {
    // Zero loss gradient: the only signal is wd * w, so w shrinks toward 0.
    auto w = Tensor::from({1}, {2.0}, true);
    Adam opt({{"w", w}}, {.lr = 0.1, .weight_decay = 0.5});
    opt.zero_grad();
    opt.step();
    EXPECT_NEAR(w.at(0), 2.0 - 0.1, 1e-8);
}

TEST(Adam, MissingGradientIsUsageError) {
    auto w = Tensor::from({1}, {2.0}, true);
    Adam opt({{"w", w}}, {});
    EXPECT_THROW(opt.step(), UsageError);
}

TEST(Determinism, RepeatedRunsAreBitwiseIdentical) {
    auto run = [] {
        Rng rng(99);
        auto a = random_tensor({4, 4}, rng);
        auto b = random_tensor({4, 4}, rng);
        Adam opt({{"a", a}, {"b", b}}, {.lr = 0.05});
        for (int i = 0; i < 5; ++i) {
            opt.zero_grad();
            sum(sigmoid(dropout(matmul(a, b), 0.5, true, rng))).backward();
            opt.step();
        }
        std::vector<double> out(a.data().begin(), a.data().end());
        out.insert(out.end(), b.data().begin(), b.data().end());
        return out;
    };
    EXPECT_EQ(run(), run());
}

TEST(Rng, StreamsAreReproducibleAndSplitIndependent) {
    Rng a(5), b(5);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
    Rng c = Rng(5).split(1), d = Rng(5).split(2);
    EXPECT_NE(c.next_u64(), d.next_u64());
    // Documented formula for the first draw.
    const std::uint64_t key = Rng::mix64(5);
    EXPECT_EQ(Rng(5).next_u64(), Rng::mix64(key + 0x9E3779B97F4A7C15ULL));
    Rng u(8);
    for (int i = 0; i < 1000; ++i) {
        const double x = u.uniform();
        EXPECT_GE(x, 0.0);
        EXPECT_LT(x, 1.0);
        EXPECT_LT(u.below(7), 7u);
    }
}

TEST(ParameterRegistry, NamesAreUniqueAndInitIsBounded) {
    ParameterRegistry reg(1);
    auto w = reg.uniform("layer.W", {4, 9}, 9);
    for (double v : w.data()) EXPECT_LE(std::abs(v), 1.0 / 3.0);
    EXPECT_THROW(reg.zeros("layer.W", {1}), UsageError);
    ParameterRegistry other(1);
    other.zeros("something.else", {3});
    auto w2 = other.uniform("layer.W", {4, 9}, 9);
    EXPECT_TRUE(std::equal(w.data().begin(), w.data().end(), w2.data().begin()));
}
