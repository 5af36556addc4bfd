#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ctsg/autodiff.hpp"
#include "ctsg/rng.hpp"
#include "ctsg/tensor.hpp"
#include "support.hpp"

using namespace ctsg;
using ctsg::test::numeric_grad;
using ctsg::test::rel_error;

TEST(Tensor, ElementwiseAdd) {
    const Tensor r = add(Tensor::vector({1, 2}), Tensor::vector({3, 4}));
    EXPECT_EQ(r, Tensor::vector({4, 6}));
}

TEST(Tensor, Relu) { EXPECT_EQ(relu(Tensor::vector({-1, 0, 2})), Tensor::vector({0, 0, 2})); }

TEST(Tensor, MatmulOfOnes) {
    const Tensor r = matmul(Tensor::ones({2, 3}), Tensor::ones({3, 2}));
    EXPECT_EQ(r, Tensor::full({2, 2}, 3.0));
}

TEST(Tensor, ShapeMismatchIsDimensionError) {
    EXPECT_THROW(add(Tensor::vector({1, 2}), Tensor::vector({1, 2, 3})), DimensionError);
    EXPECT_THROW(matmul(Tensor::ones({2, 3}), Tensor::ones({2, 3})), DimensionError);
    EXPECT_THROW(Tensor(Shape{2, 2}, {1, 2, 3}), DimensionError);
}

TEST(Tensor, DivisionByZeroIsNumericError) {
    EXPECT_THROW(div(Tensor::vector({1, 2}), Tensor::vector({1, 0})), NumericError);
    EXPECT_THROW(exp(Tensor::scalar(1e4)), NumericError);
}

TEST(Tensor, StableSigmoidAndSoftplus) {
    const Tensor x = Tensor::vector({-800, -1, 0, 1, 800});
    const Tensor s = sigmoid(x);
    const Tensor p = softplus(x);
    EXPECT_DOUBLE_EQ(s[2], 0.5);
    EXPECT_NEAR(s[1] + s[3], 1.0, 1e-15);
    EXPECT_EQ(s[0], 0.0);
    EXPECT_EQ(s[4], 1.0);
    EXPECT_NEAR(p[2], std::log(2.0), 1e-15);
    EXPECT_NEAR(p[3], std::log1p(std::exp(1.0)), 1e-15);
    EXPECT_EQ(p[4], 800.0);
    EXPECT_EQ(p[0], 0.0);
}

TEST(Tensor, SliceConcatRoundTrip) {
    const Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
    const Tensor a = slice(m, 1, 0, 1);
    const Tensor b = slice(m, 1, 1, 3);
    EXPECT_EQ(a, Tensor::matrix(2, 1, {1, 4}));
    const std::vector<Tensor> parts{a, b};
    EXPECT_EQ(concat(parts, 1), m);
}

TEST(Tensor, BroadcastAndUnbroadcast) {
    const Tensor row = Tensor::matrix(1, 3, {1, 2, 3});
    const Tensor b = broadcast(row, {2, 3});
    EXPECT_EQ(b, Tensor::matrix(2, 3, {1, 2, 3, 1, 2, 3}));
    EXPECT_EQ(unbroadcast(Tensor::ones({2, 3}), {1, 3}), Tensor::matrix(1, 3, {2, 2, 2}));
}

TEST(Tensor, ReductionsAndExtremaTieBreak) {
    const Tensor x = Tensor::vector({3, 1, 3, 1});
    EXPECT_EQ(sum(x).item(), 8.0);
    EXPECT_EQ(mean(x).item(), 2.0);
    EXPECT_EQ(argmax(x.values()), 0u);
    EXPECT_EQ(argmin(x.values()), 1u);
}

TEST(Autodiff, SumOfSquaresGradient) {
    Graph g;
    const Var x = g.leaf(Tensor::vector({1, 2}));
    const Gradients gr = g.backward(sum(square(x)));
    EXPECT_EQ(gr[x], Tensor::vector({2, 4}));
}

TEST(Autodiff, ReluGradientAtNegativeInput) {
    Graph g;
    const Var x = g.leaf(Tensor::scalar(-1.0));
    EXPECT_EQ(g.backward(relu(x))[x].item(), 0.0);
}

TEST(Autodiff, NonScalarRootIsUsageError) {
    Graph g;
    const Var x = g.leaf(Tensor::vector({1, 2}));
    EXPECT_THROW(g.backward(square(x)), UsageError);
}

TEST(Autodiff, GradientOfSumIsOnes) {
    Rng rng(11);
    for (const Shape& shape : {Shape{7}, Shape{3, 4}, Shape{2, 3, 5}}) {
        Graph g;
        const Var x = g.leaf(ctsg::test::random_tensor(shape, rng));
        EXPECT_EQ(g.backward(sum(x))[x], Tensor::ones(shape));
    }
}

TEST(Autodiff, ExtremumGradientGoesToFirstTie) {
    Graph g;
    const Var x = g.leaf(Tensor::vector({2, 5, 5, -1, -1}));
    const Var r = add(max(x), min(x));
    EXPECT_EQ(g.backward(r)[x], Tensor::vector({0, 1, 0, 1, 0}));
}

TEST(Autodiff, UnusedLeafGetsZeros) {
    Graph g;
    const Var x = g.leaf(Tensor::vector({1, 2}));
    const Var y = g.leaf(Tensor::vector({3, 4, 5}));
    EXPECT_EQ(g.backward(sum(x))[y], Tensor::zeros({3}));
}

namespace {

struct Net {
    std::vector<Tensor> params;  // W0 b0 W1 b1 W2 b2
};

Net random_net(Rng& rng) {
    Net n;
    const std::size_t dims[] = {4, 6, 5, 2};
    for (int l = 0; l < 3; ++l) {
        n.params.push_back(ctsg::test::random_tensor({dims[l], dims[l + 1]}, rng, 0.5));
        n.params.push_back(ctsg::test::random_tensor({1, dims[l + 1]}, rng, 0.1));
    }
    return n;
}

// tanh and sin layers with a squared-error head
template <class T>
T net_loss(const std::vector<T>& p, const T& X, const T& Y) {
    const std::size_t B = X.shape()[0];
    T h = tanh(add(matmul(X, p[0]), broadcast(p[1], Shape{B, 6})));
    h = sin(add(matmul(h, p[2]), broadcast(p[3], Shape{B, 5})));
    T out = add(matmul(h, p[4]), broadcast(p[5], Shape{B, 2}));
    return mean(square(sub(out, Y)));
}

}  // namespace

TEST(Autodiff, ThreeLayerNetMatchesFiniteDifferences) {
    Rng rng(2024);
    const Net net = random_net(rng);
    const Tensor X = ctsg::test::random_tensor({8, 4}, rng);
    const Tensor Y = ctsg::test::random_tensor({8, 2}, rng);

    Graph g;
    std::vector<Var> P;
    for (const auto& p : net.params) P.push_back(g.leaf(p));
    const Gradients grads = g.backward(net_loss(P, g.constant(X), g.constant(Y)));

    for (std::size_t k = 0; k < net.params.size(); ++k) {
        auto f = [&](const std::vector<double>& v) {
            std::vector<Tensor> p = net.params;
            p[k] = Tensor(p[k].shape(), v);
            return net_loss(p, X, Y).item();
        };
        const auto fd = numeric_grad(f, net.params[k].storage());
        EXPECT_LE(rel_error(fd, grads[P[k]].values()), 1e-4) << "parameter " << k;
    }
}

TEST(Autodiff, ElementwiseOpsMatchFiniteDifferences) {
    Rng rng(5);
    const Tensor x0 = ctsg::test::random_tensor({3, 4}, rng);
    const Tensor w = ctsg::test::random_tensor({3, 4}, rng);
    auto composite = [&](const auto& x, const auto& c) {
        // touches sigmoid, softplus, exp, log, abs, div, slice, gather and row reductions
        auto a = mul(sigmoid(x), c);
        auto b = softplus(sub(x, c));
        auto e = log(add_scalar(exp(scale(x, 0.3)), 1.0));
        auto d = div(abs(x), add_scalar(square(c), 1.0));
        auto s = slice(add(add(a, b), add(e, d)), 1, 1, 3);
        const std::size_t idx[] = {0, 3, 3};
        auto gth = gather(x, std::span<const std::size_t>(idx));
        return add(add(sum(max_rows(s)), sum(mean_rows(s))), add(sum(min_rows(a)), sum(square(gth))));
    };
    Graph g;
    const Var X = g.leaf(x0);
    const Gradients grads = g.backward(composite(X, g.constant(w)));
    auto f = [&](const std::vector<double>& v) { return composite(Tensor(x0.shape(), v), w).item(); };
    EXPECT_LE(rel_error(numeric_grad(f, x0.storage()), grads[X].values()), 1e-4);
}

TEST(Autodiff, BackwardIsDeterministic) {
    auto run = [] {
        Rng rng(99);
        const Net net = random_net(rng);
        const Tensor X = ctsg::test::random_tensor({8, 4}, rng);
        const Tensor Y = ctsg::test::random_tensor({8, 2}, rng);
        Graph g;
        std::vector<Var> P;
        for (const auto& p : net.params) P.push_back(g.leaf(p));
        const Gradients grads = g.backward(net_loss(P, g.constant(X), g.constant(Y)));
        std::vector<Tensor> out;
        for (const auto& p : P) out.push_back(grads[p]);
        return out;
    };
    EXPECT_EQ(run(), run());
}

TEST(Autodiff, FreshGradientsPerBackward) {
    Graph g;
    const Var x = g.leaf(Tensor::vector({1, 2}));
    const Var r = sum(square(x));
    const Gradients first = g.backward(r);
    const Gradients second = g.backward(r);
    EXPECT_EQ(first[x], second[x]);
}

TEST(Rng, PhiloxKnownAnswers) {
    using A4 = std::array<std::uint32_t, 4>;
    using A2 = std::array<std::uint32_t, 2>;
    EXPECT_EQ(detail::philox4x32(A4{0, 0, 0, 0}, A2{0, 0}), (A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
    EXPECT_EQ(detail::philox4x32(A4{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, A2{0xffffffff, 0xffffffff}),
              (A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
    EXPECT_EQ(detail::philox4x32(A4{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, A2{0xa4093822, 0x299f31d0}),
              (A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
    Rng a = Rng(7).derive("sampling");
    Rng b = Rng(7).derive("sampling");
    Rng c = Rng(7).derive("training");
    Rng d = Rng(7).derive("sampling").derive(std::uint64_t{3});
    const auto va = a.next_u64();
    EXPECT_EQ(va, b.next_u64());
    EXPECT_NE(va, c.next_u64());
    EXPECT_NE(va, d.next_u64());
}

TEST(Rng, UniformAndNormalMoments) {
    Rng rng(123);
    const int n = 200000;
    double su = 0, sn = 0, sn2 = 0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        su += u;
        const double z = rng.normal();
        sn += z;
        sn2 += z * z;
    }
    // 5 standard errors
    EXPECT_NEAR(su / n, 0.5, 5 * std::sqrt(1.0 / 12.0 / n));
    EXPECT_NEAR(sn / n, 0.0, 5 / std::sqrt(double(n)));
    EXPECT_NEAR(sn2 / n, 1.0, 5 * std::sqrt(2.0 / n));
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) ++counts[rng.uniform_index(7)];
    for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}
