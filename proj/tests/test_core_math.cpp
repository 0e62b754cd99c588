// Copyright 2026 The metrec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "metrec/core_math.hpp"
#include "metrec/gradcheck.hpp"
#include "oracles.hpp"

namespace {

using namespace metrec;

DenseVector random_vector(std::mt19937_64& rng, std::size_t dim, double scale = 1.0) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    DenseVector v(dim);
    for (double& x : v) x = dist(rng);
    return v;
}

MlpParams random_net(std::mt19937_64& rng, std::size_t max_dim = 16, std::size_t max_layers = 3) {
    std::uniform_int_distribution<std::size_t> dim(1, max_dim);
    std::uniform_int_distribution<std::size_t> depth(1, max_layers);
    std::uniform_int_distribution<int> act(0, 2);
    std::vector<std::size_t> dims{dim(rng)};
    const std::size_t layers = depth(rng);
    for (std::size_t l = 0; l < layers; ++l) dims.push_back(dim(rng));
    const Activation kinds[] = {Activation::ReLU, Activation::Tanh, Activation::Identity};
    MlpParams p = make_mlp(dims, kinds[act(rng)], rng);
    for (auto& layer : p.layers) {
        for (double& b : layer.bias) b = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
    }
    return p;
}

TEST(AffineForward, IdentityPassesInputThrough) {
    const DenseVector x{1, 2, 3};
    EXPECT_EQ(affine_forward(DenseMatrix::identity(3), DenseVector(3), x), x);
}

TEST(AffineForward, HandArithmetic) {
    const DenseMatrix w{{1, 1}, {0, 2}};
    EXPECT_EQ(affine_forward(w, DenseVector{1, 0}, DenseVector{1, 1}), (DenseVector{3, 2}));
}

TEST(AffineForward, MatchesDoubleLoopOracle) {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        DenseMatrix w(8, 5);
        std::vector<std::vector<double>> w_rows(8, std::vector<double>(5));
        std::uniform_real_distribution<double> dist(-2, 2);
        for (std::size_t i = 0; i < 8; ++i) {
            for (std::size_t j = 0; j < 5; ++j) w(i, j) = w_rows[i][j] = dist(rng);
        }
        const DenseVector b = random_vector(rng, 8);
        const DenseVector x = random_vector(rng, 5);
        const auto expected = oracle::affine(w_rows, {b.begin(), b.end()}, {x.begin(), x.end()});
        const auto got = affine_forward(w, b, x);
        for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(got[i], expected[i], 1e-12);
    }
}

TEST(AffineForward, DimensionMismatchNamesBothDims) {
    try {
        affine_forward(DenseMatrix(2, 3), DenseVector(2), DenseVector(4));
        FAIL() << "expected DimensionError";
    } catch (const DimensionError& e) {
        EXPECT_EQ(e.lhs(), 3u);
        EXPECT_EQ(e.rhs(), 4u);
    }
    EXPECT_THROW(affine_forward(DenseMatrix(2, 3), DenseVector(3), DenseVector(3)), DimensionError);
}

TEST(ActivationForward, Examples) {
    EXPECT_EQ(activation_forward(Activation::ReLU, DenseVector{-1, 0, 2}), (DenseVector{0, 0, 2}));
    const DenseVector z{-3.5, 0.25, 7};
    EXPECT_EQ(activation_forward(Activation::Identity, z), z);
    EXPECT_EQ(activation_forward(Activation::Tanh, DenseVector{0}), DenseVector{0});
}

TEST(ActivationForward, NamesRoundTrip) {
    for (auto a : {Activation::ReLU, Activation::Tanh, Activation::Identity}) {
        EXPECT_EQ(parse_activation(to_string(a)), a);
    }
    EXPECT_THROW(parse_activation("sigmoid"), ConfigError);
}

TEST(MlpForward, IdentityLayerReturnsInput) {
    MlpParams p{{{DenseMatrix::identity(4), DenseVector(4)}}, Activation::Identity};
    const DenseVector x{0.5, -1, 2, 3};
    const auto r = mlp_forward(p, x);
    EXPECT_EQ(r.output, x);
    EXPECT_EQ(r.cache.depth(), 1u);
}

TEST(MlpForward, ZeroWeightsPropagateBiases) {
    // relu(W0 x + 1) = 1 per hidden unit; output = W1 * 1 + b1 = b1 because W1 = 0.
    MlpParams p{{{DenseMatrix(3, 2), DenseVector{1, 1, 1}}, {DenseMatrix(2, 3), DenseVector{1, -2}}},
                Activation::ReLU};
    const auto r = mlp_forward(p, DenseVector{5, -7});
    EXPECT_EQ(r.cache.post[0], (DenseVector{1, 1, 1}));
    EXPECT_EQ(r.output, (DenseVector{1, -2}));

    // With W1 = ones the output becomes 3 + b1.
    for (double& w : p.layers[1].weight.values()) w = 1.0;
    EXPECT_EQ(mlp_forward(p, DenseVector{5, -7}).output, (DenseVector{4, 1}));
}

TEST(MlpForward, MatchesLayerByLayerComposition) {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 50; ++rep) {
        const MlpParams p = random_net(rng);
        const DenseVector x = random_vector(rng, p.in_dim());
        DenseVector h = x;
        for (std::size_t l = 0; l < p.depth(); ++l) {
            h = affine_forward(p.layers[l].weight, p.layers[l].bias, h);
            if (l + 1 < p.depth()) h = activation_forward(p.activation, h);
        }
        EXPECT_EQ(mlp_forward(p, x).output, h);
    }
}

TEST(MlpForward, OneHotMatchesDenseInput) {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 30; ++rep) {
        const MlpParams p = random_net(rng);
        const std::size_t idx = std::uniform_int_distribution<std::size_t>(0, p.in_dim() - 1)(rng);
        const OneHot hot{idx, p.in_dim()};
        const auto sparse = mlp_forward(p, hot).output;
        const auto dense = mlp_forward(p, hot.to_dense()).output;
        for (std::size_t i = 0; i < sparse.dim(); ++i) EXPECT_NEAR(sparse[i], dense[i], 1e-14);
    }
    const MlpParams p = random_net(rng);
    EXPECT_THROW(mlp_forward(p, OneHot{p.in_dim(), p.in_dim()}), DomainError);
    EXPECT_THROW(mlp_forward(p, OneHot{0, p.in_dim() + 1}), DimensionError);
}

TEST(MlpForward, IsPure) {
    std::mt19937_64 rng(9);
    const MlpParams p = random_net(rng);
    const DenseVector x = random_vector(rng, p.in_dim());
    const auto a = mlp_forward(p, x).output;
    const auto b = mlp_forward(p, x).output;
    EXPECT_EQ(a, b);
}

TEST(MlpForward, IdentityLayerWithoutBiasIsLinear) {
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<std::size_t> dims{5, 3};
        MlpParams p = make_mlp(dims, Activation::Identity, rng);
        const DenseVector x = random_vector(rng, 5);
        const double alpha = std::uniform_real_distribution<double>(-3, 3)(rng);
        DenseVector ax = x;
        for (double& v : ax) v *= alpha;
        const auto lhs = mlp_forward(p, ax).output;
        const auto rhs = mlp_forward(p, x).output;
        for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(lhs[i], alpha * rhs[i], 1e-12);
    }
}

TEST(MlpForward, RejectsWrongInputDim) {
    MlpParams p{{{DenseMatrix(2, 3), DenseVector(2)}}, Activation::ReLU};
    EXPECT_THROW(mlp_forward(p, DenseVector(2)), DimensionError);
}

TEST(MlpParamsValidate, RejectsChainMismatch) {
    MlpParams p{{{DenseMatrix(4, 3), DenseVector(4)}, {DenseMatrix(2, 5), DenseVector(2)}}, Activation::ReLU};
    EXPECT_THROW(p.validate(), DimensionError);
    EXPECT_THROW(mlp_forward(p, DenseVector(3)), DimensionError);
}

TEST(MlpBackward, IdentityLayerGivesOuterProduct) {
    std::mt19937_64 rng(1);
    std::vector<std::size_t> dims{4, 3};
    MlpParams p = make_mlp(dims, Activation::Identity, rng);
    const DenseVector x = random_vector(rng, 4);
    const DenseVector g = random_vector(rng, 3);
    const auto fwd = mlp_forward(p, x);
    const auto back = mlp_backward(p, fwd.cache, g);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(back.grad_params.layers[0].weight(i, j), g[i] * x[j]);
    }
    EXPECT_EQ(back.grad_params.layers[0].bias, g);
}

TEST(MlpBackward, DeadReluUnitsBlockGradient) {
    // Every hidden pre-activation is negative: nothing upstream of the dead
    // layer moves, and the output weights see a zero input. Only the output
    // bias (linear, after the dead units) carries gradient.
    MlpParams p{{{DenseMatrix(3, 2, 1.0), DenseVector{-10, -10, -10}}, {DenseMatrix(2, 3, 1.0), DenseVector(2)}},
                Activation::ReLU};
    const auto fwd = mlp_forward(p, DenseVector{1, 1});
    for (double z : fwd.cache.pre[0]) ASSERT_LT(z, 0.0);
    const DenseVector g{0.7, -1.3};
    const auto back = mlp_backward(p, fwd.cache, g);
    for (double v : back.grad_params.layers[0].weight.values()) EXPECT_EQ(v, 0.0);
    for (double v : back.grad_params.layers[0].bias) EXPECT_EQ(v, 0.0);
    for (double v : back.grad_params.layers[1].weight.values()) EXPECT_EQ(v, 0.0);
    for (double v : back.grad_input) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(back.grad_params.layers[1].bias, g);
}

TEST(MlpBackward, ReluSubgradientAtZeroIsZero) {
    MlpParams p{{{DenseMatrix(1, 1, 0.0), DenseVector{0.0}}, {DenseMatrix(1, 1, 1.0), DenseVector{0.0}}},
                Activation::ReLU};
    const auto fwd = mlp_forward(p, DenseVector{3});
    const auto back = mlp_backward(p, fwd.cache, DenseVector{1});
    EXPECT_EQ(back.grad_params.layers[0].bias[0], 0.0);
}

TEST(MlpBackward, MatchesFiniteDifferencesOnRandomNets) {
    std::mt19937_64 rng(2024);
    int checked = 0;
    for (int rep = 0; rep < 120; ++rep) {
        const MlpParams p = random_net(rng);
        const DenseVector x = random_vector(rng, p.in_dim());
        const DenseVector g = random_vector(rng, p.out_dim());
        const auto fwd = mlp_forward(p, x);
        const auto back = mlp_backward(p, fwd.cache, g);

        const auto objective = [&](const MlpParams& q) {
            const auto h = mlp_forward(q, x).output;
            double s = 0.0;
            for (std::size_t i = 0; i < h.dim(); ++i) s += g[i] * h[i];
            return s;
        };
        const MlpParams numeric = finite_difference_grad(objective, p, 1e-6);
        EXPECT_EQ(oracle::worst_grad_mismatch(back.grad_params, numeric), 0.0) << "case " << rep;

        const auto input_objective = [&](std::span<const double> xs) {
            const auto h = mlp_forward(p, DenseVector(xs)).output;
            double s = 0.0;
            for (std::size_t i = 0; i < h.dim(); ++i) s += g[i] * h[i];
            return s;
        };
        const auto numeric_x = finite_difference_grad(input_objective, x.values(), 1e-6);
        for (std::size_t j = 0; j < x.dim(); ++j) {
            EXPECT_TRUE(oracle::grad_close(back.grad_input[j], numeric_x[j]))
                << "case " << rep << " input " << j << ": " << back.grad_input[j] << " vs " << numeric_x[j];
        }
        ++checked;
    }
    EXPECT_GE(checked, 100);
}

TEST(MlpBackward, OneHotAccumulationMatchesDense) {
    std::mt19937_64 rng(77);
    const MlpParams p = random_net(rng);
    const OneHot hot{p.in_dim() - 1, p.in_dim()};
    const DenseVector g = random_vector(rng, p.out_dim());
    const auto sparse = mlp_backward(p, mlp_forward(p, hot).cache, g);
    const auto dense = mlp_backward(p, mlp_forward(p, hot.to_dense()).cache, g);
    const auto a = oracle::flatten(sparse.grad_params);
    const auto b = oracle::flatten(dense.grad_params);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
    for (std::size_t j = 0; j < p.in_dim(); ++j) EXPECT_NEAR(sparse.grad_input[j], dense.grad_input[j], 1e-14);
}

TEST(MlpBackward, RejectsForeignCache) {
    std::mt19937_64 rng(8);
    std::vector<std::size_t> a{3, 4, 2};
    std::vector<std::size_t> b{3, 5, 2};
    const MlpParams pa = make_mlp(a, Activation::ReLU, rng);
    const MlpParams pb = make_mlp(b, Activation::ReLU, rng);
    const auto fwd = mlp_forward(pa, DenseVector{1, 2, 3});
    EXPECT_THROW(mlp_backward(pb, fwd.cache, DenseVector{1, 1}), DimensionError);
    EXPECT_THROW(mlp_backward(pa, fwd.cache, DenseVector{1, 1, 1}), DimensionError);
}

TEST(FiniteDifference, SquareAtThree) {
    const double theta[] = {3.0};
    const auto g = finite_difference_grad([](std::span<const double> t) { return t[0] * t[0]; }, theta);
    EXPECT_NEAR(g[0], 6.0, 1e-6);
}

TEST(FiniteDifference, ConstantHasZeroGradient) {
    std::mt19937_64 rng(4);
    std::vector<std::size_t> dims{3, 2};
    const MlpParams p = make_mlp(dims, Activation::ReLU, rng);
    const auto g = finite_difference_grad([](const MlpParams&) { return 4.2; }, p);
    for (double v : oracle::flatten(g)) EXPECT_EQ(v, 0.0);
}

TEST(FiniteDifference, Errors) {
    const double theta[] = {1.0};
    EXPECT_THROW(finite_difference_grad([](std::span<const double>) { return 0.0; }, theta, 0.0), DomainError);
    EXPECT_THROW(finite_difference_grad(
                     [](std::span<const double> t) { return t[0] > 1.0 ? std::numeric_limits<double>::infinity() : 0.0; },
                     theta),
                 NumericError);
}

TEST(MakeMlp, GlorotBoundAndZeroBias) {
    std::mt19937_64 rng(99);
    const double bound = std::sqrt(6.0 / 10.0);
    for (int rep = 0; rep < 1000; ++rep) {
        std::vector<std::size_t> dims{6, 4};
        const MlpParams p = make_mlp(dims, Activation::ReLU, rng);
        EXPECT_EQ(p.layers[0].weight.rows(), 4u);
        EXPECT_EQ(p.layers[0].weight.cols(), 6u);
        for (double w : p.layers[0].weight.values()) ASSERT_LE(std::abs(w), bound);
        for (double b : p.layers[0].bias) ASSERT_EQ(b, 0.0);
    }
}

}  // namespace
