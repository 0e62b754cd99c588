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
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "metrec/gradcheck.hpp"
#include "metrec/synthetic.hpp"
#include "metrec/trainer.hpp"
#include "oracles.hpp"

namespace {

using namespace metrec;

std::vector<double> flatten_model(const Model& m) {
    auto out = oracle::flatten(m.user_tower);
    const auto item = oracle::flatten(m.item_tower);
    out.insert(out.end(), item.begin(), item.end());
    return out;
}

std::vector<double> flatten_grads(const TowerGrads& g) {
    auto out = oracle::flatten(g.user);
    const auto item = oracle::flatten(g.item);
    out.insert(out.end(), item.begin(), item.end());
    return out;
}

Model with_params(Model m, std::span<const double> theta) {
    std::size_t k = 0;
    for (MlpParams* tower : {&m.user_tower, &m.item_tower}) {
        tower->for_each_block([&](std::span<double> b) {
            for (double& v : b) v = theta[k++];
        });
    }
    return m;
}

TrainConfig micro_config() {
    TrainConfig c;
    c.embedding_dim = 2;
    c.user_hidden_dims = {3};
    c.item_hidden_dims = {3};
    return c;
}

Model micro_model(std::mt19937_64& rng, const TrainConfig& c) {
    Model m = init_model(c, {4, 4}, rng);
    std::uniform_real_distribution<double> bias(-0.5, 0.5);
    for (MlpParams* tower : {&m.user_tower, &m.item_tower}) {
        for (auto& layer : tower->layers) {
            for (double& b : layer.bias) b = bias(rng);
        }
    }
    return m;
}

// Distance of every ReLU pre-activation and every clipped norm from its kink.
double kink_distance(const Model& m, const Triplet& t) {
    double closest = 1e300;
    const auto probe = [&](const MlpParams& tower, std::size_t id, Side side) {
        const auto r = mlp_forward(tower, one_hot(m.features, id, side));
        if (tower.activation == Activation::ReLU) {
            for (const auto& z : r.cache.pre) {
                for (double v : z) closest = std::min(closest, std::abs(v));
            }
        }
        if (m.clip_radius > 0.0) {
            double sq = 0.0;
            for (double v : r.output) sq += v * v;
            closest = std::min(closest, std::abs(std::sqrt(sq) - m.clip_radius));
        }
    };
    probe(m.user_tower, t.user, Side::User);
    probe(m.item_tower, t.pos_item, Side::Item);
    probe(m.item_tower, t.neg_item, Side::Item);
    return closest;
}

void check_pipeline_gradients(const TrainConfig& config, std::uint64_t seed, int wanted) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<UserId> id(0, 3);
    int checked = 0;
    int attempts = 0;
    while (checked < wanted) {
        ASSERT_LT(++attempts, 100000);
        const Model m = micro_model(rng, config);
        Triplet t{id(rng), id(rng), id(rng)};
        if (t.pos_item == t.neg_item) continue;
        if (kink_distance(m, t) < 1e-4) continue;
        const double loss = pipeline_loss(m, t);
        // Keep away from the hinge kink too.
        if (loss < 1e-3) continue;

        TowerGrads acc = TowerGrads::zeros_like(m);
        EXPECT_DOUBLE_EQ(accumulate_triplet(m, t, acc), loss);
        const auto theta = flatten_model(m);
        const auto numeric = finite_difference_grad(
            [&](std::span<const double> th) { return pipeline_loss(with_params(m, th), t); }, theta, 1e-6);
        const auto analytic = flatten_grads(acc);
        ASSERT_EQ(numeric.size(), analytic.size());
        for (std::size_t i = 0; i < analytic.size(); ++i) {
            ASSERT_TRUE(oracle::grad_close(analytic[i], numeric[i]))
                << "param " << i << ": " << analytic[i] << " vs " << numeric[i];
        }
        ++checked;
    }
}

TEST(InitModel, ShapesWithoutHiddenLayers) {
    TrainConfig c;
    c.embedding_dim = 2;
    c.user_hidden_dims = {};
    c.item_hidden_dims = {};
    Rng rng(1);
    const Model m = init_model(c, {3, 4}, rng);
    ASSERT_EQ(m.user_tower.depth(), 1u);
    EXPECT_EQ(m.user_tower.layers[0].weight.rows(), 2u);
    EXPECT_EQ(m.user_tower.layers[0].weight.cols(), 3u);
    EXPECT_EQ(m.item_tower.layers[0].weight.cols(), 4u);
    EXPECT_NO_THROW(m.validate());
}

TEST(InitModel, DefaultArchitecture) {
    Rng rng(1);
    const Model m = init_model(TrainConfig{}, {10, 20}, rng);
    ASSERT_EQ(m.user_tower.depth(), 2u);
    EXPECT_EQ(m.user_tower.layers[0].weight.rows(), 64u);
    EXPECT_EQ(m.user_tower.out_dim(), 32u);
    EXPECT_EQ(m.item_tower.in_dim(), 20u);
    EXPECT_EQ(m.user_tower.activation, Activation::ReLU);
    EXPECT_EQ(m.margin.value(), 1.0);
}

TEST(InitModel, SameSeedIdenticalWeights) {
    Rng a(9);
    Rng b(9);
    EXPECT_EQ(init_model(TrainConfig{}, {7, 5}, a), init_model(TrainConfig{}, {7, 5}, b));
}

TEST(InitModel, GlorotBound) {
    TrainConfig c;
    c.embedding_dim = 4;
    c.user_hidden_dims = {};
    c.item_hidden_dims = {};
    Rng rng(2);
    const double bound = std::sqrt(6.0 / 10.0);
    double largest = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
        const Model m = init_model(c, {6, 6}, rng);
        for (double w : m.user_tower.layers[0].weight.values()) largest = std::max(largest, std::abs(w));
        for (double b : m.user_tower.layers[0].bias) ASSERT_EQ(b, 0.0);
    }
    EXPECT_LE(largest, bound);
    EXPECT_GT(largest, 0.95 * bound);
}

TEST(InitModel, RejectsBadConfig) {
    TrainConfig c;
    c.embedding_dim = 0;
    Rng rng(3);
    EXPECT_THROW(init_model(c, {2, 2}, rng), ConfigError);
}

TEST(TrainConfigValidate, NamesOffendingKey) {
    TrainConfig c;
    c.learning_rate = -1.0;
    try {
        c.validate();
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.key(), "learning_rate");
        EXPECT_STREQ(e.what(), "learning_rate must be positive");
    }
    c = TrainConfig{};
    c.batch_size = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.clip_radius = -1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    EXPECT_EQ(parse_optimizer("sgd"), OptimizerKind::SGD);
    EXPECT_THROW(parse_optimizer("rmsprop"), ConfigError);
}

// User 0 sits at the origin, item 0 on it, item 1 five units away.
Model separated_model() {
    TrainConfig c;
    c.embedding_dim = 2;
    c.user_hidden_dims = {};
    c.item_hidden_dims = {};
    Rng rng(4);
    Model m = init_model(c, {1, 2}, rng);
    m.user_tower.layers[0].weight = DenseMatrix(2, 1);
    m.item_tower.layers[0].weight = DenseMatrix{{0.0, 5.0}, {0.0, 0.0}};
    return m;
}

TEST(Step, InactiveBatchIsNoOp) {
    for (OptimizerKind kind : {OptimizerKind::SGD, OptimizerKind::Adam}) {
        TrainConfig c;
        c.optimizer = kind;
        c.learning_rate = 0.1;
        Model m = separated_model();
        const Model before = m;
        OptimizerState state = make_optimizer_state(m, c);
        const std::vector<Triplet> batch(8, Triplet{0, 0, 1});
        const StepStats s = step(m, batch, state, c);
        EXPECT_EQ(s.mean_loss, 0.0);
        EXPECT_EQ(s.active_fraction, 0.0);
        EXPECT_EQ(m, before);
        for (double g : flatten_grads(state.grads)) EXPECT_EQ(g, 0.0);
    }
}

TEST(Step, SgdMovesByLearningRateTimesGradient) {
    TrainConfig c = micro_config();
    c.optimizer = OptimizerKind::SGD;
    c.learning_rate = 0.05;
    std::mt19937_64 rng(5);
    int done = 0;
    while (done < 20) {
        Model m = micro_model(rng, c);
        const Triplet t{1, 2, 3};
        if (pipeline_loss(m, t) < 1e-3 || kink_distance(m, t) < 1e-4) continue;
        const auto theta = flatten_model(m);
        const auto numeric = finite_difference_grad(
            [&](std::span<const double> th) { return pipeline_loss(with_params(m, th), t); }, theta, 1e-6);

        OptimizerState state = make_optimizer_state(m, c);
        const std::vector<Triplet> batch{t};
        step(m, batch, state, c);
        const auto grad = flatten_grads(state.grads);
        const auto after = flatten_model(m);
        for (std::size_t i = 0; i < theta.size(); ++i) {
            ASSERT_EQ(after[i], theta[i] - c.learning_rate * grad[i]);
            ASSERT_TRUE(oracle::grad_close(grad[i], numeric[i])) << grad[i] << " vs " << numeric[i];
        }
        ++done;
    }
}

TEST(Step, AveragesOverBatch) {
    TrainConfig c = micro_config();
    c.optimizer = OptimizerKind::SGD;
    std::mt19937_64 rng(6);
    const Model m = micro_model(rng, c);
    const std::vector<Triplet> batch{{0, 1, 2}, {3, 0, 1}, {2, 2, 3}};
    TowerGrads sum = TowerGrads::zeros_like(m);
    double total = 0.0;
    for (const auto& t : batch) total += accumulate_triplet(m, t, sum);
    Model stepped = m;
    OptimizerState state = make_optimizer_state(stepped, c);
    const StepStats s = step(stepped, batch, state, c);
    EXPECT_NEAR(s.mean_loss, total / 3.0, 1e-15);
    const auto a = flatten_grads(sum);
    const auto b = flatten_grads(state.grads);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b[i], a[i] / 3.0, 1e-15);
}

TEST(Step, AdamFirstStepMovesEachActiveParameterByLearningRate) {
    TrainConfig c = micro_config();
    c.learning_rate = 1e-3;
    std::mt19937_64 rng(7);
    Model m = micro_model(rng, c);
    const Triplet t{0, 1, 2};
    ASSERT_GT(pipeline_loss(m, t), 0.0);
    const auto before = flatten_model(m);
    OptimizerState state = make_optimizer_state(m, c);
    const std::vector<Triplet> batch{t};
    step(m, batch, state, c);
    const auto grad = flatten_grads(state.grads);
    const auto after = flatten_model(m);
    for (std::size_t i = 0; i < before.size(); ++i) {
        if (std::abs(grad[i]) > 1e-6) {
            EXPECT_NEAR(std::abs(after[i] - before[i]), c.learning_rate, 1e-7);
        } else if (grad[i] == 0.0) {
            EXPECT_EQ(after[i], before[i]);
        }
    }
}

TEST(Step, RejectsEmptyBatch) {
    TrainConfig c = micro_config();
    std::mt19937_64 rng(8);
    Model m = micro_model(rng, c);
    OptimizerState state = make_optimizer_state(m, c);
    EXPECT_THROW(step(m, {}, state, c), DomainError);
}

TEST(PipelineGradient, MatchesFiniteDifferencesRelu) { check_pipeline_gradients(micro_config(), 11, 40); }

TEST(PipelineGradient, MatchesFiniteDifferencesTanh) {
    TrainConfig c = micro_config();
    c.activation = Activation::Tanh;
    check_pipeline_gradients(c, 12, 40);
}

TEST(PipelineGradient, MatchesFiniteDifferencesWithClip) {
    TrainConfig c = micro_config();
    c.clip_radius = 0.3;
    check_pipeline_gradients(c, 13, 40);
}

TEST(ClipToBall, ProjectsOntoBall) {
    const auto h = clip_to_ball(DenseVector{3, 4}, 1.0);
    EXPECT_DOUBLE_EQ(h[0], 0.6);
    EXPECT_DOUBLE_EQ(h[1], 0.8);
    EXPECT_EQ(clip_to_ball(DenseVector{0.3, 0.4}, 1.0), (DenseVector{0.3, 0.4}));
    EXPECT_EQ(clip_to_ball(DenseVector{3, 4}, 0.0), (DenseVector{3, 4}));
}

TEST(Train, ClipRadiusBoundsEmbeddingsAfterTraining) {
    const PlantedDesign design;
    const ImplicitSplit split = planted_split(design);
    TrainConfig c;
    c.embedding_dim = 8;
    c.epochs = 3;
    c.learning_rate = 0.05;
    c.clip_radius = 1.0;
    const auto result = train(c, split, {design.n_users(), design.n_items()});
    for (UserId u = 0; u < design.n_users(); ++u) {
        const auto h = result.model.embed_user(u);
        EXPECT_LE(euclidean_distance(h, DenseVector(8)), 1.0 + 1e-9);
    }
    for (ItemId i = 0; i < design.n_items(); ++i) {
        const auto h = result.model.embed_item(i);
        EXPECT_LE(euclidean_distance(h, DenseVector(8)), 1.0 + 1e-9);
    }
}

TEST(Train, ZeroEpochsReturnsInitialModel) {
    const PlantedDesign design;
    const ImplicitSplit split = planted_split(design);
    TrainConfig c;
    c.epochs = 0;
    c.embedding_dim = 8;
    const FeatureSpec features{design.n_users(), design.n_items()};
    const auto result = train(c, split, features);
    Rng rng(derive_seed(c.seed, "init"));
    EXPECT_EQ(result.model, init_model(c, features, rng));
    EXPECT_TRUE(result.report.epochs.empty());
    EXPECT_EQ(result.report.steps_per_epoch, 3u);
}

TEST(Train, StepsPerEpochDefaultsToOnePass) {
    ImplicitSplit split;
    split.n_items = 4;
    split.train = {{0, 1}, {2}};
    split.test = {{}, {}};
    TrainConfig c;
    c.batch_size = 2;
    EXPECT_EQ(resolve_steps_per_epoch(c, split), 2u);
    c.batch_size = 256;
    EXPECT_EQ(resolve_steps_per_epoch(c, split), 1u);
    c.steps_per_epoch = 7;
    EXPECT_EQ(resolve_steps_per_epoch(c, split), 7u);
}

TEST(Train, RejectsMismatchedFeatures) {
    const PlantedDesign design;
    const ImplicitSplit split = planted_split(design);
    EXPECT_THROW(train(TrainConfig{}, split, {design.n_users() + 1, design.n_items()}), DimensionError);
}

TEST(Train, PlantedLossDropsBelowFloor) {
    const PlantedDesign design;
    const ImplicitSplit split = planted_split(design);
    TrainConfig c;
    c.embedding_dim = 8;
    c.epochs = 200;
    c.seed = 7;
    std::vector<double> seen;
    const auto result =
        train(c, split, {design.n_users(), design.n_items()}, [&](const EpochStats& e) { seen.push_back(e.mean_loss); });
    const auto& epochs = result.report.epochs;
    ASSERT_EQ(epochs.size(), 200u);
    EXPECT_EQ(seen.size(), 200u);
    EXPECT_LT(epochs[9].mean_loss, epochs[0].mean_loss);
    EXPECT_LT(epochs.back().mean_loss, 0.05 * c.margin);
    for (const auto& e : epochs) {
        EXPECT_GE(e.mean_loss, 0.0);
        EXPECT_GE(e.active_fraction, 0.0);
        EXPECT_LE(e.active_fraction, 1.0);
    }
}

TEST(Train, SameSeedSameLossSequence) {
    const PlantedDesign design;
    const ImplicitSplit split = planted_split(design);
    TrainConfig c;
    c.embedding_dim = 8;
    c.epochs = 5;
    const FeatureSpec features{design.n_users(), design.n_items()};
    const auto a = train(c, split, features);
    const auto b = train(c, split, features);
    ASSERT_EQ(a.report.epochs.size(), b.report.epochs.size());
    for (std::size_t e = 0; e < a.report.epochs.size(); ++e) {
        EXPECT_EQ(a.report.epochs[e].mean_loss, b.report.epochs[e].mean_loss);
        EXPECT_EQ(a.report.epochs[e].active_fraction, b.report.epochs[e].active_fraction);
    }
    EXPECT_EQ(a.model, b.model);
    c.seed = 43;
    EXPECT_NE(train(c, split, features).model, a.model);
}

TEST(Train, DivergenceCarriesPartialReport) {
    const PlantedDesign design;
    const ImplicitSplit split = planted_split(design);
    TrainConfig c;
    c.embedding_dim = 8;
    c.epochs = 50;
    c.optimizer = OptimizerKind::SGD;
    c.learning_rate = 1e300;
    try {
        train(c, split, {design.n_users(), design.n_items()});
        FAIL() << "expected divergence";
    } catch (const TrainingError& e) {
        EXPECT_LT(e.partial_report().epochs.size(), 50u);
        EXPECT_NE(std::string(e.what()).find("for triplet (user "), std::string::npos) << e.what();
    }
}

}  // namespace
