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

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "metrec/core_math.hpp"
#include "metrec/dataset.hpp"
#include "metrec/error.hpp"
#include "metrec/metric_loss.hpp"
#include "metrec/random.hpp"
#include "metrec/sampler.hpp"

namespace metrec {

enum class OptimizerKind { SGD, Adam };

inline std::string_view to_string(OptimizerKind kind) noexcept {
    return kind == OptimizerKind::SGD ? "sgd" : "adam";
}

inline OptimizerKind parse_optimizer(std::string_view name) {
    if (name == "sgd") return OptimizerKind::SGD;
    if (name == "adam") return OptimizerKind::Adam;
    throw ConfigError("optimizer", "optimizer must be sgd or adam");
}

struct TrainConfig {
    std::uint64_t seed = 42;
    std::size_t epochs = 20;
    std::size_t steps_per_epoch = 0;  // 0: ceil(train interactions / batch_size)
    std::size_t batch_size = 256;
    double learning_rate = 1e-3;
    OptimizerKind optimizer = OptimizerKind::Adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double margin = 1.0;
    std::size_t embedding_dim = 32;
    std::vector<std::size_t> user_hidden_dims{64};
    std::vector<std::size_t> item_hidden_dims{64};
    Activation activation = Activation::ReLU;
    double rating_threshold = 4.0;
    double train_ratio = 0.8;
    std::optional<double> clip_radius;  // max-norm of output embeddings

    /// Throws ConfigError naming the first offending key.
    void validate() const {
        if (batch_size == 0) throw ConfigError("batch_size", "batch_size must be positive");
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
            throw ConfigError("learning_rate", "learning_rate must be positive");
        }
        if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ConfigError("adam_beta1", "adam_beta1 must lie in [0, 1)");
        if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ConfigError("adam_beta2", "adam_beta2 must lie in [0, 1)");
        if (!(adam_epsilon > 0.0)) throw ConfigError("adam_epsilon", "adam_epsilon must be positive");
        if (!(margin >= 0.0) || !std::isfinite(margin)) {
            throw ConfigError("margin", "margin must be finite and nonnegative");
        }
        if (embedding_dim == 0) throw ConfigError("embedding_dim", "embedding_dim must be >= 1");
        for (std::size_t h : user_hidden_dims) {
            if (h == 0) throw ConfigError("user_hidden_dims", "user_hidden_dims entries must be positive");
        }
        for (std::size_t h : item_hidden_dims) {
            if (h == 0) throw ConfigError("item_hidden_dims", "item_hidden_dims entries must be positive");
        }
        if (!(rating_threshold >= 1.0 && rating_threshold <= 5.0)) {
            throw ConfigError("rating_threshold", "rating_threshold must lie in [1, 5]");
        }
        if (!(train_ratio > 0.0 && train_ratio < 1.0)) {
            throw ConfigError("train_ratio", "train_ratio must lie in (0, 1)");
        }
        if (clip_radius && !(*clip_radius > 0.0 && std::isfinite(*clip_radius))) {
            throw ConfigError("clip_radius", "clip_radius must be positive");
        }
    }
};

// Max-norm projection onto the ball of radius r (r <= 0 disables it).
inline DenseVector clip_to_ball(DenseVector h, double radius) {
    if (radius <= 0.0) {
        return h;
    }
    double sq = 0.0;
    for (double v : h) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm > radius) {
        const double s = radius / norm;
        for (double& v : h) v *= s;
    }
    return h;
}

// Pulls grad_out back through clip_to_ball evaluated at `raw`.
inline DenseVector clip_backward(std::span<const double> raw, std::span<const double> grad_out, double radius) {
    DenseVector g(grad_out);
    if (radius <= 0.0) {
        return g;
    }
    double sq = 0.0;
    for (double v : raw) sq += v * v;
    const double norm = std::sqrt(sq);
    if (!(norm > radius)) {
        return g;
    }
    double proj = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) proj += raw[i] * grad_out[i];
    proj /= norm;
    const double s = radius / norm;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        g[i] = s * (grad_out[i] - raw[i] / norm * proj);
    }
    return g;
}

/// Two towers embedding one-hot users and items into the same R^d.
struct Model {
    MlpParams user_tower;
    MlpParams item_tower;
    std::size_t embedding_dim = 0;
    Margin margin;
    FeatureSpec features;
    double clip_radius = 0.0;  // 0: no clipping

    void validate() const {
        user_tower.validate();
        item_tower.validate();
        if (user_tower.out_dim() != embedding_dim) {
            throw DimensionError("user tower output vs embedding dim", user_tower.out_dim(), embedding_dim);
        }
        if (item_tower.out_dim() != embedding_dim) {
            throw DimensionError("item tower output vs embedding dim", item_tower.out_dim(), embedding_dim);
        }
        if (user_tower.in_dim() != features.n_users) {
            throw DimensionError("user tower input vs user count", user_tower.in_dim(), features.n_users);
        }
        if (item_tower.in_dim() != features.n_items) {
            throw DimensionError("item tower input vs item count", item_tower.in_dim(), features.n_items);
        }
    }

    const MlpParams& tower(Side side) const noexcept { return side == Side::User ? user_tower : item_tower; }

    DenseVector embed(Side side, std::size_t id) const {
        return clip_to_ball(mlp_forward(tower(side), one_hot(features, id, side)).output, clip_radius);
    }
    DenseVector embed_user(UserId u) const { return embed(Side::User, u); }
    DenseVector embed_item(ItemId i) const { return embed(Side::Item, i); }

    bool operator==(const Model&) const = default;
};

inline std::vector<std::size_t> tower_dims(std::size_t input, const std::vector<std::size_t>& hidden,
                                           std::size_t output) {
    std::vector<std::size_t> dims{input};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(output);
    return dims;
}

inline Model init_model(const TrainConfig& config, const FeatureSpec& features, Rng& rng) {
    config.validate();
    if (features.n_users == 0 || features.n_items == 0) {
        throw DimensionError("init_model: user and item counts must be >= 1", features.n_users, features.n_items);
    }
    Model model;
    model.embedding_dim = config.embedding_dim;
    model.margin = Margin(config.margin);
    model.features = features;
    model.clip_radius = config.clip_radius.value_or(0.0);
    model.user_tower =
        make_mlp(tower_dims(features.n_users, config.user_hidden_dims, config.embedding_dim), config.activation, rng);
    model.item_tower =
        make_mlp(tower_dims(features.n_items, config.item_hidden_dims, config.embedding_dim), config.activation, rng);
    return model;
}

struct TowerGrads {
    MlpParams user;
    MlpParams item;

    static TowerGrads zeros_like(const Model& model) {
        return {MlpParams::zeros_like(model.user_tower), MlpParams::zeros_like(model.item_tower)};
    }
    void set_zero() {
        user.set_zero();
        item.set_zero();
    }
};

/// Forward/backward of one triplet through both towers. Adds scale * dL/dθ
/// into `acc` and returns the loss.
inline double accumulate_triplet(const Model& model, const Triplet& t, TowerGrads& acc, double scale = 1.0) {
    const auto forward = [&](Side side, std::size_t id) {
        try {
            return mlp_forward(model.tower(side), one_hot(model.features, id, side));
        } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " for triplet " + to_string(t));
        }
    };
    const auto anchor = forward(Side::User, t.user);
    const auto pos = forward(Side::Item, t.pos_item);
    const auto neg = forward(Side::Item, t.neg_item);

    const double r = model.clip_radius;
    const DenseVector h_a = clip_to_ball(anchor.output, r);
    const DenseVector h_p = clip_to_ball(pos.output, r);
    const DenseVector h_n = clip_to_ball(neg.output, r);

    const TripletGrads g = triplet_loss_grads({h_a, h_p, h_n}, model.margin);
    if (!std::isfinite(g.loss) || !all_finite(g.anchor) || !all_finite(g.positive) || !all_finite(g.negative)) {
        throw NumericError("non-finite loss or gradient for triplet " + to_string(t));
    }
    if (g.loss == 0.0) {
        return 0.0;
    }
    accumulate_backward(model.user_tower, anchor.cache, clip_backward(anchor.output, g.anchor, r), acc.user, scale);
    accumulate_backward(model.item_tower, pos.cache, clip_backward(pos.output, g.positive, r), acc.item, scale);
    accumulate_backward(model.item_tower, neg.cache, clip_backward(neg.output, g.negative, r), acc.item, scale);
    return g.loss;
}

/// Loss of one triplet through the whole pipeline (no gradients).
inline double pipeline_loss(const Model& model, const Triplet& t) {
    const DenseVector h_a = model.embed_user(t.user);
    const DenseVector h_p = model.embed_item(t.pos_item);
    const DenseVector h_n = model.embed_item(t.neg_item);
    return triplet_loss({h_a, h_p, h_n}, model.margin);
}

/// Optimizer moments plus a reusable gradient buffer.
struct OptimizerState {
    std::uint64_t t = 0;
    TowerGrads first_moment;
    TowerGrads second_moment;
    TowerGrads grads;
};

inline OptimizerState make_optimizer_state(const Model& model, const TrainConfig& config) {
    OptimizerState state;
    state.grads = TowerGrads::zeros_like(model);
    if (config.optimizer == OptimizerKind::Adam) {
        state.first_moment = TowerGrads::zeros_like(model);
        state.second_moment = TowerGrads::zeros_like(model);
    }
    return state;
}

namespace detail {

inline std::vector<std::span<double>> blocks_of(MlpParams& p) {
    std::vector<std::span<double>> out;
    p.for_each_block([&](std::span<double> b) { out.push_back(b); });
    return out;
}

inline void apply_tower_update(MlpParams& params, MlpParams& grad, MlpParams* m, MlpParams* v,
                               const TrainConfig& config, std::uint64_t t) {
    auto p_blocks = blocks_of(params);
    auto g_blocks = blocks_of(grad);
    if (config.optimizer == OptimizerKind::SGD) {
        for (std::size_t b = 0; b < p_blocks.size(); ++b) {
            for (std::size_t i = 0; i < p_blocks[b].size(); ++i) {
                p_blocks[b][i] -= config.learning_rate * g_blocks[b][i];
            }
        }
        return;
    }
    auto m_blocks = blocks_of(*m);
    auto v_blocks = blocks_of(*v);
    const double b1 = config.adam_beta1;
    const double b2 = config.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t b = 0; b < p_blocks.size(); ++b) {
        auto p = p_blocks[b];
        auto g = g_blocks[b];
        auto mb = m_blocks[b];
        auto vb = v_blocks[b];
        for (std::size_t i = 0; i < p.size(); ++i) {
            mb[i] = b1 * mb[i] + (1.0 - b1) * g[i];
            vb[i] = b2 * vb[i] + (1.0 - b2) * g[i] * g[i];
            const double m_hat = mb[i] / c1;
            const double v_hat = vb[i] / c2;
            p[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_epsilon);
        }
    }
}

}  // namespace detail

/// Applies one optimizer update from the gradients in state.grads.
inline void apply_update(Model& model, OptimizerState& state, const TrainConfig& config) {
    ++state.t;
    const bool adam = config.optimizer == OptimizerKind::Adam;
    detail::apply_tower_update(model.user_tower, state.grads.user, adam ? &state.first_moment.user : nullptr,
                               adam ? &state.second_moment.user : nullptr, config, state.t);
    detail::apply_tower_update(model.item_tower, state.grads.item, adam ? &state.first_moment.item : nullptr,
                               adam ? &state.second_moment.item : nullptr, config, state.t);
}

struct StepStats {
    double mean_loss = 0.0;
    double active_fraction = 0.0;
};

/// One optimization step: batch-averaged gradients, one optimizer update.
inline StepStats step(Model& model, std::span<const Triplet> batch, OptimizerState& state,
                      const TrainConfig& config) {
    if (batch.empty()) {
        throw DomainError("step: empty batch");
    }
    if (state.grads.user.depth() != model.user_tower.depth()) {
        state = make_optimizer_state(model, config);
    }
    state.grads.set_zero();
    const double scale = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    std::size_t active = 0;
    for (const Triplet& t : batch) {
        const double loss = accumulate_triplet(model, t, state.grads, scale);
        total += loss;
        active += loss > 0.0 ? 1 : 0;
    }
    apply_update(model, state, config);
    return {total * scale, static_cast<double>(active) * scale};
}

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double mean_loss = 0.0;
    double active_fraction = 0.0;
    double seconds = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    TrainConfig config;
    std::uint64_t seed = 0;
    std::size_t steps_per_epoch = 0;
};

/// Carries whatever was recorded before training failed.
class TrainingError : public Error {
public:
    TrainingError(const std::string& what, TrainReport partial) : Error(what), partial_(std::move(partial)) {}
    const TrainReport& partial_report() const noexcept { return partial_; }

private:
    TrainReport partial_;
};

struct TrainResult {
    Model model;
    TrainReport report;
};

inline std::size_t resolve_steps_per_epoch(const TrainConfig& config, const ImplicitSplit& split) {
    if (config.steps_per_epoch > 0) {
        return config.steps_per_epoch;
    }
    const std::size_t n = split.train_size();
    return std::max<std::size_t>(1, (n + config.batch_size - 1) / config.batch_size);
}

using EpochCallback = std::function<void(const EpochStats&)>;

/// Trains a freshly initialized model. Deterministic in config.seed: the
/// initializer and the sampler draw from named sub-seeds of it.
inline TrainResult train(const TrainConfig& config, const ImplicitSplit& split, const FeatureSpec& features,
                         const EpochCallback& on_epoch = {}) {
    config.validate();
    if (split.n_items != features.n_items || split.n_users() != features.n_users) {
        throw DimensionError("train: split user count vs feature spec", split.n_users(), features.n_users);
    }
    Rng init_rng(derive_seed(config.seed, "init"));
    TrainResult result{init_model(config, features, init_rng), {}};
    result.report.config = config;
    result.report.seed = config.seed;
    result.report.steps_per_epoch = resolve_steps_per_epoch(config, split);
    if (config.epochs == 0) {
        return result;
    }

    TripletSampler sampler(split, derive_seed(config.seed, "sampler"));
    OptimizerState state = make_optimizer_state(result.model, config);
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        double loss_sum = 0.0;
        double active_sum = 0.0;
        try {
            for (std::size_t s = 0; s < result.report.steps_per_epoch; ++s) {
                const auto batch = sampler.sample_batch(config.batch_size);
                const StepStats stats = step(result.model, batch, state, config);
                loss_sum += stats.mean_loss;
                active_sum += stats.active_fraction;
            }
        } catch (const Error& e) {
            throw TrainingError(std::string("epoch ") + std::to_string(epoch) + ": " + e.what(), result.report);
        }
        const double steps = static_cast<double>(result.report.steps_per_epoch);
        EpochStats stats{epoch, loss_sum / steps, active_sum / steps,
                         std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
        result.report.epochs.push_back(stats);
        if (on_epoch) {
            on_epoch(stats);
        }
    }
    return result;
}

}  // namespace metrec
