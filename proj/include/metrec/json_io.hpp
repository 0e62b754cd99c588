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

// JSON forms of TrainConfig and MetricsReport.

#pragma once

#include <cstdint>
#include <string>
#include <type_traits>
#include <vector>

#include "json.hpp"

#include "metrec/error.hpp"
#include "metrec/evaluator.hpp"
#include "metrec/random.hpp"
#include "metrec/trainer.hpp"

namespace metrec {

using Json = nlohmann::ordered_json;

inline Json config_to_json(const TrainConfig& c) {
    Json j;
    j["seed"] = c.seed;
    j["epochs"] = c.epochs;
    j["steps_per_epoch"] = c.steps_per_epoch;
    j["batch_size"] = c.batch_size;
    j["learning_rate"] = c.learning_rate;
    j["optimizer"] = std::string(to_string(c.optimizer));
    j["adam_beta1"] = c.adam_beta1;
    j["adam_beta2"] = c.adam_beta2;
    j["adam_epsilon"] = c.adam_epsilon;
    j["margin"] = c.margin;
    j["embedding_dim"] = c.embedding_dim;
    j["user_hidden_dims"] = c.user_hidden_dims;
    j["item_hidden_dims"] = c.item_hidden_dims;
    j["activation"] = std::string(to_string(c.activation));
    j["rating_threshold"] = c.rating_threshold;
    j["train_ratio"] = c.train_ratio;
    j["clip_radius"] = c.clip_radius ? Json(*c.clip_radius) : Json(nullptr);
    return j;
}

namespace detail {

template <class T>
T json_get(const Json& value, const std::string& key) {
    try {
        if constexpr (std::is_unsigned_v<T>) {
            if (value.is_number_integer() && value.get<std::int64_t>() < 0) {
                throw ConfigError(key, key + " must be nonnegative");
            }
            if (!value.is_number_integer()) {
                throw ConfigError(key, key + " must be an integer");
            }
        }
        return value.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(key, key + " has the wrong type");
    }
}

}  // namespace detail

/// Applies the keys of a flat JSON object onto `base`; unknown keys are errors.
inline TrainConfig config_from_json(const Json& j, TrainConfig base = {}) {
    if (!j.is_object()) {
        throw ConfigError("", "config must be a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        if (key == "seed") base.seed = detail::json_get<std::uint64_t>(value, key);
        else if (key == "epochs") base.epochs = detail::json_get<std::size_t>(value, key);
        else if (key == "steps_per_epoch") base.steps_per_epoch = detail::json_get<std::size_t>(value, key);
        else if (key == "batch_size") base.batch_size = detail::json_get<std::size_t>(value, key);
        else if (key == "learning_rate") base.learning_rate = detail::json_get<double>(value, key);
        else if (key == "optimizer") base.optimizer = parse_optimizer(detail::json_get<std::string>(value, key));
        else if (key == "adam_beta1") base.adam_beta1 = detail::json_get<double>(value, key);
        else if (key == "adam_beta2") base.adam_beta2 = detail::json_get<double>(value, key);
        else if (key == "adam_epsilon") base.adam_epsilon = detail::json_get<double>(value, key);
        else if (key == "margin") base.margin = detail::json_get<double>(value, key);
        else if (key == "embedding_dim") base.embedding_dim = detail::json_get<std::size_t>(value, key);
        else if (key == "user_hidden_dims") base.user_hidden_dims = detail::json_get<std::vector<std::size_t>>(value, key);
        else if (key == "item_hidden_dims") base.item_hidden_dims = detail::json_get<std::vector<std::size_t>>(value, key);
        else if (key == "activation") base.activation = parse_activation(detail::json_get<std::string>(value, key));
        else if (key == "rating_threshold") base.rating_threshold = detail::json_get<double>(value, key);
        else if (key == "train_ratio") base.train_ratio = detail::json_get<double>(value, key);
        else if (key == "clip_radius") {
            if (value.is_null()) base.clip_radius.reset();
            else base.clip_radius = detail::json_get<double>(value, key);
        } else {
            throw ConfigError(key, "unknown config key: " + key);
        }
    }
    return base;
}

inline std::uint64_t config_hash(const TrainConfig& c) { return fnv1a(config_to_json(c).dump()); }

/// JSON twin of write_metrics_csv, plus config hash and seed.
inline Json metrics_to_json(const MetricsReport& report) {
    Json rows = Json::array();
    for (const char* metric : {"precision", "recall"}) {
        const auto& values = std::string(metric) == "precision" ? report.precision : report.recall;
        for (std::size_t j = 0; j < report.ks.size(); ++j) {
            rows.push_back({{"metric", metric},
                            {"k", report.ks[j]},
                            {"value", values[j]},
                            {"n_users", report.n_eval_users}});
        }
    }
    Json out;
    out["metrics"] = std::move(rows);
    out["config_hash"] = detail::hex64(report.config_hash);
    out["seed"] = report.seed;
    return out;
}

}  // namespace metrec
