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

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "metrec/dataset.hpp"
#include "metrec/error.hpp"
#include "metrec/metric_loss.hpp"
#include "metrec/trainer.hpp"

namespace metrec {

/// Ranks candidate items for a user. Lower scores rank first.
class Scorer {
public:
    virtual ~Scorer() = default;
    virtual std::vector<double> score(UserId user, std::span<const ItemId> candidates) const = 0;
};

/// Distance of the user's embedding to each candidate's embedding.
inline std::vector<double> score_user(const Model& model, UserId user, std::span<const ItemId> candidates) {
    const DenseVector h_u = model.embed_user(user);
    std::vector<double> out;
    out.reserve(candidates.size());
    for (ItemId item : candidates) {
        out.push_back(euclidean_distance(h_u, model.embed_item(item)));
    }
    return out;
}

/// score_user with every item embedding computed once up front.
class ModelScorer final : public Scorer {
public:
    explicit ModelScorer(const Model& model) : model_(&model) {
        model.validate();
        items_.reserve(model.features.n_items);
        for (std::size_t i = 0; i < model.features.n_items; ++i) {
            items_.push_back(model.embed_item(static_cast<ItemId>(i)));
        }
    }

    std::vector<double> score(UserId user, std::span<const ItemId> candidates) const override {
        const DenseVector h_u = model_->embed_user(user);
        std::vector<double> out;
        out.reserve(candidates.size());
        for (ItemId item : candidates) {
            if (item >= items_.size()) {
                throw DomainError("item id " + std::to_string(item) + " out of range");
            }
            out.push_back(euclidean_distance(h_u, items_[item]));
        }
        return out;
    }

private:
    const Model* model_;
    std::vector<DenseVector> items_;
};

struct RankedList {
    UserId user = 0;
    std::vector<ItemId> items;
    std::vector<double> scores;
};

/// The k lowest-scoring candidates not in `exclusions`, ties broken by
/// ascending item id. Returns everything left when fewer than k remain.
inline RankedList top_k(std::span<const ItemId> candidates, std::span<const double> scores, std::size_t k,
                        const ItemSet& exclusions = {}, UserId user = 0) {
    if (k == 0) {
        throw DomainError("top_k: k must be >= 1");
    }
    if (candidates.size() != scores.size()) {
        throw DimensionError("top_k: candidates vs scores", candidates.size(), scores.size());
    }
    std::vector<std::size_t> order;
    order.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (!contains(exclusions, candidates[i])) {
            order.push_back(i);
        }
    }
    const auto before = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] < scores[b];
        return candidates[a] < candidates[b];
    };
    const std::size_t n = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(), before);

    RankedList out;
    out.user = user;
    out.items.reserve(n);
    out.scores.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
        out.items.push_back(candidates[order[r]]);
        out.scores.push_back(scores[order[r]]);
    }
    return out;
}

/// Number of relevant items among the first k of the list.
inline std::size_t hits_at_k(const RankedList& ranked, const ItemSet& relevant, std::size_t k) {
    const std::size_t n = std::min(k, ranked.items.size());
    std::size_t hits = 0;
    for (std::size_t r = 0; r < n; ++r) {
        hits += contains(relevant, ranked.items[r]) ? 1 : 0;
    }
    return hits;
}

/// hits / k, with k as the denominator even for shorter lists.
inline double precision_at_k(const RankedList& ranked, const ItemSet& relevant, std::size_t k) {
    if (k == 0) {
        throw DomainError("precision_at_k: k must be >= 1");
    }
    return static_cast<double>(hits_at_k(ranked, relevant, k)) / static_cast<double>(k);
}

/// hits / |relevant|; nullopt when there is nothing relevant.
inline std::optional<double> recall_at_k(const RankedList& ranked, const ItemSet& relevant, std::size_t k) {
    if (k == 0) {
        throw DomainError("recall_at_k: k must be >= 1");
    }
    if (relevant.empty()) {
        return std::nullopt;
    }
    return static_cast<double>(hits_at_k(ranked, relevant, k)) / static_cast<double>(relevant.size());
}

struct UserResult {
    UserId user = 0;
    std::size_t n_relevant = 0;
    std::vector<std::size_t> hits;  // one per K, same order as MetricsReport::ks
    RankedList ranked;
};

struct MetricsReport {
    std::vector<std::size_t> ks;
    std::vector<double> precision;  // macro-average per K
    std::vector<double> recall;
    std::size_t n_eval_users = 0;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::vector<UserResult> users;  // filled when requested
};

struct EvaluateOptions {
    bool keep_user_results = false;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
};

/// Full-ranking evaluation. For every user with test positives, candidates are
/// all items minus the user's train positives; metrics are unweighted means
/// over those users.
inline MetricsReport evaluate(const Scorer& scorer, const ImplicitSplit& split, std::vector<std::size_t> ks,
                              const EvaluateOptions& options = {}) {
    if (ks.empty()) {
        throw DomainError("evaluate: K list is empty");
    }
    for (std::size_t k : ks) {
        if (k == 0) throw DomainError("evaluate: K must be >= 1");
    }
    MetricsReport report;
    report.ks = std::move(ks);
    report.config_hash = options.config_hash;
    report.seed = options.seed;
    report.precision.assign(report.ks.size(), 0.0);
    report.recall.assign(report.ks.size(), 0.0);
    const std::size_t k_max = *std::max_element(report.ks.begin(), report.ks.end());

    std::vector<ItemId> candidates;
    for (std::size_t u = 0; u < split.n_users(); ++u) {
        const ItemSet& relevant = split.test[u];
        if (relevant.empty()) {
            continue;
        }
        const ItemSet& seen = split.train[u];
        candidates.clear();
        for (ItemId i = 0; i < split.n_items; ++i) {
            if (!contains(seen, i)) candidates.push_back(i);
        }
        const auto user = static_cast<UserId>(u);
        const auto scores = scorer.score(user, candidates);
        RankedList ranked = top_k(candidates, scores, k_max, {}, user);

        UserResult result{user, relevant.size(), {}, {}};
        for (std::size_t j = 0; j < report.ks.size(); ++j) {
            const std::size_t hits = hits_at_k(ranked, relevant, report.ks[j]);
            result.hits.push_back(hits);
            report.precision[j] += static_cast<double>(hits) / static_cast<double>(report.ks[j]);
            report.recall[j] += static_cast<double>(hits) / static_cast<double>(relevant.size());
        }
        ++report.n_eval_users;
        if (options.keep_user_results) {
            result.ranked = std::move(ranked);
            report.users.push_back(std::move(result));
        }
    }
    if (report.n_eval_users == 0) {
        throw DomainError("evaluate: no users with test positives");
    }
    for (std::size_t j = 0; j < report.ks.size(); ++j) {
        report.precision[j] /= static_cast<double>(report.n_eval_users);
        report.recall[j] /= static_cast<double>(report.n_eval_users);
    }
    return report;
}

inline MetricsReport evaluate(const Model& model, const ImplicitSplit& split, std::vector<std::size_t> ks,
                              const EvaluateOptions& options = {}) {
    return evaluate(ModelScorer(model), split, std::move(ks), options);
}

namespace detail {

inline std::string format_metric(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

inline std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace detail

/// `metric,k,value,n_users`, precision rows then recall rows.
inline void write_metrics_csv(std::ostream& out, const MetricsReport& report) {
    out << "metric,k,value,n_users\n";
    for (std::size_t j = 0; j < report.ks.size(); ++j) {
        out << "precision," << report.ks[j] << ',' << detail::format_metric(report.precision[j]) << ','
            << report.n_eval_users << '\n';
    }
    for (std::size_t j = 0; j < report.ks.size(); ++j) {
        out << "recall," << report.ks[j] << ',' << detail::format_metric(report.recall[j]) << ','
            << report.n_eval_users << '\n';
    }
}

}  // namespace metrec
