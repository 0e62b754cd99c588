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
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "metrec/dataset.hpp"
#include "metrec/error.hpp"
#include "metrec/evaluator.hpp"

namespace metrec {

/// Scores every item by minus its train interaction count.
class PopularityScorer final : public Scorer {
public:
    explicit PopularityScorer(const ImplicitSplit& split) : counts_(split.n_items, 0.0) {
        if (split.train_size() == 0) {
            throw DomainError("popularity_scorer: empty train split");
        }
        for (const auto& items : split.train) {
            for (ItemId i : items) counts_[i] += 1.0;
        }
    }

    std::vector<double> score(UserId, std::span<const ItemId> candidates) const override {
        std::vector<double> out;
        out.reserve(candidates.size());
        for (ItemId i : candidates) {
            if (i >= counts_.size()) throw DomainError("item id " + std::to_string(i) + " out of range");
            out.push_back(-counts_[i]);
        }
        return out;
    }

    double count(ItemId item) const { return counts_.at(item); }

private:
    std::vector<double> counts_;
};

/// Cosine similarity of two binary vectors given as sorted index sets.
inline double cosine_similarity(const ItemSet& a, const ItemSet& b) {
    if (a.empty() || b.empty()) {
        return 0.0;
    }
    std::size_t overlap = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++overlap;
            ++ia;
            ++ib;
        }
    }
    return static_cast<double>(overlap) /
           std::sqrt(static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

/// User-based KNN over binary train vectors.
///
/// score(item) = -sum of sim(u, v) over the k most similar users v that hold
/// the item. Neighbors with zero similarity are dropped; neighbor ties go to
/// the lower user id. Users with no train items fall back to popularity.
class UserKnnScorer final : public Scorer {
public:
    UserKnnScorer(const ImplicitSplit& split, std::size_t k_neighbors = 50)
        : split_(&split), k_(k_neighbors), popularity_(split), item_users_(split.n_items) {
        if (k_neighbors == 0) {
            throw DomainError("user_knn_scorer: k_neighbors must be >= 1");
        }
        for (std::size_t u = 0; u < split.n_users(); ++u) {
            for (ItemId i : split.train[u]) item_users_[i].push_back(static_cast<UserId>(u));
        }
    }

    /// Neighbors of `user` with their similarity, best first.
    std::vector<std::pair<UserId, double>> neighbors(UserId user) const {
        const ItemSet& mine = split_->train.at(user);
        std::vector<std::uint32_t> overlap(split_->n_users(), 0);
        for (ItemId i : mine) {
            for (UserId v : item_users_[i]) ++overlap[v];
        }
        std::vector<std::pair<UserId, double>> sims;
        for (std::size_t v = 0; v < overlap.size(); ++v) {
            if (v == user || overlap[v] == 0) continue;
            const double denom = std::sqrt(static_cast<double>(mine.size()) *
                                           static_cast<double>(split_->train[v].size()));
            sims.emplace_back(static_cast<UserId>(v), overlap[v] / denom);
        }
        const std::size_t n = std::min(k_, sims.size());
        std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(n), sims.end(),
                          [](const auto& a, const auto& b) {
                              if (a.second != b.second) return a.second > b.second;
                              return a.first < b.first;
                          });
        sims.resize(n);
        return sims;
    }

    std::vector<double> score(UserId user, std::span<const ItemId> candidates) const override {
        if (user >= split_->n_users()) {
            throw DomainError("user id " + std::to_string(user) + " out of range");
        }
        if (split_->train[user].empty()) {
            return popularity_.score(user, candidates);
        }
        std::vector<double> item_score(split_->n_items, 0.0);
        for (const auto& [v, sim] : neighbors(user)) {
            for (ItemId i : split_->train[v]) item_score[i] -= sim;
        }
        std::vector<double> out;
        out.reserve(candidates.size());
        for (ItemId i : candidates) {
            if (i >= item_score.size()) throw DomainError("item id " + std::to_string(i) + " out of range");
            out.push_back(item_score[i]);
        }
        return out;
    }

private:
    const ImplicitSplit* split_;
    std::size_t k_;
    PopularityScorer popularity_;
    std::vector<std::vector<UserId>> item_users_;
};

}  // namespace metrec
