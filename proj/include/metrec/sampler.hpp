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

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "metrec/dataset.hpp"
#include "metrec/error.hpp"
#include "metrec/random.hpp"

namespace metrec {

struct Triplet {
    UserId user = 0;
    ItemId pos_item = 0;
    ItemId neg_item = 0;

    bool operator==(const Triplet&) const = default;
};

inline std::string to_string(const Triplet& t) {
    return "(user " + std::to_string(t.user) + ", pos " + std::to_string(t.pos_item) + ", neg " +
           std::to_string(t.neg_item) + ")";
}

/// Draws (user, positive, negative) triplets from the train side of a split.
///
/// Anchors are drawn proportionally to their train-positive count, i.e. a
/// uniform draw over observed (user, positive) pairs. Users whose positives
/// cover every item cannot produce a negative and are never drawn. Negatives
/// are uniform over the anchor's non-positives: rejection sampling first,
/// then explicit complement enumeration after kMaxRejections misses.
///
/// Holds a reference to the split; single owner, not thread-safe.
class TripletSampler {
public:
    static constexpr int kMaxRejections = 100;

    TripletSampler(const ImplicitSplit& split, std::uint64_t seed) : split_(&split), rng_(seed) {
        for (std::size_t u = 0; u < split.n_users(); ++u) {
            const auto& pos = split.train[u];
            if (pos.empty() || pos.size() >= split.n_items) {
                continue;
            }
            for (std::size_t k = 0; k < pos.size(); ++k) {
                pairs_.emplace_back(static_cast<UserId>(u), static_cast<std::uint32_t>(k));
            }
        }
    }

    /// Number of (user, positive) pairs eligible as anchors.
    std::size_t eligible_pairs() const noexcept { return pairs_.size(); }

    Triplet sample() {
        if (pairs_.empty()) {
            throw SamplingError("no valid triplets");
        }
        std::uniform_int_distribution<std::size_t> pick_pair(0, pairs_.size() - 1);
        const auto [user, slot] = pairs_[pick_pair(rng_)];
        const ItemSet& positives = split_->train[user];
        return {user, positives[slot], sample_negative(positives)};
    }

    std::vector<Triplet> sample_batch(std::size_t batch_size) {
        if (batch_size == 0) {
            throw DomainError("sample_batch: batch_size must be >= 1");
        }
        std::vector<Triplet> batch;
        batch.reserve(batch_size);
        for (std::size_t b = 0; b < batch_size; ++b) {
            batch.push_back(sample());
        }
        return batch;
    }

private:
    ItemId sample_negative(const ItemSet& positives) {
        const std::size_t n_items = split_->n_items;
        std::uniform_int_distribution<std::size_t> pick_item(0, n_items - 1);
        for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
            const auto item = static_cast<ItemId>(pick_item(rng_));
            if (!contains(positives, item)) {
                return item;
            }
        }
        std::vector<ItemId> complement;
        complement.reserve(n_items - positives.size());
        auto it = positives.begin();
        for (ItemId item = 0; item < n_items; ++item) {
            if (it != positives.end() && *it == item) {
                ++it;
            } else {
                complement.push_back(item);
            }
        }
        std::uniform_int_distribution<std::size_t> pick(0, complement.size() - 1);
        return complement[pick(rng_)];
    }

    const ImplicitSplit* split_;
    Rng rng_;
    std::vector<std::pair<UserId, std::uint32_t>> pairs_;
};

}  // namespace metrec
