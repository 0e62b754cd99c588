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

// Planted-cluster interaction data with a known answer.
//
// User u belongs to cluster u % n_clusters and item i to cluster
// i % n_clusters; every user rates every item of its own cluster 5 and nothing
// else. External ids are internal ids + 1.
//
// The holdout is balanced: the k-th user of a cluster holds out the cluster
// positions congruent to k modulo (items_per_cluster / held_out), so every
// item keeps the same train count and item popularity carries no signal.

#pragma once

#include <algorithm>
#include <vector>

#include "metrec/dataset.hpp"
#include "metrec/error.hpp"

namespace metrec {

struct PlantedDesign {
    std::size_t n_clusters = 2;
    std::size_t users_per_cluster = 20;
    std::size_t items_per_cluster = 20;
    std::size_t held_out = 4;  // per user

    std::size_t n_users() const noexcept { return n_clusters * users_per_cluster; }
    std::size_t n_items() const noexcept { return n_clusters * items_per_cluster; }

    void validate() const {
        if (n_clusters == 0 || users_per_cluster == 0 || items_per_cluster == 0) {
            throw DomainError("planted design: empty clusters");
        }
        if (held_out == 0 || held_out >= items_per_cluster || items_per_cluster % held_out != 0) {
            throw DomainError("planted design: held_out must divide items_per_cluster and leave a train item");
        }
    }
};

inline std::size_t planted_cluster(std::size_t id, const PlantedDesign& design) { return id % design.n_clusters; }

inline std::vector<Interaction> planted_interactions(const PlantedDesign& design) {
    design.validate();
    std::vector<Interaction> out;
    for (std::size_t u = 0; u < design.n_users(); ++u) {
        for (std::size_t i = 0; i < design.n_items(); ++i) {
            if (planted_cluster(u, design) == planted_cluster(i, design)) {
                out.push_back({static_cast<ExternalId>(u + 1), static_cast<ExternalId>(i + 1), 5.0, 0});
            }
        }
    }
    return out;
}

inline ImplicitSplit planted_split(const PlantedDesign& design) {
    design.validate();
    const std::size_t stride = design.items_per_cluster / design.held_out;
    ImplicitSplit split;
    split.n_items = design.n_items();
    split.threshold = 5.0;
    split.train.resize(design.n_users());
    split.test.resize(design.n_users());
    for (std::size_t u = 0; u < design.n_users(); ++u) {
        const std::size_t cluster = planted_cluster(u, design);
        const std::size_t k = u / design.n_clusters;
        for (std::size_t p = 0; p < design.items_per_cluster; ++p) {
            const auto item = static_cast<ItemId>(cluster + design.n_clusters * p);
            (p % stride == k % stride ? split.test : split.train)[u].push_back(item);
        }
    }
    split.validate();
    return split;
}

}  // namespace metrec
