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
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <iterator>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "metrec/core_math.hpp"
#include "metrec/error.hpp"

namespace metrec {

using ExternalId = std::int64_t;
using UserId = std::uint32_t;
using ItemId = std::uint32_t;

/// Sorted, duplicate-free list of internal item ids.
using ItemSet = std::vector<ItemId>;

inline bool contains(const ItemSet& set, ItemId item) {
    return std::binary_search(set.begin(), set.end(), item);
}

struct Interaction {
    ExternalId user_id = 0;
    ExternalId item_id = 0;
    double rating = 0.0;
    std::int64_t timestamp = 0;

    bool operator==(const Interaction&) const = default;
};

enum class RatingFormat {
    ML1M,  // UserID::MovieID::Rating::Timestamp
    Csv,   // userId,movieId,rating,timestamp
    Tsv,   // user<TAB>item<TAB>rating<TAB>timestamp (MovieLens 100K u.data)
};

inline RatingFormat parse_rating_format(std::string_view name) {
    if (name == "ml1m") return RatingFormat::ML1M;
    if (name == "csv") return RatingFormat::Csv;
    if (name == "tsv") return RatingFormat::Tsv;
    throw ConfigError("format", "format must be ml1m, csv or tsv");
}

struct ParseResult {
    std::vector<Interaction> interactions;
    std::size_t duplicates = 0;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line, std::string_view delim) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + delim.size();
    }
    return fields;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <class T>
bool parse_number(std::string_view text, T& out) {
    text = trim(text);
    if (text.empty()) {
        return false;
    }
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (*first == '+') {
        ++first;
    }
    const auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

}  // namespace detail

/// Reads one rating record per non-empty line. Duplicate (user, item) pairs
/// keep the record with the larger timestamp, in the position of the first
/// occurrence, and are counted in ParseResult::duplicates. A non-numeric
/// first line of a CSV file is taken as a header and skipped.
inline ParseResult parse_ratings(std::istream& in, RatingFormat format = RatingFormat::ML1M) {
    const std::string_view delim = format == RatingFormat::ML1M ? "::" : format == RatingFormat::Csv ? "," : "\t";
    ParseResult result;
    std::map<std::pair<ExternalId, ExternalId>, std::size_t> seen;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = detail::trim(raw);
        if (line.empty()) {
            continue;
        }
        if (format != RatingFormat::ML1M && line_no == 1 && !(line.front() >= '0' && line.front() <= '9')) {
            continue;
        }
        const auto fields = detail::split_fields(line, delim);
        if (fields.size() != 4) {
            throw ParseError("malformed record: expected 4 fields, got " + std::to_string(fields.size()), line_no);
        }
        Interaction rec;
        if (!detail::parse_number(fields[0], rec.user_id) || rec.user_id < 1) {
            throw ParseError("malformed user id", line_no);
        }
        if (!detail::parse_number(fields[1], rec.item_id) || rec.item_id < 1) {
            throw ParseError("malformed item id", line_no);
        }
        if (!detail::parse_number(fields[2], rec.rating) || !std::isfinite(rec.rating)) {
            throw ParseError("malformed rating", line_no);
        }
        if (!detail::parse_number(fields[3], rec.timestamp)) {
            throw ParseError("malformed timestamp", line_no);
        }
        if (rec.rating < 1.0 || rec.rating > 5.0) {
            throw ParseError("rating out of range", line_no);
        }

        const auto key = std::make_pair(rec.user_id, rec.item_id);
        if (auto it = seen.find(key); it != seen.end()) {
            ++result.duplicates;
            auto& kept = result.interactions[it->second];
            if (rec.timestamp >= kept.timestamp) {
                kept = rec;
            }
            continue;
        }
        seen.emplace(key, result.interactions.size());
        result.interactions.push_back(rec);
    }
    return result;
}

/// Interactions plus dense, ascending-order remaps of the external ids.
class Dataset {
public:
    const std::vector<Interaction>& interactions() const noexcept { return interactions_; }
    std::size_t n_users() const noexcept { return user_ids_.size(); }
    std::size_t n_items() const noexcept { return item_ids_.size(); }

    ExternalId external_user(UserId u) const { return user_ids_.at(u); }
    ExternalId external_item(ItemId i) const { return item_ids_.at(i); }

    std::optional<UserId> user_index(ExternalId id) const { return lookup(user_ids_, id); }
    std::optional<ItemId> item_index(ExternalId id) const { return lookup(item_ids_, id); }

    friend Dataset build_dataset(std::vector<Interaction> interactions);

private:
    static std::optional<std::uint32_t> lookup(const std::vector<ExternalId>& ids, ExternalId id) {
        const auto it = std::lower_bound(ids.begin(), ids.end(), id);
        if (it == ids.end() || *it != id) {
            return std::nullopt;
        }
        return static_cast<std::uint32_t>(it - ids.begin());
    }

    std::vector<Interaction> interactions_;
    std::vector<ExternalId> user_ids_;
    std::vector<ExternalId> item_ids_;
};

inline Dataset build_dataset(std::vector<Interaction> interactions) {
    if (interactions.empty()) {
        throw DomainError("build_dataset: no interactions");
    }
    Dataset ds;
    for (const auto& rec : interactions) {
        ds.user_ids_.push_back(rec.user_id);
        ds.item_ids_.push_back(rec.item_id);
    }
    for (auto* ids : {&ds.user_ids_, &ds.item_ids_}) {
        std::sort(ids->begin(), ids->end());
        ids->erase(std::unique(ids->begin(), ids->end()), ids->end());
    }
    ds.interactions_ = std::move(interactions);
    return ds;
}

/// Per-user positive item sets: rating >= threshold.
inline std::vector<ItemSet> binarize(const Dataset& ds, double threshold) {
    if (!(threshold >= 1.0 && threshold <= 5.0)) {
        throw DomainError("binarize: threshold must lie in [1, 5]");
    }
    std::vector<ItemSet> positives(ds.n_users());
    for (const auto& rec : ds.interactions()) {
        if (rec.rating >= threshold) {
            positives[*ds.user_index(rec.user_id)].push_back(*ds.item_index(rec.item_id));
        }
    }
    for (auto& set : positives) {
        std::sort(set.begin(), set.end());
    }
    return positives;
}

/// Per-user train/test partition of the positive items.
struct ImplicitSplit {
    std::vector<ItemSet> train;
    std::vector<ItemSet> test;
    std::size_t n_items = 0;
    double threshold = 4.0;
    std::uint64_t seed = 0;

    std::size_t n_users() const noexcept { return train.size(); }

    std::size_t train_size() const noexcept {
        std::size_t n = 0;
        for (const auto& s : train) n += s.size();
        return n;
    }
    std::size_t test_size() const noexcept {
        std::size_t n = 0;
        for (const auto& s : test) n += s.size();
        return n;
    }

    /// Throws DomainError when a split invariant is broken.
    void validate() const {
        if (train.size() != test.size()) {
            throw DimensionError("split: train vs test user count", train.size(), test.size());
        }
        for (std::size_t u = 0; u < train.size(); ++u) {
            for (const ItemSet* set : {&train[u], &test[u]}) {
                if (!std::is_sorted(set->begin(), set->end()) ||
                    std::adjacent_find(set->begin(), set->end()) != set->end()) {
                    throw DomainError("split: item set of user " + std::to_string(u) + " is not sorted/unique");
                }
                if (!set->empty() && set->back() >= n_items) {
                    throw DomainError("split: item id out of range for user " + std::to_string(u));
                }
            }
            ItemSet both;
            std::set_intersection(train[u].begin(), train[u].end(), test[u].begin(), test[u].end(),
                                  std::back_inserter(both));
            if (!both.empty()) {
                throw DomainError("split: train and test overlap for user " + std::to_string(u));
            }
            if (!test[u].empty() && train[u].empty()) {
                throw DomainError("split: test user " + std::to_string(u) + " has no train positives");
            }
        }
    }
};

/// Per-user random holdout. `ratio` is the train fraction; a user with k >= 2
/// positives keeps round(ratio * k) of them for training, clamped to [1, k-1].
/// Users with fewer than two positives go entirely to train.
inline ImplicitSplit split_train_test(const std::vector<ItemSet>& positives, std::size_t n_items, double ratio,
                                      std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw DomainError("split_train_test: ratio must lie in (0, 1)");
    }
    ImplicitSplit split;
    split.n_items = n_items;
    split.seed = seed;
    split.train.resize(positives.size());
    split.test.resize(positives.size());
    std::mt19937_64 rng(seed);
    for (std::size_t u = 0; u < positives.size(); ++u) {
        ItemSet items = positives[u];
        const std::size_t k = items.size();
        if (k < 2) {
            split.train[u] = std::move(items);
            continue;
        }
        std::shuffle(items.begin(), items.end(), rng);
        auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(k)));
        n_train = std::clamp<std::size_t>(n_train, 1, k - 1);
        split.train[u].assign(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n_train));
        split.test[u].assign(items.begin() + static_cast<std::ptrdiff_t>(n_train), items.end());
        std::sort(split.train[u].begin(), split.train[u].end());
        std::sort(split.test[u].begin(), split.test[u].end());
    }
    return split;
}

/// Writes `user<TAB>item<TAB>train|test` lines using external ids, users in
/// internal order, train items before test items.
inline void write_manifest(std::ostream& out, const Dataset& ds, const ImplicitSplit& split) {
    for (std::size_t u = 0; u < split.n_users(); ++u) {
        const ExternalId user = ds.external_user(static_cast<UserId>(u));
        for (ItemId i : split.train[u]) {
            out << user << '\t' << ds.external_item(i) << "\ttrain\n";
        }
        for (ItemId i : split.test[u]) {
            out << user << '\t' << ds.external_item(i) << "\ttest\n";
        }
    }
}

/// Inverse of write_manifest against the same dataset.
inline ImplicitSplit read_manifest(std::istream& in, const Dataset& ds) {
    ImplicitSplit split;
    split.n_items = ds.n_items();
    split.train.resize(ds.n_users());
    split.test.resize(ds.n_users());
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = detail::trim(raw);
        if (line.empty()) {
            continue;
        }
        const auto fields = detail::split_fields(line, "\t");
        if (fields.size() != 3) {
            throw ParseError("malformed manifest record", line_no);
        }
        ExternalId user = 0;
        ExternalId item = 0;
        if (!detail::parse_number(fields[0], user) || !detail::parse_number(fields[1], item)) {
            throw ParseError("malformed manifest ids", line_no);
        }
        const auto u = ds.user_index(user);
        const auto i = ds.item_index(item);
        if (!u || !i) {
            throw ParseError("manifest refers to an id absent from the ratings", line_no);
        }
        const std::string_view side = detail::trim(fields[2]);
        if (side == "train") {
            split.train[*u].push_back(*i);
        } else if (side == "test") {
            split.test[*u].push_back(*i);
        } else {
            throw ParseError("manifest side must be train or test", line_no);
        }
    }
    for (auto* sets : {&split.train, &split.test}) {
        for (auto& set : *sets) {
            std::sort(set.begin(), set.end());
        }
    }
    split.validate();
    return split;
}

enum class Side { User, Item };

/// Input dimensions of the two towers (one-hot ids).
struct FeatureSpec {
    std::size_t n_users = 0;  // user tower input dim
    std::size_t n_items = 0;  // item tower input dim

    std::size_t dim(Side side) const noexcept { return side == Side::User ? n_users : n_items; }
    bool operator==(const FeatureSpec&) const = default;
};

inline OneHot one_hot(const FeatureSpec& spec, std::size_t internal_id, Side side) {
    const std::size_t dim = spec.dim(side);
    if (internal_id >= dim) {
        throw DomainError(std::string(side == Side::User ? "user" : "item") + " id " +
                          std::to_string(internal_id) + " out of range " + std::to_string(dim));
    }
    return {internal_id, dim};
}

inline DenseVector feature_vector(const FeatureSpec& spec, std::size_t internal_id, Side side) {
    return one_hot(spec, internal_id, side).to_dense();
}

}  // namespace metrec
