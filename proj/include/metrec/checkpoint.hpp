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

// Binary model checkpoints.
//
// Layout (all integers little-endian u32, all reals little-endian f64):
//
//   "MRECv1"
//   per tower, user then item:  layer_count, activation, then rows, cols per layer
//   per tower, user then item:  for each layer W (row-major) then b
//   embedding_dim, margin, clip_radius   (f64)

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <iterator>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "metrec/core_math.hpp"
#include "metrec/error.hpp"
#include "metrec/trainer.hpp"

namespace metrec {

inline constexpr std::string_view kCheckpointMagic = "MRECv1";

namespace detail {

class ByteWriter {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    }
    void f64(double v) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
    }
    void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
    std::vector<char> take() { return std::move(bytes_); }

private:
    std::vector<char> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const char> bytes) : bytes_(bytes) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return std::bit_cast<double>(bits);
    }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (remaining() < n) {
            throw CheckpointError(CheckpointErrorKind::Truncated, "truncated checkpoint");
        }
    }

    std::span<const char> bytes_;
    std::size_t pos_ = 0;
};

inline std::uint32_t activation_code(Activation a) {
    switch (a) {
        case Activation::ReLU: return 0;
        case Activation::Tanh: return 1;
        case Activation::Identity: return 2;
    }
    return 2;
}

struct TowerShape {
    Activation activation = Activation::ReLU;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> layers;  // rows, cols
};

inline TowerShape read_shape(ByteReader& in) {
    TowerShape shape;
    const std::uint32_t depth = in.u32();
    const std::uint32_t act = in.u32();
    if (act > 2) {
        throw CheckpointError(CheckpointErrorKind::ShapeMismatch, "checkpoint shape mismatch: unknown activation code");
    }
    shape.activation = act == 0 ? Activation::ReLU : act == 1 ? Activation::Tanh : Activation::Identity;
    if (depth == 0) {
        throw CheckpointError(CheckpointErrorKind::ShapeMismatch, "checkpoint shape mismatch: tower without layers");
    }
    // Each layer header needs 8 more bytes.
    if (depth > in.remaining() / 8) {
        throw CheckpointError(CheckpointErrorKind::Truncated, "truncated checkpoint");
    }
    for (std::uint32_t l = 0; l < depth; ++l) {
        const std::uint32_t rows = in.u32();
        const std::uint32_t cols = in.u32();
        if (rows == 0 || cols == 0) {
            throw CheckpointError(CheckpointErrorKind::ShapeMismatch, "checkpoint shape mismatch: zero-width layer");
        }
        if (!shape.layers.empty() && shape.layers.back().first != cols) {
            throw CheckpointError(CheckpointErrorKind::ShapeMismatch,
                                  "checkpoint shape mismatch: layer " + std::to_string(l) + " input " +
                                      std::to_string(cols) + " vs previous output " +
                                      std::to_string(shape.layers.back().first));
        }
        shape.layers.emplace_back(rows, cols);
    }
    return shape;
}

inline MlpParams read_tower(ByteReader& in, const TowerShape& shape) {
    MlpParams params;
    params.activation = shape.activation;
    for (const auto& [rows, cols] : shape.layers) {
        const std::size_t n = static_cast<std::size_t>(rows) * cols;
        if (in.remaining() / 8 < n + rows) {
            throw CheckpointError(CheckpointErrorKind::Truncated, "truncated checkpoint");
        }
        std::vector<double> w(n);
        for (double& v : w) v = in.f64();
        DenseVector b(rows);
        for (double& v : b) v = in.f64();
        params.layers.push_back({DenseMatrix(rows, cols, std::move(w)), std::move(b)});
    }
    return params;
}

inline void write_shape(ByteWriter& out, const MlpParams& tower) {
    out.u32(static_cast<std::uint32_t>(tower.depth()));
    out.u32(activation_code(tower.activation));
    for (const auto& layer : tower.layers) {
        out.u32(static_cast<std::uint32_t>(layer.out_dim()));
        out.u32(static_cast<std::uint32_t>(layer.in_dim()));
    }
}

inline void write_tower(ByteWriter& out, const MlpParams& tower) {
    for (const auto& layer : tower.layers) {
        for (double v : layer.weight.values()) out.f64(v);
        for (double v : layer.bias) out.f64(v);
    }
}

}  // namespace detail

inline std::vector<char> save_checkpoint(const Model& model) {
    model.validate();
    detail::ByteWriter out;
    out.raw(kCheckpointMagic);
    detail::write_shape(out, model.user_tower);
    detail::write_shape(out, model.item_tower);
    detail::write_tower(out, model.user_tower);
    detail::write_tower(out, model.item_tower);
    out.f64(static_cast<double>(model.embedding_dim));
    out.f64(model.margin.value());
    out.f64(model.clip_radius);
    return out.take();
}

/// Throws CheckpointError: NotACheckpoint, VersionMismatch, Truncated or
/// ShapeMismatch.
inline Model load_checkpoint(std::span<const char> bytes) {
    const std::string_view head(bytes.data(), std::min(bytes.size(), kCheckpointMagic.size()));
    if (head != kCheckpointMagic) {
        // "MREC" with a different version suffix is ours, just not this revision.
        if (head.size() == kCheckpointMagic.size() && head.substr(0, 4) == kCheckpointMagic.substr(0, 4)) {
            throw CheckpointError(CheckpointErrorKind::VersionMismatch,
                                  "checkpoint version mismatch: found " + std::string(head.substr(4)) +
                                      ", expected " + std::string(kCheckpointMagic.substr(4)));
        }
        if (head.size() < kCheckpointMagic.size() && kCheckpointMagic.substr(0, head.size()) == head) {
            throw CheckpointError(CheckpointErrorKind::Truncated, "truncated checkpoint");
        }
        throw CheckpointError(CheckpointErrorKind::NotACheckpoint, "not a checkpoint");
    }
    detail::ByteReader in(bytes.subspan(kCheckpointMagic.size()));
    const auto user_shape = detail::read_shape(in);
    const auto item_shape = detail::read_shape(in);

    Model model;
    model.user_tower = detail::read_tower(in, user_shape);
    model.item_tower = detail::read_tower(in, item_shape);
    const double dim = in.f64();
    const double margin = in.f64();
    model.clip_radius = in.f64();
    if (in.remaining() != 0) {
        throw CheckpointError(CheckpointErrorKind::ShapeMismatch, "checkpoint shape mismatch: trailing bytes");
    }
    if (!(dim >= 1.0) || dim != std::floor(dim) || dim > std::numeric_limits<std::uint32_t>::max()) {
        throw CheckpointError(CheckpointErrorKind::ShapeMismatch, "checkpoint shape mismatch: bad embedding dim");
    }
    if (!(margin >= 0.0) || !std::isfinite(margin) || !(model.clip_radius >= 0.0) ||
        !std::isfinite(model.clip_radius)) {
        throw CheckpointError(CheckpointErrorKind::ShapeMismatch, "checkpoint shape mismatch: bad margin or clip");
    }
    model.embedding_dim = static_cast<std::size_t>(dim);
    model.margin = Margin(margin);
    model.features = {model.user_tower.in_dim(), model.item_tower.in_dim()};
    try {
        model.validate();
    } catch (const DimensionError& e) {
        throw CheckpointError(CheckpointErrorKind::ShapeMismatch, std::string("checkpoint shape mismatch: ") + e.what());
    }
    return model;
}

inline void save_checkpoint(const Model& model, std::ostream& out) {
    const auto bytes = save_checkpoint(model);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error("failed to write checkpoint");
    }
}

inline Model load_checkpoint(std::istream& in) {
    const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return load_checkpoint(bytes);
}

}  // namespace metrec
