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
#include <cstddef>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "metrec/error.hpp"

namespace metrec {

/// Dense real vector. Plain value type over std::vector<double>.
class DenseVector {
public:
    DenseVector() = default;
    explicit DenseVector(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
    DenseVector(std::initializer_list<double> values) : data_(values) {}
    explicit DenseVector(std::vector<double> values) : data_(std::move(values)) {}
    explicit DenseVector(std::span<const double> values) : data_(values.begin(), values.end()) {}

    std::size_t dim() const noexcept { return data_.size(); }

    double operator[](std::size_t i) const noexcept { return data_[i]; }
    double& operator[](std::size_t i) noexcept { return data_[i]; }

    std::span<const double> values() const noexcept { return data_; }
    std::span<double> values() noexcept { return data_; }
    operator std::span<const double>() const noexcept { return data_; }

    auto begin() const noexcept { return data_.begin(); }
    auto end() const noexcept { return data_.end(); }
    auto begin() noexcept { return data_.begin(); }
    auto end() noexcept { return data_.end(); }

    bool operator==(const DenseVector&) const = default;

private:
    std::vector<double> data_;
};

/// Dense row-major matrix.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            throw DimensionError("matrix data length vs rows*cols", data_.size(), rows_ * cols_);
        }
    }
    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& row : rows) {
            if (row.size() != cols_) {
                throw DimensionError("ragged matrix literal", row.size(), cols_);
            }
            data_.insert(data_.end(), row.begin(), row.end());
        }
    }

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            m(i, i) = 1.0;
        }
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const noexcept {
        return std::span<const double>(data_).subspan(r * cols_, cols_);
    }
    std::span<const double> values() const noexcept { return data_; }
    std::span<double> values() noexcept { return data_; }

    bool operator==(const DenseMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline bool all_finite(std::span<const double> values) noexcept {
    for (double v : values) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

enum class Activation { ReLU, Tanh, Identity };

inline std::string_view to_string(Activation kind) noexcept {
    switch (kind) {
        case Activation::ReLU: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Identity: return "identity";
    }
    return "identity";
}

inline Activation parse_activation(std::string_view name) {
    if (name == "relu") return Activation::ReLU;
    if (name == "tanh") return Activation::Tanh;
    if (name == "identity") return Activation::Identity;
    throw ConfigError("activation", "activation must be one of relu, tanh, identity");
}

/// y = W x + b.
inline DenseVector affine_forward(const DenseMatrix& weight, const DenseVector& bias,
                                  std::span<const double> x) {
    if (weight.cols() != x.size()) {
        throw DimensionError("affine_forward: weight cols vs input dim", weight.cols(), x.size());
    }
    if (bias.dim() != weight.rows()) {
        throw DimensionError("affine_forward: bias dim vs weight rows", bias.dim(), weight.rows());
    }
    DenseVector y(weight.rows());
    for (std::size_t i = 0; i < weight.rows(); ++i) {
        const auto row = weight.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            acc += row[j] * x[j];
        }
        y[i] = acc + bias[i];
    }
    return y;
}

inline double activate(Activation kind, double z) noexcept {
    switch (kind) {
        case Activation::ReLU: return z > 0.0 ? z : 0.0;
        case Activation::Tanh: return std::tanh(z);
        case Activation::Identity: return z;
    }
    return z;
}

// Derivative given both the pre- and post-activation value. ReLU'(0) is 0.
inline double activation_slope(Activation kind, double pre, double post) noexcept {
    switch (kind) {
        case Activation::ReLU: return pre > 0.0 ? 1.0 : 0.0;
        case Activation::Tanh: return 1.0 - post * post;
        case Activation::Identity: return 1.0;
    }
    return 1.0;
}

inline DenseVector activation_forward(Activation kind, std::span<const double> z) {
    DenseVector out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = activate(kind, z[i]);
    }
    return out;
}

struct MlpLayer {
    DenseMatrix weight;
    DenseVector bias;

    std::size_t in_dim() const noexcept { return weight.cols(); }
    std::size_t out_dim() const noexcept { return weight.rows(); }

    bool operator==(const MlpLayer&) const = default;
};

/// Multi-layer perceptron. `activation` applies after every hidden layer;
/// the output layer is always linear.
struct MlpParams {
    std::vector<MlpLayer> layers;
    Activation activation = Activation::ReLU;

    std::size_t depth() const noexcept { return layers.size(); }
    std::size_t in_dim() const noexcept { return layers.empty() ? 0 : layers.front().in_dim(); }
    std::size_t out_dim() const noexcept { return layers.empty() ? 0 : layers.back().out_dim(); }

    void validate() const {
        if (layers.empty()) {
            throw DimensionError("mlp has no layers", 0, 1);
        }
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto& layer = layers[l];
            if (layer.bias.dim() != layer.out_dim()) {
                throw DimensionError("mlp layer " + std::to_string(l) + ": bias dim vs weight rows",
                                     layer.bias.dim(), layer.out_dim());
            }
            if (l + 1 < layers.size() && layers[l + 1].in_dim() != layer.out_dim()) {
                throw DimensionError("mlp layer " + std::to_string(l + 1) + ": input dim vs previous output dim",
                                     layers[l + 1].in_dim(), layer.out_dim());
            }
        }
    }

    std::size_t parameter_count() const noexcept {
        std::size_t n = 0;
        for (const auto& layer : layers) {
            n += layer.weight.values().size() + layer.bias.dim();
        }
        return n;
    }

    /// Visits W0, b0, W1, b1, ... as contiguous spans.
    template <class F>
    void for_each_block(F&& f) {
        for (auto& layer : layers) {
            f(layer.weight.values());
            f(layer.bias.values());
        }
    }

    template <class F>
    void for_each_block(F&& f) const {
        for (const auto& layer : layers) {
            f(layer.weight.values());
            f(layer.bias.values());
        }
    }

    /// Same shapes, all zeros.
    static MlpParams zeros_like(const MlpParams& other) {
        MlpParams out;
        out.activation = other.activation;
        out.layers.reserve(other.layers.size());
        for (const auto& layer : other.layers) {
            out.layers.push_back({DenseMatrix(layer.out_dim(), layer.in_dim()), DenseVector(layer.out_dim())});
        }
        return out;
    }

    void set_zero() {
        for_each_block([](std::span<double> block) { std::fill(block.begin(), block.end(), 0.0); });
    }

    bool operator==(const MlpParams&) const = default;
};

/// Glorot-uniform weights, zero biases. `dims` = {input, hidden..., output}.
inline MlpParams make_mlp(std::span<const std::size_t> dims, Activation activation, std::mt19937_64& rng) {
    if (dims.size() < 2) {
        throw DimensionError("make_mlp needs at least input and output dims", dims.size(), 2);
    }
    MlpParams params;
    params.activation = activation;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const std::size_t fan_in = dims[l];
        const std::size_t fan_out = dims[l + 1];
        if (fan_in == 0 || fan_out == 0) {
            throw DimensionError("make_mlp: zero-width layer", fan_in, fan_out);
        }
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        MlpLayer layer{DenseMatrix(fan_out, fan_in), DenseVector(fan_out)};
        for (double& w : layer.weight.values()) {
            w = dist(rng);
        }
        params.layers.push_back(std::move(layer));
    }
    return params;
}

/// Sparse stand-in for a one-hot input vector of dimension `dim`.
struct OneHot {
    std::size_t index = 0;
    std::size_t dim = 0;

    DenseVector to_dense() const {
        DenseVector v(dim);
        v[index] = 1.0;
        return v;
    }
};

struct ForwardCache {
    std::variant<DenseVector, OneHot> input;
    std::vector<DenseVector> pre;
    std::vector<DenseVector> post;

    std::size_t depth() const noexcept { return pre.size(); }
    std::size_t input_dim() const noexcept {
        return std::visit(
            [](const auto& x) -> std::size_t {
                if constexpr (std::is_same_v<std::decay_t<decltype(x)>, OneHot>) {
                    return x.dim;
                } else {
                    return x.dim();
                }
            },
            input);
    }
};

struct ForwardResult {
    DenseVector output;
    ForwardCache cache;
};

namespace detail {

inline ForwardResult finish_forward(const MlpParams& params, ForwardCache cache, DenseVector first_pre) {
    const std::size_t depth = params.depth();
    cache.pre.reserve(depth);
    cache.post.reserve(depth);
    DenseVector pre = std::move(first_pre);
    for (std::size_t l = 0;; ++l) {
        const bool last = l + 1 == depth;
        DenseVector post = last ? pre : activation_forward(params.activation, pre);
        cache.pre.push_back(std::move(pre));
        cache.post.push_back(std::move(post));
        if (last) {
            break;
        }
        const auto& next = params.layers[l + 1];
        pre = affine_forward(next.weight, next.bias, cache.post.back());
    }
    DenseVector output = cache.post.back();
    if (!all_finite(output)) {
        throw NumericError("mlp_forward produced a non-finite output");
    }
    return {std::move(output), std::move(cache)};
}

inline void check_cache(const MlpParams& params, const ForwardCache& cache) {
    if (cache.depth() != params.depth() || cache.post.size() != params.depth()) {
        throw DimensionError("mlp_backward: cache depth vs layer count", cache.depth(), params.depth());
    }
    if (cache.input_dim() != params.in_dim()) {
        throw DimensionError("mlp_backward: cached input dim vs params input dim", cache.input_dim(), params.in_dim());
    }
    for (std::size_t l = 0; l < params.depth(); ++l) {
        if (cache.pre[l].dim() != params.layers[l].out_dim()) {
            throw DimensionError("mlp_backward: cached layer " + std::to_string(l) + " width vs params",
                                 cache.pre[l].dim(), params.layers[l].out_dim());
        }
    }
}

}  // namespace detail

inline ForwardResult mlp_forward(const MlpParams& params, const DenseVector& x) {
    params.validate();
    if (x.dim() != params.in_dim()) {
        throw DimensionError("mlp_forward: input dim vs first layer input dim", x.dim(), params.in_dim());
    }
    const auto& first = params.layers.front();
    DenseVector pre = affine_forward(first.weight, first.bias, x);
    return detail::finish_forward(params, ForwardCache{x, {}, {}}, std::move(pre));
}

/// One-hot input: the first layer reduces to a column lookup.
inline ForwardResult mlp_forward(const MlpParams& params, OneHot x) {
    params.validate();
    if (x.dim != params.in_dim()) {
        throw DimensionError("mlp_forward: input dim vs first layer input dim", x.dim, params.in_dim());
    }
    if (x.index >= x.dim) {
        throw DomainError("mlp_forward: one-hot index " + std::to_string(x.index) + " out of range " +
                          std::to_string(x.dim));
    }
    const auto& first = params.layers.front();
    DenseVector pre(first.out_dim());
    for (std::size_t i = 0; i < pre.dim(); ++i) {
        pre[i] = first.weight(i, x.index) + first.bias[i];
    }
    return detail::finish_forward(params, ForwardCache{x, {}, {}}, std::move(pre));
}

/// Adds scale * d<grad_h, h>/d(params) into `grad`, which must be shaped like
/// `params`. Returns the gradient with respect to the input when
/// `want_input_grad` is set (dense even for one-hot inputs), else an empty vector.
inline DenseVector accumulate_backward(const MlpParams& params, const ForwardCache& cache,
                                       std::span<const double> grad_h, MlpParams& grad,
                                       double scale = 1.0, bool want_input_grad = false) {
    detail::check_cache(params, cache);
    if (grad_h.size() != params.out_dim()) {
        throw DimensionError("mlp_backward: grad_h dim vs output dim", grad_h.size(), params.out_dim());
    }
    if (grad.depth() != params.depth()) {
        throw DimensionError("mlp_backward: gradient depth vs layer count", grad.depth(), params.depth());
    }

    std::vector<double> upstream(grad_h.begin(), grad_h.end());
    std::vector<double> delta;
    for (std::size_t l = params.depth(); l-- > 0;) {
        const auto& layer = params.layers[l];
        auto& g = grad.layers[l];
        const bool last = l + 1 == params.depth();

        delta.resize(upstream.size());
        for (std::size_t i = 0; i < delta.size(); ++i) {
            delta[i] = last ? upstream[i]
                            : upstream[i] * activation_slope(params.activation, cache.pre[l][i], cache.post[l][i]);
        }

        if (l == 0) {
            if (const auto* hot = std::get_if<OneHot>(&cache.input)) {
                for (std::size_t i = 0; i < delta.size(); ++i) {
                    g.weight(i, hot->index) += scale * delta[i];
                }
            } else {
                const auto& x = std::get<DenseVector>(cache.input);
                for (std::size_t i = 0; i < delta.size(); ++i) {
                    const double d = scale * delta[i];
                    for (std::size_t j = 0; j < x.dim(); ++j) {
                        g.weight(i, j) += d * x[j];
                    }
                }
            }
        } else {
            const auto& x = cache.post[l - 1];
            for (std::size_t i = 0; i < delta.size(); ++i) {
                const double d = scale * delta[i];
                for (std::size_t j = 0; j < x.dim(); ++j) {
                    g.weight(i, j) += d * x[j];
                }
            }
        }
        for (std::size_t i = 0; i < delta.size(); ++i) {
            g.bias[i] += scale * delta[i];
        }

        if (l == 0 && !want_input_grad) {
            return {};
        }
        upstream.assign(layer.in_dim(), 0.0);
        for (std::size_t i = 0; i < delta.size(); ++i) {
            const auto row = layer.weight.row(i);
            for (std::size_t j = 0; j < row.size(); ++j) {
                upstream[j] += row[j] * delta[i];
            }
        }
    }
    return DenseVector(std::move(upstream));
}

struct BackwardResult {
    MlpParams grad_params;
    DenseVector grad_input;
};

/// Exact gradients of <grad_h, mlp_forward(params, x)> w.r.t. every weight,
/// bias and the input x.
inline BackwardResult mlp_backward(const MlpParams& params, const ForwardCache& cache,
                                   std::span<const double> grad_h) {
    BackwardResult out{MlpParams::zeros_like(params), {}};
    out.grad_input = accumulate_backward(params, cache, grad_h, out.grad_params, 1.0, true);
    return out;
}

}  // namespace metrec
