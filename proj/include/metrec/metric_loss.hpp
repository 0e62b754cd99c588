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

#include <cmath>
#include <span>

#include "metrec/core_math.hpp"
#include "metrec/error.hpp"

namespace metrec {

/// Distances below this are treated as zero when forming unit directions.
inline constexpr double kDegenerateDistance = 1e-12;

/// Required gap between negative and positive distances. Nonnegative, finite.
class Margin {
public:
    constexpr Margin() = default;
    explicit Margin(double m) : m_(m) {
        if (!std::isfinite(m) || m < 0.0) {
            throw DomainError("margin must be finite and nonnegative");
        }
    }

    constexpr double value() const noexcept { return m_; }
    bool operator==(const Margin&) const = default;

private:
    double m_ = 1.0;
};

/// Views over the anchor (user), positive and negative (item) embeddings.
struct TripletEmbeddings {
    std::span<const double> anchor;
    std::span<const double> positive;
    std::span<const double> negative;
};

/// ||u - v||_2, unsquared.
inline double euclidean_distance(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        throw DimensionError("euclidean_distance: operand dims", u.size(), v.size());
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double diff = u[i] - v[i];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

namespace detail {

inline void check_triplet(const TripletEmbeddings& t) {
    if (t.anchor.size() != t.positive.size()) {
        throw DimensionError("triplet: anchor vs positive dim", t.anchor.size(), t.positive.size());
    }
    if (t.anchor.size() != t.negative.size()) {
        throw DimensionError("triplet: anchor vs negative dim", t.anchor.size(), t.negative.size());
    }
}

inline double hinge_argument(const TripletEmbeddings& t, Margin m, double& d_ap, double& d_an) {
    d_ap = euclidean_distance(t.anchor, t.positive);
    d_an = euclidean_distance(t.anchor, t.negative);
    return d_ap - d_an + m.value();
}

}  // namespace detail

/// max(0, d(a,p) - d(a,n) + m).
inline double triplet_loss(const TripletEmbeddings& t, Margin m) {
    detail::check_triplet(t);
    double d_ap = 0.0;
    double d_an = 0.0;
    const double z = detail::hinge_argument(t, m, d_ap, d_an);
    return z > 0.0 ? z : 0.0;
}

struct TripletGrads {
    DenseVector anchor;
    DenseVector positive;
    DenseVector negative;
    double loss = 0.0;
};

/// Gradients of triplet_loss with respect to the three embeddings.
///
/// Zero everywhere when the hinge argument is <= 0 (the boundary counts as
/// flat). A unit direction whose distance is below kDegenerateDistance is the
/// zero vector, so coincident embeddings never produce NaN.
inline TripletGrads triplet_loss_grads(const TripletEmbeddings& t, Margin m) {
    detail::check_triplet(t);
    const std::size_t dim = t.anchor.size();
    TripletGrads g{DenseVector(dim), DenseVector(dim), DenseVector(dim), 0.0};

    double d_ap = 0.0;
    double d_an = 0.0;
    const double z = detail::hinge_argument(t, m, d_ap, d_an);
    if (!(z > 0.0)) {
        return g;
    }
    g.loss = z;

    const double inv_ap = d_ap < kDegenerateDistance ? 0.0 : 1.0 / d_ap;
    const double inv_an = d_an < kDegenerateDistance ? 0.0 : 1.0 / d_an;
    for (std::size_t i = 0; i < dim; ++i) {
        const double u_ap = (t.anchor[i] - t.positive[i]) * inv_ap;
        const double u_an = (t.anchor[i] - t.negative[i]) * inv_an;
        g.anchor[i] = u_ap - u_an;
        g.positive[i] = -u_ap;
        g.negative[i] = u_an;
    }
    return g;
}

}  // namespace metrec
