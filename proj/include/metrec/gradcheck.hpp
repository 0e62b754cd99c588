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

// Central finite differences, used as the reference for every analytic
// gradient in the library.

#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "metrec/core_math.hpp"
#include "metrec/error.hpp"

namespace metrec {

inline std::vector<double> finite_difference_grad(const std::function<double(std::span<const double>)>& f,
                                                  std::span<const double> theta, double eps = 1e-6) {
    if (!(eps > 0.0)) {
        throw DomainError("finite_difference_grad: eps must be positive");
    }
    std::vector<double> point(theta.begin(), theta.end());
    std::vector<double> grad(point.size());
    for (std::size_t i = 0; i < point.size(); ++i) {
        const double saved = point[i];
        point[i] = saved + eps;
        const double up = f(point);
        point[i] = saved - eps;
        const double down = f(point);
        point[i] = saved;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw NumericError("finite_difference_grad: non-finite loss at perturbed parameter " + std::to_string(i));
        }
        grad[i] = (up - down) / (2.0 * eps);
    }
    return grad;
}

/// Per-parameter central differences of `loss` around `params`; the result is
/// shaped like `params`.
inline MlpParams finite_difference_grad(const std::function<double(const MlpParams&)>& loss,
                                        const MlpParams& params, double eps = 1e-6) {
    if (!(eps > 0.0)) {
        throw DomainError("finite_difference_grad: eps must be positive");
    }
    MlpParams probe = params;
    MlpParams grad = MlpParams::zeros_like(params);

    std::vector<std::span<double>> probe_blocks;
    std::vector<std::span<double>> grad_blocks;
    probe.for_each_block([&](std::span<double> b) { probe_blocks.push_back(b); });
    grad.for_each_block([&](std::span<double> b) { grad_blocks.push_back(b); });

    for (std::size_t b = 0; b < probe_blocks.size(); ++b) {
        auto block = probe_blocks[b];
        for (std::size_t i = 0; i < block.size(); ++i) {
            const double saved = block[i];
            block[i] = saved + eps;
            const double up = loss(probe);
            block[i] = saved - eps;
            const double down = loss(probe);
            block[i] = saved;
            if (!std::isfinite(up) || !std::isfinite(down)) {
                throw NumericError("finite_difference_grad: non-finite loss at perturbed point");
            }
            grad_blocks[b][i] = (up - down) / (2.0 * eps);
        }
    }
    return grad;
}

}  // namespace metrec
