// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#include "tickets/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "tickets/errors.hpp"
#include "tickets/numerics/rng.hpp"

namespace tickets::num {

double finite_diff_check(const LossFn& loss_fn, const model::ParamSet& params,
                         std::size_t probe_count, double step, std::uint64_t seed) {
    require(step > 1e-8 && step < 1e-2, "finite_diff_check: step must lie in (1e-8, 1e-2)");
    require(probe_count >= 1, "finite_diff_check: probe_count must be positive");
    const std::size_t total = params.total_size();
    require(total > 0, "finite_diff_check: empty parameter set");

    model::ParamSet grad = params.zeros_like();
    const double base = loss_fn(params, &grad);
    if (!std::isfinite(base)) throw NumericalFailure("finite_diff_check: non-finite loss");

    std::vector<std::size_t> coords(total);
    std::iota(coords.begin(), coords.end(), 0);
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(coords));
    coords.resize(std::min(probe_count, total));

    model::ParamSet probe = params;
    double worst = 0.0;
    for (std::size_t c : coords) {
        double& x = probe.coordinate(c);
        const double orig = x;
        x = orig + step;
        const double plus = loss_fn(probe, nullptr);
        x = orig - step;
        const double minus = loss_fn(probe, nullptr);
        x = orig;
        if (!std::isfinite(plus) || !std::isfinite(minus))
            throw NumericalFailure("finite_diff_check: non-finite loss while probing");
        const double central = (plus - minus) / (2.0 * step);
        const double analytic = grad.coordinate(c);
        const double denom = std::max({std::abs(analytic), std::abs(central), 1e-12});
        worst = std::max(worst, std::abs(analytic - central) / denom);
    }
    return worst;
}

}  // namespace tickets::num
