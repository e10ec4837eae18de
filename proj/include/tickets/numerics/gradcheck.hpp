// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

#include "tickets/model/param_set.hpp"

namespace tickets::num {

// Returns the loss at `params`; when `grad` is non-null it also receives the analytic
// gradient (same layout as `params`).
using LossFn = std::function<double(const model::ParamSet& params, model::ParamSet* grad)>;

// Compares the analytic gradient with central differences at `probe_count` distinct
// coordinates drawn from `seed`. Returns
//   max |analytic - central| / max(|analytic|, |central|, 1e-12).
double finite_diff_check(const LossFn& loss_fn, const model::ParamSet& params,
                         std::size_t probe_count, double step, std::uint64_t seed = 0x5eedULL);

}  // namespace tickets::num
