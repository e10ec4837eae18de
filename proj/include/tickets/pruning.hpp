// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Mask discovery: iterative magnitude pruning with rewind to the pre-trained weights,
// pruning by distance travelled during fine-tuning, and diagonal-Fisher pruning.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "tickets/corpus.hpp"
#include "tickets/masks.hpp"
#include "tickets/model/param_set.hpp"
#include "tickets/model/trainer.hpp"
#include "tickets/model/transformer.hpp"

namespace tickets::pruning {

struct ImpSchedule {
    // Percent of the ORIGINAL prunable coordinates removed per round.
    double rate_percent = 10.0;
    double target_sparsity = 0.5;
    // Per-round training; round k trains with derive_seed(train.seed, {k}).
    model::TrainConfig train;
    // Rank magnitudes within each tensor instead of globally.
    bool per_tensor = false;

    std::size_t rounds() const;  // target / rate, which must be integral
    void validate() const;
};

struct ImpRound {
    std::size_t round = 0;  // 1-based
    std::size_t zeros = 0;  // after pruning at the end of this round
    double sparsity = 0.0;
    double best_metric = 0.0;
    std::size_t best_step = 0;
    std::size_t total_steps = 0;
    std::uint64_t mask_digest = 0;
};

struct ImpTrace {
    std::vector<ImpRound> rounds;
    void write_jsonl(std::ostream& out) const;
};

struct ImpResult {
    masks::Mask mask;
    ImpTrace trace;
    std::vector<masks::Mask> round_masks;  // mask after each round
};

// Called with the rewound starting point of every round (kept coordinates = theta0).
using RoundObserver = std::function<void(std::size_t round, const model::ParamSet& start, const masks::Mask& mask)>;

// Alternates train-to-peak, prune the lowest-magnitude kept coordinates, rewind. When
// `resume` holds the result of a shorter schedule with the same rate and seeds, its
// rounds are reused and only the remaining ones are run.
ImpResult imp(const model::ModelConfig& config, const model::ParamSet& theta0, const corpus::DatasetSplit& split,
              const ImpSchedule& schedule, const ImpResult* resume = nullptr,
              const RoundObserver& observer = {});

// Extends `mask` so that it has `target_zeros` zeros, pruning the kept coordinates with
// the smallest scores; ties fall to the earlier (entry, index) coordinate.
void prune_lowest(masks::Mask& mask, std::span<const double> scores, std::size_t target_zeros);
void prune_lowest_per_tensor(masks::Mask& mask, std::span<const double> scores, double sparsity);

// Prunable coordinates of `params` flattened in mask order.
std::vector<double> prunable_values(const model::ParamSet& params);

// Keeps the coordinates that moved furthest from theta0 during fine-tuning.
masks::Mask diff_from_init_mask(const model::ParamSet& theta0, const model::ParamSet& theta_ft, double sparsity);
masks::Mask diff_from_init_mask(const model::ModelConfig& config, const model::ParamSet& theta0,
                                const corpus::DatasetSplit& split, double sparsity, const model::TrainConfig& tcfg);

struct FisherOptions {
    std::size_t sample_count = 1024;
    std::uint64_t seed = 0;
    // Draw labels from the model's predictive distribution (true Fisher) instead of
    // using the observed ones (empirical Fisher).
    bool sampled_labels = false;
    // Fresh task head drawn as the trainer would (TAG/CLS), from this seed.
    bool reinit_head = true;
    std::uint64_t head_seed = 0;
};

// Mean squared log-likelihood gradient per prunable coordinate, in mask order.
std::vector<double> fisher_diagonal(const model::ModelConfig& config, const model::ParamSet& params,
                                    std::span<const corpus::Example> examples, corpus::TaskKind task,
                                    bool sampled_labels = false, std::uint64_t seed = 0);
masks::Mask fisher_mask(const model::ModelConfig& config, const model::ParamSet& theta0,
                        const corpus::DatasetSplit& split, double sparsity, const FisherOptions& opts = {});

}  // namespace tickets::pruning
