// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tickets/corpus.hpp"
#include "tickets/masks.hpp"
#include "tickets/model/param_set.hpp"
#include "tickets/model/transformer.hpp"

namespace tickets::model {

struct TrainConfig {
    std::size_t epochs = 3;
    std::size_t batch_size = 32;
    double initial_lr = 1e-3;  // decays linearly to zero over the run
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    // Evaluate every this many optimizer steps; 0 evaluates once per epoch.
    std::size_t eval_every = 0;
    std::uint64_t seed = 0;
    // Re-draw the TAG/CLS head from `seed` before fine-tuning, so a pre-trained body
    // never carries a head trained elsewhere.
    bool reinit_head = true;

    void validate() const;
    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

enum class Orientation { HigherBetter, LowerBetter };
Orientation orientation_for(TaskKind task);
const char* orientation_name(Orientation o);
// True when `candidate` is strictly better than `incumbent`.
bool improves(Orientation o, double candidate, double incumbent);

struct HistoryPoint {
    std::size_t step = 0;
    double train_loss = 0.0;  // mean batch loss since the previous evaluation
    double valid_metric = 0.0;
    friend bool operator==(const HistoryPoint&, const HistoryPoint&) = default;
};

struct TrainOutcome {
    double best_metric = 0.0;
    std::size_t best_step = 0;
    ParamSet best_params;   // weights at best_step
    ParamSet final_params;  // weights after the last step
    std::vector<HistoryPoint> history;
    Orientation orientation = Orientation::HigherBetter;
    std::size_t total_steps = 0;
    friend bool operator==(const TrainOutcome&, const TrainOutcome&) = default;
};

// Adam on the split's task. `params0` is copied; with a mask, pruned coordinates start
// and stay at exactly zero. Throws TrainingFailure on a non-finite loss.
TrainOutcome train(const ModelConfig& config, const ParamSet& params0, const masks::Mask* mask,
                   const corpus::DatasetSplit& split, const TrainConfig& tcfg);

// Task metric on the validation half of `split`: perplexity, tag micro-F1 or accuracy.
double eval_metric(const ModelConfig& config, const ParamSet& params, const masks::Mask* mask,
                   const corpus::DatasetSplit& split, TaskKind task);
double metric_from(const Predictions& p, TaskKind task);

}  // namespace tickets::model
