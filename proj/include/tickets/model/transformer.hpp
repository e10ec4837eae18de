// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Post-LN transformer encoder with masked-LM, per-token tagging and pooled
// classification heads. Forward and backward passes are written out by hand in
// double precision.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tickets/corpus.hpp"
#include "tickets/masks.hpp"
#include "tickets/model/param_set.hpp"
#include "tickets/numerics/matrix.hpp"
#include "tickets/numerics/rng.hpp"

namespace tickets::model {

using corpus::Example;
using corpus::TaskKind;

struct ModelConfig {
    std::size_t vocab_size = 0;
    std::size_t embed_dim = 32;
    std::size_t layers = 2;
    std::size_t heads = 2;
    std::size_t ffn_dim = 64;
    std::size_t max_len = 32;
    std::size_t tag_classes = corpus::kCategoryCount;
    std::size_t cls_classes = corpus::kClsLabelCount;
    // Attention/FFN bias vectors become prunable when set.
    bool prune_biases = false;
    double ln_eps = 1e-5;

    std::size_t head_dim() const noexcept { return embed_dim / heads; }
    void validate() const;
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, unit layer-norm gains, zero biases.
// Each entry draws from its own stream derived from (seed, name).
ParamSet init_params(const ModelConfig& config, std::uint64_t seed);

// Re-draws the weights of one task head (TAG or CLS); MLM is left untouched.
void reinit_task_head(const ModelConfig& config, ParamSet& params, TaskKind task, std::uint64_t seed);

struct ForwardResult {
    double loss = 0.0;        // mean over loss units (masked tokens / tokens / examples)
    std::size_t units = 0;
    // representations[example][layer] is a (tokens x embed_dim) matrix; layer 0 is the
    // embedding output, layer k the output of encoder block k.
    std::vector<std::vector<num::Matrix>> representations;
};

ForwardResult forward(const ModelConfig& config, const ParamSet& params, const masks::Mask* mask,
                      std::span<const Example> batch, TaskKind task, bool capture_layers = false);

// Mean loss over the batch and its gradient (accumulated into `grad`, which must have
// the layout of `params`). No mask is applied: pass masked parameters.
double loss_and_grad(const ModelConfig& config, const ParamSet& params,
                     std::span<const Example> batch, TaskKind task, ParamSet& grad);

// Gradient of the summed log-likelihood of a single example (Fisher scoring). When
// `sample_rng` is non-null the labels are drawn from the model's own predictive
// distribution instead of the observed ones.
void log_likelihood_grad(const ModelConfig& config, const ParamSet& params, const Example& example,
                         TaskKind task, ParamSet& grad, num::Rng* sample_rng = nullptr);

// Mean-pooled hidden state per example for every captured layer: result[layer] is
// (examples x embed_dim).
std::vector<num::Matrix> pooled_representations(const ModelConfig& config, const ParamSet& params,
                                                const masks::Mask* mask,
                                                std::span<const std::vector<int>> sentences);

// Task metrics.
double perplexity(double mean_cross_entropy);
// Token-level micro-F1 treating FILLER as the outside class.
double tag_micro_f1(std::span<const int> gold, std::span<const int> predicted);
double accuracy(std::span<const int> gold, std::span<const int> predicted);

struct Predictions {
    std::vector<int> gold;
    std::vector<int> predicted;
    double cross_entropy_sum = 0.0;
    std::size_t units = 0;
};

Predictions predict(const ModelConfig& config, const ParamSet& params, const masks::Mask* mask,
                    std::span<const Example> examples, TaskKind task);

}  // namespace tickets::model
