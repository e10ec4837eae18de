// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#include "tickets/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "tickets/errors.hpp"
#include "tickets/numerics/rng.hpp"

namespace tickets::pruning {

std::size_t ImpSchedule::rounds() const {
    validate();
    return static_cast<std::size_t>(std::llround(100.0 * target_sparsity / rate_percent));
}

void ImpSchedule::validate() const {
    require(target_sparsity > 0.0 && target_sparsity < 1.0, "ImpSchedule: target sparsity must lie in (0, 1)");
    require(rate_percent > 0.0 && rate_percent <= 100.0 * target_sparsity + 1e-9,
            "ImpSchedule: rate must lie in (0, target]");
    const double r = 100.0 * target_sparsity / rate_percent;
    require(std::abs(r - std::round(r)) < 1e-9, "ImpSchedule: target / rate must be an integral round count");
}

void ImpTrace::write_jsonl(std::ostream& out) const {
    for (const auto& r : rounds) {
        nlohmann::json j = {{"round", r.round},           {"zeros", r.zeros},
                            {"sparsity", r.sparsity},     {"best_metric", r.best_metric},
                            {"best_step", r.best_step},   {"total_steps", r.total_steps},
                            {"mask_digest", r.mask_digest}};
        out << j.dump() << '\n';
    }
}

std::vector<double> prunable_values(const model::ParamSet& params) {
    std::vector<double> v;
    v.reserve(params.prunable_size());
    for (const auto& e : params.entries())
        if (e.prunable) v.insert(v.end(), e.values.begin(), e.values.end());
    return v;
}

namespace {

// Flat kept-coordinate indices of `mask` within [begin, end).
std::vector<std::size_t> kept_in(const masks::Mask& mask, std::size_t begin, std::size_t end) {
    std::vector<std::size_t> kept;
    for (std::size_t i = begin; i < end; ++i)
        if (mask.bit(i)) kept.push_back(i);
    return kept;
}

void prune_candidates(masks::Mask& mask, std::vector<std::size_t> kept, std::span<const double> scores,
                      std::size_t extra) {
    if (extra == 0) return;
    require(extra <= kept.size(), "prune: not enough kept coordinates");
    auto before = [&](std::size_t a, std::size_t b) { return scores[a] < scores[b] || (scores[a] == scores[b] && a < b); };
    std::nth_element(kept.begin(), kept.begin() + static_cast<std::ptrdiff_t>(extra - 1), kept.end(), before);
    for (std::size_t i = 0; i < extra; ++i) mask.set_bit(kept[i], 0);
}

}  // namespace

void prune_lowest(masks::Mask& mask, std::span<const double> scores, std::size_t target_zeros) {
    require(scores.size() == mask.total(), "prune_lowest: one score per prunable coordinate required");
    for (double s : scores) require(!std::isnan(s), "prune_lowest: NaN score");
    const std::size_t have = mask.zeros();
    require(target_zeros >= have, "prune_lowest: mask already has more zeros than requested");
    require(target_zeros <= mask.total(), "prune_lowest: target exceeds coordinate count");
    prune_candidates(mask, kept_in(mask, 0, mask.total()), scores, target_zeros - have);
}

void prune_lowest_per_tensor(masks::Mask& mask, std::span<const double> scores, double sparsity) {
    require(scores.size() == mask.total(), "prune_lowest_per_tensor: one score per prunable coordinate required");
    std::size_t offset = 0;
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    for (const auto& e : mask.entries()) {
        spans.emplace_back(offset, e.bits.size());
        offset += e.bits.size();
    }
    for (std::size_t k = 0; k < spans.size(); ++k) {
        const auto [begin, size] = spans[k];
        const std::size_t want = masks::zeros_for(sparsity, size);
        const std::size_t have = mask.entries()[k].zeros();
        require(want >= have, "prune_lowest_per_tensor: entry already sparser than requested");
        prune_candidates(mask, kept_in(mask, begin, begin + size), scores, want - have);
    }
}

ImpResult imp(const model::ModelConfig& config, const model::ParamSet& theta0, const corpus::DatasetSplit& split,
              const ImpSchedule& schedule, const ImpResult* resume, const RoundObserver& observer) {
    const std::size_t rounds = schedule.rounds();
    ImpResult result;
    if (resume && !resume->round_masks.empty()) {
        require(resume->round_masks.size() <= rounds, "imp: resumed run already exceeds the schedule");
        resume->mask.require_matches(theta0);
        result = *resume;
    } else {
        result.mask = masks::Mask::ones(theta0);
    }
    const std::size_t n = result.mask.total();
    for (std::size_t k = result.round_masks.size() + 1; k <= rounds; ++k) {
        model::ParamSet start = theta0;
        result.mask.apply(start);
        if (observer) observer(k, start, result.mask);

        model::TrainConfig tcfg = schedule.train;
        tcfg.seed = num::derive_seed(schedule.train.seed, {k});
        model::TrainOutcome outcome;
        try {
            outcome = model::train(config, start, &result.mask, split, tcfg);
        } catch (const TrainingFailure& e) {
            throw TrainingFailure("imp round " + std::to_string(k) + ": " + e.what(), e.step());
        }

        std::vector<double> magnitude = prunable_values(outcome.best_params);
        for (double& x : magnitude) x = std::abs(x);
        const double sparsity = static_cast<double>(k) * schedule.rate_percent / 100.0;
        if (schedule.per_tensor) prune_lowest_per_tensor(result.mask, magnitude, sparsity);
        else prune_lowest(result.mask, magnitude, masks::zeros_for(sparsity, n));

        result.mask.target_sparsity = sparsity;
        result.mask.provenance.method = "imp";
        result.mask.provenance.task = corpus::task_name(split.task);
        result.mask.provenance.languages = {split.language};
        result.mask.provenance.seed = schedule.train.seed;
        result.mask.provenance.rounds = k;
        result.round_masks.push_back(result.mask);
        result.trace.rounds.push_back({k, result.mask.zeros(), result.mask.sparsity(), outcome.best_metric,
                                       outcome.best_step, outcome.total_steps, result.mask.content_digest()});
    }
    return result;
}

masks::Mask diff_from_init_mask(const model::ParamSet& theta0, const model::ParamSet& theta_ft, double sparsity) {
    require(sparsity > 0.0 && sparsity < 1.0, "diff_from_init_mask: sparsity must lie in (0, 1)");
    require(theta0.same_layout(theta_ft), "diff_from_init_mask: parameter layouts differ");
    const auto a = prunable_values(theta0);
    const auto b = prunable_values(theta_ft);
    std::vector<double> moved(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) moved[i] = std::abs(b[i] - a[i]);
    masks::Mask m = masks::Mask::ones(theta0);
    prune_lowest(m, moved, masks::zeros_for(sparsity, m.total()));
    m.target_sparsity = sparsity;
    m.provenance.method = "diff_init";
    return m;
}

masks::Mask diff_from_init_mask(const model::ModelConfig& config, const model::ParamSet& theta0,
                                const corpus::DatasetSplit& split, double sparsity, const model::TrainConfig& tcfg) {
    const auto outcome = model::train(config, theta0, nullptr, split, tcfg);
    masks::Mask m = diff_from_init_mask(theta0, outcome.best_params, sparsity);
    m.provenance = {"diff_init", corpus::task_name(split.task), {split.language}, tcfg.seed, 1};
    return m;
}

std::vector<double> fisher_diagonal(const model::ModelConfig& config, const model::ParamSet& params,
                                    std::span<const corpus::Example> examples, corpus::TaskKind task,
                                    bool sampled_labels, std::uint64_t seed) {
    require(!examples.empty(), "fisher_diagonal: no examples");
    model::ParamSet grad = params.zeros_like();
    std::vector<double> acc(params.prunable_size(), 0.0);
    num::Rng rng(seed);
    for (const auto& ex : examples) {
        grad.set_zero();
        model::log_likelihood_grad(config, params, ex, task, grad, sampled_labels ? &rng : nullptr);
        std::size_t i = 0;
        for (const auto& e : grad.entries()) {
            if (!e.prunable) continue;
            for (double g : e.values) acc[i++] += g * g;
        }
    }
    for (double& x : acc) x /= static_cast<double>(examples.size());
    return acc;
}

masks::Mask fisher_mask(const model::ModelConfig& config, const model::ParamSet& theta0,
                        const corpus::DatasetSplit& split, double sparsity, const FisherOptions& opts) {
    require(sparsity > 0.0 && sparsity < 1.0, "fisher_mask: sparsity must lie in (0, 1)");
    require(opts.sample_count > 0 && opts.sample_count <= split.train.size(),
            "fisher_mask: sample_count must lie in [1, |train|]");
    model::ParamSet params = theta0;
    if (opts.reinit_head && split.task != corpus::TaskKind::MLM)
        model::reinit_task_head(config, params, split.task, num::derive_seed(opts.head_seed, {num::hash_tag("head")}));

    // Seeded sample without replacement, kept in split order.
    std::vector<std::size_t> idx(split.train.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    num::Rng rng(num::derive_seed(opts.seed, {num::hash_tag("fisher-sample")}));
    for (std::size_t i = 0; i < opts.sample_count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(idx.size() - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(opts.sample_count);
    std::sort(idx.begin(), idx.end());
    std::vector<corpus::Example> sample;
    sample.reserve(idx.size());
    for (std::size_t i : idx) sample.push_back(split.train[i]);

    const auto f = fisher_diagonal(config, params, sample, split.task, opts.sampled_labels,
                                   num::derive_seed(opts.seed, {num::hash_tag("fisher-labels")}));
    masks::Mask m = masks::Mask::ones(theta0);
    prune_lowest(m, f, masks::zeros_for(sparsity, m.total()));
    m.target_sparsity = sparsity;
    m.provenance = {"fisher", corpus::task_name(split.task), {split.language}, opts.seed, 1};
    return m;
}

}  // namespace tickets::pruning
