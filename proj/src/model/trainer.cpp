// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#include "tickets/model/trainer.hpp"

#include <cmath>
#include <numeric>

#include "tickets/errors.hpp"
#include "tickets/numerics/rng.hpp"

namespace tickets::model {

void TrainConfig::validate() const {
    require(batch_size > 0, "TrainConfig: batch_size must be positive");
    require(initial_lr > 0.0 && std::isfinite(initial_lr), "TrainConfig: initial_lr must be positive");
    require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "TrainConfig: Adam betas must lie in [0, 1)");
    require(adam_epsilon > 0.0, "TrainConfig: adam_epsilon must be positive");
}

Orientation orientation_for(TaskKind task) {
    return task == TaskKind::MLM ? Orientation::LowerBetter : Orientation::HigherBetter;
}

const char* orientation_name(Orientation o) {
    return o == Orientation::HigherBetter ? "higher_better" : "lower_better";
}

bool improves(Orientation o, double candidate, double incumbent) {
    return o == Orientation::HigherBetter ? candidate > incumbent : candidate < incumbent;
}

double metric_from(const Predictions& p, TaskKind task) {
    switch (task) {
        case TaskKind::MLM:
            return perplexity(p.units == 0 ? 0.0 : p.cross_entropy_sum / static_cast<double>(p.units));
        case TaskKind::TAG: return tag_micro_f1(p.gold, p.predicted);
        case TaskKind::CLS: return accuracy(p.gold, p.predicted);
    }
    return 0.0;
}

double eval_metric(const ModelConfig& config, const ParamSet& params, const masks::Mask* mask,
                   const corpus::DatasetSplit& split, TaskKind task) {
    return metric_from(predict(config, params, mask, split.valid, task), task);
}

namespace {

struct Adam {
    std::vector<double> m, v;
    std::size_t t = 0;

    explicit Adam(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

    void step(ParamSet& params, const ParamSet& grad, double lr, const TrainConfig& c) {
        ++t;
        const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
        std::size_t off = 0;
        auto pe = params.entries();
        auto ge = grad.entries();
        for (std::size_t e = 0; e < pe.size(); ++e) {
            double* x = pe[e].values.data();
            const double* g = ge[e].values.data();
            const std::size_t n = pe[e].values.size();
            double* mm = m.data() + off;
            double* vv = v.data() + off;
            for (std::size_t i = 0; i < n; ++i) {
                mm[i] = c.beta1 * mm[i] + (1.0 - c.beta1) * g[i];
                vv[i] = c.beta2 * vv[i] + (1.0 - c.beta2) * g[i] * g[i];
                x[i] -= lr * (mm[i] / bc1) / (std::sqrt(vv[i] / bc2) + c.adam_epsilon);
            }
            off += n;
        }
    }
};

// Zeroes gradient coordinates the mask prunes, so Adam's moments stay zero there.
void mask_gradient(const masks::Mask& mask, ParamSet& grad) {
    std::size_t k = 0;
    for (auto& e : grad.entries()) {
        if (!e.prunable) continue;
        const auto& bits = mask.entries()[k++].bits;
        for (std::size_t i = 0; i < bits.size(); ++i)
            if (!bits[i]) e.values[i] = 0.0;
    }
}

}  // namespace

TrainOutcome train(const ModelConfig& config, const ParamSet& params0, const masks::Mask* mask,
                   const corpus::DatasetSplit& split, const TrainConfig& tcfg) {
    tcfg.validate();
    config.validate();
    if (mask) mask->require_matches(params0);
    const TaskKind task = split.task;
    require(!split.valid.empty(), "train: validation split is empty");

    ParamSet params = params0;
    if (tcfg.reinit_head && task != TaskKind::MLM)
        reinit_task_head(config, params, task, num::derive_seed(tcfg.seed, {num::hash_tag("head")}));
    if (mask) mask->apply(params);

    TrainOutcome out;
    out.orientation = orientation_for(task);
    const std::size_t n = split.train.size();
    const std::size_t steps_per_epoch = n == 0 ? 0 : (n + tcfg.batch_size - 1) / tcfg.batch_size;
    out.total_steps = tcfg.epochs * steps_per_epoch;

    auto evaluate = [&](std::size_t step, double train_loss) {
        const double metric = eval_metric(config, params, nullptr, split, task);
        if (!std::isfinite(metric)) throw TrainingFailure("train: non-finite validation metric", step);
        out.history.push_back({step, train_loss, metric});
        if (out.history.size() == 1 || improves(out.orientation, metric, out.best_metric)) {
            out.best_metric = metric;
            out.best_step = step;
            out.best_params = params;
        }
    };

    {
        const std::size_t probe = std::min(n, tcfg.batch_size);
        const double initial_loss = probe == 0 ? 0.0
            : forward(config, params, nullptr, std::span(split.train).first(probe), task).loss;
        evaluate(0, initial_loss);
    }

    Adam adam(params.total_size());
    ParamSet grad = params.zeros_like();
    std::vector<std::size_t> order(n);
    std::vector<corpus::Example> batch;
    std::size_t step = 0;
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        num::Rng rng(num::derive_seed(tcfg.seed, {num::hash_tag("shuffle"), epoch}));
        rng.shuffle(std::span(order));
        for (std::size_t b = 0; b < steps_per_epoch; ++b) {
            batch.clear();
            const std::size_t end = std::min(n, (b + 1) * tcfg.batch_size);
            for (std::size_t i = b * tcfg.batch_size; i < end; ++i) batch.push_back(split.train[order[i]]);
            grad.set_zero();
            const double loss = loss_and_grad(config, params, batch, task, grad);
            if (!std::isfinite(loss)) throw TrainingFailure("train: non-finite loss", step);
            if (mask) mask_gradient(*mask, grad);
            const double lr = tcfg.initial_lr *
                (1.0 - static_cast<double>(step) / static_cast<double>(out.total_steps));
            adam.step(params, grad, lr, tcfg);
            ++step;
            loss_sum += loss;
            ++loss_count;
            const bool last = step == out.total_steps;
            const bool periodic = tcfg.eval_every > 0 ? step % tcfg.eval_every == 0 : b + 1 == steps_per_epoch;
            if (periodic || last) {
                evaluate(step, loss_sum / static_cast<double>(loss_count));
                loss_sum = 0.0;
                loss_count = 0;
            }
        }
    }
    out.final_params = std::move(params);
    return out;
}

}  // namespace tickets::model
