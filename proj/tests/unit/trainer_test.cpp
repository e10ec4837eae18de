// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "tickets/errors.hpp"
#include "tickets/masks.hpp"
#include "tickets/model/checkpoint.hpp"
#include "tickets/model/trainer.hpp"

namespace tickets::model {
namespace {

using corpus::TaskKind;
using tickets::testing::TinySetup;

TEST(Trainer, ZeroEpochsReportsInitialMetric) {
    TinySetup fx;
    const auto data = fx.split(TaskKind::TAG, 16, 8);
    auto t = TinySetup::quick_train(0);
    const ParamSet p0 = init_params(fx.cfg, 1);
    const auto out = train(fx.cfg, p0, nullptr, data, t);
    ASSERT_EQ(out.history.size(), 1u);
    EXPECT_EQ(out.best_step, 0u);
    EXPECT_EQ(out.total_steps, 0u);
    ParamSet with_head = p0;
    reinit_task_head(fx.cfg, with_head, TaskKind::TAG, num::derive_seed(t.seed, {num::hash_tag("head")}));
    EXPECT_DOUBLE_EQ(out.best_metric, eval_metric(fx.cfg, with_head, nullptr, data, TaskKind::TAG));
}

TEST(Trainer, AllOnesMaskMatchesNoMask) {
    TinySetup fx;
    const auto data = fx.split(TaskKind::CLS, 24, 8);
    const ParamSet p0 = init_params(fx.cfg, 1);
    const auto ones = masks::Mask::ones(p0);
    const auto a = train(fx.cfg, p0, nullptr, data, TinySetup::quick_train(2));
    const auto b = train(fx.cfg, p0, &ones, data, TinySetup::quick_train(2));
    EXPECT_EQ(a, b);
}

TEST(Trainer, MaskedCoordinatesStayZero) {
    TinySetup fx;
    const auto data = fx.split(TaskKind::MLM, 24, 8);
    const ParamSet p0 = init_params(fx.cfg, 1);
    const auto m = masks::random_mask(p0, 0.6, 5);
    const auto out = train(fx.cfg, p0, &m, data, TinySetup::quick_train(2));
    for (const ParamSet* p : {&out.final_params, &out.best_params}) {
        std::size_t flat = 0;
        std::size_t zeros = 0;
        for (const auto& e : p->entries()) {
            if (!e.prunable) continue;
            for (double x : e.values) {
                if (!m.bit(flat)) EXPECT_EQ(x, 0.0);
                zeros += x == 0.0 ? 1 : 0;
                ++flat;
            }
        }
        EXPECT_EQ(zeros, m.zeros());
    }
}

TEST(Trainer, DeterministicPerSeed) {
    TinySetup fx;
    const auto data = fx.split(TaskKind::TAG, 24, 8);
    const ParamSet p0 = init_params(fx.cfg, 1);
    auto t = TinySetup::quick_train(2);
    const auto a = train(fx.cfg, p0, nullptr, data, t);
    const auto b = train(fx.cfg, p0, nullptr, data, t);
    EXPECT_EQ(a, b);
    t.seed = 22;
    EXPECT_NE(train(fx.cfg, p0, nullptr, data, t).final_params, a.final_params);
}

TEST(Trainer, BestMetricIsFirstOptimumOfHistory) {
    TinySetup fx;
    const auto data = fx.split(TaskKind::MLM, 32, 8);
    auto t = TinySetup::quick_train(3);
    t.eval_every = 2;
    const auto out = train(fx.cfg, init_params(fx.cfg, 1), nullptr, data, t);
    EXPECT_EQ(out.orientation, Orientation::LowerBetter);
    ASSERT_GE(out.history.size(), 3u);
    std::size_t first = 0;
    for (std::size_t i = 1; i < out.history.size(); ++i)
        if (out.history[i].valid_metric < out.history[first].valid_metric) first = i;
    EXPECT_EQ(out.best_step, out.history[first].step);
    EXPECT_EQ(out.best_metric, out.history[first].valid_metric);
    EXPECT_EQ(out.history.back().step, out.total_steps);
    EXPECT_EQ(out.total_steps, 12u);
}

TEST(Trainer, LossDecreasesOnTagging) {
    TinySetup fx;
    const auto data = fx.split(TaskKind::TAG, 64, 16);
    const auto out = train(fx.cfg, init_params(fx.cfg, 1), nullptr, data, TinySetup::quick_train(6));
    EXPECT_LT(out.history.back().train_loss, out.history.front().train_loss);
    EXPECT_GT(out.best_metric, out.history.front().valid_metric);
}

TEST(Trainer, DivergenceReportsStep) {
    TinySetup fx;
    const auto data = fx.split(TaskKind::CLS, 16, 4);
    ParamSet p0 = init_params(fx.cfg, 1);
    p0.at("layer0.attn.wq").values[0] = std::numeric_limits<double>::infinity();
    try {
        train(fx.cfg, p0, nullptr, data, TinySetup::quick_train(1));
        FAIL() << "expected TrainingFailure";
    } catch (const TrainingFailure& e) {
        EXPECT_EQ(e.step(), 0u);
    }
}

TEST(Trainer, RejectsBadConfig) {
    TinySetup fx;
    const auto data = fx.split(TaskKind::CLS, 16, 4);
    auto t = TinySetup::quick_train(1);
    t.initial_lr = 0.0;
    EXPECT_THROW(train(fx.cfg, init_params(fx.cfg, 1), nullptr, data, t), ContractViolation);
}

TEST(Metrics, UniformMlmLogitsGivePerplexityOfVocab) {
    ModelConfig cfg;
    cfg.vocab_size = 4;
    cfg.embed_dim = 4;
    cfg.heads = 1;
    cfg.ffn_dim = 4;
    cfg.layers = 1;
    ParamSet p = init_params(cfg, 3);
    p.at("head.mlm.w").values.assign(p.at("head.mlm.w").size(), 0.0);
    corpus::DatasetSplit split;
    split.task = TaskKind::MLM;
    split.valid.push_back({TaskKind::MLM, "L0", {1, 2, 3, 1}, {2, -1, -1, 3}, 0});
    const double ppl = eval_metric(cfg, p, nullptr, split, TaskKind::MLM);
    EXPECT_NEAR(ppl, 4.0, 1e-12);
    EXPECT_NEAR(forward(cfg, p, nullptr, split.valid, TaskKind::MLM).loss, std::log(4.0), 1e-12);
}

TEST(Metrics, ConstantClsPredictionOnBalancedSplit) {
    const std::vector<int> gold{0, 1, 2, 0, 1, 2, 0, 1, 2};
    const std::vector<int> pred(gold.size(), 1);
    EXPECT_NEAR(accuracy(gold, pred), 1.0 / 3.0, 1.0 / 9.0);
}

TEST(Forward, AllZeroMaskLeavesFiniteLoss) {
    TinySetup fx;
    const auto data = fx.split(TaskKind::TAG, 4, 2);
    const ParamSet p = init_params(fx.cfg, 1);
    const auto zero = masks::random_mask(p, 0.999999, 1);
    masks::Mask all_zero = masks::Mask::ones(p);
    for (auto& e : all_zero.entries()) std::fill(e.bits.begin(), e.bits.end(), 0);
    const auto r = forward(fx.cfg, p, &all_zero, data.train, TaskKind::TAG, true);
    EXPECT_TRUE(std::isfinite(r.loss));
    // Without any attention/FFN weights every token's update is the same bias vector.
    ParamSet manual = p;
    all_zero.apply(manual);
    EXPECT_EQ(r.loss, forward(fx.cfg, manual, nullptr, data.train, TaskKind::TAG).loss);
    (void)zero;
}

TEST(Forward, OnesMaskIsBitExact) {
    TinySetup fx;
    const auto data = fx.split(TaskKind::MLM, 4, 2);
    const ParamSet p = init_params(fx.cfg, 1);
    const auto ones = masks::Mask::ones(p);
    EXPECT_EQ(forward(fx.cfg, p, &ones, data.train, TaskKind::MLM).loss,
              forward(fx.cfg, p, nullptr, data.train, TaskKind::MLM).loss);
}

TEST(Checkpoint, RoundTripIsBitExact) {
    TinySetup fx;
    Checkpoint c{fx.cfg, init_params(fx.cfg, 77), {{"init", 77}, {"pretrain", 1234567890123ULL}}};
    c.params.at("embed.tok").values[3] = -0.0;
    c.params.at("embed.tok").values[4] = 1e-310;
    const auto path = std::filesystem::temp_directory_path() / "tickets_ckpt_test.bin";
    save_checkpoint(c, path);
    const Checkpoint back = load_checkpoint(path);
    EXPECT_EQ(back, c);
    EXPECT_TRUE(std::signbit(back.params.at("embed.tok").values[3]));
    std::filesystem::remove(path);
}

TEST(Checkpoint, TruncatedFileIsParseError) {
    TinySetup fx;
    Checkpoint c{fx.cfg, init_params(fx.cfg, 1), {}};
    const auto path = std::filesystem::temp_directory_path() / "tickets_ckpt_trunc.bin";
    save_checkpoint(c, path);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 9);
    EXPECT_THROW(load_checkpoint(path), ParseError);
    std::filesystem::remove(path);
}

}  // namespace
}  // namespace tickets::model
