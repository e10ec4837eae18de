// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Small grammar, two languages and a narrow model shared by the model-level tests.

#include <vector>

#include "tickets/corpus.hpp"
#include "tickets/model/trainer.hpp"
#include "tickets/model/transformer.hpp"

namespace tickets::testing {

struct TinySetup {
    corpus::AbstractGrammar grammar = corpus::AbstractGrammar::make({});
    std::vector<corpus::LanguageSpec> langs;
    model::ModelConfig cfg;

    explicit TinySetup(double omega = 0.25) {
        for (std::size_t i = 0; i < 2; ++i) langs.push_back(corpus::generate_language(grammar, i, omega, 7));
        cfg.vocab_size = corpus::vocab_size(grammar.symbol_count, omega, 2);
        cfg.embed_dim = 8;
        cfg.heads = 2;
        cfg.ffn_dim = 12;
        cfg.layers = 2;
    }

    corpus::DatasetSplit split(corpus::TaskKind task, std::size_t train = 4, std::size_t valid = 2,
                               std::size_t lang = 1, std::size_t length = 6) const {
        corpus::TaskOptions opts;
        opts.sentence_length = length;
        return corpus::build_split(grammar, langs[lang], task, {train, valid}, 11, opts);
    }

    static model::TrainConfig quick_train(std::size_t epochs = 1) {
        model::TrainConfig t;
        t.epochs = epochs;
        t.batch_size = 8;
        t.initial_lr = 3e-3;
        t.seed = 21;
        return t;
    }
};

}  // namespace tickets::testing
