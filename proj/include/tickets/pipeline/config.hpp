// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Experiment configuration: a JSON document with grammar / languages / model / train /
// pruning / transfer / similarity sections. Every key is optional; unknown keys are
// rejected, and the resolved document (all defaults filled in) is what gets digested
// and stored next to the outputs.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tickets/corpus.hpp"
#include "tickets/model/trainer.hpp"
#include "tickets/model/transformer.hpp"

namespace tickets::pipeline {

struct LanguagesSection {
    std::size_t count = 8;
    double omega = 0.2;
    std::uint64_t seed = 7;
    // Tickets, baselines and transfer matrices use the first `experiment_count` languages;
    // all `count` take part in pre-training.
    std::size_t experiment_count = 4;
    std::size_t train_size = 2000;
    std::size_t valid_size = 500;
    std::size_t pretrain_train_size = 2000;
    std::size_t pretrain_valid_size = 250;
    std::size_t sentence_length = 16;
    std::size_t cls_sentence_length = 8;  // each half of a CLS pair
    double mask_rate = 0.15;
    double paraphrase_rate = 0.3;
};

struct TrainSection {
    model::TrainConfig pretrain;
    std::map<corpus::TaskKind, model::TrainConfig> tasks;
    std::size_t seeds = 3;  // replicates per baseline, ticket and transfer cell
};

struct PruningSection {
    double rate_percent = 10.0;
    std::vector<double> sparsities{0.5, 0.8};
    bool per_tensor = false;
    // Alternative pruners are compared against IMP at this sparsity.
    std::vector<std::string> alternatives{"diff_init", "fisher"};
    double compare_sparsity = 0.5;
    std::size_t fisher_samples = 1024;
    bool fisher_sampled_labels = false;
};

struct TransferSection {
    bool random_baseline = true;
    bool cross_task = true;
    std::string cross_task_language;  // empty = first experiment language
    std::vector<double> sweep{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
    std::string sweep_language;  // empty = first experiment language
    bool multilingual = true;
    double multilingual_keep_fraction = 0.25;
    double multilingual_sparsity = 0.5;
};

struct SimilaritySection {
    std::size_t pairs = 500;
    std::vector<std::string> methods{"svcca", "pwcca"};
    double svcca_threshold = 0.99;
    std::size_t retrieval_k = 4;
    bool random_control = true;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::string output_dir = "runs/default";
    corpus::GrammarConfig grammar;
    LanguagesSection languages;
    model::ModelConfig model;  // vocab_size is derived from grammar and languages
    TrainSection train;
    PruningSection pruning;
    TransferSection transfer;
    SimilaritySection similarity;

    // Languages L0..L{count-1}, and the experiment subset.
    std::vector<std::string> all_languages() const;
    std::vector<std::string> experiment_languages() const;
    corpus::TaskOptions task_options(corpus::TaskKind task) const;
    const model::TrainConfig& task_train(corpus::TaskKind task) const;
    std::string cross_task_language() const;
    std::string sweep_language() const;
};

ExperimentConfig default_config();

// Parses and validates; throws ConfigError naming the offending key.
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

// SHA-256 over the canonical dump of the resolved document.
std::string config_digest(const ExperimentConfig& cfg);

// Output root: $TICKETS_OUTPUT_ROOT when set, otherwise cfg.output_dir.
std::filesystem::path output_root(const ExperimentConfig& cfg);

inline constexpr const char* kOutputRootEnv = "TICKETS_OUTPUT_ROOT";

}  // namespace tickets::pipeline
