// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Synthetic multilingual data: an abstract category grammar, languages that render it
// with their own lexicon and word-order swaps, and the three task datasets (masked LM,
// per-token tagging, sentence-pair classification) built on top.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tickets/numerics/matrix.hpp"
#include "tickets/numerics/rng.hpp"

namespace tickets::corpus {

enum class Category : int { Entity = 0, Action = 1, Modifier = 2, Filler = 3 };
inline constexpr std::size_t kCategoryCount = 4;
const char* category_name(Category c);

enum class TaskKind : int { MLM = 0, TAG = 1, CLS = 2 };
const char* task_name(TaskKind t);
TaskKind parse_task(const std::string& name);
inline constexpr TaskKind kAllTasks[] = {TaskKind::MLM, TaskKind::TAG, TaskKind::CLS};

// Reserved token ids shared by every language.
inline constexpr int kPadToken = 0;
inline constexpr int kMaskToken = 1;
inline constexpr int kSepToken = 2;
inline constexpr int kUnkToken = 3;
inline constexpr int kSpecialTokenCount = 4;

inline constexpr std::size_t kClsLabelCount = 3;

struct GrammarConfig {
    std::size_t symbol_count = 64;
    // Each non-ACTION category also emits this many symbols owned by another
    // non-ACTION category, so tagging needs context.
    std::size_t ambiguous_per_category = 4;
    // Log-normal spread of transition weights; larger is more predictable.
    double transition_spread = 1.5;
    std::uint64_t seed = 1;
};

struct AbstractGrammar {
    std::size_t symbol_count = 0;
    num::Matrix transition;           // category x category, rows sum to 1
    std::vector<double> start;        // initial category distribution
    std::vector<std::vector<int>> emission;  // symbols each category can emit
    std::vector<Category> owner;      // home category of each symbol
    std::vector<int> antonym;         // ACTION symbol -> partner, -1 elsewhere
    std::vector<int> share_order;     // symbols in the order they become shared with the pivot
    std::uint64_t seed = 0;

    std::size_t block_size() const noexcept { return symbol_count / kCategoryCount; }

    // Rebuilds a grammar with an explicit transition matrix (start = stationary).
    static AbstractGrammar make(const GrammarConfig& cfg);
    static AbstractGrammar with_transition(const GrammarConfig& cfg, num::Matrix transition);

    // Throws ContractViolation if any structural invariant fails.
    void validate() const;
};

// Left eigenvector of a row-stochastic matrix for eigenvalue 1, normalised to sum 1.
std::vector<double> stationary_distribution(const num::Matrix& transition);

struct AbstractSentence {
    std::vector<int> symbols;
    std::vector<Category> categories;

    std::size_t size() const noexcept { return symbols.size(); }
    friend bool operator==(const AbstractSentence&, const AbstractSentence&) = default;
};

// Swap every adjacent (first, second) category pair into (second, first), left to right.
struct ReorderDirective {
    Category first;
    Category second;
    friend bool operator==(const ReorderDirective&, const ReorderDirective&) = default;
};

struct LanguageSpec {
    std::string id;
    std::size_t index = 0;
    double omega = 0.0;
    std::vector<int> lexicon;  // symbol -> surface token
    std::unordered_map<int, int> inverse_lexicon;
    std::vector<ReorderDirective> reorder;

    std::size_t shared_count(std::size_t symbol_count) const;
};

inline constexpr std::size_t kMaxLanguages = 16;

// Number of surface tokens including specials for `language_count` languages.
std::size_t vocab_size(std::size_t symbol_count, double omega, std::size_t language_count);

LanguageSpec generate_language(const AbstractGrammar& grammar, std::size_t language_index,
                               double omega, std::uint64_t seed);

// Categories follow the grammar's Markov chain; the first category is drawn from
// `start` unless given.
AbstractSentence sample_abstract_sentence(const AbstractGrammar& grammar, std::size_t length,
                                          num::Rng& rng,
                                          std::optional<Category> start = std::nullopt);

struct RenderedSentence {
    std::vector<int> tokens;
    std::vector<Category> categories;      // surface order
    std::vector<std::size_t> source_index;  // surface position -> abstract position
};

RenderedSentence render(const AbstractSentence& sentence, const AbstractGrammar& grammar,
                        const LanguageSpec& lang);
AbstractSentence inverse_render(const RenderedSentence& rendered, const LanguageSpec& lang);

struct Example {
    TaskKind task = TaskKind::MLM;
    std::string language;
    std::vector<int> tokens;
    // MLM: original token at masked positions, -1 elsewhere.
    // TAG: category id per token.  CLS: a single label in {0, 1, 2}.
    std::vector<int> labels;
    std::uint64_t abstract_id = 0;

    friend bool operator==(const Example&, const Example&) = default;
};

struct DatasetSplit {
    std::vector<Example> train;
    std::vector<Example> valid;
    std::string language;
    TaskKind task = TaskKind::MLM;
    std::uint64_t generation_seed = 0;

    friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

struct SplitSizes {
    std::size_t train = 2000;
    std::size_t valid = 500;
};

struct TaskOptions {
    std::size_t sentence_length = 16;
    double mask_rate = 0.15;
    double paraphrase_rate = 0.3;
};

std::size_t masked_count(std::size_t length, double mask_rate);

// Abstract content depends only on (seed, task); calling with the same seed for two
// languages yields parallel splits.
DatasetSplit build_split(const AbstractGrammar& grammar, const LanguageSpec& lang, TaskKind task,
                         SplitSizes sizes, std::uint64_t seed, const TaskOptions& opts = {});

// Joint MLM data over all languages, interleaved round-robin. Each language uses
// derive_seed(seed, {language index}).
DatasetSplit build_pretraining_mix(const AbstractGrammar& grammar,
                                   std::span<const LanguageSpec> languages, SplitSizes per_language,
                                   std::uint64_t seed, const TaskOptions& opts = {});

// First floor(keep_fraction * |split|) examples of every split, shuffled.
DatasetSplit build_combined_task_split(std::span<const DatasetSplit> splits, double keep_fraction);

// One JSON object per line: split, task, language, tokens, labels, abstract_id.
void write_jsonl(const DatasetSplit& split, std::ostream& out);

}  // namespace tickets::corpus
