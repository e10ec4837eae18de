// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#include "tickets/corpus.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "tickets/errors.hpp"
#include "tickets/numerics/rng.hpp"

namespace tickets::corpus {
namespace {

const AbstractGrammar& grammar() {
    static const AbstractGrammar g = AbstractGrammar::make({});
    return g;
}

std::size_t token_overlap(const LanguageSpec& a, const LanguageSpec& b) {
    std::set<int> sa(a.lexicon.begin(), a.lexicon.end());
    std::size_t n = 0;
    for (int t : b.lexicon) n += sa.count(t);
    return n;
}

TEST(Language, FullSharingReproducesPivot) {
    const auto pivot = generate_language(grammar(), 0, 1.0, 3);
    for (std::size_t i : {1u, 5u, 15u}) {
        const auto l = generate_language(grammar(), i, 1.0, 3);
        EXPECT_EQ(l.lexicon, pivot.lexicon);
    }
}

TEST(Language, NoSharingMeansDisjointLexicons) {
    const auto a = generate_language(grammar(), 0, 0.0, 3);
    const auto b = generate_language(grammar(), 1, 0.0, 3);
    const auto c = generate_language(grammar(), 2, 0.0, 3);
    EXPECT_EQ(token_overlap(a, b), 0u);
    EXPECT_EQ(token_overlap(b, c), 0u);
}

TEST(Language, PartialSharingCountsFloor) {
    const auto a = generate_language(grammar(), 0, 0.2, 3);
    const auto b = generate_language(grammar(), 1, 0.2, 3);
    const auto c = generate_language(grammar(), 2, 0.2, 3);
    EXPECT_EQ(token_overlap(a, b), 12u);
    // The same symbols are shared by every language.
    EXPECT_EQ(token_overlap(b, c), 12u);
    EXPECT_EQ(vocab_size(64, 0.2, 3), 4u + 64u + 2u * 52u);
    for (int t : c.lexicon) EXPECT_LT(static_cast<std::size_t>(t), vocab_size(64, 0.2, 3));
}

TEST(Language, LexiconIsInjective) {
    const auto l = generate_language(grammar(), 4, 0.3, 9);
    EXPECT_EQ(std::set<int>(l.lexicon.begin(), l.lexicon.end()).size(), l.lexicon.size());
    EXPECT_THROW(generate_language(grammar(), 16, 0.3, 9), ContractViolation);
    EXPECT_THROW(generate_language(grammar(), 1, 1.5, 9), ContractViolation);
}

TEST(Sampler, IdentityTransitionStaysInStartCategory) {
    const auto g = AbstractGrammar::with_transition({}, num::Matrix::identity(kCategoryCount));
    num::Rng rng(1);
    const auto s = sample_abstract_sentence(g, 12, rng, Category::Filler);
    for (Category c : s.categories) EXPECT_EQ(c, Category::Filler);
    for (int sym : s.symbols) {
        const auto& em = g.emission[static_cast<std::size_t>(Category::Filler)];
        EXPECT_NE(std::find(em.begin(), em.end(), sym), em.end());
    }
}

TEST(Sampler, FrequenciesMatchStationaryDistribution) {
    const auto& g = grammar();
    // Oracle: the stationary vector solves pi = pi T.
    const auto pi = stationary_distribution(g.transition);
    for (std::size_t j = 0; j < kCategoryCount; ++j) {
        double v = 0;
        for (std::size_t i = 0; i < kCategoryCount; ++i) v += pi[i] * g.transition(i, j);
        EXPECT_NEAR(v, pi[j], 1e-12);
    }
    num::Rng rng(2);
    std::vector<double> freq(kCategoryCount, 0.0);
    const std::size_t sentences = 100000 / 10;
    for (std::size_t k = 0; k < sentences; ++k)
        for (Category c : sample_abstract_sentence(g, 10, rng).categories) freq[static_cast<std::size_t>(c)] += 1;
    for (std::size_t j = 0; j < kCategoryCount; ++j) EXPECT_NEAR(freq[j] / 100000.0, pi[j], 0.01);
}

TEST(Sampler, UniformTransitionIsUniform) {
    num::Matrix u(kCategoryCount, kCategoryCount, 0.25);
    const auto g = AbstractGrammar::with_transition({}, u);
    for (double p : g.start) EXPECT_NEAR(p, 0.25, 1e-12);
}

TEST(Sampler, FixedSeedRepeats) {
    num::Rng a(5), b(5);
    EXPECT_EQ(sample_abstract_sentence(grammar(), 16, a), sample_abstract_sentence(grammar(), 16, b));
}

TEST(Render, PivotIsPositionwiseSubstitution) {
    const auto pivot = generate_language(grammar(), 0, 0.2, 3);
    EXPECT_TRUE(pivot.reorder.empty());
    num::Rng rng(6);
    const auto s = sample_abstract_sentence(grammar(), 16, rng);
    const auto r = render(s, grammar(), pivot);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(r.tokens[i], kSpecialTokenCount + s.symbols[i]);
}

TEST(Render, RoundTripAndCategoryPermutation) {
    num::Rng rng(8);
    for (std::size_t li = 1; li < 6; ++li) {
        const auto lang = generate_language(grammar(), li, 0.2, 3);
        for (int k = 0; k < 50; ++k) {
            const auto s = sample_abstract_sentence(grammar(), 16, rng);
            const auto r = render(s, grammar(), lang);
            ASSERT_EQ(r.tokens.size(), s.size());
            EXPECT_EQ(inverse_render(r, lang), s);
            auto a = r.categories, b = s.categories;
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            EXPECT_EQ(a, b);
        }
    }
}

TEST(Render, RejectsUnknownSymbol) {
    AbstractSentence s{{0, 1, 2, 999}, {Category::Entity, Category::Entity, Category::Entity, Category::Entity}};
    EXPECT_THROW(render(s, grammar(), generate_language(grammar(), 0, 0.2, 3)), ContractViolation);
}

TEST(Split, SizesAndDisjointness) {
    const auto lang = generate_language(grammar(), 1, 0.2, 3);
    const auto split = build_split(grammar(), lang, TaskKind::TAG, {2000, 500}, 4);
    EXPECT_EQ(split.train.size(), 2000u);
    EXPECT_EQ(split.valid.size(), 500u);
    std::set<std::uint64_t> ids;
    for (const auto& e : split.train) ids.insert(e.abstract_id);
    for (const auto& e : split.valid) EXPECT_EQ(ids.count(e.abstract_id), 0u);
    for (const auto& e : split.train) EXPECT_EQ(e.labels.size(), e.tokens.size());
}

TEST(Split, TagLabelsAgreeAcrossLanguagesUpToReordering) {
    const auto a = generate_language(grammar(), 1, 0.2, 3);
    const auto b = generate_language(grammar(), 2, 0.2, 3);
    const auto sa = build_split(grammar(), a, TaskKind::TAG, {50, 10}, 21);
    const auto sb = build_split(grammar(), b, TaskKind::TAG, {50, 10}, 21);
    for (std::size_t i = 0; i < sa.train.size(); ++i) {
        EXPECT_EQ(sa.train[i].abstract_id, sb.train[i].abstract_id);
        auto la = sa.train[i].labels, lb = sb.train[i].labels;
        std::sort(la.begin(), la.end());
        std::sort(lb.begin(), lb.end());
        EXPECT_EQ(la, lb);
    }
}

TEST(Split, MlmMasksCeilOfRate) {
    EXPECT_EQ(masked_count(16, 0.15), 3u);
    EXPECT_EQ(masked_count(20, 0.15), 3u);
    EXPECT_EQ(masked_count(7, 0.15), 2u);
    const auto lang = generate_language(grammar(), 0, 0.2, 3);
    TaskOptions opts;
    opts.sentence_length = 13;
    const auto split = build_split(grammar(), lang, TaskKind::MLM, {100, 20}, 4, opts);
    for (const auto& e : split.train) {
        std::size_t masked = 0;
        for (std::size_t i = 0; i < e.tokens.size(); ++i) {
            if (e.labels[i] >= 0) {
                ++masked;
                EXPECT_EQ(e.tokens[i], kMaskToken);
            }
        }
        EXPECT_EQ(masked, 2u);
    }
}

TEST(Split, ClsLabelsBalancedAndContradictionsFlipActions) {
    const auto pivot = generate_language(grammar(), 0, 0.2, 3);
    TaskOptions opts;
    opts.sentence_length = 8;
    const auto split = build_split(grammar(), pivot, TaskKind::CLS, {300, 30}, 4, opts);
    std::vector<int> counts(kClsLabelCount, 0);
    for (const auto& e : split.train) {
        ASSERT_EQ(e.labels.size(), 1u);
        ++counts[static_cast<std::size_t>(e.labels[0])];
        ASSERT_EQ(e.tokens.size(), 16u);
        if (e.labels[0] == 1) continue;
        // The pivot has no reordering, so tokens map straight back to symbols.
        bool any_action = false;
        for (std::size_t k = 0; k < 8; ++k) {
            const int f = e.tokens[k] - kSpecialTokenCount;
            const int s = e.tokens[k + 8] - kSpecialTokenCount;
            const bool action = grammar().owner[static_cast<std::size_t>(f)] == Category::Action;
            any_action |= action;
            if (action) {
                const int expected = e.labels[0] == 2 ? grammar().antonym[static_cast<std::size_t>(f)] : f;
                EXPECT_EQ(s, expected);
            } else {
                EXPECT_NE(grammar().owner[static_cast<std::size_t>(s)], Category::Action);
            }
        }
        EXPECT_TRUE(any_action);
    }
    for (int c : counts) EXPECT_EQ(c, 100);
}

TEST(Split, DeterministicForSeed) {
    const auto lang = generate_language(grammar(), 2, 0.2, 3);
    EXPECT_EQ(build_split(grammar(), lang, TaskKind::CLS, {20, 5}, 4),
              build_split(grammar(), lang, TaskKind::CLS, {20, 5}, 4));
    EXPECT_NE(build_split(grammar(), lang, TaskKind::CLS, {20, 5}, 4),
              build_split(grammar(), lang, TaskKind::CLS, {20, 5}, 5));
}

TEST(PretrainingMix, InterleavesLanguages) {
    std::vector<LanguageSpec> langs;
    for (std::size_t i = 0; i < 4; ++i) langs.push_back(generate_language(grammar(), i, 0.2, 3));
    const auto mix = build_pretraining_mix(grammar(), langs, {1000, 10}, 7);
    ASSERT_EQ(mix.train.size(), 4000u);
    for (std::size_t i = 0; i < mix.train.size(); ++i) EXPECT_EQ(mix.train[i].language, langs[i % 4].id);
    EXPECT_EQ(mix, build_pretraining_mix(grammar(), langs, {1000, 10}, 7));
}

TEST(PretrainingMix, SingleLanguageEqualsMlmSplit) {
    const auto lang = generate_language(grammar(), 3, 0.2, 3);
    const std::vector<LanguageSpec> one{lang};
    const auto mix = build_pretraining_mix(grammar(), one, {30, 10}, 7);
    const auto split = build_split(grammar(), lang, TaskKind::MLM, {30, 10}, num::derive_seed(7, {lang.index}));
    EXPECT_EQ(mix.train, split.train);
    EXPECT_EQ(mix.valid, split.valid);
}

TEST(CombinedSplit, KeepsPrefixOfEachSplit) {
    const auto a = build_split(grammar(), generate_language(grammar(), 0, 0.2, 3), TaskKind::TAG, {100, 10}, 1);
    const auto b = build_split(grammar(), generate_language(grammar(), 1, 0.2, 3), TaskKind::TAG, {100, 10}, 1);
    const std::vector<DatasetSplit> two{a, b};
    const auto c = build_combined_task_split(two, 0.5);
    ASSERT_EQ(c.train.size(), 100u);
    std::size_t from_a = 0;
    for (const auto& e : c.train) from_a += e.language == a.language;
    EXPECT_EQ(from_a, 50u);

    const std::vector<DatasetSplit> one{a};
    EXPECT_EQ(build_combined_task_split(one, 1.0).train, a.train);

    std::vector<DatasetSplit> four;
    for (std::size_t i = 0; i < 4; ++i)
        four.push_back(build_split(grammar(), generate_language(grammar(), i, 0.2, 3), TaskKind::MLM, {200, 20}, 1));
    EXPECT_EQ(build_combined_task_split(four, 0.25).train.size(), 200u);
}

TEST(CombinedSplit, RejectsMixedTasks) {
    const auto lang = generate_language(grammar(), 0, 0.2, 3);
    const std::vector<DatasetSplit> mixed{build_split(grammar(), lang, TaskKind::TAG, {10, 2}, 1),
                                          build_split(grammar(), lang, TaskKind::CLS, {10, 2}, 1)};
    EXPECT_THROW(build_combined_task_split(mixed, 0.5), ContractViolation);
}

TEST(Export, OneRecordPerExample) {
    const auto split = build_split(grammar(), generate_language(grammar(), 0, 0.2, 3), TaskKind::TAG, {5, 2}, 1);
    std::ostringstream os;
    write_jsonl(split, os);
    const auto text = os.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 7);
}

}  // namespace
}  // namespace tickets::corpus
