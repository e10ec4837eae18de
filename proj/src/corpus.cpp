// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#include "tickets/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "tickets/errors.hpp"

namespace tickets::corpus {
namespace {

using num::derive_seed;
using num::hash_tag;
using num::Rng;

// ENTITY -> MODIFIER -> FILLER -> ENTITY: whose block each category borrows from.
Category borrow_source(Category c) {
    switch (c) {
        case Category::Entity: return Category::Modifier;
        case Category::Modifier: return Category::Filler;
        case Category::Filler: return Category::Entity;
        case Category::Action: break;
    }
    return Category::Action;
}

std::size_t floor_count(double fraction, std::size_t n) {
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

int draw_symbol(const AbstractGrammar& g, Category c, Rng& rng) {
    const auto& set = g.emission[static_cast<std::size_t>(c)];
    return set[rng.uniform_int(set.size())];
}

Category draw_category(std::span<const double> probs, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        acc += probs[k];
        if (u < acc) return static_cast<Category>(k);
    }
    // Rounding left u above the cumulative sum: take the last category with mass.
    for (std::size_t k = probs.size(); k-- > 0;)
        if (probs[k] > 0.0) return static_cast<Category>(k);
    return Category::Filler;
}

AbstractSentence paraphrase(const AbstractGrammar& g, const AbstractSentence& s, double rate, Rng& rng) {
    AbstractSentence out = s;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out.categories[i] == Category::Action) continue;
        if (rng.bernoulli(rate)) out.symbols[i] = draw_symbol(g, out.categories[i], rng);
    }
    return out;
}

bool has_action(const AbstractSentence& s) {
    return std::find(s.categories.begin(), s.categories.end(), Category::Action) != s.categories.end();
}

std::string join_ids(std::span<const std::string> ids) {
    std::string out;
    for (const auto& id : ids) {
        if (!out.empty()) out += '+';
        out += id;
    }
    return out;
}

}  // namespace

const char* category_name(Category c) {
    switch (c) {
        case Category::Entity: return "ENTITY";
        case Category::Action: return "ACTION";
        case Category::Modifier: return "MODIFIER";
        case Category::Filler: return "FILLER";
    }
    return "?";
}

const char* task_name(TaskKind t) {
    switch (t) {
        case TaskKind::MLM: return "MLM";
        case TaskKind::TAG: return "TAG";
        case TaskKind::CLS: return "CLS";
    }
    return "?";
}

TaskKind parse_task(const std::string& name) {
    for (TaskKind t : kAllTasks)
        if (name == task_name(t)) return t;
    throw ContractViolation("unknown task kind: " + name);
}

std::vector<double> stationary_distribution(const num::Matrix& transition) {
    const std::size_t n = transition.rows();
    require(n > 0 && transition.cols() == n, "stationary_distribution: matrix must be square");
    std::vector<double> pi(n, 1.0 / static_cast<double>(n));
    std::vector<double> next(n);
    // Lazy chain (I + P) / 2 has the same stationary vector and is aperiodic.
    for (int iter = 0; iter < 1000000; ++iter) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) next[j] += pi[i] * transition(i, j);
        double delta = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            next[j] = 0.5 * (next[j] + pi[j]);
            delta = std::max(delta, std::abs(next[j] - pi[j]));
        }
        pi.swap(next);
        if (delta < 1e-16) break;
    }
    const double total = std::accumulate(pi.begin(), pi.end(), 0.0);
    for (double& p : pi) p /= total;
    return pi;
}

AbstractGrammar AbstractGrammar::make(const GrammarConfig& cfg) {
    Rng rng(derive_seed(cfg.seed, {hash_tag("transition")}));
    num::Matrix t(kCategoryCount, kCategoryCount);
    for (std::size_t i = 0; i < kCategoryCount; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < kCategoryCount; ++j) {
            t(i, j) = std::exp(cfg.transition_spread * rng.normal());
            total += t(i, j);
        }
        for (std::size_t j = 0; j < kCategoryCount; ++j) t(i, j) /= total;
    }
    return with_transition(cfg, std::move(t));
}

AbstractGrammar AbstractGrammar::with_transition(const GrammarConfig& cfg, num::Matrix transition) {
    require(cfg.symbol_count >= 2 * kCategoryCount && cfg.symbol_count % kCategoryCount == 0,
            "grammar: symbol_count must be a positive multiple of the category count");
    const std::size_t block = cfg.symbol_count / kCategoryCount;
    require(block % 2 == 0, "grammar: ACTION block must have even size for the antonym pairing");
    require(cfg.ambiguous_per_category <= block, "grammar: ambiguous_per_category exceeds block size");

    AbstractGrammar g;
    g.symbol_count = cfg.symbol_count;
    g.seed = cfg.seed;
    g.transition = std::move(transition);
    g.start = stationary_distribution(g.transition);

    g.owner.resize(g.symbol_count);
    for (std::size_t s = 0; s < g.symbol_count; ++s) g.owner[s] = static_cast<Category>(s / block);

    g.emission.resize(kCategoryCount);
    for (std::size_t c = 0; c < kCategoryCount; ++c) {
        for (std::size_t k = 0; k < block; ++k) g.emission[c].push_back(static_cast<int>(c * block + k));
        const auto cat = static_cast<Category>(c);
        if (cat == Category::Action) continue;
        const auto src = static_cast<std::size_t>(borrow_source(cat));
        for (std::size_t k = 0; k < cfg.ambiguous_per_category; ++k)
            g.emission[c].push_back(static_cast<int>(src * block + k));
    }

    g.antonym.assign(g.symbol_count, -1);
    std::vector<int> actions(g.emission[static_cast<std::size_t>(Category::Action)]);
    Rng pair_rng(derive_seed(cfg.seed, {hash_tag("antonym")}));
    pair_rng.shuffle(std::span<int>(actions));
    for (std::size_t k = 0; k + 1 < actions.size(); k += 2) {
        g.antonym[static_cast<std::size_t>(actions[k])] = actions[k + 1];
        g.antonym[static_cast<std::size_t>(actions[k + 1])] = actions[k];
    }

    g.share_order.resize(g.symbol_count);
    std::iota(g.share_order.begin(), g.share_order.end(), 0);
    Rng share_rng(derive_seed(cfg.seed, {hash_tag("share")}));
    share_rng.shuffle(std::span<int>(g.share_order));

    g.validate();
    return g;
}

void AbstractGrammar::validate() const {
    require(transition.rows() == kCategoryCount && transition.cols() == kCategoryCount,
            "grammar: transition must be category x category");
    for (std::size_t i = 0; i < kCategoryCount; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < kCategoryCount; ++j) {
            require(transition(i, j) >= 0.0, "grammar: negative transition probability");
            total += transition(i, j);
        }
        require(std::abs(total - 1.0) <= 1e-12, "grammar: transition row does not sum to 1");
    }
    for (std::size_t s = 0; s < symbol_count; ++s) {
        const int a = antonym[s];
        if (owner[s] == Category::Action) {
            require(a >= 0 && static_cast<std::size_t>(a) != s, "grammar: antonym pairing has a fixed point");
            require(antonym[static_cast<std::size_t>(a)] == static_cast<int>(s),
                    "grammar: antonym pairing is not an involution");
        } else {
            require(a == -1, "grammar: antonym assigned outside ACTION");
        }
    }
}

std::size_t LanguageSpec::shared_count(std::size_t symbol_count) const {
    return floor_count(omega, symbol_count);
}

std::size_t vocab_size(std::size_t symbol_count, double omega, std::size_t language_count) {
    require(language_count >= 1, "vocab_size: need at least one language");
    const std::size_t shared = floor_count(omega, symbol_count);
    return kSpecialTokenCount + symbol_count + (language_count - 1) * (symbol_count - shared);
}

LanguageSpec generate_language(const AbstractGrammar& grammar, std::size_t language_index,
                               double omega, std::uint64_t seed) {
    require(language_index < kMaxLanguages, "generate_language: language_index must be < 16");
    require(omega >= 0.0 && omega <= 1.0, "generate_language: omega must lie in [0, 1]");
    const std::size_t a = grammar.symbol_count;

    LanguageSpec lang;
    lang.id = "L" + std::to_string(language_index);
    lang.index = language_index;
    lang.omega = omega;
    lang.lexicon.assign(a, -1);

    const std::size_t shared = lang.shared_count(a);
    std::vector<bool> is_shared(a, false);
    for (std::size_t k = 0; k < shared; ++k) is_shared[static_cast<std::size_t>(grammar.share_order[k])] = true;

    if (language_index == 0) {
        for (std::size_t s = 0; s < a; ++s) lang.lexicon[s] = kSpecialTokenCount + static_cast<int>(s);
    } else {
        std::vector<int> private_symbols;
        for (std::size_t s = 0; s < a; ++s) {
            if (is_shared[s]) lang.lexicon[s] = kSpecialTokenCount + static_cast<int>(s);
            else private_symbols.push_back(static_cast<int>(s));
        }
        Rng rng(derive_seed(seed, {language_index, hash_tag("lexicon")}));
        rng.shuffle(std::span<int>(private_symbols));
        const std::size_t base = kSpecialTokenCount + a + (language_index - 1) * (a - shared);
        for (std::size_t k = 0; k < private_symbols.size(); ++k)
            lang.lexicon[static_cast<std::size_t>(private_symbols[k])] = static_cast<int>(base + k);

        Rng order_rng(derive_seed(seed, {language_index, hash_tag("reorder")}));
        std::vector<ReorderDirective> candidates;
        for (std::size_t x = 0; x < kCategoryCount; ++x)
            for (std::size_t y = 0; y < kCategoryCount; ++y)
                if (x != y) candidates.push_back({static_cast<Category>(x), static_cast<Category>(y)});
        order_rng.shuffle(std::span<ReorderDirective>(candidates));
        const std::size_t count = 1 + order_rng.uniform_int(2);
        lang.reorder.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(count));
    }
    for (std::size_t s = 0; s < a; ++s) lang.inverse_lexicon.emplace(lang.lexicon[s], static_cast<int>(s));
    return lang;
}

AbstractSentence sample_abstract_sentence(const AbstractGrammar& grammar, std::size_t length,
                                          Rng& rng, std::optional<Category> start) {
    require(length >= 4 && length <= 32, "sample_abstract_sentence: length must lie in [4, 32]");
    AbstractSentence s;
    s.symbols.reserve(length);
    s.categories.reserve(length);
    Category c = start ? *start : draw_category(grammar.start, rng);
    for (std::size_t i = 0; i < length; ++i) {
        if (i > 0) c = draw_category(grammar.transition.row(static_cast<std::size_t>(c)), rng);
        s.categories.push_back(c);
        s.symbols.push_back(draw_symbol(grammar, c, rng));
    }
    return s;
}

RenderedSentence render(const AbstractSentence& sentence, const AbstractGrammar& grammar,
                        const LanguageSpec& lang) {
    require(sentence.symbols.size() == sentence.categories.size(), "render: malformed sentence");
    const std::size_t n = sentence.size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (const auto& d : lang.reorder) {
        std::size_t i = 0;
        while (i + 1 < n) {
            if (sentence.categories[perm[i]] == d.first && sentence.categories[perm[i + 1]] == d.second) {
                std::swap(perm[i], perm[i + 1]);
                i += 2;
            } else {
                ++i;
            }
        }
    }
    RenderedSentence out;
    out.tokens.resize(n);
    out.categories.resize(n);
    out.source_index = perm;
    for (std::size_t p = 0; p < n; ++p) {
        const int sym = sentence.symbols[perm[p]];
        require(sym >= 0 && static_cast<std::size_t>(sym) < grammar.symbol_count, "render: unknown symbol");
        out.tokens[p] = lang.lexicon[static_cast<std::size_t>(sym)];
        out.categories[p] = sentence.categories[perm[p]];
    }
    return out;
}

AbstractSentence inverse_render(const RenderedSentence& rendered, const LanguageSpec& lang) {
    const std::size_t n = rendered.tokens.size();
    require(rendered.categories.size() == n && rendered.source_index.size() == n,
            "inverse_render: malformed rendering");
    AbstractSentence s;
    s.symbols.assign(n, -1);
    s.categories.assign(n, Category::Filler);
    for (std::size_t p = 0; p < n; ++p) {
        auto it = lang.inverse_lexicon.find(rendered.tokens[p]);
        require(it != lang.inverse_lexicon.end(), "inverse_render: token not in lexicon of " + lang.id);
        const std::size_t src = rendered.source_index[p];
        require(src < n, "inverse_render: bad source index");
        s.symbols[src] = it->second;
        s.categories[src] = rendered.categories[p];
    }
    return s;
}

std::size_t masked_count(std::size_t length, double mask_rate) {
    return static_cast<std::size_t>(std::ceil(mask_rate * static_cast<double>(length) - 1e-9));
}

DatasetSplit build_split(const AbstractGrammar& grammar, const LanguageSpec& lang, TaskKind task,
                         SplitSizes sizes, std::uint64_t seed, const TaskOptions& opts) {
    require(sizes.train > 0 && sizes.valid > 0, "build_split: sizes must be positive");
    const auto task_tag = static_cast<std::uint64_t>(task);
    Rng rng(derive_seed(seed, {task_tag}));
    const std::uint64_t id_prefix = derive_seed(seed, {task_tag, hash_tag("id")}) & 0xffffffff00000000ULL;
    const std::size_t len = opts.sentence_length;

    DatasetSplit split;
    split.language = lang.id;
    split.task = task;
    split.generation_seed = seed;
    const std::size_t total = sizes.train + sizes.valid;
    for (std::size_t i = 0; i < total; ++i) {
        Example ex;
        ex.task = task;
        ex.language = lang.id;
        ex.abstract_id = id_prefix | static_cast<std::uint64_t>(i);
        switch (task) {
            case TaskKind::MLM: {
                const auto r = render(sample_abstract_sentence(grammar, len, rng), grammar, lang);
                std::vector<std::size_t> pos(len);
                std::iota(pos.begin(), pos.end(), 0);
                rng.shuffle(std::span<std::size_t>(pos));
                ex.tokens = r.tokens;
                ex.labels.assign(len, -1);
                for (std::size_t k = 0; k < masked_count(len, opts.mask_rate); ++k) {
                    ex.labels[pos[k]] = r.tokens[pos[k]];
                    ex.tokens[pos[k]] = kMaskToken;
                }
                break;
            }
            case TaskKind::TAG: {
                const auto r = render(sample_abstract_sentence(grammar, len, rng), grammar, lang);
                ex.tokens = r.tokens;
                for (Category c : r.categories) ex.labels.push_back(static_cast<int>(c));
                break;
            }
            case TaskKind::CLS: {
                const int label = static_cast<int>(i % kClsLabelCount);
                AbstractSentence first = sample_abstract_sentence(grammar, len, rng);
                while (!has_action(first)) first = sample_abstract_sentence(grammar, len, rng);
                AbstractSentence second;
                if (label == 1) {
                    second = sample_abstract_sentence(grammar, len, rng);
                } else {
                    second = paraphrase(grammar, first, opts.paraphrase_rate, rng);
                    if (label == 2) {
                        for (std::size_t k = 0; k < second.size(); ++k)
                            if (second.categories[k] == Category::Action)
                                second.symbols[k] = grammar.antonym[static_cast<std::size_t>(second.symbols[k])];
                    }
                }
                ex.tokens = render(first, grammar, lang).tokens;
                const auto r2 = render(second, grammar, lang);
                ex.tokens.insert(ex.tokens.end(), r2.tokens.begin(), r2.tokens.end());
                ex.labels = {label};
                break;
            }
        }
        (i < sizes.train ? split.train : split.valid).push_back(std::move(ex));
    }
    return split;
}

DatasetSplit build_pretraining_mix(const AbstractGrammar& grammar,
                                   std::span<const LanguageSpec> languages, SplitSizes per_language,
                                   std::uint64_t seed, const TaskOptions& opts) {
    require(!languages.empty(), "build_pretraining_mix: need at least one language");
    std::vector<DatasetSplit> parts;
    std::vector<std::string> ids;
    for (const auto& lang : languages) {
        parts.push_back(build_split(grammar, lang, TaskKind::MLM, per_language,
                                    derive_seed(seed, {lang.index}), opts));
        ids.push_back(lang.id);
    }
    DatasetSplit mix;
    mix.language = join_ids(ids);
    mix.task = TaskKind::MLM;
    mix.generation_seed = seed;
    for (std::size_t i = 0; i < per_language.train; ++i)
        for (auto& p : parts) mix.train.push_back(std::move(p.train[i]));
    for (std::size_t i = 0; i < per_language.valid; ++i)
        for (auto& p : parts) mix.valid.push_back(std::move(p.valid[i]));
    return mix;
}

DatasetSplit build_combined_task_split(std::span<const DatasetSplit> splits, double keep_fraction) {
    require(!splits.empty(), "build_combined_task_split: no splits");
    require(keep_fraction > 0.0 && keep_fraction <= 1.0, "build_combined_task_split: keep_fraction must lie in (0, 1]");
    const TaskKind task = splits.front().task;
    std::vector<std::string> ids;
    std::uint64_t seed = num::hash_tag("combine");
    for (const auto& s : splits) {
        require(s.task == task, "build_combined_task_split: mixed task kinds");
        ids.push_back(s.language);
        seed = num::mix64(seed ^ s.generation_seed);
    }
    DatasetSplit out;
    out.task = task;
    out.language = join_ids(ids);
    out.generation_seed = seed;
    for (const auto& s : splits) {
        const std::size_t nt = floor_count(keep_fraction, s.train.size());
        const std::size_t nv = floor_count(keep_fraction, s.valid.size());
        out.train.insert(out.train.end(), s.train.begin(), s.train.begin() + static_cast<std::ptrdiff_t>(nt));
        out.valid.insert(out.valid.end(), s.valid.begin(), s.valid.begin() + static_cast<std::ptrdiff_t>(nv));
    }
    if (splits.size() > 1) {
        Rng rng(seed);
        rng.shuffle(std::span<Example>(out.train));
    }
    return out;
}

void write_jsonl(const DatasetSplit& split, std::ostream& out) {
    auto emit = [&](const std::vector<Example>& examples, const char* which) {
        for (const auto& ex : examples) {
            nlohmann::json j;
            j["split"] = which;
            j["task"] = task_name(ex.task);
            j["language"] = ex.language;
            j["tokens"] = ex.tokens;
            j["labels"] = ex.labels;
            j["abstract_id"] = ex.abstract_id;
            out << j.dump() << '\n';
        }
    };
    emit(split.train, "train");
    emit(split.valid, "valid");
}

}  // namespace tickets::corpus
