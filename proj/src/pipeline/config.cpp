// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#include "tickets/pipeline/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

#include "tickets/errors.hpp"
#include "tickets/io.hpp"
#include "tickets/pruning.hpp"

namespace tickets::pipeline {
namespace {

using nlohmann::json;
using corpus::TaskKind;

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

// Consumes keys of one object; anything left over at the end is an error.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + " must be an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
                if (!it->is_number_unsigned()) throw ConfigError("");
            } else if constexpr (std::is_same_v<T, double>) {
                if (!it->is_number()) throw ConfigError("");
            }
            out = it->template get<T>();
        } catch (const std::exception&) {
            throw ConfigError(where() + "." + key + " has the wrong type");
        }
    }

    Reader child(const char* key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        static const json empty = json::object();
        return Reader(it == j_.end() ? empty : *it, path_ + "." + key);
    }

    bool has(const char* key) const { return j_.contains(key); }
    const json& raw() const { return j_; }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError("unknown key " + where() + "." + k);
    }

    std::string where() const { return path_; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void read_train(Reader r, model::TrainConfig& t, bool task_level) {
    r.get("epochs", t.epochs);
    r.get("batch_size", t.batch_size);
    r.get("lr", t.initial_lr);
    r.get("beta1", t.beta1);
    r.get("beta2", t.beta2);
    r.get("adam_epsilon", t.adam_epsilon);
    r.get("eval_every", t.eval_every);
    if (task_level) r.get("reinit_head", t.reinit_head);
    r.finish();
    try {
        t.validate();
    } catch (const ContractViolation& e) {
        throw ConfigError(r.where() + ": " + e.what());
    }
}

json train_json(const model::TrainConfig& t, bool task_level) {
    json j{{"epochs", t.epochs},
           {"batch_size", t.batch_size},
           {"lr", t.initial_lr},
           {"beta1", t.beta1},
           {"beta2", t.beta2},
           {"adam_epsilon", t.adam_epsilon},
           {"eval_every", t.eval_every}};
    if (task_level) j["reinit_head"] = t.reinit_head;
    return j;
}

void check(bool cond, const std::string& msg) {
    if (!cond) throw ConfigError(msg);
}

void check_sparsity(double s, const std::string& key) {
    check(s > 0.0 && s < 1.0, key + " must lie in (0, 1)");
}

}  // namespace

std::vector<std::string> ExperimentConfig::all_languages() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < languages.count; ++i) out.push_back("L" + std::to_string(i));
    return out;
}

std::vector<std::string> ExperimentConfig::experiment_languages() const {
    auto all = all_languages();
    all.resize(languages.experiment_count);
    return all;
}

corpus::TaskOptions ExperimentConfig::task_options(TaskKind task) const {
    corpus::TaskOptions o;
    o.sentence_length = task == TaskKind::CLS ? languages.cls_sentence_length : languages.sentence_length;
    o.mask_rate = languages.mask_rate;
    o.paraphrase_rate = languages.paraphrase_rate;
    return o;
}

const model::TrainConfig& ExperimentConfig::task_train(TaskKind task) const { return train.tasks.at(task); }

std::string ExperimentConfig::cross_task_language() const {
    return transfer.cross_task_language.empty() ? "L0" : transfer.cross_task_language;
}

std::string ExperimentConfig::sweep_language() const {
    return transfer.sweep_language.empty() ? "L0" : transfer.sweep_language;
}

ExperimentConfig default_config() {
    ExperimentConfig c;
    c.train.pretrain.epochs = 8;
    c.train.pretrain.batch_size = 32;
    c.train.pretrain.initial_lr = 3e-3;
    c.train.pretrain.reinit_head = false;

    model::TrainConfig mlm;
    mlm.epochs = 1;
    mlm.batch_size = 16;
    mlm.initial_lr = 7.5e-3;
    model::TrainConfig tag;
    tag.epochs = 3;
    tag.batch_size = 32;
    tag.initial_lr = 3e-3;
    model::TrainConfig cls = tag;
    cls.epochs = 5;
    c.train.tasks = {{TaskKind::MLM, mlm}, {TaskKind::TAG, tag}, {TaskKind::CLS, cls}};
    c.model.vocab_size = corpus::vocab_size(c.grammar.symbol_count, c.languages.omega, c.languages.count);
    return c;
}

ExperimentConfig config_from_json(const json& doc) {
    ExperimentConfig c = default_config();
    Reader root(doc, "config");
    root.get("seed", c.seed);
    root.get("output_dir", c.output_dir);

    {
        Reader r = root.child("grammar");
        r.get("symbol_count", c.grammar.symbol_count);
        r.get("ambiguous_per_category", c.grammar.ambiguous_per_category);
        r.get("transition_spread", c.grammar.transition_spread);
        r.get("seed", c.grammar.seed);
        r.finish();
    }
    {
        Reader r = root.child("languages");
        auto& l = c.languages;
        r.get("count", l.count);
        r.get("omega", l.omega);
        r.get("seed", l.seed);
        r.get("experiment_count", l.experiment_count);
        r.get("train_size", l.train_size);
        r.get("valid_size", l.valid_size);
        r.get("pretrain_train_size", l.pretrain_train_size);
        r.get("pretrain_valid_size", l.pretrain_valid_size);
        r.get("sentence_length", l.sentence_length);
        r.get("cls_sentence_length", l.cls_sentence_length);
        r.get("mask_rate", l.mask_rate);
        r.get("paraphrase_rate", l.paraphrase_rate);
        r.finish();
        check(l.count >= 1 && l.count <= corpus::kMaxLanguages, "languages.count out of range");
        check(l.experiment_count >= 1 && l.experiment_count <= l.count,
              "languages.experiment_count must lie in [1, languages.count]");
        check(l.omega >= 0.0 && l.omega <= 1.0, "languages.omega must lie in [0, 1]");
        check(l.train_size > 0 && l.valid_size > 0, "languages split sizes must be positive");
        check(l.pretrain_train_size > 0 && l.pretrain_valid_size > 0, "languages pre-training sizes must be positive");
    }
    {
        Reader r = root.child("model");
        auto& m = c.model;
        std::size_t vocab = 0;
        r.get("vocab_size", vocab);
        r.get("embed_dim", m.embed_dim);
        r.get("layers", m.layers);
        r.get("heads", m.heads);
        r.get("ffn_dim", m.ffn_dim);
        r.get("max_len", m.max_len);
        r.get("prune_biases", m.prune_biases);
        r.get("ln_eps", m.ln_eps);
        r.finish();
        m.vocab_size = corpus::vocab_size(c.grammar.symbol_count, c.languages.omega, c.languages.count);
        check(vocab == 0 || vocab == m.vocab_size,
              "model.vocab_size is derived from grammar and languages (expected " + std::to_string(m.vocab_size) + ")");
        const std::size_t needed = std::max(c.languages.sentence_length, 2 * c.languages.cls_sentence_length + 1);
        check(m.max_len >= needed, "model.max_len is shorter than the longest example");
        try {
            m.validate();
        } catch (const ContractViolation& e) {
            throw ConfigError(std::string("model: ") + e.what());
        }
    }
    {
        Reader r = root.child("train");
        r.get("seeds", c.train.seeds);
        check(c.train.seeds >= 3, "train.seeds must be at least 3 (epsilon is a sample std)");
        read_train(r.child("pretrain"), c.train.pretrain, false);
        for (TaskKind t : corpus::kAllTasks) {
            const std::string key = lower(corpus::task_name(t));
            read_train(r.child(key.c_str()), c.train.tasks[t], true);
        }
        r.finish();
    }
    {
        Reader r = root.child("pruning");
        auto& p = c.pruning;
        r.get("rate_percent", p.rate_percent);
        r.get("sparsities", p.sparsities);
        r.get("per_tensor", p.per_tensor);
        r.get("alternatives", p.alternatives);
        r.get("compare_sparsity", p.compare_sparsity);
        r.get("fisher_samples", p.fisher_samples);
        r.get("fisher_sampled_labels", p.fisher_sampled_labels);
        r.finish();
        check(p.rate_percent > 0.0 && p.rate_percent < 100.0, "pruning.rate_percent must lie in (0, 100)");
        check(!p.sparsities.empty(), "pruning.sparsities must not be empty");
        std::sort(p.sparsities.begin(), p.sparsities.end());
        p.sparsities.erase(std::unique(p.sparsities.begin(), p.sparsities.end()), p.sparsities.end());
        for (double s : p.sparsities) {
            check_sparsity(s, "pruning.sparsities");
            pruning::ImpSchedule sch;
            sch.rate_percent = p.rate_percent;
            sch.target_sparsity = s;
            try {
                sch.validate();
            } catch (const ContractViolation& e) {
                throw ConfigError(std::string("pruning.sparsities: ") + e.what());
            }
        }
        for (const auto& a : p.alternatives)
            check(a == "diff_init" || a == "fisher", "pruning.alternatives: unknown method " + a);
        check_sparsity(p.compare_sparsity, "pruning.compare_sparsity");
        check(std::count(p.sparsities.begin(), p.sparsities.end(), p.compare_sparsity) == 1,
              "pruning.compare_sparsity must be one of pruning.sparsities");
        check(p.fisher_samples > 0, "pruning.fisher_samples must be positive");
    }
    const auto langs = c.experiment_languages();
    auto is_experiment_language = [&](const std::string& l) {
        return l.empty() || std::find(langs.begin(), langs.end(), l) != langs.end();
    };
    {
        Reader r = root.child("transfer");
        auto& t = c.transfer;
        r.get("random_baseline", t.random_baseline);
        r.get("cross_task", t.cross_task);
        r.get("cross_task_language", t.cross_task_language);
        r.get("sweep", t.sweep);
        r.get("sweep_language", t.sweep_language);
        r.get("multilingual", t.multilingual);
        r.get("multilingual_keep_fraction", t.multilingual_keep_fraction);
        r.get("multilingual_sparsity", t.multilingual_sparsity);
        r.finish();
        check(is_experiment_language(t.cross_task_language), "transfer.cross_task_language is not an experiment language");
        check(is_experiment_language(t.sweep_language), "transfer.sweep_language is not an experiment language");
        std::sort(t.sweep.begin(), t.sweep.end());
        t.sweep.erase(std::unique(t.sweep.begin(), t.sweep.end()), t.sweep.end());
        const double top = c.pruning.sparsities.back();
        for (double s : t.sweep) {
            check_sparsity(s, "transfer.sweep");
            check(s <= top + 1e-12, "transfer.sweep must not exceed the largest pruning sparsity");
            const double rounds = s * 100.0 / c.pruning.rate_percent;
            check(std::abs(rounds - std::round(rounds)) < 1e-9,
                  "transfer.sweep levels must be multiples of pruning.rate_percent");
        }
        check(t.multilingual_keep_fraction > 0.0 && t.multilingual_keep_fraction <= 1.0,
              "transfer.multilingual_keep_fraction must lie in (0, 1]");
        check(std::count(c.pruning.sparsities.begin(), c.pruning.sparsities.end(), t.multilingual_sparsity) == 1,
              "transfer.multilingual_sparsity must be one of pruning.sparsities");
    }
    {
        Reader r = root.child("similarity");
        auto& s = c.similarity;
        r.get("pairs", s.pairs);
        r.get("methods", s.methods);
        r.get("svcca_threshold", s.svcca_threshold);
        r.get("retrieval_k", s.retrieval_k);
        r.get("random_control", s.random_control);
        r.finish();
        for (const auto& m : s.methods) check(m == "svcca" || m == "pwcca", "similarity.methods: unknown method " + m);
        check(s.svcca_threshold > 0.0 && s.svcca_threshold <= 1.0, "similarity.svcca_threshold must lie in (0, 1]");
        check(s.pairs > c.model.embed_dim, "similarity.pairs must exceed model.embed_dim");
        check(s.retrieval_k >= 1 && s.retrieval_k <= s.pairs, "similarity.retrieval_k must lie in [1, pairs]");
    }
    root.finish();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    json doc;
    try {
        doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(doc);
}

json config_to_json(const ExperimentConfig& c) {
    json tasks = json::object();
    json train{{"seeds", c.train.seeds}, {"pretrain", train_json(c.train.pretrain, false)}};
    for (const auto& [t, tc] : c.train.tasks) train[lower(corpus::task_name(t))] = train_json(tc, true);
    const auto& l = c.languages;
    const auto& p = c.pruning;
    const auto& t = c.transfer;
    const auto& s = c.similarity;
    return {
        {"seed", c.seed},
        {"output_dir", c.output_dir},
        {"grammar",
         {{"symbol_count", c.grammar.symbol_count},
          {"ambiguous_per_category", c.grammar.ambiguous_per_category},
          {"transition_spread", c.grammar.transition_spread},
          {"seed", c.grammar.seed}}},
        {"languages",
         {{"count", l.count},
          {"omega", l.omega},
          {"seed", l.seed},
          {"experiment_count", l.experiment_count},
          {"train_size", l.train_size},
          {"valid_size", l.valid_size},
          {"pretrain_train_size", l.pretrain_train_size},
          {"pretrain_valid_size", l.pretrain_valid_size},
          {"sentence_length", l.sentence_length},
          {"cls_sentence_length", l.cls_sentence_length},
          {"mask_rate", l.mask_rate},
          {"paraphrase_rate", l.paraphrase_rate}}},
        {"model",
         {{"vocab_size", c.model.vocab_size},
          {"embed_dim", c.model.embed_dim},
          {"layers", c.model.layers},
          {"heads", c.model.heads},
          {"ffn_dim", c.model.ffn_dim},
          {"max_len", c.model.max_len},
          {"prune_biases", c.model.prune_biases},
          {"ln_eps", c.model.ln_eps}}},
        {"train", train},
        {"pruning",
         {{"rate_percent", p.rate_percent},
          {"sparsities", p.sparsities},
          {"per_tensor", p.per_tensor},
          {"alternatives", p.alternatives},
          {"compare_sparsity", p.compare_sparsity},
          {"fisher_samples", p.fisher_samples},
          {"fisher_sampled_labels", p.fisher_sampled_labels}}},
        {"transfer",
         {{"random_baseline", t.random_baseline},
          {"cross_task", t.cross_task},
          {"cross_task_language", t.cross_task_language},
          {"sweep", t.sweep},
          {"sweep_language", t.sweep_language},
          {"multilingual", t.multilingual},
          {"multilingual_keep_fraction", t.multilingual_keep_fraction},
          {"multilingual_sparsity", t.multilingual_sparsity}}},
        {"similarity",
         {{"pairs", s.pairs},
          {"methods", s.methods},
          {"svcca_threshold", s.svcca_threshold},
          {"retrieval_k", s.retrieval_k},
          {"random_control", s.random_control}}},
    };
}

std::string config_digest(const ExperimentConfig& cfg) { return io::sha256_hex(config_to_json(cfg).dump()); }

std::filesystem::path output_root(const ExperimentConfig& cfg) {
    if (const char* env = std::getenv(kOutputRootEnv); env && *env) return env;
    return cfg.output_dir;
}

}  // namespace tickets::pipeline
