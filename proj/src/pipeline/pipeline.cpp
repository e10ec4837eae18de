// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#include "tickets/pipeline/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "tickets/errors.hpp"
#include "tickets/io.hpp"
#include "tickets/masks.hpp"
#include "tickets/model/checkpoint.hpp"
#include "tickets/numerics/rng.hpp"
#include "tickets/pruning.hpp"
#include "tickets/similarity.hpp"
#include "tickets/transfer.hpp"

namespace tickets::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using corpus::TaskKind;
using transfer::RunRecord;

namespace {

// Shortest round-trip decimal form, so CSV bytes are a function of the values alone.
std::string num(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string task_str(TaskKind t) { return corpus::task_name(t); }

std::uint64_t tag(std::string_view s) { return num::hash_tag(s); }

template <typename T>
bool selected(const std::vector<T>& sel, const T& v) {
    return sel.empty() || std::find(sel.begin(), sel.end(), v) != sel.end();
}

bool sparsity_selected(const std::vector<double>& sel, double s) {
    if (sel.empty()) return true;
    return std::any_of(sel.begin(), sel.end(), [&](double x) { return std::abs(x - s) < 1e-9; });
}

// Everything generated from the config alone.
struct Data {
    corpus::AbstractGrammar grammar;
    std::vector<corpus::LanguageSpec> languages;
    corpus::DatasetSplit pretrain;
    std::map<std::pair<TaskKind, std::string>, corpus::DatasetSplit> splits;
    std::map<std::string, std::vector<std::vector<int>>> parallel;  // language -> sentences
};

Data build_data(const ExperimentConfig& cfg, bool with_pretrain) {
    Data d;
    d.grammar = corpus::AbstractGrammar::make(cfg.grammar);
    for (std::size_t i = 0; i < cfg.languages.count; ++i)
        d.languages.push_back(corpus::generate_language(d.grammar, i, cfg.languages.omega, cfg.languages.seed));
    if (with_pretrain)
        d.pretrain = corpus::build_pretraining_mix(
            d.grammar, d.languages, {cfg.languages.pretrain_train_size, cfg.languages.pretrain_valid_size},
            num::derive_seed(cfg.seed, {tag("pretrain-data")}), cfg.task_options(TaskKind::MLM));
    for (TaskKind t : corpus::kAllTasks) {
        // One seed per task across languages, so the splits are parallel.
        const auto seed = num::derive_seed(cfg.seed, {tag("task-data"), static_cast<std::uint64_t>(t)});
        for (std::size_t i = 0; i < cfg.languages.experiment_count; ++i)
            d.splits[{t, d.languages[i].id}] = corpus::build_split(
                d.grammar, d.languages[i], t, {cfg.languages.train_size, cfg.languages.valid_size}, seed,
                cfg.task_options(t));
    }
    num::Rng rng(num::derive_seed(cfg.seed, {tag("parallel")}));
    std::vector<corpus::AbstractSentence> abstract;
    for (std::size_t i = 0; i < cfg.similarity.pairs; ++i)
        abstract.push_back(corpus::sample_abstract_sentence(d.grammar, cfg.languages.sentence_length, rng));
    for (const auto& lang : d.languages)
        for (const auto& a : abstract) d.parallel[lang.id].push_back(corpus::render(a, d.grammar, lang).tokens);
    return d;
}

json language_json(const corpus::LanguageSpec& l, std::size_t symbol_count) {
    json reorder = json::array();
    for (const auto& r : l.reorder)
        reorder.push_back({corpus::category_name(r.first), corpus::category_name(r.second)});
    return {{"id", l.id},
            {"index", l.index},
            {"omega", l.omega},
            {"shared_symbols", l.shared_count(symbol_count)},
            {"lexicon", l.lexicon},
            {"reorder", reorder}};
}

void remove_stray_temporaries(const fs::path& root) {
    if (!fs::exists(root)) return;
    std::vector<fs::path> stray;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file() && e.path().filename().string().find(".tmp.") != std::string::npos)
            stray.push_back(e.path());
    for (const auto& p : stray) fs::remove(p);
}

}  // namespace

// ---------------------------------------------------------------------------

bool Selection::empty() const {
    return tasks.empty() && languages.empty() && sparsities.empty() && methods.empty() && layers.empty() && !k;
}

std::string Selection::tag() const {
    if (empty()) return "";
    std::ostringstream os;
    auto list = [&](const char* key, const auto& v, auto fmt) {
        if (v.empty()) return;
        os << key << '=';
        for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << fmt(v[i]);
        os << ';';
    };
    list("task", tasks, [](TaskKind t) { return task_str(t); });
    list("lang", languages, [](const std::string& s) { return s; });
    list("s", sparsities, [](double s) { return Pipeline::sparsity_tag(s); });
    list("method", methods, [](const std::string& s) { return s; });
    list("layer", layers, [](std::size_t l) { return std::to_string(l); });
    if (k) os << "k=" << *k << ';';
    std::string s = os.str();
    s.pop_back();
    return "[" + s + "]";
}

std::string Pipeline::sparsity_tag(double s) {
    const long pct = std::lround(s * 100.0);
    return (pct < 10 ? "s0" : "s") + std::to_string(pct);
}

std::string Pipeline::mask_path(const std::string& method, TaskKind task, const std::string& language,
                                std::size_t replicate, double sparsity) {
    return "masks/" + method + "/" + task_str(task) + "/" + language + "/r" + std::to_string(replicate) + "/" +
           sparsity_tag(sparsity) + ".mask";
}

std::map<std::string, std::string> output_digests(const RunManifest& m) {
    std::map<std::string, std::string> out;
    for (const auto& [name, rec] : m.stages)
        for (const auto& [path, digest] : rec.artifacts) out[path] = digest;
    return out;
}

// ---------------------------------------------------------------------------

struct Pipeline::Impl {
    // One stage execution: prerequisite checks, skip detection, artifact registration.
    class Stage {
    public:
        Stage(Pipeline& p, std::string name) : p_(p), name_(std::move(name)), start_(Clock::now()) {}

        // Requires an artifact recorded by an earlier command and still intact on disk.
        void need(const std::string& rel, const std::string& producer) {
            const auto digest = p_.manifest_.digest_of(rel);
            const fs::path abs = p_.root_ / rel;
            if (!digest || !fs::exists(abs))
                throw PrerequisiteError("missing " + rel + "; run `tickets " + producer + "` first", producer);
            if (io::sha256_file(abs) != *digest)
                throw PrerequisiteError(rel + " changed since `tickets " + producer + "` wrote it; re-run it",
                                        producer);
            inputs_.push_back(rel + "=" + *digest);
        }

        void note_input(const std::string& s) { inputs_.push_back(s); }

        std::string input_digest() const {
            std::string all = p_.manifest_.config_digest + "|" + name_;
            for (const auto& s : inputs_) all += "|" + s;
            return io::sha256_hex(all);
        }

        bool up_to_date() const {
            const auto it = p_.manifest_.stages.find(name_);
            if (it == p_.manifest_.stages.end() || it->second.input_digest != input_digest()) return false;
            for (const auto& [rel, digest] : it->second.artifacts) {
                const fs::path abs = p_.root_ / rel;
                if (!fs::exists(abs) || io::sha256_file(abs) != digest) return false;
            }
            return true;
        }

        fs::path out(const std::string& rel) {
            outputs_.insert(rel);
            return p_.root_ / rel;
        }

        void text(const std::string& rel, const std::function<void(std::ostream&)>& body) {
            io::atomic_write(out(rel), body);
        }

        void commit() {
            StageRecord r;
            r.input_digest = input_digest();
            for (const auto& rel : outputs_) r.artifacts[rel] = io::sha256_file(p_.root_ / rel);
            r.seconds = std::chrono::duration<double>(Clock::now() - start_).count();
            p_.manifest_.stages[name_] = std::move(r);
            p_.manifest_.save(p_.root_ / "manifest.json");
            p_.say(name_ + ": done in " + num(std::round(p_.manifest_.stages[name_].seconds * 10) / 10) + " s");
        }

        const std::string& name() const { return name_; }

    private:
        using Clock = std::chrono::steady_clock;
        Pipeline& p_;
        std::string name_;
        Clock::time_point start_;
        std::vector<std::string> inputs_;
        std::set<std::string> outputs_;
    };

    static model::ParamSet load_theta0(Pipeline& p) {
        auto ck = model::load_checkpoint(p.root_ / "pretrain/theta0.ckpt");
        if (!(ck.config == p.cfg_.model))
            throw PrerequisiteError("pretrain/theta0.ckpt was built for a different model; re-run `tickets pretrain`",
                                    "pretrain");
        return std::move(ck.params);
    }

    static fs::path cache_path(const Pipeline& p) {
        return p.root_ / "cache" / ("runs-" + p.manifest_.config_digest.substr(0, 16) + ".jsonl");
    }

    struct Bench {
        Data data;
        transfer::RunCache cache;
        transfer::Workbench wb;
    };

    static std::unique_ptr<Bench> bench(Pipeline& p) {
        auto b = std::make_unique<Bench>();
        b->data = build_data(p.cfg_, false);
        auto& wb = b->wb;
        wb.config = p.cfg_.model;
        wb.theta0 = load_theta0(p);
        wb.splits = b->data.splits;
        wb.train = p.cfg_.train.tasks;
        wb.seed = p.cfg_.seed;
        wb.seed_count = p.cfg_.train.seeds;
        wb.jobs = p.jobs_;
        wb.cache = &b->cache;
        if (fs::exists(cache_path(p))) b->cache.load(cache_path(p));
        return b;
    }

    static void save_cache(Pipeline& p, const Bench& b) { b.cache.save(cache_path(p)); }

    static masks::Mask load_mask(Pipeline& p, const std::string& rel, const model::ParamSet& schema) {
        return masks::load_mask(p.root_ / rel, schema);
    }

    static std::vector<std::size_t> replicates(const Pipeline& p) {
        std::vector<std::size_t> r(p.cfg_.train.seeds);
        std::iota(r.begin(), r.end(), std::size_t{0});
        return r;
    }

    static std::vector<double> imp_levels(const Pipeline& p) {
        std::vector<double> levels;
        const auto& pr = p.cfg_.pruning;
        const std::size_t rounds = static_cast<std::size_t>(std::lround(pr.sparsities.back() * 100.0 / pr.rate_percent));
        for (std::size_t k = 1; k <= rounds; ++k) levels.push_back(static_cast<double>(k) * pr.rate_percent / 100.0);
        return levels;
    }

    static pruning::ImpSchedule schedule(const Pipeline& p, double target) {
        pruning::ImpSchedule s;
        s.rate_percent = p.cfg_.pruning.rate_percent;
        s.target_sparsity = target;
        s.per_tensor = p.cfg_.pruning.per_tensor;
        return s;
    }
};

Pipeline::Pipeline(ExperimentConfig cfg, std::size_t jobs, std::ostream* log)
    : cfg_(std::move(cfg)), jobs_(std::max<std::size_t>(1, jobs)), log_(log), root_(output_root(cfg_)) {
    fs::create_directories(root_);
    remove_stray_temporaries(root_);
    manifest_ = RunManifest::load(root_ / "manifest.json");
    const std::string digest = config_digest(cfg_);
    if (!manifest_.config_digest.empty() && manifest_.config_digest != digest)
        throw ConfigError("output directory " + root_.string() +
                          " holds results for a different configuration; choose another output_dir");
    manifest_.config_digest = digest;
    manifest_.version = code_version();
    const fs::path resolved = root_ / "resolved_config.json";
    io::atomic_write(resolved, [&](std::ostream& out) { out << config_to_json(cfg_).dump(2) << '\n'; });
    manifest_.stages["config"].artifacts = {{"resolved_config.json", io::sha256_file(resolved)}};
    manifest_.stages["config"].input_digest = digest;
    manifest_.save(root_ / "manifest.json");
}

void Pipeline::say(const std::string& msg) const {
    if (log_) *log_ << "[tickets] " << msg << std::endl;
}

// ---------------------------------------------------------------------------
// generate

void Pipeline::generate() {
    Impl::Stage st(*this, "generate");
    if (st.up_to_date()) return say("generate: up to date");
    say("generate: building corpora");
    const Data d = build_data(cfg_, true);
    st.text("data/languages.jsonl", [&](std::ostream& out) {
        for (const auto& l : d.languages) out << language_json(l, cfg_.grammar.symbol_count).dump() << '\n';
    });
    st.text("data/pretrain.jsonl", [&](std::ostream& out) { corpus::write_jsonl(d.pretrain, out); });
    for (const auto& [key, split] : d.splits)
        st.text("data/" + task_str(key.first) + "/" + key.second + ".jsonl",
                [&](std::ostream& out) { corpus::write_jsonl(split, out); });
    for (const auto& [lang, sentences] : d.parallel)
        st.text("data/parallel/" + lang + ".jsonl", [&](std::ostream& out) {
            for (std::size_t i = 0; i < sentences.size(); ++i)
                out << json{{"index", i}, {"language", lang}, {"tokens", sentences[i]}}.dump() << '\n';
        });
    st.commit();
}

// ---------------------------------------------------------------------------
// pretrain

void Pipeline::pretrain() {
    Impl::Stage st(*this, "pretrain");
    st.need("data/pretrain.jsonl", "generate");
    if (st.up_to_date()) return say("pretrain: up to date");
    const Data d = build_data(cfg_, true);
    const std::uint64_t init_seed = num::derive_seed(cfg_.seed, {tag("init")});
    model::TrainConfig t = cfg_.train.pretrain;
    t.seed = num::derive_seed(cfg_.seed, {tag("pretrain")});
    t.reinit_head = false;
    say("pretrain: " + std::to_string(d.pretrain.train.size()) + " sentences, " + std::to_string(t.epochs) + " epochs");
    const auto out = model::train(cfg_.model, model::init_params(cfg_.model, init_seed), nullptr, d.pretrain, t);
    model::save_checkpoint({cfg_.model, out.best_params, {{"init", init_seed}, {"pretrain", t.seed}}},
                           st.out("pretrain/theta0.ckpt"));
    st.text("pretrain/history.csv", [&](std::ostream& os) {
        os << "step,train_loss,valid_perplexity\n";
        for (const auto& h : out.history) os << h.step << ',' << num(h.train_loss) << ',' << num(h.valid_metric) << '\n';
    });
    say("pretrain: best valid perplexity " + num(out.best_metric) + " at step " + std::to_string(out.best_step));
    st.commit();
}

// ---------------------------------------------------------------------------
// prune

void Pipeline::prune(const Selection& sel) {
    const auto langs = cfg_.experiment_languages();
    for (TaskKind task : corpus::kAllTasks) {
        if (!selected(sel.tasks, task)) continue;
        Selection sub = sel;
        sub.tasks.clear();
        Impl::Stage st(*this, "prune:" + task_str(task) + sub.tag());
        st.need("pretrain/theta0.ckpt", "pretrain");
        if (st.up_to_date()) {
            say(st.name() + ": up to date");
            continue;
        }
        auto b = Impl::bench(*this);
        const auto& wb = b->wb;
        const auto reps = Impl::replicates(*this);

        if (selected(sel.methods, std::string("imp"))) {
            std::vector<std::pair<std::string, std::size_t>> jobs;
            for (const auto& l : langs)
                if (selected(sel.languages, l))
                    for (auto k : reps) jobs.emplace_back(l, k);
            say(st.name() + ": IMP for " + std::to_string(jobs.size()) + " tickets to " +
                num(cfg_.pruning.sparsities.back()));
            std::vector<pruning::ImpResult> results(jobs.size());
            transfer::parallel_for(jobs.size(), jobs_, [&](std::size_t j) {
                results[j] = transfer::run_imp(wb, task, jobs[j].first, jobs[j].second,
                                               Impl::schedule(*this, cfg_.pruning.sparsities.back()));
            });
            const auto levels = Impl::imp_levels(*this);
            for (std::size_t j = 0; j < jobs.size(); ++j) {
                const auto& [l, k] = jobs[j];
                for (std::size_t r = 0; r < results[j].round_masks.size(); ++r)
                    masks::save_mask(results[j].round_masks[r], st.out(mask_path("imp", task, l, k, levels[r])));
                st.text("masks/imp/" + task_str(task) + "/" + l + "/r" + std::to_string(k) + "/trace.jsonl",
                        [&](std::ostream& out) { results[j].trace.write_jsonl(out); });
            }
        }

        for (const auto& method : cfg_.pruning.alternatives) {
            if (!selected(sel.methods, method)) continue;
            for (double s : cfg_.pruning.sparsities) {
                if (!sparsity_selected(sel.sparsities, s)) continue;
                if (sel.sparsities.empty() && std::abs(s - cfg_.pruning.compare_sparsity) > 1e-9) continue;
                std::vector<std::pair<std::string, std::size_t>> jobs;
                for (const auto& l : langs)
                    if (selected(sel.languages, l))
                        for (auto k : reps) jobs.emplace_back(l, k);
                say(st.name() + ": " + method + " masks at " + num(s));
                std::vector<masks::Mask> out(jobs.size());
                transfer::parallel_for(jobs.size(), jobs_, [&](std::size_t j) {
                    const auto& [l, k] = jobs[j];
                    if (method == "diff_init") {
                        // The fine-tune is the full-model baseline run for this replicate.
                        const auto ft = wb.train_outcome(task, l, nullptr, k);
                        out[j] = pruning::diff_from_init_mask(wb.theta0, ft.best_params, s);
                        out[j].provenance = {"diff_init", task_str(task), {l}, wb.run_seed(task, l, k), 1};
                    } else {
                        pruning::FisherOptions fo;
                        fo.sample_count = std::min(cfg_.pruning.fisher_samples, wb.split(task, l).train.size());
                        fo.seed = num::derive_seed(cfg_.seed, {tag("fisher"), static_cast<std::uint64_t>(task), tag(l), k});
                        fo.sampled_labels = cfg_.pruning.fisher_sampled_labels;
                        fo.reinit_head = wb.train_config(task).reinit_head;
                        fo.head_seed = wb.run_seed(task, l, k);  // same head the retraining run draws
                        out[j] = pruning::fisher_mask(wb.config, wb.theta0, wb.split(task, l), s, fo);
                    }
                });
                for (std::size_t j = 0; j < jobs.size(); ++j)
                    masks::save_mask(out[j], st.out(mask_path(method, task, jobs[j].first, jobs[j].second, s)));
            }
        }
        Impl::save_cache(*this, *b);
        st.commit();
    }
}

// ---------------------------------------------------------------------------
// transfer

namespace {

void write_baselines(std::ostream& out, const std::vector<transfer::FullModelBaseline>& bs) {
    out << "task,language,replicate,best_metric,best_step,mean,std,mean_step\n";
    for (const auto& b : bs)
        for (std::size_t k = 0; k < b.runs.size(); ++k)
            out << task_str(b.task) << ',' << b.language << ',' << k << ',' << num(b.runs[k].best_metric) << ','
                << b.runs[k].best_step << ',' << num(b.mean) << ',' << num(b.std) << ',' << num(b.mean_step) << '\n';
}

void verdict_row(std::ostream& out, TaskKind task, const std::string& lang, double s, const transfer::TicketVerdict& v) {
    out << task_str(task) << ',' << lang << ',' << num(s) << ',' << num(v.subnet_metric) << ',' << num(v.subnet_step)
        << ',' << num(v.baseline_metric) << ',' << num(v.baseline_step) << ',' << num(v.epsilon) << ','
        << num(v.degradation) << ',' << v.within_epsilon << ',' << v.no_later << ',' << v.is_winning << '\n';
}

json verdict_json(const transfer::TicketVerdict& v) {
    return {{"subnet_metric", v.subnet_metric}, {"subnet_step", v.subnet_step},   {"baseline_metric", v.baseline_metric},
            {"baseline_step", v.baseline_step}, {"epsilon", v.epsilon},           {"degradation", v.degradation},
            {"within_epsilon", v.within_epsilon}, {"no_later", v.no_later},       {"winning", v.is_winning}};
}

// Oriented "strictly better".
bool better(model::Orientation o, double a, double b) { return model::improves(o, a, b); }

}  // namespace

void Pipeline::transfer(const Selection& sel) {
    const auto langs = cfg_.experiment_languages();
    const auto reps = Impl::replicates(*this);
    const auto levels = Impl::imp_levels(*this);
    const double cmp = cfg_.pruning.compare_sparsity;

    for (TaskKind task : corpus::kAllTasks) {
        if (!selected(sel.tasks, task)) continue;
        Selection sub;
        sub.sparsities = sel.sparsities;
        Impl::Stage st(*this, "transfer:" + task_str(task) + sub.tag());
        const std::string T = task_str(task);
        st.need("pretrain/theta0.ckpt", "pretrain");
        std::vector<double> sps;
        for (double s : cfg_.pruning.sparsities)
            if (sparsity_selected(sel.sparsities, s)) sps.push_back(s);
        const bool full = sel.sparsities.empty();
        const bool do_pruners = sparsity_selected(sel.sparsities, cmp) && !cfg_.pruning.alternatives.empty();
        for (double s : sps)
            for (const auto& l : langs)
                for (auto k : reps) st.need(mask_path("imp", task, l, k, s), "prune");
        if (do_pruners)
            for (const auto& m : cfg_.pruning.alternatives)
                for (const auto& l : langs)
                    for (auto k : reps) st.need(mask_path(m, task, l, k, cmp), "prune");
        const std::string sweep_lang = cfg_.sweep_language();
        if (full)
            for (double s : cfg_.transfer.sweep)
                for (auto k : reps) st.need(mask_path("imp", task, sweep_lang, k, s), "prune");
        if (st.up_to_date()) {
            say(st.name() + ": up to date");
            continue;
        }
        auto b = Impl::bench(*this);
        auto& wb = b->wb;
        const auto orient = model::orientation_for(task);

        // Baselines: warm every (language, replicate) in parallel, then summarise.
        say(st.name() + ": full-model baselines");
        transfer::parallel_for(langs.size() * reps.size(), jobs_, [&](std::size_t j) {
            wb.run(task, langs[j / reps.size()], nullptr, j % reps.size());
        });
        std::vector<transfer::FullModelBaseline> baselines;
        for (const auto& l : langs) baselines.push_back(transfer::make_baseline(wb, task, l));
        st.text("transfer/" + T + "/baselines.csv", [&](std::ostream& out) { write_baselines(out, baselines); });

        json summary = {{"task", T}, {"orientation", model::orientation_name(orient)}, {"baselines", json::object()}};
        for (const auto& bl : baselines)
            summary["baselines"][bl.language] = {{"mean", bl.mean}, {"std", bl.std}, {"mean_step", bl.mean_step}};

        std::map<double, transfer::TransferMatrix> matrices;
        for (double s : sps) {
            const std::string dir = "transfer/" + T + "/" + sparsity_tag(s) + "/";
            std::vector<std::vector<masks::Mask>> ms(langs.size());
            for (std::size_t i = 0; i < langs.size(); ++i)
                for (auto k : reps) ms[i].push_back(Impl::load_mask(*this, mask_path("imp", task, langs[i], k, s), wb.theta0));
            say(st.name() + ": transfer matrix at " + num(s));
            auto m = transfer::cross_language_transfer(wb, task, s, langs, ms, baselines,
                                                       cfg_.transfer.random_baseline);
            st.text(dir + "matrix.csv", [&](std::ostream& out) {
                out << "task,sparsity,source,target,seed,best_metric,best_step\n";
                auto row = [&](const std::string& src, const std::string& tgt, std::size_t k, const RunRecord& r) {
                    out << T << ',' << num(s) << ',' << src << ',' << tgt << ',' << k << ',' << num(r.best_metric)
                        << ',' << r.best_step << '\n';
                };
                for (std::size_t a = 0; a < langs.size(); ++a)
                    for (std::size_t c = 0; c < langs.size(); ++c)
                        for (auto k : reps) row(langs[a], langs[c], k, m.cells[a][c][k]);
                for (std::size_t c = 0; c < m.random_row.size(); ++c)
                    for (auto k : reps) row("rand", langs[c], k, m.random_row[c][k]);
                for (std::size_t c = 0; c < langs.size(); ++c)
                    for (auto k : reps) row("full", langs[c], k, baselines[c].runs[k]);
            });
            st.text(dir + "matrix.jsonl", [&](std::ostream& out) { transfer::write_transfer_jsonl(m, out); });

            json js = {{"verdicts", json::object()}, {"relative_drop", json::object()}, {"cells", json::array()}};
            std::size_t winning = 0;
            st.text(dir + "verdicts.csv", [&](std::ostream& out) {
                out << "task,language,sparsity,subnet_metric,subnet_step,baseline_metric,baseline_step,epsilon,"
                       "degradation,within_epsilon,no_later,winning\n";
                for (std::size_t i = 0; i < langs.size(); ++i) {
                    const auto v = transfer::verdict(m.cells[i][i], baselines[i]);
                    verdict_row(out, task, langs[i], s, v);
                    js["verdicts"][langs[i]] = verdict_json(v);
                    winning += v.is_winning ? 1 : 0;
                }
            });
            js["winning"] = winning;
            st.text(dir + "relative_drop.csv", [&](std::ostream& out) {
                out << "task,sparsity,source,replicate,relative_drop\n";
                for (std::size_t i = 0; i < langs.size(); ++i) {
                    for (auto k : reps)
                        out << T << ',' << num(s) << ',' << langs[i] << ',' << k << ','
                            << num(transfer::relative_drop(m, i, k)) << '\n';
                    const double mean = transfer::relative_drop(m, i);
                    out << T << ',' << num(s) << ',' << langs[i] << ",mean," << num(mean) << '\n';
                    js["relative_drop"][langs[i]] = mean;
                }
            });
            std::size_t off = 0, beats = 0, success = 0;
            st.text(dir + "cells.csv", [&](std::ostream& out) {
                out << "task,sparsity,source,target,mean,random_mean,beats_random,success,no_later\n";
                for (std::size_t a = 0; a < langs.size(); ++a)
                    for (std::size_t c = 0; c < langs.size(); ++c) {
                        const double mean = m.cell_mean(a, c);
                        const bool has_rand = !m.random_row.empty();
                        const double rnd = has_rand ? m.random_mean(c) : 0.0;
                        const bool br = has_rand && better(orient, mean, rnd);
                        const bool ok = transfer::transfer_succeeds(m, a, c);
                        const bool nl = transfer::transfer_no_later(m, a, c);
                        out << T << ',' << num(s) << ',' << langs[a] << ',' << langs[c] << ',' << num(mean) << ','
                            << (has_rand ? num(rnd) : "") << ',' << br << ',' << ok << ',' << nl << '\n';
                        js["cells"].push_back({{"source", langs[a]}, {"target", langs[c]}, {"mean", mean},
                                               {"random_mean", has_rand ? json(rnd) : json(nullptr)},
                                               {"beats_random", br}, {"success", ok}, {"no_later", nl}});
                        if (a != c) {
                            ++off;
                            beats += br ? 1 : 0;
                            success += ok ? 1 : 0;
                        }
                    }
            });
            js["offdiagonal_cells"] = off;
            js["offdiagonal_beating_random"] = beats;
            js["offdiagonal_successes"] = success;
            summary[sparsity_tag(s)] = js;
            matrices.emplace(s, std::move(m));
        }

        if (do_pruners) {
            say(st.name() + ": alternative pruners at " + num(cmp));
            std::vector<std::string> methods{"imp"};
            for (const auto& m : cfg_.pruning.alternatives) methods.push_back(m);
            // runs[method][lang][k]
            std::vector<std::vector<std::vector<RunRecord>>> runs(
                methods.size(), std::vector<std::vector<RunRecord>>(langs.size(), std::vector<RunRecord>(reps.size())));
            std::vector<std::vector<std::vector<masks::Mask>>> ms(
                methods.size(), std::vector<std::vector<masks::Mask>>(langs.size()));
            for (std::size_t a = 0; a < methods.size(); ++a)
                for (std::size_t i = 0; i < langs.size(); ++i)
                    for (auto k : reps)
                        ms[a][i].push_back(Impl::load_mask(*this, mask_path(methods[a], task, langs[i], k, cmp), wb.theta0));
            const std::size_t per = langs.size() * reps.size();
            transfer::parallel_for(methods.size() * per, jobs_, [&](std::size_t j) {
                const std::size_t a = j / per, i = (j % per) / reps.size(), k = j % reps.size();
                runs[a][i][k] = wb.run(task, langs[i], &ms[a][i][k], k);
            });
            json pj = {{"sparsity", cmp}, {"methods", json::object()}};
            std::vector<double> means(methods.size());
            st.text("transfer/" + T + "/pruners.csv", [&](std::ostream& out) {
                out << "task,method,sparsity,language,replicate,best_metric,best_step\n";
                for (std::size_t a = 0; a < methods.size(); ++a) {
                    double sum = 0.0;
                    for (std::size_t i = 0; i < langs.size(); ++i)
                        for (auto k : reps) {
                            const auto& r = runs[a][i][k];
                            sum += r.best_metric;
                            out << T << ',' << methods[a] << ',' << num(cmp) << ',' << langs[i] << ',' << k << ','
                                << num(r.best_metric) << ',' << r.best_step << '\n';
                        }
                    means[a] = sum / static_cast<double>(per);
                    json per_lang = json::object();
                    for (std::size_t i = 0; i < langs.size(); ++i) per_lang[langs[i]] = transfer::mean_metric(runs[a][i]);
                    pj["methods"][methods[a]] = {{"mean", means[a]}, {"per_language", per_lang}};
                }
            });
            // IMP is non-worse when no alternative is strictly better on the seed mean.
            bool imp_ok = true;
            for (std::size_t a = 1; a < methods.size(); ++a)
                if (better(orient, means[a], means[0])) imp_ok = false;
            std::vector<std::size_t> order(methods.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t x, std::size_t y) { return better(orient, means[x], means[y]); });
            pj["ranking"] = json::array();
            for (auto a : order) pj["ranking"].push_back(methods[a]);
            pj["imp_non_worse"] = imp_ok;
            summary["pruners"] = pj;
        }

        if (full && !cfg_.transfer.sweep.empty()) {
            say(st.name() + ": sparsity sweep on " + sweep_lang);
            const auto& bl = baselines[std::find(langs.begin(), langs.end(), sweep_lang) - langs.begin()];
            const auto& sw = cfg_.transfer.sweep;
            std::vector<std::vector<masks::Mask>> ms(sw.size());
            for (std::size_t i = 0; i < sw.size(); ++i)
                for (auto k : reps) ms[i].push_back(Impl::load_mask(*this, mask_path("imp", task, sweep_lang, k, sw[i]), wb.theta0));
            std::vector<std::vector<RunRecord>> runs(sw.size(), std::vector<RunRecord>(reps.size()));
            transfer::parallel_for(sw.size() * reps.size(), jobs_, [&](std::size_t j) {
                const std::size_t i = j / reps.size(), k = j % reps.size();
                runs[i][k] = wb.run(task, sweep_lang, &ms[i][k], k);
            });
            json sj = json::array();
            st.text("transfer/" + T + "/sweep.csv", [&](std::ostream& out) {
                out << "task,language,sparsity,subnet_metric,subnet_step,baseline_metric,baseline_step,epsilon,"
                       "degradation,within_epsilon,no_later,winning\n";
                verdict_row(out, task, sweep_lang, 0.0, transfer::verdict(bl.runs, bl));
                for (std::size_t i = 0; i < sw.size(); ++i) {
                    const auto v = transfer::verdict(runs[i], bl);
                    verdict_row(out, task, sweep_lang, sw[i], v);
                    auto vj = verdict_json(v);
                    vj["sparsity"] = sw[i];
                    sj.push_back(vj);
                }
            });
            summary["sweep"] = {{"language", sweep_lang}, {"points", sj}};
        }

        const double ms_s = cfg_.transfer.multilingual_sparsity;
        if (cfg_.transfer.multilingual && sparsity_selected(sel.sparsities, ms_s)) {
            say(st.name() + ": multilingual ticket");
            const auto mt = transfer::multilingual_ticket(wb, task, langs, cfg_.transfer.multilingual_keep_fraction,
                                                          Impl::schedule(*this, ms_s), &matrices.at(ms_s));
            masks::save_mask(mt.mask, st.out("transfer/" + T + "/multilingual.mask"));
            json mj = {{"sparsity", ms_s}, {"wins_over_all_sources", mt.wins_over_all_sources}, {"targets", json::object()}};
            st.text("transfer/" + T + "/multilingual.csv", [&](std::ostream& out) {
                out << "task,sparsity,target,replicate,best_metric,best_step,beats_all_sources\n";
                for (std::size_t t = 0; t < mt.targets.size(); ++t) {
                    for (std::size_t k = 0; k < mt.row[t].size(); ++k)
                        out << T << ',' << num(ms_s) << ',' << mt.targets[t] << ',' << k << ','
                            << num(mt.row[t][k].best_metric) << ',' << mt.row[t][k].best_step << ','
                            << mt.beats_all[t] << '\n';
                    mj["targets"][mt.targets[t]] = {{"mean", transfer::mean_metric(mt.row[t])},
                                                    {"beats_all_sources", static_cast<bool>(mt.beats_all[t])}};
                }
            });
            summary["multilingual"] = mj;
        }

        st.text("transfer/" + T + "/summary" + sub.tag() + ".json",
                [&](std::ostream& out) { out << summary.dump(2) << '\n'; });
        Impl::save_cache(*this, *b);
        st.commit();
    }

    // Cross-task grid on one language.
    const bool all_tasks = sel.tasks.empty() || sel.tasks.size() == std::size(corpus::kAllTasks);
    if (cfg_.transfer.cross_task && all_tasks && sparsity_selected(sel.sparsities, cmp)) {
        Impl::Stage st(*this, "transfer:cross_task");
        const std::string lang = cfg_.cross_task_language();
        st.need("pretrain/theta0.ckpt", "pretrain");
        for (TaskKind t : corpus::kAllTasks)
            for (auto k : reps) st.need(mask_path("imp", t, lang, k, cmp), "prune");
        if (st.up_to_date()) return say(st.name() + ": up to date");
        auto b = Impl::bench(*this);
        const std::vector<TaskKind> tasks(std::begin(corpus::kAllTasks), std::end(corpus::kAllTasks));
        std::vector<std::vector<masks::Mask>> ms(tasks.size());
        for (std::size_t i = 0; i < tasks.size(); ++i)
            for (auto k : reps) ms[i].push_back(Impl::load_mask(*this, mask_path("imp", tasks[i], lang, k, cmp), b->wb.theta0));
        say(st.name() + ": grid on " + lang);
        const auto g = transfer::cross_task_transfer(b->wb, lang, cmp, tasks, ms);
        json cj = json::array();
        st.text("transfer/cross_task.csv", [&](std::ostream& out) {
            out << "language,sparsity,source_task,target_task,replicate,best_metric,best_step,degradation,"
                   "relative_degradation\n";
            for (std::size_t a = 0; a < tasks.size(); ++a)
                for (std::size_t c = 0; c < tasks.size(); ++c) {
                    for (auto k : reps)
                        out << lang << ',' << num(cmp) << ',' << task_str(tasks[a]) << ',' << task_str(tasks[c]) << ','
                            << k << ',' << num(g.cells[a][c][k].best_metric) << ',' << g.cells[a][c][k].best_step << ','
                            << num(g.degradation[a][c]) << ',' << num(g.relative_degradation[a][c]) << '\n';
                    cj.push_back({{"source", task_str(tasks[a])}, {"target", task_str(tasks[c])},
                                  {"degradation", g.degradation[a][c]},
                                  {"relative_degradation", g.relative_degradation[a][c]}});
                }
        });
        st.text("transfer/cross_task.json", [&](std::ostream& out) {
            out << json{{"language", lang}, {"sparsity", cmp}, {"cells", cj}}.dump(2) << '\n';
        });
        Impl::save_cache(*this, *b);
        st.commit();
    }
}

// ---------------------------------------------------------------------------
// overlap

void Pipeline::overlap(const Selection& sel) {
    const auto langs = cfg_.experiment_languages();
    const auto reps = Impl::replicates(*this);
    Impl::Stage st(*this, "overlap" + sel.tag());
    std::vector<TaskKind> tasks;
    for (TaskKind t : corpus::kAllTasks)
        if (selected(sel.tasks, t)) tasks.push_back(t);
    std::vector<double> sps;
    for (double s : cfg_.pruning.sparsities)
        if (sparsity_selected(sel.sparsities, s)) sps.push_back(s);
    for (TaskKind t : tasks)
        for (double s : sps)
            for (const auto& l : langs)
                for (auto k : reps) st.need(mask_path("imp", t, l, k, s), "prune");
    if (st.up_to_date()) return say(st.name() + ": up to date");

    const auto schema = model::init_params(cfg_.model, 0);
    auto name = [](TaskKind t, const std::string& l, std::size_t k) { return task_str(t) + "/" + l + "/r" + std::to_string(k); };
    json summary = json::array();
    std::ostringstream sum_csv;
    sum_csv << "kind,task,sparsity,mean_jaccard,pairs\n";
    for (double s : sps) {
        std::map<std::pair<TaskKind, std::string>, std::vector<masks::Mask>> ms;
        for (TaskKind t : tasks)
            for (const auto& l : langs)
                for (auto k : reps) ms[{t, l}].push_back(Impl::load_mask(*this, mask_path("imp", t, l, k, s), schema));
        for (TaskKind t : tasks) {
            std::vector<masks::OverlapReport> reports;
            double within = 0.0, cross = 0.0;
            std::size_t nw = 0, nc = 0;
            for (std::size_t a = 0; a < langs.size(); ++a)
                for (std::size_t b = a; b < langs.size(); ++b)
                    for (auto ka : reps)
                        for (auto kb : reps) {
                            if (a == b && kb <= ka) continue;
                            auto r = masks::jaccard(ms[{t, langs[a]}][ka], ms[{t, langs[b]}][kb]);
                            r.first = name(t, langs[a], ka);
                            r.second = name(t, langs[b], kb);
                            if (a == b) within += r.global_jaccard, ++nw;
                            else cross += r.global_jaccard, ++nc;
                            reports.push_back(std::move(r));
                        }
            st.text("overlap/" + task_str(t) + "_" + sparsity_tag(s) + ".csv",
                    [&](std::ostream& out) { masks::write_overlap_csv(reports, out); });
            within /= static_cast<double>(std::max<std::size_t>(nw, 1));
            cross /= static_cast<double>(std::max<std::size_t>(nc, 1));
            // Expected Jaccard of two independent random masks at this sparsity.
            const double keep = 1.0 - s;
            const double random = keep * keep / (2.0 * keep - keep * keep);
            sum_csv << "within_language," << task_str(t) << ',' << num(s) << ',' << num(within) << ',' << nw << '\n';
            sum_csv << "cross_language," << task_str(t) << ',' << num(s) << ',' << num(cross) << ',' << nc << '\n';
            sum_csv << "random_expected," << task_str(t) << ',' << num(s) << ',' << num(random) << ",0\n";
            summary.push_back({{"task", task_str(t)}, {"sparsity", s}, {"within_language", within},
                               {"cross_language", cross}, {"random_expected", random},
                               {"within_exceeds_cross", within > cross}});
        }
        // Same language and replicate, different tasks.
        if (tasks.size() > 1) {
            double sum = 0.0;
            std::size_t n = 0;
            for (std::size_t a = 0; a < tasks.size(); ++a)
                for (std::size_t b = a + 1; b < tasks.size(); ++b)
                    for (const auto& l : langs)
                        for (auto k : reps) sum += masks::jaccard(ms[{tasks[a], l}][k], ms[{tasks[b], l}][k]).global_jaccard, ++n;
            sum_csv << "cross_task,all," << num(s) << ',' << num(sum / static_cast<double>(n)) << ',' << n << '\n';
        }
    }
    st.text("overlap/summary" + sel.tag() + ".csv", [&](std::ostream& out) { out << sum_csv.str(); });
    st.text("overlap/summary" + sel.tag() + ".json", [&](std::ostream& out) { out << summary.dump(2) << '\n'; });
    st.commit();
}

// ---------------------------------------------------------------------------
// similarity and retrieval

void Pipeline::similarity(const Selection& sel) {
    Impl::Stage st(*this, "similarity" + sel.tag());
    st.need("pretrain/theta0.ckpt", "pretrain");
    if (st.up_to_date()) return say(st.name() + ": up to date");
    const Data d = build_data(cfg_, false);
    std::vector<std::pair<std::string, model::ParamSet>> models{{"pretrained", Impl::load_theta0(*this)}};
    if (cfg_.similarity.random_control)
        models.emplace_back("random", model::init_params(cfg_.model, num::derive_seed(cfg_.seed, {tag("init")})));
    std::vector<sim::Method> methods;
    for (const auto& m : cfg_.similarity.methods) {
        const auto mm = sim::parse_method(m);
        if (selected(sel.methods, m)) methods.push_back(mm);
    }
    const auto all = cfg_.all_languages();
    const std::string pivot = all.front();
    struct Job {
        std::size_t model;
        std::string other;
        sim::Method method;
    };
    std::vector<Job> jobs;
    for (std::size_t m = 0; m < models.size(); ++m)
        for (const auto& l : all)
            if (selected(sel.languages, l))
                for (auto meth : methods) jobs.push_back({m, l, meth});
    say(st.name() + ": " + std::to_string(jobs.size()) + " profiles");
    std::vector<std::vector<sim::ProfilePoint>> out(jobs.size());
    transfer::parallel_for(jobs.size(), jobs_, [&](std::size_t j) {
        const auto& jb = jobs[j];
        out[j] = sim::layer_profile(cfg_.model, models[jb.model].second, nullptr, d.parallel.at(pivot),
                                    d.parallel.at(jb.other), jb.method, cfg_.similarity.svcca_threshold);
    });
    json summary = json::array();
    st.text("similarity/profile" + sel.tag() + ".csv", [&](std::ostream& os) {
        os << "model,first,second,layer,method,value\n";
        for (std::size_t j = 0; j < jobs.size(); ++j) {
            json vals = json::array();
            for (const auto& p : out[j]) {
                if (!selected(sel.layers, p.layer)) continue;
                os << models[jobs[j].model].first << ',' << pivot << ',' << jobs[j].other << ',' << p.layer << ','
                   << sim::method_name(p.method) << ',' << num(p.value) << '\n';
                vals.push_back(p.value);
            }
            summary.push_back({{"model", models[jobs[j].model].first}, {"first", pivot}, {"second", jobs[j].other},
                               {"method", sim::method_name(jobs[j].method)}, {"values", vals}});
        }
    });
    st.text("similarity/summary" + sel.tag() + ".json", [&](std::ostream& os) { os << summary.dump(2) << '\n'; });
    st.commit();
}

void Pipeline::retrieve(const Selection& sel) {
    Impl::Stage st(*this, "retrieve" + sel.tag());
    st.need("pretrain/theta0.ckpt", "pretrain");
    if (st.up_to_date()) return say(st.name() + ": up to date");
    const Data d = build_data(cfg_, false);
    std::vector<std::pair<std::string, model::ParamSet>> models{{"pretrained", Impl::load_theta0(*this)}};
    if (cfg_.similarity.random_control)
        models.emplace_back("random", model::init_params(cfg_.model, num::derive_seed(cfg_.seed, {tag("init")})));
    const auto all = cfg_.all_languages();
    const std::string pivot = all.front();
    const std::size_t k = sel.k.value_or(cfg_.similarity.retrieval_k);
    if (k < 1 || k > cfg_.similarity.pairs) throw ConfigError("retrieval k must lie in [1, similarity.pairs]");

    // Pooled representations per (model, language), all layers.
    std::map<std::pair<std::size_t, std::string>, std::vector<num::Matrix>> reps;
    std::vector<std::pair<std::size_t, std::string>> keys;
    for (std::size_t m = 0; m < models.size(); ++m)
        for (const auto& l : all)
            if (l == pivot || selected(sel.languages, l)) keys.emplace_back(m, l);
    std::vector<std::vector<num::Matrix>> pooled(keys.size());
    transfer::parallel_for(keys.size(), jobs_, [&](std::size_t j) {
        pooled[j] = model::pooled_representations(cfg_.model, models[keys[j].first].second, nullptr,
                                                  d.parallel.at(keys[j].second));
    });
    for (std::size_t j = 0; j < keys.size(); ++j) reps[keys[j]] = std::move(pooled[j]);

    json summary = json::array();
    st.text("retrieval/retrieval" + sel.tag() + ".csv", [&](std::ostream& os) {
        os << "model,source,target,layer,k,top1,top5\n";
        for (std::size_t m = 0; m < models.size(); ++m)
            for (const auto& l : all) {
                if (l == pivot || !selected(sel.languages, l)) continue;
                const auto& a = reps.at({m, pivot});
                const auto& b = reps.at({m, l});
                for (std::size_t layer = 0; layer < a.size(); ++layer) {
                    if (!selected(sel.layers, layer)) continue;
                    const auto r = sim::margin_retrieve(a[layer], b[layer], {k, layer});
                    os << models[m].first << ',' << pivot << ',' << l << ',' << layer << ',' << k << ',' << num(r.top1)
                       << ',' << num(r.top5) << '\n';
                    summary.push_back({{"model", models[m].first}, {"source", pivot}, {"target", l}, {"layer", layer},
                                       {"k", k}, {"top1", r.top1}, {"top5", r.top5}});
                }
            }
    });
    st.text("retrieval/summary" + sel.tag() + ".json", [&](std::ostream& os) { os << summary.dump(2) << '\n'; });
    st.commit();
}

// ---------------------------------------------------------------------------
// report

namespace {

json read_json(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

}  // namespace

void Pipeline::report() {
    Impl::Stage st(*this, "report");
    std::vector<std::string> parts;
    for (TaskKind t : corpus::kAllTasks) parts.push_back("transfer/" + task_str(t) + "/summary.json");
    for (const auto& p : parts) st.need(p, "transfer");
    if (cfg_.transfer.cross_task) st.need("transfer/cross_task.json", "transfer");
    st.need("overlap/summary.json", "overlap");
    st.need("similarity/summary.json", "similarity");
    st.need("retrieval/summary.json", "retrieve");
    if (st.up_to_date()) return say("report: up to date");

    json rep = {{"config_digest", manifest_.config_digest}, {"version", manifest_.version}, {"tasks", json::object()}};
    std::ostringstream long_csv;
    long_csv << "section,task,sparsity,key,value\n";
    auto row = [&](const std::string& section, const std::string& task, const std::string& s, const std::string& key,
                   const std::string& value) {
        long_csv << section << ',' << task << ',' << s << ',' << key << ',' << value << '\n';
    };
    const auto langs = cfg_.experiment_languages();
    std::size_t imp_non_worse = 0, winning_cells = 0, total_cells = 0;
    bool all_beat_random = true, density_trend = true;
    const double lo = cfg_.pruning.sparsities.front(), hi = cfg_.pruning.sparsities.back();
    for (TaskKind t : corpus::kAllTasks) {
        const std::string T = task_str(t);
        const json s = read_json(root_ / ("transfer/" + T + "/summary.json"));
        json tj = {{"orientation", s.at("orientation")}, {"baselines", s.at("baselines")}};
        for (double sp : cfg_.pruning.sparsities) {
            const std::string tg = sparsity_tag(sp);
            const json& m = s.at(tg);
            tj[tg] = {{"winning", m.at("winning")},
                      {"offdiagonal_cells", m.at("offdiagonal_cells")},
                      {"offdiagonal_beating_random", m.at("offdiagonal_beating_random")},
                      {"offdiagonal_successes", m.at("offdiagonal_successes")},
                      {"relative_drop", m.at("relative_drop")}};
            row("tickets", T, num(sp), "winning_languages", std::to_string(m.at("winning").get<std::size_t>()));
            row("transfer", T, num(sp), "offdiagonal_beating_random",
                std::to_string(m.at("offdiagonal_beating_random").get<std::size_t>()));
            for (const auto& [l, v] : m.at("relative_drop").items()) row("relative_drop", T, num(sp), l, num(v.get<double>()));
            for (const auto& [l, v] : m.at("verdicts").items())
                row("degradation", T, num(sp), l, num(v.at("degradation").get<double>()));
        }
        const json& m0 = s.at(sparsity_tag(cfg_.pruning.compare_sparsity));
        winning_cells += m0.at("winning").get<std::size_t>();
        total_cells += langs.size();
        if (m0.at("offdiagonal_beating_random") != m0.at("offdiagonal_cells")) all_beat_random = false;
        if (lo != hi) {
            std::vector<std::string> trend_fail;
            for (const auto& l : langs) {
                const double a = s.at(sparsity_tag(lo)).at("relative_drop").at(l).get<double>();
                const double b = s.at(sparsity_tag(hi)).at("relative_drop").at(l).get<double>();
                if (!(b < a)) trend_fail.push_back(l);
            }
            tj["density_trend_holds"] = trend_fail.empty();
            tj["density_trend_failures"] = trend_fail;
            if (!trend_fail.empty()) density_trend = false;
        }
        if (s.contains("pruners")) {
            tj["pruners"] = s.at("pruners");
            if (s.at("pruners").at("imp_non_worse").get<bool>()) ++imp_non_worse;
            for (const auto& [m, v] : s.at("pruners").at("methods").items())
                row("pruners", T, num(cfg_.pruning.compare_sparsity), m, num(v.at("mean").get<double>()));
        }
        if (s.contains("sweep")) {
            tj["sweep"] = s.at("sweep");
            for (const auto& p : s.at("sweep").at("points"))
                row("sweep", T, num(p.at("sparsity").get<double>()), "subnet_metric", num(p.at("subnet_metric").get<double>()));
        }
        if (s.contains("multilingual")) tj["multilingual"] = s.at("multilingual");
        rep["tasks"][T] = tj;
    }
    const json ov = read_json(root_ / "overlap/summary.json");
    rep["overlap"] = ov;
    for (const auto& o : ov) {
        row("overlap", o.at("task"), num(o.at("sparsity").get<double>()), "within_language",
            num(o.at("within_language").get<double>()));
        row("overlap", o.at("task"), num(o.at("sparsity").get<double>()), "cross_language",
            num(o.at("cross_language").get<double>()));
    }
    if (cfg_.transfer.cross_task) rep["cross_task"] = read_json(root_ / "transfer/cross_task.json");
    rep["similarity"] = read_json(root_ / "similarity/summary.json");
    rep["retrieval"] = read_json(root_ / "retrieval/summary.json");
    rep["headline"] = {{"winning_cells", winning_cells},
                       {"ticket_cells", total_cells},
                       {"transfer_beats_random_everywhere", all_beat_random},
                       {"density_trend_holds", density_trend},
                       {"imp_non_worse_tasks", imp_non_worse}};
    st.text("report.json", [&](std::ostream& out) { out << rep.dump(2) << '\n'; });
    st.text("report_long.csv", [&](std::ostream& out) { out << long_csv.str(); });
    st.commit();
}

void Pipeline::run_all() {
    generate();
    pretrain();
    prune();
    transfer();
    overlap();
    similarity();
    retrieve();
    report();
}

}  // namespace tickets::pipeline
