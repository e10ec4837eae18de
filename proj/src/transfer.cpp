// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#include "tickets/transfer.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "tickets/errors.hpp"
#include "tickets/io.hpp"
#include "tickets/numerics/rng.hpp"

namespace tickets::transfer {

RunRecord record_of(const model::TrainOutcome& o) { return {o.best_metric, o.best_step, o.total_steps}; }

// ---------------------------------------------------------------------------
// Run cache

std::string RunCache::key(TaskKind task, const std::string& target, const masks::Mask* mask, std::uint64_t seed) {
    std::ostringstream k;
    k << corpus::task_name(task) << '|' << target << '|';
    if (mask) k << std::hex << std::setw(16) << std::setfill('0') << mask->content_digest();
    else k << "full";
    k << '|' << std::dec << seed;
    return k.str();
}

RunRecord RunCache::get_or_run(const std::string& key, const Producer& produce) {
    {
        std::lock_guard lock(mu_);
        if (auto it = runs_.find(key); it != runs_.end()) {
            ++hits_;
            return it->second;
        }
    }
    RunRecord r = produce();
    std::lock_guard lock(mu_);
    return runs_.emplace(key, r).first->second;
}

std::size_t RunCache::size() const {
    std::lock_guard lock(mu_);
    return runs_.size();
}

std::size_t RunCache::hits() const {
    std::lock_guard lock(mu_);
    return hits_;
}

void RunCache::save(const std::filesystem::path& path) const {
    std::lock_guard lock(mu_);
    io::atomic_write(path, [&](std::ostream& out) {
        for (const auto& [k, r] : runs_) {
            nlohmann::json j = {{"key", k}, {"best_metric", r.best_metric}, {"best_step", r.best_step},
                                {"total_steps", r.total_steps}};
            out << j.dump() << '\n';
        }
    });
}

void RunCache::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("run cache " + path.string() + ": cannot open");
    std::lock_guard lock(mu_);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            runs_[j.at("key").get<std::string>()] = {j.at("best_metric").get<double>(),
                                                    j.at("best_step").get<std::size_t>(),
                                                    j.at("total_steps").get<std::size_t>()};
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("run cache " + path.string() + ": " + e.what());
        }
    }
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job) {
    if (n == 0) return;
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::size_t failed_index = n;
    std::exception_ptr failure;
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                job(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (i < failed_index) {
                    failed_index = i;
                    failure = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Baselines and verdicts

double mean_metric(std::span<const RunRecord> runs) {
    require(!runs.empty(), "mean_metric: no runs");
    double s = 0.0;
    for (const auto& r : runs) s += r.best_metric;
    return s / static_cast<double>(runs.size());
}

double mean_step(std::span<const RunRecord> runs) {
    require(!runs.empty(), "mean_step: no runs");
    double s = 0.0;
    for (const auto& r : runs) s += static_cast<double>(r.best_step);
    return s / static_cast<double>(runs.size());
}

FullModelBaseline summarize_baseline(TaskKind task, const std::string& language, std::vector<RunRecord> runs) {
    require(runs.size() >= 3, "baseline: at least three seeds are required");
    FullModelBaseline b;
    b.task = task;
    b.language = language;
    b.orientation = model::orientation_for(task);
    b.mean = mean_metric(runs);
    b.mean_step = mean_step(runs);
    double ss = 0.0;
    for (const auto& r : runs) ss += (r.best_metric - b.mean) * (r.best_metric - b.mean);
    b.std = std::sqrt(ss / static_cast<double>(runs.size() - 1));
    b.runs = std::move(runs);
    return b;
}

TicketVerdict verdict(double subnet_metric, double subnet_step, const FullModelBaseline& baseline) {
    TicketVerdict v;
    v.subnet_metric = subnet_metric;
    v.subnet_step = subnet_step;
    v.baseline_metric = baseline.mean;
    v.baseline_step = baseline.mean_step;
    v.epsilon = baseline.std;
    v.degradation = baseline.orientation == Orientation::HigherBetter ? baseline.mean - subnet_metric
                                                                      : subnet_metric - baseline.mean;
    v.within_epsilon = v.degradation <= v.epsilon;
    v.no_later = subnet_step <= baseline.mean_step;
    v.is_winning = v.within_epsilon && v.no_later;
    return v;
}

TicketVerdict verdict(std::span<const RunRecord> subnet_runs, const FullModelBaseline& baseline) {
    return verdict(mean_metric(subnet_runs), mean_step(subnet_runs), baseline);
}

// ---------------------------------------------------------------------------
// Workbench

const corpus::DatasetSplit& Workbench::split(TaskKind task, const std::string& language) const {
    auto it = splits.find({task, language});
    require(it != splits.end(), std::string("workbench: no split for ") + corpus::task_name(task) + "/" + language);
    return it->second;
}

const model::TrainConfig& Workbench::train_config(TaskKind task) const {
    auto it = train.find(task);
    require(it != train.end(), std::string("workbench: no training settings for ") + corpus::task_name(task));
    return it->second;
}

std::uint64_t Workbench::run_seed(TaskKind task, const std::string& target, std::size_t index) const {
    return num::derive_seed(seed, {num::hash_tag("run"), static_cast<std::uint64_t>(task), num::hash_tag(target), index});
}

std::uint64_t Workbench::imp_seed(TaskKind task, const std::string& source, std::size_t index) const {
    return num::derive_seed(seed, {num::hash_tag("imp"), static_cast<std::uint64_t>(task), num::hash_tag(source), index});
}

model::TrainOutcome Workbench::train_outcome(TaskKind task, const std::string& target, const masks::Mask* mask,
                                            std::size_t index) const {
    model::TrainConfig tcfg = train_config(task);
    tcfg.seed = run_seed(task, target, index);
    try {
        auto out = model::train(config, theta0, mask, split(task, target), tcfg);
        if (cache) cache->get_or_run(RunCache::key(task, target, mask, tcfg.seed), [&] { return record_of(out); });
        return out;
    } catch (const TrainingFailure& e) {
        throw TrainingFailure(std::string("run ") + corpus::task_name(task) + "/" + target + " seed #" +
                                  std::to_string(index) + ": " + e.what(),
                              e.step());
    }
}

RunRecord Workbench::run(TaskKind task, const std::string& target, const masks::Mask* mask, std::size_t index) const {
    auto produce = [&] { return record_of(train_outcome(task, target, mask, index)); };
    if (!cache) return produce();
    return cache->get_or_run(RunCache::key(task, target, mask, run_seed(task, target, index)), produce);
}

FullModelBaseline make_baseline(const Workbench& wb, TaskKind task, const std::string& language) {
    std::vector<RunRecord> runs(wb.seed_count);
    parallel_for(wb.seed_count, wb.jobs, [&](std::size_t k) { runs[k] = wb.run(task, language, nullptr, k); });
    return summarize_baseline(task, language, std::move(runs));
}

// ---------------------------------------------------------------------------
// Transfer matrices

double TransferMatrix::cell_mean(std::size_t s, std::size_t t) const { return mean_metric(cells.at(s).at(t)); }

double TransferMatrix::random_mean(std::size_t t) const { return mean_metric(random_row.at(t)); }

std::size_t TransferMatrix::index_of(const std::string& language) const {
    for (std::size_t i = 0; i < languages.size(); ++i)
        if (languages[i] == language) return i;
    throw ContractViolation("transfer matrix: unknown language " + language);
}

TransferMatrix cross_language_transfer(const Workbench& wb, TaskKind task, double sparsity,
                                       const std::vector<std::string>& languages,
                                       const std::vector<std::vector<masks::Mask>>& masks,
                                       const std::vector<FullModelBaseline>& baselines, bool random_baseline) {
    const std::size_t n = languages.size();
    const std::size_t seeds = wb.seed_count;
    require(masks.size() == n, "cross_language_transfer: one mask set per language required");
    require(baselines.size() == n, "cross_language_transfer: one baseline per language required");
    for (const auto& per_lang : masks) {
        require(per_lang.size() == seeds, "cross_language_transfer: one mask per seed required");
        for (const auto& m : per_lang) {
            m.require_matches(wb.theta0);
            require(m.zeros() == masks::zeros_for(sparsity, m.total()),
                    "cross_language_transfer: masks must share the requested sparsity");
        }
    }
    TransferMatrix tm;
    tm.task = task;
    tm.sparsity = sparsity;
    tm.languages = languages;
    tm.orientation = model::orientation_for(task);
    tm.full_row = baselines;
    tm.cells.assign(n, std::vector<std::vector<RunRecord>>(n, std::vector<RunRecord>(seeds)));
    tm.random_row.assign(random_baseline ? n : 0, std::vector<RunRecord>(seeds));

    std::vector<masks::Mask> random_masks;
    if (random_baseline) {
        for (std::size_t k = 0; k < seeds; ++k)
            random_masks.push_back(masks::random_mask(
                wb.theta0, sparsity,
                num::derive_seed(wb.seed, {num::hash_tag("random"), static_cast<std::uint64_t>(task), k})));
    }
    const std::size_t grid = n * n * seeds;
    const std::size_t total = grid + (random_baseline ? n * seeds : 0);
    parallel_for(total, wb.jobs, [&](std::size_t job) {
        if (job < grid) {
            const std::size_t s = job / (n * seeds);
            const std::size_t t = (job / seeds) % n;
            const std::size_t k = job % seeds;
            tm.cells[s][t][k] = wb.run(task, languages[t], &masks[s][k], k);
        } else {
            const std::size_t t = (job - grid) / seeds;
            const std::size_t k = (job - grid) % seeds;
            tm.random_row[t][k] = wb.run(task, languages[t], &random_masks[k], k);
        }
    });
    return tm;
}

double relative_drop(std::span<const double> row, std::span<const double> diagonal, std::size_t source,
                     Orientation orientation) {
    require(row.size() == diagonal.size(), "relative_drop: row and diagonal differ in length");
    require(row.size() >= 2, "relative_drop: at least two languages are required");
    require(source < row.size(), "relative_drop: source out of range");
    const double sign = orientation == Orientation::HigherBetter ? 1.0 : -1.0;
    double sum = 0.0;
    for (std::size_t t = 0; t < row.size(); ++t) {
        if (t == source) continue;
        const double a_st = sign * row[t];
        const double a_tt = sign * diagonal[t];
        require(a_tt != 0.0, "relative_drop: zero diagonal entry");
        sum += (a_st - a_tt) / std::abs(a_tt);
    }
    return sum / static_cast<double>(row.size() - 1);
}

double relative_drop(const TransferMatrix& m, std::size_t source, std::size_t seed) {
    const std::size_t n = m.languages.size();
    std::vector<double> row(n), diag(n);
    for (std::size_t t = 0; t < n; ++t) {
        row[t] = m.cells.at(source).at(t).at(seed).best_metric;
        diag[t] = m.cells.at(t).at(t).at(seed).best_metric;
    }
    return relative_drop(row, diag, source, m.orientation);
}

double relative_drop(const TransferMatrix& m, std::size_t source) {
    require(!m.cells.empty() && !m.cells[0].empty() && !m.cells[0][0].empty(), "relative_drop: empty matrix");
    const std::size_t seeds = m.cells[0][0].size();
    double s = 0.0;
    for (std::size_t k = 0; k < seeds; ++k) s += relative_drop(m, source, k);
    return s / static_cast<double>(seeds);
}

bool transfer_succeeds(const TransferMatrix& m, std::size_t s, std::size_t t) {
    const double own = m.cell_mean(t, t);
    const double got = m.cell_mean(s, t);
    const double degradation = m.orientation == Orientation::HigherBetter ? own - got : got - own;
    return degradation <= m.full_row.at(t).std;
}

bool transfer_no_later(const TransferMatrix& m, std::size_t s, std::size_t t) {
    return mean_step(m.cells.at(s).at(t)) <= m.full_row.at(t).mean_step;
}

// ---------------------------------------------------------------------------
// Cross-task grid

CrossTaskGrid cross_task_transfer(const Workbench& wb, const std::string& language, double sparsity,
                                  const std::vector<TaskKind>& tasks,
                                  const std::vector<std::vector<masks::Mask>>& masks) {
    const std::size_t n = tasks.size();
    const std::size_t seeds = wb.seed_count;
    require(masks.size() == n, "cross_task_transfer: one mask set per task required");
    for (const auto& per_task : masks) {
        require(per_task.size() == seeds, "cross_task_transfer: one mask per seed required");
        for (const auto& m : per_task) m.require_matches(wb.theta0);
    }
    CrossTaskGrid g;
    g.language = language;
    g.sparsity = sparsity;
    g.tasks = tasks;
    g.cells.assign(n, std::vector<std::vector<RunRecord>>(n, std::vector<RunRecord>(seeds)));
    parallel_for(n * n * seeds, wb.jobs, [&](std::size_t job) {
        const std::size_t s = job / (n * seeds);
        const std::size_t t = (job / seeds) % n;
        const std::size_t k = job % seeds;
        g.cells[s][t][k] = wb.run(tasks[t], language, &masks[s][k], k);
    });
    g.degradation.assign(n, std::vector<double>(n, 0.0));
    g.relative_degradation.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t t = 0; t < n; ++t) {
            const double own = mean_metric(g.cells[t][t]);
            const double got = mean_metric(g.cells[s][t]);
            const double d = model::orientation_for(tasks[t]) == Orientation::HigherBetter ? own - got : got - own;
            g.degradation[s][t] = d;
            g.relative_degradation[s][t] = own == 0.0 ? 0.0 : d / std::abs(own);
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Sparsity sweep and multilingual tickets

std::vector<SweepPoint> sparsity_sweep(const Workbench& wb, TaskKind task, const std::string& language,
                                       const std::vector<double>& sparsities, const pruning::ImpSchedule& schedule,
                                       const FullModelBaseline& baseline,
                                       const std::vector<pruning::ImpResult>* prior) {
    require(!prior || prior->size() == wb.seed_count, "sparsity_sweep: one prior IMP run per seed required");
    double top = 0.0;
    for (double s : sparsities) {
        require(s >= 0.0 && s < 1.0, "sparsity_sweep: sparsities must lie in [0, 1)");
        const double r = 100.0 * s / schedule.rate_percent;
        require(std::abs(r - std::round(r)) < 1e-9, "sparsity_sweep: sparsities must be multiples of the rate");
        top = std::max(top, s);
    }
    std::vector<pruning::ImpResult> imps(wb.seed_count);
    if (top > 0.0) {
        parallel_for(wb.seed_count, wb.jobs, [&](std::size_t k) {
            pruning::ImpSchedule sch = schedule;
            sch.target_sparsity = top;
            imps[k] = run_imp(wb, task, language, k, sch, prior ? &(*prior)[k] : nullptr);
        });
    }
    std::vector<SweepPoint> out;
    for (double s : sparsities) {
        SweepPoint p;
        p.sparsity = s;
        p.runs.resize(wb.seed_count);
        const auto round = static_cast<std::size_t>(std::llround(100.0 * s / schedule.rate_percent));
        parallel_for(wb.seed_count, wb.jobs, [&](std::size_t k) {
            const masks::Mask* m = round == 0 ? nullptr : &imps[k].round_masks.at(round - 1);
            p.runs[k] = wb.run(task, language, m, k);
        });
        if (round > 0) p.mask_digest = imps[0].round_masks.at(round - 1).content_digest();
        p.verdict = verdict(p.runs, baseline);
        out.push_back(std::move(p));
    }
    return out;
}

pruning::ImpResult run_imp(const Workbench& wb, TaskKind task, const std::string& source, std::size_t index,
                           pruning::ImpSchedule schedule, const pruning::ImpResult* resume) {
    schedule.train = wb.train_config(task);
    schedule.train.seed = wb.imp_seed(task, source, index);
    return pruning::imp(wb.config, wb.theta0, wb.split(task, source), schedule, resume);
}

MultilingualTicket multilingual_ticket(const Workbench& wb, TaskKind task, const std::vector<std::string>& languages,
                                       double keep_fraction, const pruning::ImpSchedule& schedule,
                                       const TransferMatrix* single_sources) {
    std::vector<corpus::DatasetSplit> parts;
    for (const auto& l : languages) parts.push_back(wb.split(task, l));
    const corpus::DatasetSplit combined = corpus::build_combined_task_split(parts, keep_fraction);
    pruning::ImpSchedule sch = schedule;
    sch.train = wb.train_config(task);
    sch.train.seed = wb.imp_seed(task, combined.language, 0);
    MultilingualTicket mt;
    mt.mask = pruning::imp(wb.config, wb.theta0, combined, sch).mask;
    mt.targets = languages;
    mt.row.assign(languages.size(), std::vector<RunRecord>(wb.seed_count));
    parallel_for(languages.size() * wb.seed_count, wb.jobs, [&](std::size_t job) {
        const std::size_t t = job / wb.seed_count;
        const std::size_t k = job % wb.seed_count;
        mt.row[t][k] = wb.run(task, languages[t], &mt.mask, k);
    });
    if (single_sources) {
        const Orientation o = model::orientation_for(task);
        mt.beats_all.assign(languages.size(), true);
        for (std::size_t t = 0; t < languages.size(); ++t) {
            const std::size_t tt = single_sources->index_of(languages[t]);
            const double mine = mean_metric(mt.row[t]);
            for (std::size_t s = 0; s < single_sources->languages.size(); ++s)
                if (!model::improves(o, mine, single_sources->cell_mean(s, tt))) mt.beats_all[t] = false;
            mt.wins_over_all_sources += mt.beats_all[t] ? 1 : 0;
        }
    }
    return mt;
}

// ---------------------------------------------------------------------------
// Exports

namespace {

void csv_row(std::ostream& out, const TransferMatrix& m, const std::string& source, const std::string& target,
             std::size_t seed, const RunRecord& r) {
    out << corpus::task_name(m.task) << ',' << m.sparsity << ',' << source << ',' << target << ',' << seed << ','
        << std::setprecision(17) << r.best_metric << std::setprecision(6) << ',' << r.best_step << '\n';
}

}  // namespace

void write_transfer_csv(const TransferMatrix& m, std::ostream& out, bool header) {
    if (header) out << "task,sparsity,source,target,seed,best_metric,best_step\n";
    const std::size_t n = m.languages.size();
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t t = 0; t < n; ++t)
            for (std::size_t k = 0; k < m.cells[s][t].size(); ++k)
                csv_row(out, m, m.languages[s], m.languages[t], k, m.cells[s][t][k]);
    for (std::size_t t = 0; t < m.random_row.size(); ++t)
        for (std::size_t k = 0; k < m.random_row[t].size(); ++k)
            csv_row(out, m, "rand", m.languages[t], k, m.random_row[t][k]);
    for (std::size_t t = 0; t < m.full_row.size(); ++t)
        for (std::size_t k = 0; k < m.full_row[t].runs.size(); ++k)
            csv_row(out, m, "full", m.languages[t], k, m.full_row[t].runs[k]);
}

void write_transfer_jsonl(const TransferMatrix& m, std::ostream& out) {
    const std::size_t n = m.languages.size();
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t t = 0; t < n; ++t) {
            nlohmann::json j = {{"task", corpus::task_name(m.task)},
                                {"sparsity", m.sparsity},
                                {"source", m.languages[s]},
                                {"target", m.languages[t]},
                                {"seed_means", m.cell_mean(s, t)},
                                {"seed_metrics", nlohmann::json::array()},
                                {"success", transfer_succeeds(m, s, t)},
                                {"no_later", transfer_no_later(m, s, t)}};
            for (const auto& r : m.cells[s][t]) j["seed_metrics"].push_back(r.best_metric);
            if (!m.random_row.empty()) j["random_mean"] = m.random_mean(t);
            out << j.dump() << '\n';
        }
    }
}

void write_verdict_csv_header(std::ostream& out) {
    out << "task,language,sparsity,subnet_metric,subnet_step,baseline_metric,baseline_step,epsilon,degradation,"
           "within_epsilon,no_later,winning\n";
}

void write_verdict_csv_row(std::ostream& out, TaskKind task, const std::string& language, double sparsity,
                           const TicketVerdict& v) {
    out << corpus::task_name(task) << ',' << language << ',' << sparsity << ',' << std::setprecision(17)
        << v.subnet_metric << ',' << v.subnet_step << ',' << v.baseline_metric << ',' << v.baseline_step << ','
        << v.epsilon << ',' << v.degradation << std::setprecision(6) << ',' << v.within_epsilon << ','
        << v.no_later << ',' << v.is_winning << '\n';
}

}  // namespace tickets::transfer
