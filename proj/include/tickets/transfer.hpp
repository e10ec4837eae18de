// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Ticket verdicts against multi-seed full-model baselines, and transfer experiments:
// a mask found for one (task, language) retrained from the pre-trained weights on
// another language or task.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tickets/corpus.hpp"
#include "tickets/masks.hpp"
#include "tickets/model/param_set.hpp"
#include "tickets/model/trainer.hpp"
#include "tickets/model/transformer.hpp"
#include "tickets/pruning.hpp"

namespace tickets::transfer {

using corpus::TaskKind;
using model::Orientation;

// Outcome of one training run, without the weights.
struct RunRecord {
    double best_metric = 0.0;
    std::size_t best_step = 0;
    std::size_t total_steps = 0;
    friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

RunRecord record_of(const model::TrainOutcome& o);

// Memoises training runs by (task, target language, mask digest, seed). Safe to share
// between worker threads; persisted sorted by key so the file is deterministic.
class RunCache {
public:
    using Producer = std::function<RunRecord()>;

    static std::string key(TaskKind task, const std::string& target, const masks::Mask* mask, std::uint64_t seed);

    RunRecord get_or_run(const std::string& key, const Producer& produce);
    std::size_t size() const;
    std::size_t hits() const;

    void save(const std::filesystem::path& path) const;
    void load(const std::filesystem::path& path);

private:
    mutable std::mutex mu_;
    std::map<std::string, RunRecord> runs_;
    std::size_t hits_ = 0;
};

// Runs jobs 0..n-1 on up to `workers` threads. Each job writes only its own result slot,
// so the outcome does not depend on scheduling. The first exception is rethrown.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job);

struct FullModelBaseline {
    TaskKind task = TaskKind::MLM;
    std::string language;
    std::vector<RunRecord> runs;  // one per seed
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation over seeds
    double mean_step = 0.0;
    Orientation orientation = Orientation::HigherBetter;
};

// Mean and sample std (n - 1) of the best metrics; requires at least three runs.
FullModelBaseline summarize_baseline(TaskKind task, const std::string& language, std::vector<RunRecord> runs);

struct TicketVerdict {
    double subnet_metric = 0.0;  // a'
    double subnet_step = 0.0;    // i'
    double baseline_metric = 0.0;  // a
    double baseline_step = 0.0;    // i
    double epsilon = 0.0;
    // a - a' for higher-better metrics, a' - a for lower-better; positive is worse.
    double degradation = 0.0;
    bool within_epsilon = false;
    bool no_later = false;  // i' <= i
    bool is_winning = false;
};

TicketVerdict verdict(double subnet_metric, double subnet_step, const FullModelBaseline& baseline);
// Seed-mean of the subnet runs against the baseline.
TicketVerdict verdict(std::span<const RunRecord> subnet_runs, const FullModelBaseline& baseline);

double mean_metric(std::span<const RunRecord> runs);
double mean_step(std::span<const RunRecord> runs);

// Everything a transfer experiment trains against: the pre-trained weights, one split
// per (task, language), per-task training settings and the shared run cache.
struct Workbench {
    model::ModelConfig config;
    model::ParamSet theta0;
    std::map<std::pair<TaskKind, std::string>, corpus::DatasetSplit> splits;
    std::map<TaskKind, model::TrainConfig> train;
    std::uint64_t seed = 0;
    std::size_t seed_count = 3;
    std::size_t jobs = 1;
    RunCache* cache = nullptr;

    const corpus::DatasetSplit& split(TaskKind task, const std::string& language) const;
    const model::TrainConfig& train_config(TaskKind task) const;

    // Training seed of replicate `index` on (task, target). It does not depend on the
    // mask, so a ticket's own outcome and the diagonal transfer cell coincide.
    std::uint64_t run_seed(TaskKind task, const std::string& target, std::size_t index) const;
    // Seed of the IMP pipeline for replicate `index` of a (task, source) ticket.
    std::uint64_t imp_seed(TaskKind task, const std::string& source, std::size_t index) const;

    // Trains f(x; mask * theta0) on the target split (mask may be null).
    RunRecord run(TaskKind task, const std::string& target, const masks::Mask* mask, std::size_t index) const;
    // The same run with its weights; the record is stored in the cache as well.
    model::TrainOutcome train_outcome(TaskKind task, const std::string& target, const masks::Mask* mask,
                                      std::size_t index) const;
};

FullModelBaseline make_baseline(const Workbench& wb, TaskKind task, const std::string& language);

struct TransferMatrix {
    TaskKind task = TaskKind::MLM;
    double sparsity = 0.0;
    std::vector<std::string> languages;
    // cells[s][t][seed]: mask of source s (replicate seed) retrained on target t.
    std::vector<std::vector<std::vector<RunRecord>>> cells;
    std::vector<std::vector<RunRecord>> random_row;  // [t][seed], random mask at the same sparsity
    std::vector<FullModelBaseline> full_row;         // [t]
    Orientation orientation = Orientation::HigherBetter;

    double cell_mean(std::size_t s, std::size_t t) const;
    double random_mean(std::size_t t) const;
    std::size_t index_of(const std::string& language) const;
};

// masks[s][seed] is replicate `seed` of source language s's ticket.
TransferMatrix cross_language_transfer(const Workbench& wb, TaskKind task, double sparsity,
                                       const std::vector<std::string>& languages,
                                       const std::vector<std::vector<masks::Mask>>& masks,
                                       const std::vector<FullModelBaseline>& baselines, bool random_baseline = true);

// Mean over targets t != s of (a(s,t) - a(t,t)) / |a(t,t)|, computed in higher-better
// orientation (lower-better metrics are negated first).
double relative_drop(const TransferMatrix& m, std::size_t source, std::size_t seed);
double relative_drop(const TransferMatrix& m, std::size_t source);  // averaged over seeds
double relative_drop(std::span<const double> row, std::span<const double> diagonal, std::size_t source,
                     Orientation orientation);

// A cell transfers successfully when its seed-mean is within one baseline std of the
// target's own ticket (diagonal), in the baseline-favouring orientation.
bool transfer_succeeds(const TransferMatrix& m, std::size_t s, std::size_t t);
// i' <= i against the target's full-model baseline, reported separately.
bool transfer_no_later(const TransferMatrix& m, std::size_t s, std::size_t t);

struct CrossTaskGrid {
    std::string language;
    double sparsity = 0.0;
    std::vector<TaskKind> tasks;
    // cells[s][t][seed]: mask of task s retrained on task t.
    std::vector<std::vector<std::vector<RunRecord>>> cells;
    // degradation[s][t] vs task t's own ticket, oriented so positive is worse (native units).
    std::vector<std::vector<double>> degradation;
    // The same divided by |a(t,t)|.
    std::vector<std::vector<double>> relative_degradation;
};

CrossTaskGrid cross_task_transfer(const Workbench& wb, const std::string& language, double sparsity,
                                  const std::vector<TaskKind>& tasks,
                                  const std::vector<std::vector<masks::Mask>>& masks);

struct SweepPoint {
    double sparsity = 0.0;
    std::vector<RunRecord> runs;
    TicketVerdict verdict;
    std::uint64_t mask_digest = 0;  // replicate 0
};

// IMP up to the largest sparsity once per replicate, reading intermediate levels off the
// nested round masks. Sparsity 0 is the full model. `prior[k]`, when given, is an
// earlier IMP run of replicate k with the same seeds and is extended instead of redone.
std::vector<SweepPoint> sparsity_sweep(const Workbench& wb, TaskKind task, const std::string& language,
                                       const std::vector<double>& sparsities, const pruning::ImpSchedule& schedule,
                                       const FullModelBaseline& baseline,
                                       const std::vector<pruning::ImpResult>* prior = nullptr);

// IMP for replicate `index` of the (task, source) ticket with the workbench's seeds.
pruning::ImpResult run_imp(const Workbench& wb, TaskKind task, const std::string& source, std::size_t index,
                           pruning::ImpSchedule schedule, const pruning::ImpResult* resume = nullptr);

struct MultilingualTicket {
    masks::Mask mask;
    std::vector<std::string> targets;
    std::vector<std::vector<RunRecord>> row;  // [t][seed]
    // Targets where the combined ticket's seed-mean beats every single-source cell.
    std::size_t wins_over_all_sources = 0;
    std::vector<bool> beats_all;
};

// IMP on the first keep_fraction of each language's split, then retrained per target.
MultilingualTicket multilingual_ticket(const Workbench& wb, TaskKind task, const std::vector<std::string>& languages,
                                       double keep_fraction, const pruning::ImpSchedule& schedule,
                                       const TransferMatrix* single_sources = nullptr);

// Long-format exports.
void write_transfer_csv(const TransferMatrix& m, std::ostream& out, bool header = true);
void write_transfer_jsonl(const TransferMatrix& m, std::ostream& out);
void write_verdict_csv_header(std::ostream& out);
void write_verdict_csv_row(std::ostream& out, TaskKind task, const std::string& language, double sparsity,
                           const TicketVerdict& v);

}  // namespace tickets::transfer
