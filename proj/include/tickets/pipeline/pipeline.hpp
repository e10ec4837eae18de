// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Config-driven experiment stages. Each stage checks its prerequisites against the
// manifest, skips itself when its inputs are unchanged and its outputs intact, writes
// every artifact through a temporary file, and records digests in the manifest.
//
// Layout under the output root (<S> = s50 etc., <k> = replicate):
//   resolved_config.json, manifest.json, report.json, report_long.csv
//   data/        languages.jsonl, pretrain.jsonl, <TASK>/<lang>.jsonl, parallel/<lang>.jsonl
//   pretrain/    theta0.ckpt, history.csv
//   masks/       <method>/<TASK>/<lang>/r<k>/<S>.mask, imp/<TASK>/<lang>/r<k>/trace.jsonl
//   transfer/    <TASK>/baselines.csv, <TASK>/<S>/{matrix.csv, matrix.jsonl, verdicts.csv,
//                relative_drop.csv, cells.csv}, <TASK>/{pruners.csv, sweep.csv,
//                multilingual.csv, multilingual.mask, summary.json}, cross_task.{csv,json}
//   overlap/     <TASK>_<S>.csv, summary.csv, summary.json
//   similarity/  profile.csv, summary.json
//   retrieval/   retrieval.csv, summary.json
//   cache/       memoised training outcomes (not an output)

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tickets/corpus.hpp"
#include "tickets/pipeline/config.hpp"
#include "tickets/pipeline/manifest.hpp"

namespace tickets::pipeline {

// Restricts a command to part of the configured grid; empty fields mean "all".
struct Selection {
    std::vector<corpus::TaskKind> tasks;
    std::vector<std::string> languages;
    std::vector<double> sparsities;
    std::vector<std::string> methods;  // prune: imp / diff_init / fisher
    std::vector<std::size_t> layers;   // similarity / retrieve
    std::optional<std::size_t> k;      // retrieve

    bool empty() const;
    std::string tag() const;  // stable suffix for manifest stage names
};

class Pipeline {
public:
    Pipeline(ExperimentConfig cfg, std::size_t jobs, std::ostream* log = nullptr);

    void generate();
    void pretrain();
    void prune(const Selection& sel = {});
    void transfer(const Selection& sel = {});
    void overlap(const Selection& sel = {});
    void similarity(const Selection& sel = {});
    void retrieve(const Selection& sel = {});
    void report();
    void run_all();

    const ExperimentConfig& config() const { return cfg_; }
    const RunManifest& manifest() const { return manifest_; }
    const std::filesystem::path& root() const { return root_; }

    // Path relative to the output root for standard artifacts.
    static std::string mask_path(const std::string& method, corpus::TaskKind task, const std::string& language,
                                 std::size_t replicate, double sparsity);
    static std::string sparsity_tag(double s);  // 0.5 -> "s50"

private:
    void say(const std::string& msg) const;

    struct Impl;
    ExperimentConfig cfg_;
    std::size_t jobs_;
    std::ostream* log_;
    std::filesystem::path root_;
    RunManifest manifest_;

    friend struct Impl;
};

// Deterministic stage outputs (everything except the manifest) with their digests.
std::map<std::string, std::string> output_digests(const RunManifest& m);

}  // namespace tickets::pipeline
