// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end for the experiment pipeline.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 missing prerequisite,
// 4 numerical or training failure, 5 unreadable artifact, 1 anything else.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tickets/errors.hpp"
#include "tickets/pipeline/config.hpp"
#include "tickets/pipeline/pipeline.hpp"

namespace {

using namespace tickets;

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kPrerequisite = 3, kNumerical = 4, kArtifact = 5 };

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 1;
    bool quiet = false;
    std::vector<std::string> tasks, languages, methods;
    std::vector<double> sparsities;
    std::vector<std::size_t> layers;
    std::optional<std::size_t> k;
};

pipeline::ExperimentConfig resolve(const Options& o) {
    auto cfg = o.config_path.empty() ? pipeline::default_config() : pipeline::load_config(o.config_path);
    if (o.seed) cfg.seed = *o.seed;
    return cfg;
}

pipeline::Selection selection(const Options& o) {
    pipeline::Selection s;
    for (const auto& t : o.tasks) {
        try {
            s.tasks.push_back(corpus::parse_task(t));
        } catch (const ContractViolation&) {
            throw ConfigError("unknown task " + t + " (expected MLM, TAG or CLS)");
        }
    }
    s.languages = o.languages;
    s.sparsities = o.sparsities;
    s.methods = o.methods;
    s.layers = o.layers;
    s.k = o.k;
    return s;
}

int run(const std::string& command, const Options& o) {
    const auto cfg = resolve(o);
    if (command == "config") {
        std::cout << pipeline::config_to_json(cfg).dump(2) << '\n';
        return kOk;
    }
    pipeline::Pipeline p(cfg, o.jobs, o.quiet ? nullptr : &std::clog);
    const auto sel = selection(o);
    if (command == "generate") p.generate();
    else if (command == "pretrain") p.pretrain();
    else if (command == "prune") p.prune(sel);
    else if (command == "transfer") p.transfer(sel);
    else if (command == "overlap") p.overlap(sel);
    else if (command == "similarity") p.similarity(sel);
    else if (command == "retrieve") p.retrieve(sel);
    else if (command == "report") p.report();
    else if (command == "run") p.run_all();
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Winning-ticket experiments on synthetic multilingual corpora"};
    app.require_subcommand(1);
    Options o;
    std::uint64_t seed = 0;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "experiment config (JSON); defaults when omitted")
            ->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "override the global seed");
        sub->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
        sub->add_flag("--quiet", o.quiet, "no progress output");
    };
    auto filters = [&](CLI::App* sub, bool lang, bool sparsity, bool method) {
        sub->add_option("--task", o.tasks, "restrict to tasks (MLM, TAG, CLS)");
        if (lang) sub->add_option("--language", o.languages, "restrict to languages (L0, L1, ...)");
        if (sparsity) sub->add_option("--sparsity", o.sparsities, "restrict to sparsities");
        if (method) sub->add_option("--method", o.methods, "restrict to methods");
    };

    struct Cmd {
        const char* name;
        const char* help;
    };
    const Cmd cmds[] = {
        {"config", "print the resolved configuration"},
        {"generate", "write the synthetic corpora"},
        {"pretrain", "joint multilingual MLM pre-training"},
        {"prune", "find masks: IMP tickets and the alternative pruners"},
        {"transfer", "baselines, ticket verdicts and transfer matrices"},
        {"overlap", "Jaccard overlap between masks"},
        {"similarity", "layer-wise SVCCA/PWCCA profiles across languages"},
        {"retrieve", "margin-based parallel sentence retrieval"},
        {"report", "consolidated report"},
        {"run", "every stage in order"},
    };
    for (const auto& c : cmds) {
        auto* sub = app.add_subcommand(c.name, c.help);
        common(sub);
        const std::string n = c.name;
        if (n == "prune") filters(sub, true, true, true);
        if (n == "transfer") filters(sub, false, true, false);
        if (n == "overlap") filters(sub, false, true, false);
        if (n == "similarity") {
            sub->add_option("--language", o.languages, "languages compared with L0");
            sub->add_option("--method", o.methods, "svcca and/or pwcca");
            sub->add_option("--layer", o.layers, "layers to export");
        }
        if (n == "retrieve") {
            sub->add_option("--language", o.languages, "target languages (source is L0)");
            sub->add_option("--layer", o.layers, "layers");
            sub->add_option("--k", o.k, "neighbourhood size")->check(CLI::PositiveNumber);
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }
    for (auto* sub : app.get_subcommands()) {
        if (sub->count("--seed")) o.seed = seed;
        try {
            return run(sub->get_name(), o);
        } catch (const ConfigError& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return kConfig;
        } catch (const PrerequisiteError& e) {
            std::cerr << "missing prerequisite: " << e.what() << '\n';
            return kPrerequisite;
        } catch (const NumericalFailure& e) {
            std::cerr << "numerical failure: " << e.what() << '\n';
            return kNumerical;
        } catch (const TrainingFailure& e) {
            std::cerr << "training failure: " << e.what() << '\n';
            return kNumerical;
        } catch (const ParseError& e) {
            std::cerr << "unreadable artifact: " << e.what() << '\n';
            return kArtifact;
        } catch (const IncompatibleSchema& e) {
            std::cerr << "incompatible artifact: " << e.what() << '\n';
            return kArtifact;
        } catch (const ContractViolation& e) {
            std::cerr << "invalid request: " << e.what() << '\n';
            return kConfig;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return kOther;
        }
    }
    return kOk;
}
