// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#include "tickets/pipeline/pipeline.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "tickets/errors.hpp"
#include "tickets/pipeline/config.hpp"

namespace tickets::pipeline {
namespace {

namespace fs = std::filesystem;

nlohmann::json tiny_doc(const fs::path& out) {
    auto doc = nlohmann::json::parse(R"({
      "languages": {"count": 3, "experiment_count": 2, "train_size": 48, "valid_size": 24,
                    "pretrain_train_size": 48, "pretrain_valid_size": 12},
      "model": {"embed_dim": 8, "ffn_dim": 16},
      "train": {"pretrain": {"epochs": 1}, "mlm": {"epochs": 1}, "tag": {"epochs": 1}, "cls": {"epochs": 1}},
      "pruning": {"sparsities": [0.2, 0.4], "rate_percent": 20, "compare_sparsity": 0.2, "fisher_samples": 16},
      "transfer": {"sweep": [0.2, 0.4], "multilingual_sparsity": 0.2},
      "similarity": {"pairs": 30}
    })");
    doc["output_dir"] = out.string();
    return doc;
}

class PipelineTest : public ::testing::Test {
protected:
    fs::path dir = fs::temp_directory_path() / "tickets_pipeline_test";
    void SetUp() override {
        unsetenv(kOutputRootEnv);
        fs::remove_all(dir);
    }
    void TearDown() override { fs::remove_all(dir); }
};

TEST(Config, DefaultsRoundTrip) {
    const auto cfg = default_config();
    const auto back = config_from_json(config_to_json(cfg));
    EXPECT_EQ(config_digest(back), config_digest(cfg));
    EXPECT_EQ(config_to_json(back), config_to_json(cfg));
}

TEST(Config, UnknownKeyIsNamed) {
    auto doc = config_to_json(default_config());
    doc["pruning"]["rate_pct"] = 10;
    try {
        config_from_json(doc);
        FAIL() << "accepted an unknown key";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("rate_pct"), std::string::npos) << e.what();
    }
}

TEST(Config, SparsitiesMustFollowTheSchedule) {
    auto doc = config_to_json(default_config());
    doc["pruning"]["sparsities"] = {0.55};
    EXPECT_THROW(config_from_json(doc), ConfigError);
    doc = config_to_json(default_config());
    doc["train"]["tag"]["epochs"] = "three";
    EXPECT_THROW(config_from_json(doc), ConfigError);
}

TEST(Config, OutputRootHonoursEnvironment) {
    auto cfg = default_config();
    cfg.output_dir = "a/b";
    unsetenv(kOutputRootEnv);
    EXPECT_EQ(output_root(cfg), fs::path("a/b"));
    setenv(kOutputRootEnv, "/tmp/elsewhere", 1);
    EXPECT_EQ(output_root(cfg), fs::path("/tmp/elsewhere"));
    unsetenv(kOutputRootEnv);
}

TEST(Layout, MaskPaths) {
    EXPECT_EQ(Pipeline::sparsity_tag(0.5), "s50");
    EXPECT_EQ(Pipeline::sparsity_tag(0.05), "s05");
    EXPECT_EQ(Pipeline::mask_path("imp", corpus::TaskKind::TAG, "L2", 1, 0.8), "masks/imp/TAG/L2/r1/s80.mask");
}

TEST_F(PipelineTest, StagesNeedTheirInputs) {
    Pipeline p(config_from_json(tiny_doc(dir)), 1);
    try {
        p.transfer();
        FAIL() << "transfer ran without masks";
    } catch (const PrerequisiteError& e) {
        EXPECT_NE(std::string(e.what()).find("run `tickets"), std::string::npos) << e.what();
    }
    EXPECT_THROW(p.pretrain(), PrerequisiteError);
}

TEST_F(PipelineTest, RerunIsANoOpAndJobsDoNotChangeOutputs) {
    const auto cfg = config_from_json(tiny_doc(dir / "a"));
    std::map<std::string, std::string> first;
    {
        Pipeline p(cfg, 1);
        p.run_all();
        first = output_digests(p.manifest());
        EXPECT_TRUE(fs::exists(dir / "a" / "report.json"));
    }
    {
        std::ostringstream log;
        Pipeline p(cfg, 1, &log);
        p.run_all();
        EXPECT_EQ(output_digests(p.manifest()), first);
        EXPECT_EQ(log.str().find("done in"), std::string::npos) << log.str();
        EXPECT_NE(log.str().find("up to date"), std::string::npos);
    }
    {
        // Same config, different root, three workers.
        setenv(kOutputRootEnv, (dir / "b").c_str(), 1);
        Pipeline p(cfg, 3);
        p.run_all();
        unsetenv(kOutputRootEnv);
        EXPECT_EQ(p.root(), dir / "b");
        EXPECT_EQ(output_digests(p.manifest()), first);
    }
}

TEST_F(PipelineTest, ChangedConfigInSameRootIsRejected) {
    auto cfg = config_from_json(tiny_doc(dir));
    { Pipeline p(cfg, 1); }
    cfg.seed = 2;
    EXPECT_THROW(Pipeline(std::move(cfg), 1), ConfigError);
}

}  // namespace
}  // namespace tickets::pipeline
