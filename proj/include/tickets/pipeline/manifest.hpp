// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Record of what each pipeline stage produced: artifact paths (relative to the output
// root) with SHA-256 digests, the digest of the stage's inputs, and wall-clock time.

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

namespace tickets::pipeline {

struct StageRecord {
    std::string input_digest;
    std::map<std::string, std::string> artifacts;  // relative path -> sha256
    double seconds = 0.0;
};

struct RunManifest {
    std::string config_digest;
    std::string version;
    std::map<std::string, StageRecord> stages;

    // Stage that lists `relative_path`, if any.
    std::optional<std::string> producer_of(const std::string& relative_path) const;
    std::optional<std::string> digest_of(const std::string& relative_path) const;

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);

    void save(const std::filesystem::path& path) const;
    // Empty manifest when the file does not exist.
    static RunManifest load(const std::filesystem::path& path);
};

// Version tag recorded in manifests.
const char* code_version();

}  // namespace tickets::pipeline
