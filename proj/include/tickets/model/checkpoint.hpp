// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "tickets/model/param_set.hpp"
#include "tickets/model/transformer.hpp"

namespace tickets::model {

struct Checkpoint {
    ModelConfig config;
    ParamSet params;
    // Seeds that produced the weights, e.g. {"init": ..., "pretrain": ...}.
    std::map<std::string, std::uint64_t> seeds;

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

nlohmann::json config_to_json(const ModelConfig& c);
ModelConfig config_from_json(const nlohmann::json& j);

// Versioned binary container; doubles are stored as raw IEEE-754 bits.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tickets::model
