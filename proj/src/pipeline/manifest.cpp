// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#include "tickets/pipeline/manifest.hpp"

#include <fstream>

#include "tickets/errors.hpp"
#include "tickets/io.hpp"

#ifndef TICKETS_VERSION
#define TICKETS_VERSION "dev"
#endif

namespace tickets::pipeline {

using nlohmann::json;

const char* code_version() { return "tickets " TICKETS_VERSION; }

std::optional<std::string> RunManifest::producer_of(const std::string& relative_path) const {
    for (const auto& [name, rec] : stages)
        if (rec.artifacts.count(relative_path)) return name;
    return std::nullopt;
}

std::optional<std::string> RunManifest::digest_of(const std::string& relative_path) const {
    for (const auto& [name, rec] : stages)
        if (auto it = rec.artifacts.find(relative_path); it != rec.artifacts.end()) return it->second;
    return std::nullopt;
}

json RunManifest::to_json() const {
    json st = json::object();
    for (const auto& [name, rec] : stages)
        st[name] = {{"input_digest", rec.input_digest}, {"artifacts", rec.artifacts}, {"seconds", rec.seconds}};
    return {{"config_digest", config_digest}, {"version", version}, {"stages", st}};
}

RunManifest RunManifest::from_json(const json& j) {
    RunManifest m;
    try {
        m.config_digest = j.at("config_digest").get<std::string>();
        m.version = j.at("version").get<std::string>();
        for (const auto& [name, rec] : j.at("stages").items()) {
            StageRecord r;
            r.input_digest = rec.at("input_digest").get<std::string>();
            r.artifacts = rec.at("artifacts").get<std::map<std::string, std::string>>();
            r.seconds = rec.at("seconds").get<double>();
            m.stages.emplace(name, std::move(r));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

void RunManifest::save(const std::filesystem::path& path) const {
    io::atomic_write(path, [&](std::ostream& out) { out << to_json().dump(2) << '\n'; });
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) return {};
    std::ifstream in(path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("manifest " + path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

}  // namespace tickets::pipeline
