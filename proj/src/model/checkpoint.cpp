// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#include "tickets/model/checkpoint.hpp"

#include "tickets/errors.hpp"
#include "tickets/io.hpp"

namespace tickets::model {
namespace {

constexpr std::string_view kMagic = "TKTCKPT";
constexpr std::uint8_t kVersion = 1;

}  // namespace

nlohmann::json config_to_json(const ModelConfig& c) {
    return {{"vocab_size", c.vocab_size}, {"embed_dim", c.embed_dim},     {"layers", c.layers},
            {"heads", c.heads},           {"ffn_dim", c.ffn_dim},         {"max_len", c.max_len},
            {"tag_classes", c.tag_classes}, {"cls_classes", c.cls_classes}, {"prune_biases", c.prune_biases},
            {"ln_eps", c.ln_eps}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.layers = j.at("layers").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.ffn_dim = j.at("ffn_dim").get<std::size_t>();
    c.max_len = j.at("max_len").get<std::size_t>();
    c.tag_classes = j.at("tag_classes").get<std::size_t>();
    c.cls_classes = j.at("cls_classes").get<std::size_t>();
    c.prune_biases = j.at("prune_biases").get<bool>();
    c.ln_eps = j.at("ln_eps").get<double>();
    return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    io::ByteWriter w;
    w.put_bytes(kMagic);
    w.put<std::uint8_t>(kVersion);
    w.put_string(config_to_json(ckpt.config).dump());
    nlohmann::json seeds = nlohmann::json::object();
    for (const auto& [k, v] : ckpt.seeds) seeds[k] = v;
    w.put_string(seeds.dump());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.params.entry_count()));
    for (const auto& e : ckpt.params.entries()) {
        w.put_string(e.name);
        w.put<std::uint8_t>(e.prunable ? 1 : 0);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(e.shape.size()));
        for (auto d : e.shape) w.put<std::uint64_t>(d);
        for (double x : e.values) w.put<double>(x);
    }
    io::atomic_write_bytes(path, w.bytes());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    io::ByteReader r(bytes.data(), bytes.size(), "checkpoint " + path.string());
    if (r.get_bytes(kMagic.size()) != kMagic) throw ParseError("checkpoint " + path.string() + ": bad magic");
    const auto version = r.get<std::uint8_t>();
    if (version != kVersion)
        throw ParseError("checkpoint " + path.string() + ": unsupported version " + std::to_string(version));
    Checkpoint c;
    try {
        c.config = config_from_json(nlohmann::json::parse(r.get_string()));
        const auto seeds = nlohmann::json::parse(r.get_string());
        for (const auto& [k, v] : seeds.items()) c.seeds[k] = v.get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("checkpoint " + path.string() + ": " + e.what());
    }
    const auto count = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = r.get_string(4096);
        const bool prunable = r.get<std::uint8_t>() != 0;
        const auto ndim = r.get<std::uint32_t>();
        if (ndim > 8) throw ParseError("checkpoint " + path.string() + ": bad rank for " + name);
        std::vector<std::size_t> shape(ndim);
        std::size_t n = 1;
        for (auto& d : shape) {
            d = r.get<std::uint64_t>();
            if (d != 0 && n > r.remaining() / d) throw ParseError("checkpoint " + path.string() + ": truncated file");
            n *= d;
        }
        if (n > r.remaining() / sizeof(double)) throw ParseError("checkpoint " + path.string() + ": truncated file");
        if (c.params.index_of(name)) throw ParseError("checkpoint " + path.string() + ": duplicate entry " + name);
        auto& e = c.params.add(std::move(name), std::move(shape), prunable);
        for (double& x : e.values) x = r.get<double>();
    }
    r.expect_end();
    return c;
}

}  // namespace tickets::model
