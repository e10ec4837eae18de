// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#include "tickets/masks.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "tickets/errors.hpp"
#include "tickets/io.hpp"
#include "tickets/numerics/rng.hpp"

namespace tickets::masks {
namespace {

constexpr char kMagic[] = "TKTMASK";  // 7 chars + version byte
constexpr std::uint8_t kVersion = 1;

nlohmann::json provenance_json(const Provenance& p) {
    return {{"method", p.method}, {"task", p.task}, {"languages", p.languages},
            {"seed", p.seed}, {"rounds", p.rounds}};
}

Provenance provenance_from(const nlohmann::json& j) {
    Provenance p;
    p.method = j.at("method").get<std::string>();
    p.task = j.at("task").get<std::string>();
    p.languages = j.at("languages").get<std::vector<std::string>>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.rounds = j.at("rounds").get<std::size_t>();
    return p;
}

void require_same_schema(const Mask& a, const Mask& b) {
    require(a.schema_digest() == b.schema_digest(), "masks built for different parameter schemas");
    const auto ea = a.entries();
    const auto eb = b.entries();
    require(ea.size() == eb.size(), "masks have different entry counts");
    for (std::size_t i = 0; i < ea.size(); ++i)
        require(ea[i].name == eb[i].name && ea[i].shape == eb[i].shape, "mask entry mismatch at " + ea[i].name);
}

}  // namespace

std::size_t MaskEntry::zeros() const noexcept {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{0}));
}

Mask Mask::ones(const model::ParamSet& schema) {
    Mask m;
    for (const auto& e : schema.entries()) {
        if (!e.prunable) continue;
        m.entries_.push_back(MaskEntry{e.name, e.shape, std::vector<std::uint8_t>(e.size(), 1)});
    }
    m.schema_digest_ = schema.schema_digest();
    m.provenance.method = "ones";
    return m;
}

std::size_t Mask::total() const noexcept {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.bits.size();
    return n;
}

std::size_t Mask::zeros() const noexcept {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.zeros();
    return n;
}

double Mask::sparsity() const noexcept {
    const std::size_t n = total();
    return n == 0 ? 0.0 : static_cast<double>(zeros()) / static_cast<double>(n);
}

bool Mask::matches(const model::ParamSet& schema) const {
    if (schema.schema_digest() != schema_digest_) return false;
    std::size_t k = 0;
    for (const auto& e : schema.entries()) {
        if (!e.prunable) continue;
        if (k >= entries_.size() || entries_[k].name != e.name || entries_[k].shape != e.shape) return false;
        ++k;
    }
    return k == entries_.size();
}

void Mask::require_matches(const model::ParamSet& schema) const {
    if (!matches(schema)) throw ContractViolation("mask does not match the parameter schema");
}

void Mask::apply(model::ParamSet& params) const {
    require_matches(params);
    std::size_t k = 0;
    for (auto& e : params.entries()) {
        if (!e.prunable) continue;
        const auto& bits = entries_[k++].bits;
        for (std::size_t i = 0; i < bits.size(); ++i)
            if (!bits[i]) e.values[i] = 0.0;
    }
}

std::uint8_t Mask::bit(std::size_t flat) const {
    for (const auto& e : entries_) {
        if (flat < e.bits.size()) return e.bits[flat];
        flat -= e.bits.size();
    }
    throw ContractViolation("Mask::bit out of range");
}

void Mask::set_bit(std::size_t flat, std::uint8_t value) {
    for (auto& e : entries_) {
        if (flat < e.bits.size()) {
            e.bits[flat] = value ? 1 : 0;
            return;
        }
        flat -= e.bits.size();
    }
    throw ContractViolation("Mask::set_bit out of range");
}

std::uint64_t Mask::content_digest() const {
    std::uint64_t h = num::mix64(schema_digest_ ^ num::hash_tag("tickets.mask.content"));
    for (const auto& e : entries_) {
        std::uint64_t word = 0;
        std::size_t filled = 0;
        for (std::uint8_t b : e.bits) {
            word = (word << 1) | b;
            if (++filled == 64) {
                h = num::mix64(h ^ word);
                word = 0;
                filled = 0;
            }
        }
        h = num::mix64(h ^ word ^ (static_cast<std::uint64_t>(filled) << 56));
    }
    return h;
}

std::size_t zeros_for(double sparsity, std::size_t n) {
    return static_cast<std::size_t>(std::floor(sparsity * static_cast<double>(n) + 1e-9));
}

OverlapReport jaccard(const Mask& a, const Mask& b) {
    require_same_schema(a, b);
    OverlapReport r;
    std::map<std::size_t, LayerJaccard> layers;
    const auto ea = a.entries();
    const auto eb = b.entries();
    for (std::size_t k = 0; k < ea.size(); ++k) {
        std::size_t inter = 0;
        std::size_t uni = 0;
        const auto& ba = ea[k].bits;
        const auto& bb = eb[k].bits;
        for (std::size_t i = 0; i < ba.size(); ++i) {
            inter += static_cast<std::size_t>(ba[i] & bb[i]);
            uni += static_cast<std::size_t>(ba[i] | bb[i]);
        }
        r.intersection += inter;
        r.union_size += uni;
        if (auto layer = model::layer_index(ea[k].name)) {
            auto& lj = layers[*layer];
            lj.layer = *layer;
            lj.intersection += inter;
            lj.union_size += uni;
        }
    }
    auto ratio = [](std::size_t i, std::size_t u) {
        return u == 0 ? 1.0 : static_cast<double>(i) / static_cast<double>(u);
    };
    r.global_jaccard = ratio(r.intersection, r.union_size);
    for (auto& [idx, lj] : layers) {
        lj.jaccard = ratio(lj.intersection, lj.union_size);
        r.per_layer.push_back(lj);
    }
    return r;
}

Mask random_mask(const model::ParamSet& schema, double sparsity, std::uint64_t seed) {
    require(sparsity >= 0.0 && sparsity < 1.0, "random_mask: sparsity must lie in [0, 1)");
    Mask m = Mask::ones(schema);
    const std::size_t n = m.total();
    const std::size_t k = zeros_for(sparsity, n);
    // Partial Fisher-Yates over coordinate indices: the first k picks are pruned.
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    num::Rng rng(seed);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(n - i));
        std::swap(idx[i], idx[j]);
    }
    std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
    // Walk entries once to translate flat indices.
    std::size_t offset = 0;
    std::size_t p = 0;
    for (auto& e : m.entries()) {
        while (p < k && idx[p] < offset + e.bits.size()) e.bits[idx[p++] - offset] = 0;
        offset += e.bits.size();
    }
    m.target_sparsity = sparsity;
    m.provenance = Provenance{"random", "", {}, seed, 0};
    return m;
}

Mask hybrid_random_mask(const Mask& base, double target_sparsity, std::uint64_t seed) {
    const std::size_t n = base.total();
    const std::size_t have = base.zeros();
    const std::size_t want = zeros_for(target_sparsity, n);
    require(target_sparsity < 1.0, "hybrid_random_mask: target sparsity must be below 1");
    require(want >= have, "hybrid_random_mask: base is already sparser than the target");
    Mask m = base;
    if (want == have) {
        m.target_sparsity = target_sparsity;
        return m;
    }
    std::vector<std::size_t> kept;
    kept.reserve(n - have);
    std::size_t flat = 0;
    for (const auto& e : base.entries())
        for (std::uint8_t b : e.bits) {
            if (b) kept.push_back(flat);
            ++flat;
        }
    num::Rng rng(seed);
    const std::size_t extra = want - have;
    for (std::size_t i = 0; i < extra; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(kept.size() - i));
        std::swap(kept[i], kept[j]);
    }
    std::sort(kept.begin(), kept.begin() + static_cast<std::ptrdiff_t>(extra));
    std::size_t offset = 0;
    std::size_t p = 0;
    for (auto& e : m.entries()) {
        while (p < extra && kept[p] < offset + e.bits.size()) e.bits[kept[p++] - offset] = 0;
        offset += e.bits.size();
    }
    m.target_sparsity = target_sparsity;
    m.provenance.method = "hybrid";
    m.provenance.seed = seed;
    return m;
}

num::Matrix overlap_matrix(std::span<const Mask> masks) {
    require(masks.size() >= 2, "overlap_matrix: need at least two masks");
    const std::size_t n = masks.size();
    num::Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        out(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) out(i, j) = out(j, i) = jaccard(masks[i], masks[j]).global_jaccard;
    }
    return out;
}

void save_mask(const Mask& m, const std::filesystem::path& path) {
    io::ByteWriter w;
    w.put_bytes(std::string_view(kMagic, 7));
    w.put<std::uint8_t>(kVersion);
    w.put<std::uint64_t>(m.schema_digest());
    w.put<double>(m.target_sparsity);
    w.put_string(provenance_json(m.provenance).dump());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.entries().size()));
    for (const auto& e : m.entries()) {
        w.put_string(e.name);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(e.shape.size()));
        for (std::size_t d : e.shape) w.put<std::uint64_t>(d);
        w.put<std::uint64_t>(e.bits.size());
        std::string packed((e.bits.size() + 7) / 8, '\0');
        for (std::size_t i = 0; i < e.bits.size(); ++i)
            if (e.bits[i]) packed[i / 8] = static_cast<char>(packed[i / 8] | (1 << (i % 8)));
        w.put_bytes(packed);
    }
    io::atomic_write_bytes(path, w.bytes());
}

Mask load_mask(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    io::ByteReader r(bytes.data(), bytes.size(), "mask file " + path.string());
    if (r.get_bytes(7) != std::string_view(kMagic, 7)) throw ParseError("not a mask file: " + path.string());
    if (r.get<std::uint8_t>() != kVersion) throw ParseError("unsupported mask file version: " + path.string());

    // Build into a ParamSet-shaped schema so Mask::ones sets the digest consistently.
    const auto digest = r.get<std::uint64_t>();
    const auto target = r.get<double>();
    Provenance prov;
    try {
        prov = provenance_from(nlohmann::json::parse(r.get_string()));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("mask file provenance is malformed: " + std::string(e.what()));
    }
    const auto count = r.get<std::uint32_t>();
    model::ParamSet schema;
    std::vector<std::vector<std::uint8_t>> bits;
    for (std::uint32_t k = 0; k < count; ++k) {
        std::string name = r.get_string(4096);
        const auto ndim = r.get<std::uint32_t>();
        if (ndim > 8) throw ParseError("mask file: bad rank");
        std::vector<std::size_t> shape(ndim);
        for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>());
        const auto n = static_cast<std::size_t>(r.get<std::uint64_t>());
        const std::size_t expect = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
        if (n != expect) throw ParseError("mask file: bit count does not match shape of " + name);
        const std::string packed = r.get_bytes((n + 7) / 8);
        std::vector<std::uint8_t> b(n);
        for (std::size_t i = 0; i < n; ++i) b[i] = static_cast<std::uint8_t>((packed[i / 8] >> (i % 8)) & 1);
        bits.push_back(std::move(b));
        try {
            schema.add(std::move(name), std::move(shape), true);
        } catch (const ContractViolation&) {
            throw ParseError("mask file: duplicate entry name");
        }
    }
    r.expect_end();

    Mask m = Mask::ones(schema);
    if (m.schema_digest() != digest) throw ParseError("mask file: schema digest does not match its entries");
    for (std::size_t k = 0; k < bits.size(); ++k) m.entries()[k].bits = std::move(bits[k]);
    m.target_sparsity = target;
    m.provenance = std::move(prov);
    return m;
}

Mask load_mask(const std::filesystem::path& path, const model::ParamSet& schema) {
    Mask m = load_mask(path);
    if (!m.matches(schema))
        throw IncompatibleSchema("mask " + path.string() + " was built for a different parameter schema");
    return m;
}

void write_overlap_csv(std::span<const OverlapReport> reports, std::ostream& out) {
    out << "pair,layer,jaccard\n";
    char buf[64];
    for (const auto& r : reports) {
        const std::string pair = r.first + "|" + r.second;
        std::snprintf(buf, sizeof buf, "%.10f", r.global_jaccard);
        out << pair << ",all," << buf << '\n';
        for (const auto& l : r.per_layer) {
            std::snprintf(buf, sizeof buf, "%.10f", l.jaccard);
            out << pair << ',' << l.layer << ',' << buf << '\n';
        }
    }
}

}  // namespace tickets::masks
