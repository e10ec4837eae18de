// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tickets/model/param_set.hpp"
#include "tickets/numerics/matrix.hpp"

namespace tickets::masks {

struct MaskEntry {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<std::uint8_t> bits;  // 1 = kept, 0 = pruned

    std::size_t zeros() const noexcept;
    friend bool operator==(const MaskEntry&, const MaskEntry&) = default;
};

struct Provenance {
    std::string method;  // "ones", "imp", "random", "hybrid", "diff_init", "fisher", ...
    std::string task;
    std::vector<std::string> languages;
    std::uint64_t seed = 0;
    std::size_t rounds = 0;

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

// Binary mask over the prunable entries of a ParamSet, in ParamSet order.
class Mask {
public:
    Mask() = default;

    // All-ones mask for the prunable entries of `schema`.
    static Mask ones(const model::ParamSet& schema);

    std::span<MaskEntry> entries() noexcept { return entries_; }
    std::span<const MaskEntry> entries() const noexcept { return entries_; }

    std::size_t total() const noexcept;
    std::size_t zeros() const noexcept;
    double sparsity() const noexcept;

    double target_sparsity = 0.0;
    Provenance provenance;

    std::uint64_t schema_digest() const noexcept { return schema_digest_; }
    bool matches(const model::ParamSet& schema) const;
    void require_matches(const model::ParamSet& schema) const;

    // Zero every pruned coordinate of `params` in place.
    void apply(model::ParamSet& params) const;

    // Global bit access in prunable-coordinate order.
    std::uint8_t bit(std::size_t flat) const;
    void set_bit(std::size_t flat, std::uint8_t value);

    // Digest over the bit pattern (independent of provenance).
    std::uint64_t content_digest() const;

    friend bool operator==(const Mask&, const Mask&) = default;

private:
    std::vector<MaskEntry> entries_;
    std::uint64_t schema_digest_ = 0;
};

struct LayerJaccard {
    std::size_t layer = 0;
    double jaccard = 0.0;
    std::size_t intersection = 0;
    std::size_t union_size = 0;
};

struct OverlapReport {
    std::string first;
    std::string second;
    double global_jaccard = 0.0;
    std::size_t intersection = 0;
    std::size_t union_size = 0;
    std::vector<LayerJaccard> per_layer;
};

// Jaccard index of the kept coordinates. Two empty kept sets count as identical (1).
OverlapReport jaccard(const Mask& a, const Mask& b);

// Exactly floor(s * N) zeros placed uniformly over all prunable coordinates.
Mask random_mask(const model::ParamSet& schema, double sparsity, std::uint64_t seed);

// Keeps every zero of `base` and prunes uniformly among its kept coordinates until the
// target is reached.
Mask hybrid_random_mask(const Mask& base, double target_sparsity, std::uint64_t seed);

num::Matrix overlap_matrix(std::span<const Mask> masks);

// Zero count for sparsity s over n coordinates: floor(s * n) with a small tolerance for
// values such as 0.3 * 10.
std::size_t zeros_for(double sparsity, std::size_t n);

// Binary mask file: magic, version, schema digest, target sparsity, provenance,
// then one packed bitset per entry.
void save_mask(const Mask& m, const std::filesystem::path& path);
Mask load_mask(const std::filesystem::path& path);
// As above, additionally rejecting masks built for a different schema.
Mask load_mask(const std::filesystem::path& path, const model::ParamSet& schema);

// CSV rows "pair,layer,jaccard" with layer "all" for the global value.
void write_overlap_csv(std::span<const OverlapReport> reports, std::ostream& out);

}  // namespace tickets::masks
