// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace tickets::model {

struct ParamEntry {
    std::string name;  // hierarchical, e.g. "layer0.attn.wq"
    std::vector<std::size_t> shape;
    std::vector<double> values;
    bool prunable = false;

    std::size_t size() const noexcept { return values.size(); }
    friend bool operator==(const ParamEntry&, const ParamEntry&) = default;
};

// Ordered, uniquely named collection of parameter tensors.
class ParamSet {
public:
    ParamEntry& add(std::string name, std::vector<std::size_t> shape, bool prunable);

    std::span<ParamEntry> entries() noexcept { return entries_; }
    std::span<const ParamEntry> entries() const noexcept { return entries_; }
    std::size_t entry_count() const noexcept { return entries_.size(); }

    ParamEntry& at(const std::string& name);
    const ParamEntry& at(const std::string& name) const;
    std::optional<std::size_t> index_of(const std::string& name) const;

    std::size_t total_size() const noexcept;
    std::size_t prunable_size() const noexcept;

    // Same names and shapes, all values zero.
    ParamSet zeros_like() const;
    void set_zero();

    // Digest over (name, shape) of the prunable entries in order.
    std::uint64_t schema_digest() const;
    bool same_layout(const ParamSet& other) const;

    // Global coordinate access over all entries in order.
    double& coordinate(std::size_t flat);
    double coordinate(std::size_t flat) const;

    friend bool operator==(const ParamSet& a, const ParamSet& b) { return a.entries_ == b.entries_; }

private:
    std::vector<ParamEntry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Encoder block index parsed from a name of the form "layer<k>.*"; nullopt otherwise.
std::optional<std::size_t> layer_index(const std::string& name);

}  // namespace tickets::model
