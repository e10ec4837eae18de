// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#include "tickets/model/param_set.hpp"

#include <charconv>
#include <numeric>

#include "tickets/errors.hpp"
#include "tickets/numerics/rng.hpp"

namespace tickets::model {

ParamEntry& ParamSet::add(std::string name, std::vector<std::size_t> shape, bool prunable) {
    require(!index_.contains(name), "ParamSet: duplicate entry name " + name);
    const std::size_t n =
        std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    index_.emplace(name, entries_.size());
    entries_.push_back(ParamEntry{std::move(name), std::move(shape), std::vector<double>(n, 0.0), prunable});
    return entries_.back();
}

ParamEntry& ParamSet::at(const std::string& name) {
    auto it = index_.find(name);
    require(it != index_.end(), "ParamSet: no entry named " + name);
    return entries_[it->second];
}

const ParamEntry& ParamSet::at(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), "ParamSet: no entry named " + name);
    return entries_[it->second];
}

std::optional<std::size_t> ParamSet::index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t ParamSet::total_size() const noexcept {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.size();
    return n;
}

std::size_t ParamSet::prunable_size() const noexcept {
    std::size_t n = 0;
    for (const auto& e : entries_)
        if (e.prunable) n += e.size();
    return n;
}

ParamSet ParamSet::zeros_like() const {
    ParamSet out = *this;
    out.set_zero();
    return out;
}

void ParamSet::set_zero() {
    for (auto& e : entries_) std::fill(e.values.begin(), e.values.end(), 0.0);
}

std::uint64_t ParamSet::schema_digest() const {
    std::uint64_t h = num::hash_tag("tickets.schema.v1");
    for (const auto& e : entries_) {
        if (!e.prunable) continue;
        h = num::mix64(h ^ num::hash_tag(e.name));
        for (std::size_t d : e.shape) h = num::mix64(h ^ d);
    }
    return h;
}

bool ParamSet::same_layout(const ParamSet& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& a = entries_[i];
        const auto& b = other.entries_[i];
        if (a.name != b.name || a.shape != b.shape || a.prunable != b.prunable) return false;
    }
    return true;
}

double& ParamSet::coordinate(std::size_t flat) {
    for (auto& e : entries_) {
        if (flat < e.size()) return e.values[flat];
        flat -= e.size();
    }
    throw ContractViolation("ParamSet::coordinate out of range");
}

double ParamSet::coordinate(std::size_t flat) const {
    return const_cast<ParamSet*>(this)->coordinate(flat);
}

std::optional<std::size_t> layer_index(const std::string& name) {
    constexpr std::string_view prefix = "layer";
    if (name.rfind(prefix, 0) != 0) return std::nullopt;
    const char* first = name.data() + prefix.size();
    const char* last = name.data() + name.size();
    std::size_t k = 0;
    auto [ptr, ec] = std::from_chars(first, last, k);
    if (ec != std::errc{} || ptr == first || ptr == last || *ptr != '.') return std::nullopt;
    return k;
}

}  // namespace tickets::model
