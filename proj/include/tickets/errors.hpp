// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tickets {

// Caller broke a documented precondition (shape mismatch, bad range, ...).
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// An iterative numerical routine failed or an input was too ill-conditioned.
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TrainingFailure : public std::runtime_error {
public:
    TrainingFailure(const std::string& what, std::size_t step)
        : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

// Malformed or truncated artifact file.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Artifact was produced against a different parameter schema.
class IncompatibleSchema : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class PrerequisiteError : public std::runtime_error {
public:
    PrerequisiteError(const std::string& what, std::string producer)
        : std::runtime_error(what), producer_(std::move(producer)) {}

    const std::string& producer() const noexcept { return producer_; }

private:
    std::string producer_;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractViolation(msg);
}

}  // namespace tickets
