// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Canonical correlation analysis and its SVD-truncated and projection-weighted variants,
// per-layer cross-language similarity profiles, and margin-scored parallel retrieval.
//
// CCA inputs are (variables x observations): one row per neuron, one column per example.
// Retrieval inputs are (sentences x features).

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tickets/masks.hpp"
#include "tickets/model/param_set.hpp"
#include "tickets/model/transformer.hpp"
#include "tickets/numerics/matrix.hpp"

namespace tickets::sim {

struct CcaResult {
    std::vector<double> rho;  // descending, clipped to [0, 1]
    double rho_cca = 0.0;     // mean of rho
    double rho_pw = 0.0;      // alpha-weighted mean of rho
    std::vector<double> alpha;
    num::Matrix w_x;  // (d1 x m) canonical directions, column i pairs with rho[i]
    num::Matrix w_y;  // (d2 x m)
};

// Ridge added to each covariance block: nullopt selects 1e-6 * trace / d per block.
using Ridge = std::optional<double>;

CcaResult cca(const num::Matrix& x, const num::Matrix& y, Ridge ridge = std::nullopt);

// Projects each input onto its top singular directions holding at least `threshold` of
// the squared singular mass, then runs cca.
CcaResult svcca(const num::Matrix& x, const num::Matrix& y, double threshold = 0.99, Ridge ridge = std::nullopt);

// Number of leading singular directions kept for a threshold.
std::size_t svcca_rank(std::span<const double> singular_values, double threshold);

// cca with rho_pw weighted by alpha_i = sum_j |<h_i, x_j>|, h_i the orthonormalised
// i-th canonical variate of x and x_j the j-th (centred) row of x.
CcaResult pwcca(const num::Matrix& x, const num::Matrix& y, Ridge ridge = std::nullopt);

enum class Method { Svcca, Pwcca };
const char* method_name(Method m);
Method parse_method(const std::string& name);

struct ProfilePoint {
    std::size_t layer = 0;  // 0 = embeddings
    Method method = Method::Svcca;
    double value = 0.0;
};

// Similarity of mean-pooled representations of parallel sentences, per layer.
std::vector<ProfilePoint> layer_profile(const model::ModelConfig& config, const model::ParamSet& params,
                                        const masks::Mask* mask,
                                        std::span<const std::vector<int>> first_side,
                                        std::span<const std::vector<int>> second_side, Method method,
                                        double svcca_threshold = 0.99);

struct RetrievalConfig {
    std::size_t k = 4;
    std::size_t layer = 0;
};

struct RetrievalResult {
    double top1 = 0.0;
    double top5 = 0.0;
    num::Matrix scores;  // (sources x targets)
};

// s(x, y) = cos(x, y) / (sum_{z in N_k(x)} cos(x, z) / 2k + sum_{z in N_k(y)} cos(y, z) / 2k)
// with N_k taken in the other language. Row i of `targets` is the translation of row i
// of `sources`.
RetrievalResult margin_retrieve(const num::Matrix& sources, const num::Matrix& targets, const RetrievalConfig& cfg);

// Plain cosine similarity matrix (sources x targets).
num::Matrix cosine_matrix(const num::Matrix& sources, const num::Matrix& targets);

// Candidate order for each source, best first; ties keep the lower index.
std::vector<std::vector<std::size_t>> rankings(const num::Matrix& scores);

void write_profile_csv(std::span<const ProfilePoint> points, std::ostream& out, bool header = true);

}  // namespace tickets::sim
