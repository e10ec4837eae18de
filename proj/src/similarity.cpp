// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#include "tickets/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "tickets/errors.hpp"
#include "tickets/numerics/linalg.hpp"

namespace tickets::sim {
namespace {

using num::Matrix;

double default_ridge(const Matrix& cov) {
    double tr = 0.0;
    for (std::size_t i = 0; i < cov.rows(); ++i) tr += cov(i, i);
    return 1e-6 * tr / static_cast<double>(cov.rows());
}

void add_ridge(Matrix& cov, Ridge ridge) {
    const double lambda = ridge ? *ridge : default_ridge(cov);
    for (std::size_t i = 0; i < cov.rows(); ++i) cov(i, i) += lambda;
}

// Modified Gram-Schmidt on the rows of h; rows that vanish stay zero.
Matrix orthonormal_rows(Matrix h) {
    for (std::size_t i = 0; i < h.rows(); ++i) {
        auto ri = h.row(i);
        for (std::size_t j = 0; j < i; ++j) {
            auto rj = h.row(j);
            const double d = std::inner_product(ri.begin(), ri.end(), rj.begin(), 0.0);
            for (std::size_t c = 0; c < ri.size(); ++c) ri[c] -= d * rj[c];
        }
        const double norm = std::sqrt(std::inner_product(ri.begin(), ri.end(), ri.begin(), 0.0));
        for (double& v : ri) v = norm > 0.0 ? v / norm : 0.0;
    }
    return h;
}

}  // namespace

CcaResult cca(const Matrix& x, const Matrix& y, Ridge ridge) {
    require(x.cols() == y.cols(), "cca: x and y need the same number of observations");
    require(x.rows() > 0 && y.rows() > 0, "cca: empty input");
    require(x.cols() > std::max(x.rows(), y.rows()), "cca: need more observations than variables");
    require(!ridge || *ridge >= 0.0, "cca: ridge must be non-negative");
    require(x.all_finite() && y.all_finite(), "cca: non-finite input");

    const double scale = 1.0 / static_cast<double>(x.cols() - 1);
    const Matrix xc = num::center_rows(x);
    const Matrix yc = num::center_rows(y);
    Matrix sxx = scale * num::mul_nt(xc, xc);
    Matrix syy = scale * num::mul_nt(yc, yc);
    const Matrix sxy = scale * num::mul_nt(xc, yc);
    add_ridge(sxx, ridge);
    add_ridge(syy, ridge);

    Matrix kx, ky;
    try {
        kx = num::inverse_sqrt_spd(sxx);
        ky = num::inverse_sqrt_spd(syy);
    } catch (const NumericalFailure& e) {
        throw NumericalFailure(std::string("cca: ") + e.what() + " (try a ridge > 0)");
    }
    const auto dec = num::svd(kx * sxy * ky);
    const std::size_t m = std::min(x.rows(), y.rows());

    CcaResult r;
    r.rho.resize(m);
    for (std::size_t i = 0; i < m; ++i) r.rho[i] = std::clamp(dec.singular_values[i], 0.0, 1.0);
    r.rho_cca = std::accumulate(r.rho.begin(), r.rho.end(), 0.0) / static_cast<double>(m);
    r.w_x = kx * dec.u.columns(0, m);
    r.w_y = ky * dec.vt.rows_slice(0, m).transposed();

    // Projection weights: canonical variates of x against x's own neurons.
    const Matrix h = orthonormal_rows(num::mul_tn(r.w_x, xc));  // (m x n)
    const Matrix proj = num::mul_nt(h, xc);                    // (m x d1)
    r.alpha.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < proj.cols(); ++j) r.alpha[i] += std::abs(proj(i, j));
    const double total = std::accumulate(r.alpha.begin(), r.alpha.end(), 0.0);
    if (total > 0.0) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += r.alpha[i] * r.rho[i];
        r.rho_pw = s / total;
    } else {
        r.rho_pw = r.rho_cca;
    }
    return r;
}

CcaResult pwcca(const Matrix& x, const Matrix& y, Ridge ridge) { return cca(x, y, ridge); }

std::size_t svcca_rank(std::span<const double> singular_values, double threshold) {
    require(threshold > 0.0 && threshold <= 1.0, "svcca: threshold must lie in (0, 1]");
    double total = 0.0;
    for (double s : singular_values) total += s * s;
    if (total == 0.0) return 0;
    double acc = 0.0;
    for (std::size_t k = 0; k < singular_values.size(); ++k) {
        acc += singular_values[k] * singular_values[k];
        if (acc >= threshold * total * (1.0 - 1e-12)) return k + 1;
    }
    return singular_values.size();
}

namespace {

// Rows of the result are the top singular directions' coordinates (k x n).
Matrix truncate(const Matrix& a, double threshold) {
    const Matrix ac = num::center_rows(a);
    const auto dec = num::svd(ac);
    const std::size_t k = svcca_rank(dec.singular_values, threshold);
    if (k == 0) throw NumericalFailure("svcca: input has no variance");
    return num::mul_tn(dec.u.columns(0, k), ac);
}

}  // namespace

CcaResult svcca(const Matrix& x, const Matrix& y, double threshold, Ridge ridge) {
    require(x.cols() == y.cols(), "svcca: x and y need the same number of observations");
    return cca(truncate(x, threshold), truncate(y, threshold), ridge);
}

const char* method_name(Method m) { return m == Method::Svcca ? "svcca" : "pwcca"; }

Method parse_method(const std::string& name) {
    if (name == "svcca") return Method::Svcca;
    if (name == "pwcca") return Method::Pwcca;
    throw ContractViolation("unknown similarity method: " + name);
}

std::vector<ProfilePoint> layer_profile(const model::ModelConfig& config, const model::ParamSet& params,
                                        const masks::Mask* mask,
                                        std::span<const std::vector<int>> first_side,
                                        std::span<const std::vector<int>> second_side, Method method,
                                        double svcca_threshold) {
    require(first_side.size() == second_side.size(), "layer_profile: sides must be parallel");
    const auto a = model::pooled_representations(config, params, mask, first_side);
    const auto b = model::pooled_representations(config, params, mask, second_side);
    std::vector<ProfilePoint> out;
    for (std::size_t l = 0; l < a.size(); ++l) {
        const Matrix xa = a[l].transposed();
        const Matrix xb = b[l].transposed();
        const CcaResult r = method == Method::Svcca ? svcca(xa, xb, svcca_threshold) : pwcca(xa, xb);
        out.push_back({l, method, method == Method::Svcca ? r.rho_cca : r.rho_pw});
    }
    return out;
}

Matrix cosine_matrix(const Matrix& sources, const Matrix& targets) {
    require(sources.cols() == targets.cols(), "cosine: feature dimensions differ");
    auto norms = [](const Matrix& m, const char* side) {
        std::vector<double> n(m.rows());
        for (std::size_t i = 0; i < m.rows(); ++i) {
            const auto r = m.row(i);
            n[i] = std::sqrt(std::inner_product(r.begin(), r.end(), r.begin(), 0.0));
            if (!(n[i] > 0.0) || !std::isfinite(n[i]))
                throw NumericalFailure(std::string("degenerate representation: zero-norm ") + side + " row " +
                                       std::to_string(i));
        }
        return n;
    };
    const auto ns = norms(sources, "source");
    const auto nt = norms(targets, "target");
    Matrix c = num::mul_nt(sources, targets);
    for (std::size_t i = 0; i < c.rows(); ++i)
        for (std::size_t j = 0; j < c.cols(); ++j) c(i, j) /= ns[i] * nt[j];
    return c;
}

namespace {

double top_k_sum(std::vector<double> v, std::size_t k) {
    std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end(), std::greater<>());
    return std::accumulate(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), 0.0);
}

}  // namespace

std::vector<std::vector<std::size_t>> rankings(const Matrix& scores) {
    std::vector<std::vector<std::size_t>> out(scores.rows());
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        auto& order = out[i];
        order.resize(scores.cols());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return scores(i, a) > scores(i, b); });
    }
    return out;
}

RetrievalResult margin_retrieve(const Matrix& sources, const Matrix& targets, const RetrievalConfig& cfg) {
    require(sources.rows() == targets.rows(), "margin_retrieve: source and target counts differ");
    require(sources.rows() > 0, "margin_retrieve: no sentences");
    require(cfg.k >= 1 && cfg.k <= targets.rows(), "margin_retrieve: k must lie in [1, n]");
    const Matrix c = cosine_matrix(sources, targets);
    const std::size_t n = c.rows();
    const double inv = 1.0 / (2.0 * static_cast<double>(cfg.k));
    std::vector<double> src_nb(n), tgt_nb(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = c.row(i);
        src_nb[i] = top_k_sum({r.begin(), r.end()}, cfg.k) * inv;
    }
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = c(i, j);
        tgt_nb[j] = top_k_sum(std::move(col), cfg.k) * inv;
    }
    RetrievalResult r;
    r.scores = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) r.scores(i, j) = c(i, j) / (src_nb[i] + tgt_nb[j]);
    const auto order = rankings(r.scores);
    std::size_t hit1 = 0, hit5 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        hit1 += order[i][0] == i ? 1 : 0;
        const std::size_t depth = std::min<std::size_t>(5, n);
        hit5 += std::find(order[i].begin(), order[i].begin() + static_cast<std::ptrdiff_t>(depth), i) !=
                        order[i].begin() + static_cast<std::ptrdiff_t>(depth)
                    ? 1
                    : 0;
    }
    r.top1 = static_cast<double>(hit1) / static_cast<double>(n);
    r.top5 = static_cast<double>(hit5) / static_cast<double>(n);
    return r;
}

void write_profile_csv(std::span<const ProfilePoint> points, std::ostream& out, bool header) {
    if (header) out << "layer,method,value\n";
    for (const auto& p : points)
        out << p.layer << ',' << method_name(p.method) << ',' << std::setprecision(17) << p.value
            << std::setprecision(6) << '\n';
}

}  // namespace tickets::sim
