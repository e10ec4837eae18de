// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#include "tickets/numerics/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tickets/errors.hpp"

namespace tickets::num {
namespace {

constexpr double kJacobiTol = 1e-15;

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

std::vector<std::size_t> descending_order(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
    return idx;
}

// Rows of `w` are the working columns; `basis` rows accumulate the right rotations.
// Returns false if the sweep cap was reached.
bool hestenes(Matrix& w, Matrix& basis, std::size_t max_sweeps) {
    const std::size_t k = w.rows();
    const std::size_t len = w.cols();
    const std::size_t blen = basis.cols();
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t i = 0; i + 1 < k; ++i) {
            for (std::size_t j = i + 1; j < k; ++j) {
                double* wi = w.data() + i * len;
                double* wj = w.data() + j * len;
                const double alpha = dot(wi, wi, len);
                const double beta = dot(wj, wj, len);
                const double gamma = dot(wi, wj, len);
                if (alpha == 0.0 || beta == 0.0) continue;
                if (std::abs(gamma) <= kJacobiTol * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t r = 0; r < len; ++r) {
                    const double a = wi[r];
                    const double b = wj[r];
                    wi[r] = c * a - s * b;
                    wj[r] = s * a + c * b;
                }
                double* bi = basis.data() + i * blen;
                double* bj = basis.data() + j * blen;
                for (std::size_t r = 0; r < blen; ++r) {
                    const double a = bi[r];
                    const double b = bj[r];
                    bi[r] = c * a - s * b;
                    bj[r] = s * a + c * b;
                }
            }
        }
        if (!rotated) return true;
    }
    return false;
}

// Fill zero rows of `q` (k x len) so that all rows are orthonormal.
void complete_orthonormal_rows(Matrix& q, const std::vector<bool>& filled) {
    const std::size_t len = q.cols();
    std::size_t probe = 0;
    for (std::size_t i = 0; i < q.rows(); ++i) {
        if (filled[i]) continue;
        while (probe < len) {
            std::vector<double> v(len, 0.0);
            v[probe++] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t j = 0; j < q.rows(); ++j) {
                    if (j == i || (!filled[j] && j > i)) continue;
                    const double* qj = q.data() + j * len;
                    const double p = dot(v.data(), qj, len);
                    for (std::size_t r = 0; r < len; ++r) v[r] -= p * qj[r];
                }
            }
            const double norm = std::sqrt(dot(v.data(), v.data(), len));
            if (norm > 1e-6) {
                for (std::size_t r = 0; r < len; ++r) q(i, r) = v[r] / norm;
                break;
            }
        }
    }
}

SvdResult svd_tall(const Matrix& a) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    Matrix w = a.transposed();  // n x m, row i = column i of a
    Matrix basis = Matrix::identity(n);
    const std::size_t cap = 100 * std::max(m, n);
    if (!hestenes(w, basis, cap)) {
        std::ostringstream msg;
        msg << "svd: no convergence after " << cap << " sweeps on a " << m << "x" << n
            << " matrix (max |a| = " << a.max_abs() << ")";
        throw NumericalFailure(msg.str());
    }
    std::vector<double> sigma(n);
    for (std::size_t i = 0; i < n; ++i) sigma[i] = std::sqrt(dot(w.data() + i * m, w.data() + i * m, m));
    const auto order = descending_order(sigma);

    SvdResult out;
    out.singular_values.resize(n);
    Matrix ut(n, m);  // rows are left singular vectors
    out.vt = Matrix(n, n);
    const double scale = sigma.empty() ? 0.0 : sigma[order[0]];
    std::vector<bool> filled(n, false);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t src = order[k];
        const double s = sigma[src];
        out.singular_values[k] = s;
        for (std::size_t c = 0; c < n; ++c) out.vt(k, c) = basis(src, c);
        if (s > 0.0 && s > scale * 1e-15) {
            for (std::size_t r = 0; r < m; ++r) ut(k, r) = w(src, r) / s;
            filled[k] = true;
        }
    }
    complete_orthonormal_rows(ut, filled);
    out.u = ut.transposed();
    return out;
}

}  // namespace

Matrix SvdResult::reconstruct() const {
    Matrix us = u;
    for (std::size_t r = 0; r < us.rows(); ++r)
        for (std::size_t c = 0; c < us.cols(); ++c) us(r, c) *= singular_values[c];
    return us * vt;
}

SvdResult svd(const Matrix& a) {
    require(a.all_finite(), "svd: input has non-finite entries");
    if (a.rows() >= a.cols()) return svd_tall(a);
    SvdResult t = svd_tall(a.transposed());
    SvdResult out;
    out.singular_values = std::move(t.singular_values);
    out.u = t.vt.transposed();
    out.vt = t.u.transposed();
    return out;
}

SymEigResult sym_eig(const Matrix& a) {
    require(a.rows() == a.cols(), "sym_eig: matrix is not square");
    require(a.all_finite(), "sym_eig: input has non-finite entries");
    const std::size_t n = a.rows();
    const double scale = std::max(1.0, a.max_abs());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            require(std::abs(a(i, j) - a(j, i)) <= 1e-10 * scale, "sym_eig: matrix is not symmetric");

    Matrix m = a;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) m(i, j) = m(j, i) = 0.5 * (a(i, j) + a(j, i));
    Matrix v = Matrix::identity(n);

    auto off_norm = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += m(i, j) * m(i, j);
        return std::sqrt(s);
    };
    double total = 0.0;
    for (double x : m.values()) total += x * x;
    total = std::sqrt(total);

    const std::size_t cap = 100 * std::max<std::size_t>(n, 1);
    std::size_t sweep = 0;
    for (; sweep < cap; ++sweep) {
        if (off_norm() <= 1e-15 * total) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = m(p, q);
                if (apq == 0.0) continue;
                const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
                const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double mkp = m(k, p);
                    const double mkq = m(k, q);
                    m(k, p) = c * mkp - s * mkq;
                    m(k, q) = s * mkp + c * mkq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double mpk = m(p, k);
                    const double mqk = m(q, k);
                    m(p, k) = c * mpk - s * mqk;
                    m(q, k) = s * mpk + c * mqk;
                }
                m(p, q) = m(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    if (sweep == cap) {
        std::ostringstream msg;
        msg << "sym_eig: no convergence after " << cap << " sweeps (n = " << n
            << ", off-diagonal norm " << off_norm() << ")";
        throw NumericalFailure(msg.str());
    }

    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) diag[i] = m(i, i);
    const auto order = descending_order(diag);
    SymEigResult out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = diag[order[k]];
        for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = v(r, order[k]);
    }
    return out;
}

Matrix inverse_sqrt_spd(const Matrix& s) {
    const SymEigResult eig = sym_eig(s);
    const std::size_t n = s.rows();
    if (n == 0) return {};
    const double top = eig.values.front();
    const double bottom = eig.values.back();
    if (!(bottom > 1e-12 * std::max(top, 1e-300))) {
        std::ostringstream msg;
        msg << "covariance is rank deficient or indefinite (eigenvalue range [" << bottom << ", "
            << top << "]); use a positive ridge";
        throw NumericalFailure(msg.str());
    }
    Matrix out(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const double f = 1.0 / std::sqrt(eig.values[k]);
        for (std::size_t i = 0; i < n; ++i) {
            const double vi = eig.vectors(i, k) * f;
            for (std::size_t j = 0; j < n; ++j) out(i, j) += vi * eig.vectors(j, k);
        }
    }
    return out;
}

}  // namespace tickets::num
