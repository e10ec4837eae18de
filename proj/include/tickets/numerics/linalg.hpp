// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "tickets/numerics/matrix.hpp"

namespace tickets::num {

// Thin SVD: a (m x n) = u (m x k) * diag(singular_values) * vt (k x n), k = min(m, n).
struct SvdResult {
    Matrix u;
    std::vector<double> singular_values;  // non-increasing
    Matrix vt;

    Matrix reconstruct() const;
};

// One-sided Jacobi. Throws NumericalFailure if the sweep cap (100 * max(m, n)) is hit.
SvdResult svd(const Matrix& a);

struct SymEigResult {
    std::vector<double> values;  // descending
    Matrix vectors;              // column k pairs with values[k]
};

// Cyclic Jacobi eigensolver for symmetric input (asymmetry beyond 1e-10 relative is a
// ContractViolation).
SymEigResult sym_eig(const Matrix& a);

// S^{-1/2} for a symmetric positive definite S. Throws NumericalFailure when the
// smallest eigenvalue is not safely positive.
Matrix inverse_sqrt_spd(const Matrix& s);

}  // namespace tickets::num
