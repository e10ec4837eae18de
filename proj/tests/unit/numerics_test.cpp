// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <vector>

#include "tickets/errors.hpp"
#include "tickets/io.hpp"
#include "tickets/numerics/gradcheck.hpp"
#include "tickets/numerics/linalg.hpp"
#include "tickets/numerics/matrix.hpp"
#include "tickets/numerics/rng.hpp"

namespace tickets::num {
namespace {

TEST(Rng, MatchesSplitMix64ReferenceStream) {
    // Published SplitMix64 outputs for state 0.
    Rng rng(0);
    EXPECT_EQ(rng.next_u64(), 0xe220a8397b1dcdafULL);
    EXPECT_EQ(rng.next_u64(), 0x6e789e6aa1b965f4ULL);
    EXPECT_EQ(rng.next_u64(), 0x06c45d188009454fULL);
}

TEST(Rng, StreamIsPureFunctionOfSeed) {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        EXPECT_EQ(x, b.next_u64());
        EXPECT_NE(x, c.next_u64());
    }
}

TEST(Rng, DerivedSeedsDependOnPathOrder) {
    EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
    EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
    EXPECT_NE(derive_seed(1, {2}), derive_seed(2, {2}));
    EXPECT_NE(hash_tag("mlm"), hash_tag("tag"));
}

TEST(Rng, UniformIntIsInRangeAndRoughlyFlat) {
    Rng rng(9);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) ++counts[rng.uniform_int(7)];
    for (int c : counts) EXPECT_NEAR(c, 10000, 400);
}

TEST(Rng, NormalMoments) {
    Rng rng(5);
    const int n = 200000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        s += x;
        s2 += x * x;
    }
    EXPECT_NEAR(s / n, 0.0, 0.01);
    EXPECT_NEAR(s2 / n, 1.0, 0.015);
}

TEST(Rng, ShuffleIsAPermutation) {
    Rng rng(3);
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    rng.shuffle(std::span<int>(v));
    EXPECT_EQ(std::set<int>(v.begin(), v.end()).size(), 50u);
}

TEST(Svd, IdentityAndDiagonal) {
    const auto id = svd(Matrix::identity(3));
    for (double s : id.singular_values) EXPECT_NEAR(s, 1.0, 1e-12);

    const auto d = svd(Matrix{{3, 0}, {0, 2}});
    ASSERT_EQ(d.singular_values.size(), 2u);
    EXPECT_NEAR(d.singular_values[0], 3.0, 1e-12);
    EXPECT_NEAR(d.singular_values[1], 2.0, 1e-12);
}

TEST(Svd, ReconstructsRectangularMatrix) {
    Rng rng(17);
    Matrix a(5, 4);
    for (double& v : a.values()) v = rng.normal();
    const auto r = svd(a);
    EXPECT_LT(max_abs_diff(r.reconstruct(), a), 1e-10);
    for (std::size_t i = 1; i < r.singular_values.size(); ++i)
        EXPECT_GE(r.singular_values[i - 1], r.singular_values[i]);
    // Orthonormal factors.
    EXPECT_LT(max_abs_diff(mul_tn(r.u, r.u), Matrix::identity(r.u.cols())), 1e-12);
    EXPECT_LT(max_abs_diff(mul_nt(r.vt, r.vt), Matrix::identity(r.vt.rows())), 1e-12);
}

TEST(Svd, WideMatrix) {
    Rng rng(2);
    Matrix a(3, 7);
    for (double& v : a.values()) v = rng.normal();
    EXPECT_LT(max_abs_diff(svd(a).reconstruct(), a), 1e-10);
}

TEST(SymEig, DiagonalAndTwoByTwo) {
    const auto d = sym_eig(Matrix{{4, 0}, {0, 1}});
    EXPECT_NEAR(d.values[0], 4.0, 1e-12);
    EXPECT_NEAR(d.values[1], 1.0, 1e-12);

    const auto e = sym_eig(Matrix{{2, 1}, {1, 2}});
    EXPECT_NEAR(e.values[0], 3.0, 1e-12);
    EXPECT_NEAR(e.values[1], 1.0, 1e-12);
    const double r = 1.0 / std::sqrt(2.0);
    EXPECT_NEAR(std::abs(e.vectors(0, 0)), r, 1e-12);
    EXPECT_NEAR(e.vectors(0, 0) * e.vectors(1, 0), 0.5, 1e-12);
}

TEST(SymEig, InverseSqrtWhitens) {
    Rng rng(4);
    Matrix a(20, 4);
    for (double& v : a.values()) v = rng.normal();
    const Matrix s = mul_tn(a, a);
    const Matrix k = inverse_sqrt_spd(s);
    EXPECT_LT(max_abs_diff(k * s * k, Matrix::identity(4)), 1e-10);
}

TEST(SymEig, InverseSqrtRejectsSingular) {
    EXPECT_THROW(inverse_sqrt_spd(Matrix{{1, 1}, {1, 1}}), NumericalFailure);
}

model::ParamSet one_tensor(std::vector<double> v) {
    model::ParamSet p;
    auto& e = p.add("w", {v.size()}, true);
    e.values = std::move(v);
    return p;
}

TEST(FiniteDiff, QuadraticIsExact) {
    // f = sum x_i^2 / 2; grad = x. Central differences are exact for quadratics.
    const LossFn f = [](const model::ParamSet& p, model::ParamSet* g) {
        double s = 0;
        const auto& x = p.entries()[0].values;
        for (std::size_t i = 0; i < x.size(); ++i) {
            s += 0.5 * x[i] * x[i];
            if (g) g->entries()[0].values[i] = x[i];
        }
        return s;
    };
    EXPECT_LT(finite_diff_check(f, one_tensor({1.0, -2.0, 0.5, 3.0}), 4, 1e-5), 1e-8);
}

TEST(FiniteDiff, ConstantHasZeroGradient) {
    const LossFn f = [](const model::ParamSet&, model::ParamSet*) { return 3.0; };
    EXPECT_EQ(finite_diff_check(f, one_tensor({1.0, 2.0}), 2, 1e-5), 0.0);
}

TEST(FiniteDiff, DetectsAWrongGradient) {
    const LossFn f = [](const model::ParamSet& p, model::ParamSet* g) {
        const double x = p.entries()[0].values[0];
        if (g) g->entries()[0].values[0] = 3.0 * x;  // should be 2x
        return x * x;
    };
    EXPECT_GT(finite_diff_check(f, one_tensor({1.0}), 1, 1e-5), 0.3);
}

TEST(Io, AtomicWriteAndDigest) {
    const auto dir = std::filesystem::temp_directory_path() / "tickets_io_test";
    std::filesystem::remove_all(dir);
    const auto path = dir / "sub" / "a.txt";
    io::atomic_write(path, [](std::ostream& os) { os << "abc"; });
    EXPECT_EQ(io::sha256_file(path),
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(io::sha256_hex(""),
              "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    // No temp files are left behind.
    std::size_t files = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir / "sub")) files += e.is_regular_file();
    EXPECT_EQ(files, 1u);

    // A failing body leaves the previous file untouched.
    EXPECT_THROW(io::atomic_write(path, [](std::ostream& os) {
                     os << "partial";
                     throw std::runtime_error("boom");
                 }),
                 std::runtime_error);
    const auto bytes = io::read_file(path);
    EXPECT_EQ(std::string(bytes.begin(), bytes.end()), "abc");
    std::filesystem::remove_all(dir);
}

TEST(Io, ByteReaderReportsTruncation) {
    io::ByteWriter w;
    w.put<std::uint32_t>(7);
    io::ByteReader r(w.bytes().data(), w.bytes().size(), "x");
    EXPECT_EQ(r.get<std::uint32_t>(), 7u);
    EXPECT_THROW(r.get<std::uint8_t>(), ParseError);
}

}  // namespace
}  // namespace tickets::num
