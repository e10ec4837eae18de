// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#include "tickets/masks.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tickets/errors.hpp"
#include "tickets/io.hpp"
#include "tickets/model/param_set.hpp"
#include "tickets/numerics/rng.hpp"

namespace tickets::masks {
namespace {

model::ParamSet schema(std::vector<std::size_t> sizes, bool with_frozen = true) {
    model::ParamSet p;
    if (with_frozen) p.add("embed.tok", {3, 2}, false);
    for (std::size_t i = 0; i < sizes.size(); ++i) p.add("layer" + std::to_string(i) + ".w", {sizes[i]}, true);
    return p;
}

Mask from_bits(const model::ParamSet& s, std::vector<int> bits) {
    Mask m = Mask::ones(s);
    for (std::size_t i = 0; i < bits.size(); ++i) m.set_bit(i, static_cast<std::uint8_t>(bits[i]));
    return m;
}

TEST(Jaccard, SmallExample) {
    const auto s = schema({4});
    const auto r = jaccard(from_bits(s, {1, 1, 0, 0}), from_bits(s, {1, 0, 1, 0}));
    EXPECT_EQ(r.intersection, 1u);
    EXPECT_EQ(r.union_size, 3u);
    EXPECT_DOUBLE_EQ(r.global_jaccard, 1.0 / 3.0);
}

TEST(Jaccard, SelfIsOne) {
    const auto s = schema({50, 30});
    const auto m = random_mask(s, 0.4, 3);
    EXPECT_EQ(jaccard(m, m).global_jaccard, 1.0);
}

TEST(Jaccard, RandomHalfMasksNearOneThird) {
    const auto s = schema({1000000}, false);
    const auto r = jaccard(random_mask(s, 0.5, 1), random_mask(s, 0.5, 2));
    // Expected (1-s)^2 / (1-s^2) = 1/3.
    EXPECT_NEAR(r.global_jaccard, 1.0 / 3.0, 0.005);
}

TEST(Jaccard, ExpectedValueAcrossSparsities) {
    const auto s = schema({200000}, false);
    for (double sp : {0.2, 0.5, 0.8}) {
        const double expected = (1 - sp) * (1 - sp) / (1 - sp * sp);
        EXPECT_NEAR(jaccard(random_mask(s, sp, 11), random_mask(s, sp, 12)).global_jaccard, expected, 0.01);
    }
}

TEST(Jaccard, PerLayerAggregatesToGlobal) {
    const auto s = schema({300, 500, 200});
    const auto r = jaccard(random_mask(s, 0.5, 4), random_mask(s, 0.5, 5));
    ASSERT_EQ(r.per_layer.size(), 3u);
    std::size_t inter = 0, uni = 0;
    for (const auto& l : r.per_layer) {
        inter += l.intersection;
        uni += l.union_size;
        EXPECT_DOUBLE_EQ(l.jaccard, static_cast<double>(l.intersection) / static_cast<double>(l.union_size));
    }
    EXPECT_EQ(inter, r.intersection);
    EXPECT_EQ(uni, r.union_size);
}

TEST(Jaccard, SchemaMismatchIsRejected) {
    EXPECT_THROW(jaccard(Mask::ones(schema({4})), Mask::ones(schema({5}))), ContractViolation);
}

TEST(RandomMask, ExactZeroCounts) {
    const auto s = schema({100}, false);
    EXPECT_EQ(random_mask(s, 0.0, 1).content_digest(), Mask::ones(s).content_digest());
    EXPECT_EQ(random_mask(s, 0.0, 1).zeros(), 0u);
    EXPECT_EQ(random_mask(s, 0.5, 1).zeros(), 50u);
    const auto big = schema({333, 17});
    EXPECT_EQ(random_mask(big, 0.3, 9).zeros(), zeros_for(0.3, 350));
    EXPECT_EQ(random_mask(big, 0.3, 9), random_mask(big, 0.3, 9));
    EXPECT_THROW(random_mask(big, 1.0, 9), ContractViolation);
}

TEST(HybridMask, ExtendsBaseWithoutTouchingItsZeros) {
    const auto s = schema({1000}, false);
    const auto base = random_mask(s, 0.4, 1);
    const auto h = hybrid_random_mask(base, 0.5, 2);
    EXPECT_EQ(h.zeros(), 500u);
    for (std::size_t i = 0; i < 1000; ++i)
        if (base.bit(i) == 0) EXPECT_EQ(h.bit(i), 0);
    EXPECT_EQ(hybrid_random_mask(base, 0.4, 2).entries()[0].bits, base.entries()[0].bits);
    EXPECT_THROW(hybrid_random_mask(base, 0.3, 2), ContractViolation);
}

TEST(OverlapMatrix, SymmetricWithUnitDiagonal) {
    const auto s = schema({200});
    const auto m = random_mask(s, 0.5, 1);
    const std::vector<Mask> same{m, m};
    const auto two = overlap_matrix(same);
    EXPECT_EQ(two, (num::Matrix{{1, 1}, {1, 1}}));

    const std::vector<Mask> three{m, random_mask(s, 0.5, 2), random_mask(s, 0.5, 3)};
    const auto o = overlap_matrix(three);
    ASSERT_EQ(o.rows(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(o(i, i), 1.0);
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(o(i, j), o(j, i));
    }
    EXPECT_DOUBLE_EQ(o(0, 1), jaccard(three[0], three[1]).global_jaccard);
}

class MaskFile : public ::testing::Test {
protected:
    std::filesystem::path dir = std::filesystem::temp_directory_path() / "tickets_mask_test";
    void SetUp() override { std::filesystem::create_directories(dir); }
    void TearDown() override { std::filesystem::remove_all(dir); }
};

TEST_F(MaskFile, RoundTrip) {
    const auto s = schema({123, 45});
    auto m = random_mask(s, 0.6, 8);
    m.provenance = {"imp", "TAG", {"L1"}, 99, 6};
    save_mask(m, dir / "m.mask");
    const auto back = load_mask(dir / "m.mask", s);
    EXPECT_EQ(back, m);
}

TEST_F(MaskFile, TruncatedFileIsAParseError) {
    const auto s = schema({123, 45});
    save_mask(random_mask(s, 0.6, 8), dir / "m.mask");
    auto bytes = io::read_file(dir / "m.mask");
    for (std::size_t cut : {bytes.size() - 1, bytes.size() / 2, std::size_t{3}}) {
        std::vector<char> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
        io::atomic_write_bytes(dir / "t.mask", part);
        EXPECT_THROW(load_mask(dir / "t.mask"), ParseError) << cut;
    }
}

TEST_F(MaskFile, WrongSchemaIsIncompatible) {
    save_mask(random_mask(schema({123, 45}), 0.6, 8), dir / "m.mask");
    EXPECT_THROW(load_mask(dir / "m.mask", schema({123, 46})), IncompatibleSchema);
}

TEST(Mask, ApplyZeroesPrunedCoordinatesOnly) {
    auto s = schema({4});
    for (auto& e : s.entries()) std::fill(e.values.begin(), e.values.end(), 2.0);
    from_bits(s, {1, 0, 1, 0}).apply(s);
    EXPECT_EQ(s.at("layer0.w").values, (std::vector<double>{2, 0, 2, 0}));
    for (double v : s.at("embed.tok").values) EXPECT_EQ(v, 2.0);
}

TEST(Mask, ContentDigestIgnoresProvenance) {
    const auto s = schema({64});
    auto a = random_mask(s, 0.5, 1);
    auto b = a;
    b.provenance.method = "other";
    EXPECT_EQ(a.content_digest(), b.content_digest());
    b.set_bit(0, b.bit(0) ^ 1);
    EXPECT_NE(a.content_digest(), b.content_digest());
}

}  // namespace
}  // namespace tickets::masks
