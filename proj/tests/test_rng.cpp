#include "stoplab/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

using namespace stoplab;

// Known-answer vectors of the Philox4x32-10 reference implementation.
TEST(Philox, ZeroCounterZeroKey) {
    const auto out = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(out[0], 0x6627e8d5u);
    EXPECT_EQ(out[1], 0xe169c58du);
    EXPECT_EQ(out[2], 0xbc57ac4cu);
    EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, AllOnes) {
    const auto out = Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                          {0xffffffffu, 0xffffffffu});
    EXPECT_EQ(out[0], 0x408f276du);
    EXPECT_EQ(out[1], 0x41c83b0eu);
    EXPECT_EQ(out[2], 0xa20bc7c6u);
    EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(Philox, PiDigits) {
    const auto out = Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                          {0xa4093822u, 0x299f31d0u});
    EXPECT_EQ(out[0], 0xd16cfe09u);
    EXPECT_EQ(out[1], 0x94fdccebu);
    EXPECT_EQ(out[2], 0x5001e420u);
    EXPECT_EQ(out[3], 0x24126ea1u);
}

TEST(OpenUnit, EndpointsExcluded) {
    EXPECT_GT(bits_to_open_unit(0), 0.0);
    EXPECT_LT(bits_to_open_unit(~std::uint64_t{0}), 1.0);
}

TEST(NormalStream, ReproducibleAndIndependentOfOrder) {
    NormalStream a(42, 17, 3);
    std::vector<double> first;
    for (int i = 0; i < 10; ++i) first.push_back(a());
    // Interleave another stream between draws; the sequence must not change.
    NormalStream b(42, 17, 3);
    NormalStream other(42, 18, 3);
    for (int i = 0; i < 10; ++i) {
        other();
        EXPECT_EQ(b(), first[static_cast<std::size_t>(i)]);
    }
}

TEST(NormalStream, DistinctKeysGiveDistinctStreams) {
    std::set<double> seen;
    for (std::uint64_t seed : {1ull, 2ull, (1ull << 32) + 1}) {
        for (std::uint64_t path : {0ull, 1ull, (1ull << 32)}) {
            for (std::uint32_t stream : {0u, 1u, kStreamReserved}) {
                NormalStream s(seed, path, stream);
                EXPECT_TRUE(seen.insert(s()).second);
            }
        }
    }
}

TEST(NormalStream, MomentsOfStandardNormal) {
    NormalStream s(2024, 0, 0);
    const int n = 400000;
    double m1 = 0.0, m2 = 0.0, m4 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = s();
        m1 += z;
        m2 += z * z;
        m4 += z * z * z * z;
    }
    m1 /= n;
    m2 /= n;
    m4 /= n;
    EXPECT_NEAR(m1, 0.0, 4.0 / std::sqrt(n));
    EXPECT_NEAR(m2, 1.0, 4.0 * std::sqrt(2.0 / n));
    EXPECT_NEAR(m4, 3.0, 4.0 * std::sqrt(96.0 / n));
}

TEST(KeyedUniform, PureFunctionOfKey) {
    EXPECT_EQ(keyed_uniform(5, 6, 7, 8), keyed_uniform(5, 6, 7, 8));
    EXPECT_NE(keyed_uniform(5, 6, 7, 8), keyed_uniform(5, 6, 7, 9));
    double sum = 0.0;
    for (std::uint32_t i = 0; i < 100000; ++i) sum += keyed_uniform(1, i, kStreamOffset);
    EXPECT_NEAR(sum / 100000.0, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / 100000.0));
}
