#include <gtest/gtest.h>

#include <cmath>

#include <spatlog/rng.hpp>

using spatlog::Philox4x32;

TEST(Philox, KnownAnswerZero) {
    const auto out = Philox4x32::bijection({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(out[0], 0x6627e8d5u);
    EXPECT_EQ(out[1], 0xe169c58du);
    EXPECT_EQ(out[2], 0xbc57ac4cu);
    EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerOnes) {
    const auto out = Philox4x32::bijection({~0u, ~0u, ~0u, ~0u}, {~0u, ~0u});
    EXPECT_EQ(out[0], 0x408f276du);
    EXPECT_EQ(out[1], 0x41c83b0eu);
    EXPECT_EQ(out[2], 0xa20bc7c6u);
    EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(Philox, StreamsDifferAndRepeat) {
    Philox4x32 a(42, 0), b(42, 1), c(42, 0);
    int same = 0;
    for (int i = 0; i < 100; ++i) {
        const auto x = a(), y = b(), z = c();
        EXPECT_EQ(x, z);
        same += (x == y);
    }
    EXPECT_EQ(same, 0);
}

TEST(Philox, UniformMoments) {
    Philox4x32 g(7, 3);
    double s = 0, s2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = g.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        s += u;
        s2 += u * u;
    }
    EXPECT_NEAR(s / n, 0.5, 4 * std::sqrt(1.0 / 12 / n));
    EXPECT_NEAR(s2 / n, 1.0 / 3, 0.005);
}
