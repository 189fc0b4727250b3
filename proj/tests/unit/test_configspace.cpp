#include <gtest/gtest.h>

#include <cmath>
#include <spatlog/configspace.hpp>

using namespace spatlog;

namespace {
TruncatedFunction random_function(const SpacePtr& sp, Philox4x32& g, double lo = -1, double hi = 1) {
    return TruncatedFunction::from(sp, [&](Mask) { return lo + (hi - lo) * g.uniform(); });
}
}  // namespace

TEST(Configuration, RejectsOutsideAndDuplicates) {
    EXPECT_THROW(Configuration(1.0, 1, {{1.5, 0}}), InvalidArgument);
    EXPECT_THROW(Configuration(1.0, 1, {{0.2, 0}, {0.2, 0}}), InvalidArgument);
    const Configuration c(1.0, 1, {{0.1, 0}, {0.3, 0}});
    EXPECT_EQ(c.without(0).size(), 1u);
}

TEST(Energy, Examples) {
    const auto a = Kernel::exponential(1, 1.0, 1.0).with_cutoff(10);
    const Configuration eta(100, 1, {{1, 0}, {3, 0}});
    EXPECT_EQ(energy(a, {0, 0}, Configuration(100, 1)), 0.0);
    EXPECT_NEAR(energy(a, {0, 0}, eta), std::exp(-1.0) + std::exp(-3.0), 1e-12);
    const auto a4 = Kernel::exponential(1, 1.0, 1.0).with_cutoff(2);
    EXPECT_NEAR(energy(a4, {0, 0}, Configuration(4, 1, {{1, 0}, {3, 0}})), 2 * std::exp(-1.0), 1e-12);

    ModelParams p{0.1, Kernel::zero(1), a, 100, 1};
    const auto e = energy_total(Configuration(100, 1, {{0, 0}, {1, 0}, {3, 0}}), p);
    const double em = 2 * (std::exp(-1.0) + std::exp(-2.0) + std::exp(-3.0));
    EXPECT_NEAR(e.competition, em, 1e-12);
    EXPECT_NEAR(e.total, em + 0.3, 1e-12);
    const auto e0 = energy_total(Configuration(100, 1), p);
    EXPECT_EQ(e0.competition, 0.0);
    EXPECT_EQ(e0.total, 0.0);
    EXPECT_EQ(e0.xi, 0.0);
    ModelParams p1{0.3, Kernel::tophat(1, 0.5, 1), a, 100, 1};
    const auto e1 = energy_total(Configuration(100, 1, {{5, 0}}), p1);
    EXPECT_EQ(e1.competition, 0.0);
    EXPECT_DOUBLE_EQ(e1.total, 0.3);
    EXPECT_DOUBLE_EQ(e1.xi, 0.3 + 1.0);
}

TEST(SiteLattice, Uniform) {
    const auto l1 = SiteLattice::uniform(2.0, 4, 1);
    EXPECT_EQ(l1.size(), 4);
    EXPECT_DOUBLE_EQ(l1.v(), 0.5);
    const auto l2 = SiteLattice::uniform(3.0, 3, 2);
    EXPECT_EQ(l2.size(), 9);
    EXPECT_DOUBLE_EQ(l2.v(), 1.0);
    EXPECT_DOUBLE_EQ(l2.distance(0, 2), 1.0);  // wraps around
}

TEST(SubsetSpace, Enumeration) {
    const SubsetSpace s(5, 3);
    EXPECT_EQ(s.size(), 1u + 5 + 10 + 10);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s.index(s.mask(i)), static_cast<std::int64_t>(i));
    EXPECT_EQ(s.index(0b1111), -1);
    for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LE(popcount(s.mask(i - 1)), popcount(s.mask(i)));
    EXPECT_THROW(SubsetSpace(3, 4), InvalidTruncation);
}

TEST(LpIntegral, Examples) {
    const auto s2 = make_space(2, 2);
    EXPECT_DOUBLE_EQ(lp_integral(TruncatedFunction::from(s2, [](Mask) { return 1.0; }), 0.5), 2.25);
    EXPECT_DOUBLE_EQ(lp_integral(TruncatedFunction::from(s2, [](Mask m) { return m == 0 ? 1.0 : 0.0; }), 0.5), 1.0);
    const auto s3 = make_space(3, 3);
    const double v = lp_integral(TruncatedFunction::from(s3, [](Mask m) { return std::pow(2.0, popcount(m)); }), 0.2);
    EXPECT_NEAR(v, 2.744, 1e-12);
}

TEST(KTransform, Examples) {
    const auto sp = make_space(2, 2);
    TruncatedFunction G(sp);
    G.set(0, 1.0);
    const auto K1 = k_transform(G);
    for (std::size_t i = 0; i < K1.size(); ++i) EXPECT_EQ(K1[i], 1.0);
    G.set(0b01, 2.0);
    G.set(0b10, 3.0);
    EXPECT_EQ(k_transform(G).at(0b11), 6.0);

    const auto one = TruncatedFunction::from(make_space(3, 3), [](Mask) { return 1.0; });
    const auto inv = k_inverse(one);
    for (std::size_t i = 0; i < inv.size(); ++i) EXPECT_EQ(inv[i], inv.space()->mask(i) == 0 ? 1.0 : 0.0);

    const auto F = TruncatedFunction::from(make_space(4, 3), [](Mask m) { return std::pow(3.0, popcount(m)); });
    const auto Gc = k_inverse(F);
    for (std::size_t i = 0; i < Gc.size(); ++i)
        EXPECT_NEAR(Gc[i], std::pow(2.0, popcount(Gc.space()->mask(i))), 1e-12);
}

TEST(KTransform, BruteForceAndInversion) {
    Philox4x32 g(2, 0);
    const auto sp = make_space(4, 4);
    for (int rep = 0; rep < 20; ++rep) {
        const auto G = random_function(sp, g);
        const auto KG = k_transform(G);
        for (std::size_t i = 0; i < sp->size(); ++i) {
            double acc = 0;
            for (std::size_t j = 0; j < sp->size(); ++j)
                if ((sp->mask(j) & ~sp->mask(i)) == 0) acc += G[j];
            EXPECT_NEAR(KG[i], acc, 1e-12);
        }
        const auto back = k_inverse(KG);
        for (std::size_t i = 0; i < sp->size(); ++i) EXPECT_NEAR(back[i], G[i], 1e-12);
    }
}

TEST(KTransform, PositivityPreserving) {
    Philox4x32 g(3, 0);
    const auto sp = make_space(5, 5);
    for (int rep = 0; rep < 100; ++rep) {
        const auto KG = k_transform(random_function(sp, g, 0, 1));
        EXPECT_GE(KG.values().minCoeff(), 0.0);
    }
}

TEST(Pairing, Examples) {
    const auto sp = make_space(2, 2);
    const auto one = TruncatedFunction::from(sp, [](Mask) { return 1.0; });
    EXPECT_DOUBLE_EQ(pairing(one, one, 0.5), 2.25);
    Philox4x32 g(4, 0);
    const auto k = random_function(sp, g);
    const auto delta = TruncatedFunction::from(sp, [](Mask m) { return m == 0 ? 1.0 : 0.0; });
    EXPECT_DOUBLE_EQ(pairing(delta, k, 0.5), k.at(0));
    const auto G = random_function(sp, g);
    TruncatedFunction prod(sp, G.values().cwiseProduct(k.values()));
    EXPECT_NEAR(pairing(G, k, 0.5), lp_integral(prod, 0.5), 1e-14);
}

TEST(IntegrationRule, DiscreteIdentity) {
    // Σ_η Σ_{ξ⊆η} H(ξ, η∖ξ) v^{|η|} = Σ_ξ Σ_{η∩ξ=∅} H(ξ, η) v^{|ξ|+|η|}
    Philox4x32 g(6, 0);
    const int M = 5;
    const double v = 0.37;
    std::vector<double> H(1u << (2 * M));
    for (auto& h : H) h = g.uniform() - 0.5;
    auto h = [&](Mask a, Mask b) { return H[(a << M) | b]; };
    double lhs = 0, rhs = 0;
    for (Mask eta = 0; eta < (1u << M); ++eta)
        for (Mask xi = eta;; xi = (xi - 1) & eta) {
            lhs += h(xi, eta & ~xi) * std::pow(v, popcount(eta));
            if (xi == 0) break;
        }
    for (Mask xi = 0; xi < (1u << M); ++xi)
        for (Mask eta = 0; eta < (1u << M); ++eta)
            if ((eta & xi) == 0) rhs += h(xi, eta) * std::pow(v, popcount(xi) + popcount(eta));
    EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(Norms, Examples) {
    const auto sp = make_space(3, 3);
    const auto delta = TruncatedFunction::from(sp, [](Mask m) { return m == 0 ? 1.0 : 0.0; });
    EXPECT_DOUBLE_EQ(norm_G(delta, 0.3, 1.7), 1.0);
    const double c = 0.6;
    const auto kc = TruncatedFunction::from(sp, [c](Mask m) { return std::pow(c, popcount(m)); });
    EXPECT_NEAR(norm_K(kc, -std::log(c)), 1.0, 1e-14);
    Philox4x32 g(8, 0);
    const auto G = random_function(sp, g);
    TruncatedFunction absG(sp, G.values().cwiseAbs());
    EXPECT_NEAR(norm_G(G, 0.3, 0.0), lp_integral(absG, 0.3), 1e-14);
    // monotone embeddings
    for (double a1 : {-1.0, 0.0, 0.5})
        for (double a2 : {-0.5, 0.7, 1.0})
            if (a1 < a2) {
                EXPECT_LE(norm_G(G, 0.3, a2), norm_G(G, 0.3, a1));
                EXPECT_LE(norm_K(G, a1), norm_K(G, a2));
            }
}

TEST(TruncatedFunction, JsonRoundTrip) {
    Philox4x32 g(9, 0);
    const auto sp = make_space(4, 3);
    const auto f = random_function(sp, g);
    const auto back = truncated_function_from_json(to_json(f));
    ASSERT_EQ(back.size(), f.size());
    for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(back.at(sp->mask(i)), f[i]);
}
