#include <gtest/gtest.h>

#include <cmath>
#include <spatlog/estimators.hpp>
#include <spatlog/simulator.hpp>

using namespace spatlog;

namespace {
Ensemble poisson_ensemble(double kappa, double L, int d, int replicas, std::uint64_t seed) {
    SimConfig sc;
    sc.model = make_model(0.0, Kernel::zero(d), Kernel::zero(d), L, d);
    sc.initial.kappa = kappa;
    sc.replicas = replicas;
    sc.seed = seed;
    return ensemble_at(run(sc), 0);
}
std::vector<double> uniform_edges(double rmax, int n) {
    std::vector<double> e;
    for (int i = 0; i <= n; ++i) e.push_back(rmax * i / n);
    return e;
}
}  // namespace

TEST(Estimators, K1) {
    const Ensemble empty(5);
    const auto z = estimate_k1(empty, 10, 1);
    EXPECT_EQ(z.value, 0.0);
    EXPECT_EQ(z.stderr_, 0.0);
    const auto p = estimate_k1(poisson_ensemble(1.0, 50, 1, 500, 1), 50, 1);
    EXPECT_NEAR(p.value, 1.0, 3 * std::sqrt(1.0 / 50) / std::sqrt(500.0));
    Ensemble one(1, std::vector<Point>(20, Point{0, 0}));
    const auto s = estimate_k1(one, 10, 1);
    EXPECT_DOUBLE_EQ(s.value, 2.0);
    EXPECT_FALSE(s.stderr_defined);
    EXPECT_THROW(estimate_k1(Ensemble{}, 10, 1), InvalidArgument);
}

TEST(Estimators, K2HandCount) {
    const Ensemble e{{{0.0, 0}, {0.5, 0}}};
    const auto est = estimate_k2_radial(e, {0.4, 0.6}, 10, 1);
    EXPECT_DOUBLE_EQ(est.k2[0], 0.5);
    const auto z = estimate_k2_radial(Ensemble(3), uniform_edges(2, 4), 10, 1);
    for (double v : z.k2) EXPECT_EQ(v, 0.0);
    EXPECT_THROW(estimate_k2_radial(e, {0.0, 6.0}, 10, 1), InvalidArgument);
    EXPECT_THROW(estimate_k2_radial(e, {0.5, 0.5}, 10, 1), InvalidArgument);
}

TEST(Estimators, PoissonCalibration) {
    for (int d : {1, 2}) {
        const double L = d == 1 ? 50 : 12;
        const auto ens = poisson_ensemble(1.0, L, d, 500, 2 + d);
        const auto est = estimate_k2_radial(ens, uniform_edges(2.0, 8), L, d);
        const double k1sq = est.k1.value * est.k1.value;
        for (std::size_t b = 0; b < est.k2.size(); ++b)
            EXPECT_NEAR(est.k2[b] / k1sq, 1.0, 3 * est.k2_stderr[b] / k1sq) << "d=" << d << " bin " << b;
        const auto ci = cluster_index(ens, uniform_edges(2.0, 8), 1.0, L, d);
        EXPECT_NEAR(ci.value, 1.0, 3 * ci.stderr_);
        // pooled and averaged forms agree for equal-width bins in d = 1
        if (d == 1) {
            EXPECT_NEAR(cluster_index(est, 1.0).value, ci.value, 1e-12);
        }
    }
}

TEST(Estimators, StderrShrinksWithReplicas) {
    const auto a = estimate_k2_radial(poisson_ensemble(1.0, 30, 1, 400, 11), uniform_edges(1, 2), 30, 1);
    const auto b = estimate_k2_radial(poisson_ensemble(1.0, 30, 1, 800, 12), uniform_edges(1, 2), 30, 1);
    EXPECT_NEAR(b.k2_stderr[0] / a.k2_stderr[0], 1 / std::sqrt(2.0), 0.2 / std::sqrt(2.0));
}

TEST(Estimators, SymmetryUnderCoordinateSwap) {
    auto ens = poisson_ensemble(1.0, 10, 2, 20, 13);
    const auto a = estimate_k2_radial(ens, uniform_edges(3, 6), 10, 2);
    for (auto& pts : ens)
        for (auto& x : pts) std::swap(x[0], x[1]);
    const auto b = estimate_k2_radial(ens, uniform_edges(3, 6), 10, 2);
    for (std::size_t i = 0; i < a.k2.size(); ++i) EXPECT_EQ(a.k2[i], b.k2[i]);
}

TEST(Estimators, ClusterIndexTightPairs) {
    Ensemble ens;
    for (int r = 0; r < 10; ++r) ens.push_back({{5.0, 0}, {5.01, 0}});
    const auto ci = cluster_index(ens, {0.0, 0.5}, 0.5, 100, 1);
    EXPECT_GT(ci.value, 10.0);
    EXPECT_FALSE(cluster_index(Ensemble(4), {0.0, 0.5}, 0.5, 100, 1).defined);
    EXPECT_THROW(cluster_index(ens, {0.0, 0.4}, 0.5, 100, 1), InvalidArgument);
}

TEST(Estimators, Dobrushin) {
    const Window w{{0, 0}, {5, 5}};
    EXPECT_DOUBLE_EQ(dobrushin_moment(Ensemble(7), 0.8, w, 20, 1).value, 1.0);
    const auto ens = poisson_ensemble(0.4, 20, 1, 2000, 21);
    EXPECT_DOUBLE_EQ(dobrushin_moment(ens, 0.0, w, 20, 1).value, 1.0);
    const double alpha = 0.3;
    const auto m = dobrushin_moment(ens, alpha, w, 20, 1);
    EXPECT_NEAR(m.value, std::exp(0.4 * 5 * (std::exp(alpha) - 1)), 3 * m.stderr_);
    // huge α stays finite on the log scale
    const auto big = dobrushin_moment(ens, 400.0, w, 20, 1);
    EXPECT_TRUE(std::isfinite(big.log_value));
}

TEST(Estimators, TripleMeasure) {
    EXPECT_DOUBLE_EQ(triple_measure(1.0, 1), 3.0);
    // 2D: Monte-Carlo reference
    Philox4x32 g(1, 0);
    int hit = 0;
    const int n = 400000;
    for (int i = 0; i < n; ++i) {
        const double y0 = 2 * g.uniform() - 1, y1 = 2 * g.uniform() - 1, z0 = 2 * g.uniform() - 1, z1 = 2 * g.uniform() - 1;
        hit += (y0 * y0 + y1 * y1 < 1) && (z0 * z0 + z1 * z1 < 1) && ((y0 - z0) * (y0 - z0) + (y1 - z1) * (y1 - z1) < 1);
    }
    const double p = double(hit) / n;
    EXPECT_NEAR(triple_measure(1.0, 2), 16 * p, 16 * 4 * std::sqrt(p * (1 - p) / n));
}

TEST(Estimators, K3PoissonBaseline) {
    const auto ens = poisson_ensemble(1.0, 40, 1, 400, 31);
    const auto k3 = estimate_k3_triplet(ens, 1.0, 40, 1);
    EXPECT_NEAR(k3.value, 1.0, 3 * k3.stderr_);
}
