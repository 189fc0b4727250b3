#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <spatlog/simulator.hpp>

using namespace spatlog;

namespace {
struct Stats {
    double mean, var;
};
Stats count_stats(const std::vector<Trajectory>& trs, std::size_t k) {
    double s = 0, s2 = 0;
    for (const auto& tr : trs) {
        const double n = static_cast<double>(tr.snapshots[k].points.size());
        s += n;
        s2 += n * n;
    }
    const double n = static_cast<double>(trs.size());
    const double mean = s / n;
    return {mean, (s2 - n * mean * mean) / (n - 1)};
}

SimConfig explicit_config(ModelParams p, int n0, double t_max, int replicas, std::uint64_t seed = 1) {
    SimConfig sc;
    sc.model = std::move(p);
    sc.t_max = t_max;
    sc.replicas = replicas;
    sc.seed = seed;
    sc.initial.kind = InitialCondition::Kind::explicit_points;
    for (int i = 0; i < n0; ++i) sc.initial.points.push_back({sc.model.L * (i + 0.5) / n0, 0.0});
    return sc;
}
}  // namespace

TEST(Simulator, InitEmptyAndExplicit) {
    SimConfig sc;
    sc.model = make_model(0.1, Kernel::tophat(1, 0.5, 1), Kernel::tophat(1, 1, 1), 10, 1);
    sc.initial.kappa = 0.0;
    const auto s = init(sc);
    EXPECT_EQ(s.size(), 0u);
    EXPECT_EQ(s.death_total(), 0.0);
    EXPECT_EQ(s.birth_total(), 0.0);

    sc.model = make_model(0.0, Kernel::zero(1), Kernel::tophat(1, 1, 1), 10, 1);
    sc.initial.kind = InitialCondition::Kind::explicit_points;
    sc.initial.points = {{0.0, 0}, {0.5, 0}};
    const auto s2 = init(sc);
    ASSERT_EQ(s2.size(), 2u);
    EXPECT_DOUBLE_EQ(s2.death_rates()[0], 1.0);
    EXPECT_DOUBLE_EQ(s2.death_rates()[1], 1.0);
    sc.initial.points = {{10.5, 0}};
    EXPECT_THROW(init(sc), InvalidArgument);
}

TEST(Simulator, PoissonInitialLaw) {
    SimConfig sc;
    sc.model = make_model(0.0, Kernel::zero(1), Kernel::zero(1), 100, 1);
    sc.initial.kappa = 1.0;
    sc.replicas = 1000;
    const auto trs = run(sc);
    const auto st = count_stats(trs, 0);
    EXPECT_NEAR(st.mean, 100.0, 3 * std::sqrt(100.0 / 1000));
    EXPECT_NEAR(st.var, 100.0, 3 * 100.0 * std::sqrt(2.0 / 999));
}

TEST(Simulator, PureDeathThinning) {
    const auto sc = explicit_config(make_model(0.5, Kernel::zero(1), Kernel::zero(1), 100, 1), 1000, 2.0, 200);
    const auto trs = run(sc);
    const double p = std::exp(-1.0);
    const auto st = count_stats(trs, 1);
    EXPECT_NEAR(st.mean, 1000 * p, 3 * std::sqrt(1000 * p * (1 - p) / 200));
}

TEST(Simulator, YuleMean) {
    auto sc = explicit_config(make_model(0.0, Kernel::tophat(1, 0.1, 1.0), Kernel::zero(1), 100, 1), 50, 5.0, 400);
    const auto trs = run(sc);
    const auto st = count_stats(trs, 1);
    EXPECT_NEAR(st.mean, 50 * std::exp(1.0), 3 * std::sqrt(st.var / 400));
}

TEST(Simulator, CompetitionOnlyDecreasesToOne) {
    auto sc = explicit_config(make_model(0.0, Kernel::zero(1), Kernel::tophat(1, 1.0, 2.0), 10, 1), 20, 50.0, 5);
    sc.snapshot_times = {0, 10, 20, 30, 40, 50};
    for (const auto& tr : run(sc)) {
        for (std::size_t k = 1; k < tr.snapshots.size(); ++k)
            EXPECT_LE(tr.snapshots[k].points.size(), tr.snapshots[k - 1].points.size());
        EXPECT_GE(tr.snapshots.back().points.size(), 1u);
        EXPECT_EQ(tr.births, 0u);
    }
}

TEST(Simulator, ZeroHorizonSingleSnapshot) {
    SimConfig sc;
    sc.model = make_model(0.1, Kernel::tophat(1, 0.5, 1), Kernel::tophat(1, 1, 1), 10, 1);
    sc.initial.kappa = 2.0;
    sc.t_max = 0.0;
    const auto trs = run(sc);
    ASSERT_EQ(trs[0].snapshots.size(), 1u);
    EXPECT_EQ(trs[0].snapshots[0].points, init(sc).points());
}

TEST(Simulator, DeterministicAcrossThreadCounts) {
    SimConfig sc;
    sc.model = make_model(0.2, Kernel::tophat(2, 0.3, 0.5), Kernel::tophat(2, 0.6, 0.5), 8, 2);
    sc.initial.kappa = 1.0;
    sc.t_max = 5.0;
    sc.replicas = 6;
    sc.seed = 99;
    sc.threads = 1;
    const auto a = run(sc);
    sc.threads = 3;
    const auto b = run(sc);
    for (int r = 0; r < 6; ++r) {
        EXPECT_EQ(a[r].events, b[r].events);
        EXPECT_EQ(a[r].snapshots.back().points, b[r].snapshots.back().points);
    }
}

TEST(Simulator, RateCoherence) {
    for (int d : {1, 2}) {
        const double L = d == 1 ? 200 : 20;
        const auto p = make_model(0.1, Kernel::gaussian(d, 0.4, 0.9), Kernel::exponential(d, 3.0, 0.5, 1.5), L, d);
        SimState s(p, 5, 0);
        s.initialize({InitialCondition::Kind::poisson, 1.5, {}});
        double worst = 0;
        for (int e = 1; e <= 100000 && s.size() > 0; ++e) {
            s.step();
            if (e % 1000 == 0) {
                const double ref = s.recompute_death_total();
                worst = std::max(worst, std::abs(s.death_total() - ref) / ref);
                ASSERT_TRUE(s.cells_consistent());
            }
        }
        EXPECT_LT(worst, 1e-8) << "d=" << d;
        for (std::size_t i = 0; i < s.size(); ++i)
            EXPECT_NEAR(s.death_rates()[i], s.recompute_rate(i), 1e-9 * s.recompute_rate(i));
    }
}

TEST(Simulator, InsertRemoveRestoresRates) {
    const auto p = make_model(0.1, Kernel::zero(2), Kernel::gaussian(2, 0.5), 10, 2);
    SimState s(p, 1, 0);
    s.initialize({InitialCondition::Kind::poisson, 2.0, {}});
    const auto before = s.death_rates();
    const double D0 = s.death_total();
    s.insert({3.3, 4.4});
    s.remove(s.size() - 1);
    ASSERT_EQ(s.death_rates().size(), before.size());
    for (std::size_t i = 0; i < before.size(); ++i) EXPECT_NEAR(s.death_rates()[i], before[i], 1e-12);
    EXPECT_NEAR(s.death_total(), D0, 1e-12);
}

TEST(Simulator, TranslationInvariance) {
    const auto p = make_model(0.1, Kernel::zero(2), Kernel::exponential(2, 2.0, 1.0), 6, 2);
    std::vector<Point> pts;
    Philox4x32 g(7, 0);
    for (int i = 0; i < 60; ++i) pts.push_back({6 * g.uniform(), 6 * g.uniform()});
    SimState a(p, 1, 0), b(p, 1, 0);
    a.initialize({InitialCondition::Kind::explicit_points, 0, pts});
    for (auto& x : pts) x = {wrap(x[0] + 2.345, 6), wrap(x[1] + 4.1, 6)};
    b.initialize({InitialCondition::Kind::explicit_points, 0, pts});
    for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_NEAR(a.death_rates()[i], b.death_rates()[i], 1e-12);
}

TEST(Simulator, DeathSelectionFollowsRates) {
    // a pair with rates {1, 1} and a triple with rates {2, 2, 2}
    const auto p = make_model(0.0, Kernel::zero(1), Kernel::tophat(1, 1.0, 0.5), 20, 1);
    int second = 0;
    const int n = 20000;
    for (int r = 0; r < n; ++r) {
        SimState s(p, 3, static_cast<std::uint64_t>(r));
        s.initialize({InitialCondition::Kind::explicit_points, 0, {{1.0, 0}, {1.2, 0}, {10.0, 0}, {10.1, 0}, {10.2, 0}}});
        const auto ev = s.step();
        second += ev.where[0] > 5.0;
    }
    EXPECT_NEAR(second / double(n), 0.75, 3 * std::sqrt(0.75 * 0.25 / n));
}

TEST(Simulator, ExtinctionEmitsEmptySnapshots) {
    auto sc = explicit_config(make_model(5.0, Kernel::zero(1), Kernel::zero(1), 10, 1), 3, 10.0, 3);
    sc.snapshot_times = {0, 5, 10};
    for (const auto& tr : run(sc)) {
        ASSERT_EQ(tr.snapshots.size(), 3u);
        EXPECT_TRUE(tr.snapshots[2].points.empty());
    }
}
