#include <gtest/gtest.h>

#include <cmath>
#include <spatlog/ovcyannikov.hpp>

using namespace spatlog;

namespace {
LatticeModel tophat_model(int M, double L, double theta) {
    const auto am = Kernel::tophat(1, 0.6, 1.0);
    return LatticeModel(SiteLattice::uniform(L, M, 1), 0.5, am.scaled(theta), am);
}
}  // namespace

TEST(ExistenceTime, Examples) {
    EXPECT_NEAR(existence_time(-1, 0, 1.0, 1.0), 1.0 / (1.0 + M_E), 1e-12);
    EXPECT_NEAR(existence_time(0, 1, 2.0, 0.0), 0.5, 1e-12);
    EXPECT_NEAR(existence_time(-2, 0, 1.0, 1.0) / existence_time(-2, -1, 1.0, 1.0), 2.0, 1e-12);
    EXPECT_TRUE(std::isinf(existence_time(0, 1, 0.0, 0.0)));
    EXPECT_THROW(existence_time(1, 0, 1.0, 1.0), InvalidArgument);
    const ModelParams p{0.0, Kernel::tophat(1, 0.5, 1.0), Kernel::tophat(1, 0.5, 1.0), 10, 1};
    EXPECT_NEAR(existence_time(-1, 0, p), 1.0 / (1.0 + M_E), 1e-12);
}

TEST(Schedule, Ladder) {
    const auto s = make_schedule(-0.5, 0.0, -0.1, 4, 1.0, 1.0);
    EXPECT_DOUBLE_EQ(s.alpha_l(0), -0.5);
    EXPECT_NEAR(s.alpha_l(4), -0.1, 1e-15);
    EXPECT_NEAR(s.T, s.T_star * 0.4 / 0.5, 1e-15);
    EXPECT_THROW(make_schedule(0, 1, 2, 3, 1, 1), InvalidArgument);
}

TEST(Picard, ZeroBGivesSemigroup) {
    const auto mdl = tophat_model(3, 3.0, 0.5);
    const auto sp = make_space(3, 3);
    const auto A = build_operator(mdl, sp, Role::A);
    const TruncatedOperator Z{Role::B, sp, mdl.v(), Eigen::MatrixXd::Zero(A.matrix.rows(), A.matrix.cols())};
    Philox4x32 g(1, 0);
    const auto G0 = TruncatedFunction::from(sp, [&](Mask) { return g.uniform(); });
    const auto s = make_schedule(-0.5, 0, 0, 4, mdl);
    const auto it = picard_iterate(A, Z, G0, s, 0.5 * s.T);
    const auto ref = semigroup_apply(A, 0.5 * s.T, G0);
    for (const auto& x : it) EXPECT_LT((x.values() - ref.values()).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Picard, ConstantIntegrandWhenAIsZero) {
    const auto mdl = tophat_model(3, 3.0, 0.5);
    const auto sp = make_space(3, 3);
    const auto B = build_operator(mdl, sp, Role::B);
    const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(B.matrix.rows(), B.matrix.cols());
    Philox4x32 g(2, 0);
    const Eigen::VectorXd x0 = Eigen::VectorXd::NullaryExpr(B.matrix.rows(), [&] { return g.uniform(); });
    const double t = 0.3;
    const auto res = picard_iterate_matrix(Z, B.matrix, x0, t, 1, 8, false);
    EXPECT_LT((res.iterates[1] - (x0 + t * B.matrix * x0)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Picard, ConvergesToFullExponential) {
    const auto mdl = tophat_model(4, 3.0, 0.5);
    const auto sp = make_space(4, 4);
    const auto A = build_operator(mdl, sp, Role::A), B = build_operator(mdl, sp, Role::B);
    Philox4x32 g(3, 0);
    const Eigen::VectorXd x0 = Eigen::VectorXd::NullaryExpr(A.matrix.rows(), [&] { return 2 * g.uniform() - 1; });
    const double t = 0.4;
    const auto res = picard_iterate_matrix(A.matrix, B.matrix, x0, t, 12, 64, true);
    const Eigen::VectorXd exact = expm(t * (A.matrix + B.matrix)) * x0;
    EXPECT_LT((res.iterates.back() - exact).cwiseAbs().maxCoeff(), 1e-6);
    // every iterate matches the partial Dyson sum
    const auto terms = dyson_terms(A.matrix, B.matrix, x0, t, 12);
    Eigen::VectorXd partial = Eigen::VectorXd::Zero(x0.size());
    for (int l = 0; l <= 12; ++l) {
        partial += terms[static_cast<std::size_t>(l)];
        EXPECT_LT((res.iterates[static_cast<std::size_t>(l)] - partial).cwiseAbs().maxCoeff(), 1e-8) << "l=" << l;
    }
    for (double e : res.quadrature_error) EXPECT_LT(e, 1e-8);
}

TEST(Picard, RefusesBeyondGuaranteedInterval) {
    const auto mdl = tophat_model(3, 3.0, 0.5);
    const auto sp = make_space(3, 3);
    const auto A = build_operator(mdl, sp, Role::A), B = build_operator(mdl, sp, Role::B);
    const auto G0 = TruncatedFunction::from(sp, [](Mask) { return 1.0; });
    const auto s = make_schedule(-0.5, 0, 0, 3, mdl);
    EXPECT_THROW(picard_iterate(A, B, G0, s, s.T), InvalidArgument);
    EXPECT_NO_THROW(picard_iterate(A, B, G0, s, 1.5 * s.T, 32, true));
}

TEST(OperatorNorms, ExactDominatesSampledAndBound) {
    const auto mdl = tophat_model(5, 4.0, 0.5);
    const auto sp = make_space(5, 4);
    const auto B = build_operator(mdl, sp, Role::B), Bd = build_operator(mdl, sp, Role::Bdelta);
    Philox4x32 g(4, 0);
    for (auto [a0, a1] : {std::pair{-1.0, -0.5}, std::pair{-0.5, -0.4}, std::pair{0.0, 0.3}}) {
        const double ex = operator_norm_G(B.matrix, *sp, mdl.v(), a0, a1);
        EXPECT_LE(sampled_norm_G(B.matrix, sp, mdl.v(), a0, a1, 200, g), ex * (1 + 1e-12));
        EXPECT_LE(ex, b_norm_bound(mdl.mass_plus(), mdl.mass_competition(), a0, a1) * (1 + 1e-12));
        const double exk = operator_norm_K(Bd.matrix, *sp, a1, a0);
        EXPECT_LE(sampled_norm_K(Bd.matrix, sp, a1, a0, 200, g), exk * (1 + 1e-12));
        EXPECT_LE(exk, b_norm_bound(mdl.mass_plus(), mdl.mass_competition(), a1, a0) * (1 + 1e-12));
    }
}

TEST(Certificate, TrivialCases) {
    // without interaction kernels B vanishes and every difference is zero
    const LatticeModel death(SiteLattice::uniform(3.0, 4, 1), 0.5, Kernel::zero(1), Kernel::zero(1));
    const auto s = make_schedule(-0.5, 0, 0, 3, 1.0, 1.0);
    const auto rep = verify_bounds(s, death, 3);
    for (const auto& c : rep.checks)
        if (c.name.rfind("G_cauchy", 0) == 0 || c.name.rfind("k_cauchy", 0) == 0) {
            EXPECT_EQ(c.value, 0.0) << c.name;
        }
    CertificateOptions o;
    o.t_fraction = 0.0;
    const auto mdl = tophat_model(4, 3.0, 0.5);
    const auto rep0 = verify_bounds(make_schedule(-0.5, 0, 0, 3, mdl), mdl, 3, o);
    for (const auto& c : rep0.checks)
        if (c.name.find("cauchy") != std::string::npos) {
            EXPECT_EQ(c.value, 0.0) << c.name;
        }
}

TEST(Certificate, TophatHalfTheta) {
    const auto mdl = tophat_model(4, 3.0, 0.5);
    const auto s = make_schedule(-0.5, 0.0, 0.0, 5, mdl);
    const auto rep = verify_bounds(s, mdl, 3);
    for (const auto& c : rep.checks) EXPECT_TRUE(c.pass) << c.name << " value=" << c.value << " bound=" << c.bound;
}

TEST(SubPoissonian, TruncatedPropagation) {
    const auto mdl = tophat_model(4, 3.0, 0.5);
    const auto sp = make_space(4, 4);
    const double alpha_high = 0.0, alpha_low = -0.5;
    const double C = 0.9 * std::exp(-alpha_high);
    const auto k0 = poisson_correlation(sp, C);
    const double Ts = existence_time(alpha_low, alpha_high, mdl);
    std::vector<double> times;
    for (int i = 0; i < 10; ++i) times.push_back(0.099 * i * Ts);
    EXPECT_LE(sub_poissonian_ratio(k0, mdl, alpha_low, alpha_high, times), 1.0 + 1e-12);
}
