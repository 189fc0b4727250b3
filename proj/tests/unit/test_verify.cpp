#include <gtest/gtest.h>

#include "spatlog/verify.hpp"

using namespace spatlog;

TEST(Verify, DefaultFixturePassesEveryCheck) {
    const VerifyConfig c;
    const auto rep = verify_all(c);
    for (const auto& ch : rep.checks) EXPECT_TRUE(ch.pass) << ch.name << " value " << ch.value << " bound " << ch.bound;
    EXPECT_GE(rep.checks.size(), 40u);
    const auto j = rep.to_json();
    for (const char* name : {"duality_Lhat_Ldelta_M5", "duality_L_Ldagger_M3", "ldagger_integral_M4",
                             "semigroup_mass_M5_t1", "semigroup_positivity_M3_t0.1", "k_transform_inversion",
                             "k_transform_positivity", "local_density_t1", "theta_condition", "G_cauchy_l5",
                             "k_cauchy_l5", "existence_time_unit_masses"})
        EXPECT_TRUE(j.contains(name)) << name;
}

TEST(Verify, DualityResidualsAreAtRoundoff) {
    VerifyConfig c;
    c.duality_sites = {4};
    c.duality_draws = 20;
    const auto rep = verify_duality(c);
    ASSERT_EQ(rep.checks.size(), 2u);
    for (const auto& ch : rep.checks) EXPECT_LT(ch.value, 1e-13) << ch.name;
}

TEST(Verify, TwoDimensionalLatticesPass) {
    VerifyConfig c;
    c.model = make_model(0.5, Kernel::tophat(2, 0.1, 1.0), Kernel::tophat(2, 0.2, 1.0), 3.0, 2);
    c.duality_sites = {2};
    c.duality_draws = 10;
    c.local_sites = 2;
    c.certificate = false;
    const auto rep = verify_all(c);
    for (const auto& ch : rep.checks) EXPECT_TRUE(ch.pass) << ch.name << " " << ch.value;
}

TEST(Verify, ThetaViolationIsReportedNotHidden) {
    VerifyConfig c;
    c.model = make_model(0.5, Kernel::tophat(1, 0.6, 1.0), Kernel::tophat(1, 0.6, 1.0), 3.0, 1);
    c.alpha_high = 1.0;
    const auto rep = verify_certificate(c);
    bool found = false;
    for (const auto& ch : rep.checks)
        if (ch.name == "theta_condition") {
            found = true;
            EXPECT_FALSE(ch.pass);
            EXPECT_GT(ch.value, 1.0);
        }
    EXPECT_TRUE(found);
    EXPECT_FALSE(rep.all_pass());
}

TEST(Verify, ExistenceTimeValues) {
    const auto rep = verify_existence_time();
    ASSERT_EQ(rep.checks.size(), 4u);
    EXPECT_TRUE(rep.all_pass());
    EXPECT_NEAR(existence_time(-1.0, 0.0, 1.0, 1.0), 0.268941, 5e-7);
}
