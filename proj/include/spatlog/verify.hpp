#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "configspace.hpp"
#include "kernels.hpp"
#include "operators.hpp"
#include "ovcyannikov.hpp"
#include "report.hpp"
#include "rng.hpp"

namespace spatlog {

/// Settings of the lattice verification battery. Lattices are uniform with
/// `sites` cells per side on the model box; the model is evaluated with the
/// exclusion site rule.
struct VerifyConfig {
    ModelParams model = make_model(0.5, Kernel::tophat(1, 0.3, 1.0), Kernel::tophat(1, 0.6, 1.0), 3.0, 1);
    std::uint64_t seed = 1;

    std::vector<int> duality_sites{3, 4, 5};
    int duality_draws = 100;
    double duality_tol = 1e-10;

    std::vector<double> stochastic_times{0.1, 1.0};
    double conservation_tol = 1e-12;

    int ktransform_sites = 5;
    int ktransform_draws = 1000;

    int local_sites = 4;
    std::vector<double> local_times{0.25, 0.5, 1.0};
    double local_intensity = 0.3;
    double local_tol = 1e-8;

    bool certificate = true;
    int certificate_sites = 4;
    int certificate_cap = 3;
    double alpha_low = -0.5;
    double alpha_high = 0.0;
    CertificateOptions certificate_options{};

    bool existence_time_arithmetic = true;
};

namespace detail {

inline TruncatedFunction random_function(const SpacePtr& sp, Philox4x32& g, double lo, double hi) {
    return TruncatedFunction::from(sp, [&](Mask) { return lo + (hi - lo) * g.uniform(); });
}

inline LatticeModel verify_lattice(const VerifyConfig& c, int sites) {
    return LatticeModel(SiteLattice::uniform(c.model.L, sites, c.model.d), c.model);
}

}  // namespace detail

/// ⟨⟨L̂G, k⟩⟩ = ⟨⟨G, L^Δk⟩⟩ and ⟨⟨LF, R⟩⟩ = ⟨⟨F, L†R⟩⟩ on random draws, N = M.
inline Report verify_duality(const VerifyConfig& c) {
    Report rep;
    Philox4x32 g(c.seed, 11);
    for (int M : c.duality_sites) {
        const auto mdl = detail::verify_lattice(c, M);
        const int N = mdl.sites();
        const auto parts = build_Lhat(mdl, N);
        const auto sp = parts.A.space;
        const Eigen::MatrixXd lhat = parts.A.matrix + parts.B.matrix;
        const auto ld = build_Ldelta(mdl, N);
        const auto L = build_L(mdl, N);
        const auto Ld = build_Ldagger(mdl, N);
        double r1 = 0.0, r2 = 0.0;
        for (int i = 0; i < c.duality_draws; ++i) {
            const auto G = detail::random_function(sp, g, -1, 1), k = detail::random_function(sp, g, -1, 1);
            const auto F = detail::random_function(sp, g, -1, 1), R = detail::random_function(sp, g, -1, 1);
            const TruncatedFunction LG(sp, lhat * G.values());
            r1 = std::max(r1, std::abs(pairing(LG, k, mdl.v()) - pairing(G, ld.apply(k), mdl.v())));
            r2 = std::max(r2, std::abs(pairing(L.apply(F), R, mdl.v()) - pairing(F, Ld.apply(R), mdl.v())));
        }
        const std::string s = "_M" + std::to_string(M);
        rep.add_le("duality_Lhat_Ldelta" + s, r1, c.duality_tol);
        rep.add_le("duality_L_Ldagger" + s, r2, c.duality_tol);
    }
    return rep;
}

/// λ-integral of L†R vanishes; e^{tL†} keeps λ-mass and positivity (N = M).
inline Report verify_stochasticity(const VerifyConfig& c) {
    Report rep;
    Philox4x32 g(c.seed, 12);
    for (int M : c.duality_sites) {
        const auto mdl = detail::verify_lattice(c, M);
        const auto Ld = build_Ldagger(mdl, mdl.sites());
        const double v = mdl.v();
        double worst = 0.0;
        for (int i = 0; i < c.duality_draws; ++i)
            worst = std::max(worst, std::abs(lp_integral(Ld.apply(detail::random_function(Ld.space, g, -1, 1)), v)));
        const std::string s = "_M" + std::to_string(M);
        rep.add_le("ldagger_integral" + s, worst, c.conservation_tol);
        for (double t : c.stochastic_times) {
            const Eigen::MatrixXd S = expm(t * Ld.matrix);
            double mass = 0.0;
            for (int i = 0; i < 10; ++i) {
                const auto R = detail::random_function(Ld.space, g, 0, 1);
                const TruncatedFunction Rt(Ld.space, S * R.values());
                mass = std::max(mass, std::abs(lp_integral(Rt, v) - lp_integral(R, v)) / lp_integral(R, v));
            }
            char ts[32];
            std::snprintf(ts, sizeof ts, "_t%g", t);
            rep.add_le(std::string("semigroup_mass") + s + ts, mass, c.conservation_tol);
            const double neg = std::max(0.0, -S.minCoeff());
            rep.add_le(std::string("semigroup_positivity") + s + ts, neg, 1e-14, 0.0,
                       "largest negative entry of e^{tL-dagger}");
        }
    }
    return rep;
}

/// K⁻¹K = id and K G >= 0 for random G >= 0.
inline Report verify_k_transform(const VerifyConfig& c) {
    Report rep;
    Philox4x32 g(c.seed, 13);
    const auto sp = make_space(c.ktransform_sites, c.ktransform_sites);
    double inv = 0.0, neg = 0.0;
    for (int i = 0; i < c.ktransform_draws; ++i) {
        const auto G = detail::random_function(sp, g, 0, 1);
        const auto KG = k_transform(G);
        inv = std::max(inv, (k_inverse(KG).values() - G.values()).cwiseAbs().maxCoeff());
        neg = std::max(neg, -KG.values().minCoeff());
        const auto H = detail::random_function(sp, g, -1, 1);
        inv = std::max(inv, (k_transform(k_inverse(H)).values() - H.values()).cwiseAbs().maxCoeff());
    }
    rep.add_le("k_transform_inversion", inv, 1e-12);
    rep.add("k_transform_positivity", std::max(0.0, neg), 0.0, neg <= 0.0, "min of K G over nonnegative G, negated");
    return rep;
}

/// e^{tL†} of the local density against e^{tL^Δ} of the correlation function.
inline Report verify_local_density(const VerifyConfig& c) {
    Report rep;
    const auto mdl = detail::verify_lattice(c, c.local_sites);
    const auto sp = make_space(mdl.sites(), mdl.sites());
    const auto k0 = poisson_correlation(sp, c.local_intensity);
    for (double t : c.local_times) {
        const auto r = local_density_check(k0, mdl, t);
        char name[48];
        std::snprintf(name, sizeof name, "local_density_t%g", t);
        rep.add_le(name, r.residual, c.local_tol, 0.0, r.realizable ? "" : "initial density not realizable");
        if (!r.realizable) rep.checks.back().pass = false;
    }
    return rep;
}

inline Report verify_certificate(const VerifyConfig& c) {
    const auto mdl = detail::verify_lattice(c, c.certificate_sites);
    const auto sched = make_schedule(c.alpha_low, c.alpha_high, c.alpha_high, c.certificate_options.levels, mdl);
    return verify_bounds(sched, mdl, c.certificate_cap, c.certificate_options);
}

/// Existence time against hand-computed values.
inline Report verify_existence_time() {
    Report rep;
    auto add = [&](const char* name, double got, double want) {
        rep.add_le(name, std::abs(got - want), 1e-12);
    };
    add("existence_time_unit_masses", existence_time(-1.0, 0.0, 1.0, 1.0), 1.0 / (1.0 + M_E));
    add("existence_time_no_competition", existence_time(-1.0, 0.0, 2.0, 0.0), 0.5);
    add("existence_time_doubling", existence_time(-1.0, 1.0, 1.0, 1.0) / existence_time(-1.0, 0.0, 1.0, 1.0), 2.0);
    add("existence_time_shifted", existence_time(-0.5, 0.0, 0.3, 0.6), 0.5 / (0.3 + 0.6 * std::exp(0.5)));
    return rep;
}

/// The full battery.
inline Report verify_all(const VerifyConfig& c) {
    Report rep;
    rep.append(verify_duality(c));
    rep.append(verify_stochasticity(c));
    rep.append(verify_k_transform(c));
    rep.append(verify_local_density(c));
    if (c.certificate) rep.append(verify_certificate(c));
    if (c.existence_time_arithmetic) rep.append(verify_existence_time());
    return rep;
}

}  // namespace spatlog
