#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "configspace.hpp"
#include "errors.hpp"
#include "operators.hpp"
#include "report.hpp"
#include "rng.hpp"

namespace spatlog {

/// T* = (α* - α_*) / (⟨a⁺⟩ + ⟨a⁻⟩ e^{-α_*}); +∞ when both masses vanish.
inline double existence_time(double alpha_low, double alpha_high, double mass_plus, double mass_minus) {
    if (!(alpha_low < alpha_high)) throw InvalidArgument("existence_time: need alpha_low < alpha_high");
    if (mass_plus < 0.0 || mass_minus < 0.0) throw InvalidArgument("existence_time: kernel masses must be >= 0");
    const double rate = mass_plus + mass_minus * std::exp(-alpha_low);
    if (rate == 0.0) return std::numeric_limits<double>::infinity();
    return (alpha_high - alpha_low) / rate;
}

inline double existence_time(double alpha_low, double alpha_high, const ModelParams& p) {
    return existence_time(alpha_low, alpha_high, p.a_plus.total_mass(), p.a_minus.total_mass());
}

/// Lattice version: uses the site-sum masses that bound the truncated B.
inline double existence_time(double alpha_low, double alpha_high, const LatticeModel& mdl) {
    return existence_time(alpha_low, alpha_high, mdl.mass_plus(), mdl.mass_competition());
}

/// Uniform ladder α_l = α_* + l(α - α_*)/n with T = T*(α - α_*)/(α* - α_*).
struct OvcyannikovSchedule {
    double alpha_low = -1.0;   // α_*
    double alpha_high = 0.0;   // α*
    double alpha = 0.0;        // target, α_* < α <= α*
    int n = 1;
    double T_star = 0.0;
    double T = 0.0;
    double mass_plus = 0.0;
    double mass_minus = 0.0;

    double alpha_l(int l) const { return alpha_low + l * (alpha - alpha_low) / n; }
};

inline OvcyannikovSchedule make_schedule(double alpha_low, double alpha_high, double alpha, int n, double mass_plus,
                                         double mass_minus) {
    if (!(alpha_low < alpha && alpha <= alpha_high))
        throw InvalidArgument("schedule: need alpha_low < alpha <= alpha_high");
    if (n < 1) throw InvalidArgument("schedule: depth n must be >= 1");
    OvcyannikovSchedule s{alpha_low, alpha_high, alpha, n, 0.0, 0.0, mass_plus, mass_minus};
    s.T_star = existence_time(alpha_low, alpha_high, mass_plus, mass_minus);
    s.T = s.T_star * (alpha - alpha_low) / (alpha_high - alpha_low);
    return s;
}

inline OvcyannikovSchedule make_schedule(double alpha_low, double alpha_high, double alpha, int n,
                                         const LatticeModel& mdl) {
    return make_schedule(alpha_low, alpha_high, alpha, n, mdl.mass_plus(), mdl.mass_competition());
}

/// Closed-form bound on the B loss between scale levels: (m⁺ + m⁻ e^{-α}) / (e|α - α'|).
inline double b_norm_bound(double mass_plus, double mass_minus, double alpha_from, double alpha_to) {
    return (mass_plus + mass_minus * std::exp(-alpha_to)) / (M_E * std::abs(alpha_to - alpha_from));
}

/// Exact norm of a matrix as an operator 𝒢_{α'} → 𝒢_α (weighted ℓ¹, weights e^{-α|η|} v^{|η|}).
inline double operator_norm_G(const Eigen::MatrixXd& B, const SubsetSpace& sp, double v, double alpha_from,
                              double alpha_to) {
    double best = 0.0;
    for (std::size_t j = 0; j < sp.size(); ++j) {
        const int nj = popcount(sp.mask(j));
        double col = 0.0;
        for (std::size_t i = 0; i < sp.size(); ++i) {
            const double b = B(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (b != 0.0) {
                const int ni = popcount(sp.mask(i));
                col += std::abs(b) * std::exp(-alpha_to * ni + alpha_from * nj) * std::pow(v, ni - nj);
            }
        }
        best = std::max(best, col);
    }
    return best;
}

/// Exact norm of a matrix as an operator 𝒦_{α'} → 𝒦_α (weighted ℓ^∞, weights e^{α|η|}).
inline double operator_norm_K(const Eigen::MatrixXd& B, const SubsetSpace& sp, double alpha_from, double alpha_to) {
    double best = 0.0;
    for (std::size_t i = 0; i < sp.size(); ++i) {
        const int ni = popcount(sp.mask(i));
        double row = 0.0;
        for (std::size_t j = 0; j < sp.size(); ++j) {
            const double b = B(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (b != 0.0) row += std::abs(b) * std::exp(alpha_to * ni - alpha_from * popcount(sp.mask(j)));
        }
        best = std::max(best, row);
    }
    return best;
}

/// Lower estimate of ‖B‖_{α'α} on 𝒢 from random unit vectors.
inline double sampled_norm_G(const Eigen::MatrixXd& B, const SpacePtr& sp, double v, double alpha_from,
                             double alpha_to, int samples, Philox4x32& rng) {
    double best = 0.0;
    for (int s = 0; s < samples; ++s) {
        const auto G = TruncatedFunction::from(sp, [&](Mask) { return 2.0 * rng.uniform() - 1.0; });
        const double nin = norm_G(G, v, alpha_from);
        if (nin == 0.0) continue;
        best = std::max(best, norm_G(TruncatedFunction(sp, B * G.values()), v, alpha_to) / nin);
    }
    return best;
}

inline double sampled_norm_K(const Eigen::MatrixXd& B, const SpacePtr& sp, double alpha_from, double alpha_to,
                             int samples, Philox4x32& rng) {
    double best = 0.0;
    for (int s = 0; s < samples; ++s) {
        const auto k = TruncatedFunction::from(sp, [&](Mask) { return 2.0 * rng.uniform() - 1.0; });
        const double nin = norm_K(k, alpha_from);
        if (nin == 0.0) continue;
        best = std::max(best, norm_K(TruncatedFunction(sp, B * k.values()), alpha_to) / nin);
    }
    return best;
}

/// Iterates of x^{(l)}_t = S(t)x0 + ∫₀ᵗ S(t-s) B x^{(l-1)}_s ds, S(t) = e^{tA}, on a uniform grid.
///
/// Works for either side: (A, B) on quasi-observables or their transposes on
/// correlation functions. The time integral is composite Simpson (closing
/// with the 3/8 rule on odd node counts); the first node uses a midpoint value
/// of B x^{(l-1)} from quadratic interpolation.
struct PicardResult {
    std::vector<Eigen::VectorXd> iterates;     // x^{(l)}_t, l = 0..levels
    std::vector<double> quadrature_error;       // |x^{(l)} at P panels - at 2P panels|_max, per level (0 if not run)
};

namespace detail {

inline std::vector<std::vector<Eigen::VectorXd>> picard_grid(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                                             const Eigen::VectorXd& x0, double t, int levels,
                                                             int panels) {
    const int P = panels;
    const double h = t / P;
    std::vector<Eigen::MatrixXd> S(static_cast<std::size_t>(P) + 1);
    S[0] = Eigen::MatrixXd::Identity(A.rows(), A.cols());
    const Eigen::MatrixXd Sh = expm(h * A);
    const Eigen::MatrixXd Shalf = expm(0.5 * h * A);
    for (int k = 1; k <= P; ++k) S[static_cast<std::size_t>(k)] = Sh * S[static_cast<std::size_t>(k) - 1];

    std::vector<std::vector<Eigen::VectorXd>> out;
    std::vector<Eigen::VectorXd> prev(static_cast<std::size_t>(P) + 1);
    for (int j = 0; j <= P; ++j) prev[static_cast<std::size_t>(j)] = S[static_cast<std::size_t>(j)] * x0;
    out.push_back(prev);

    for (int l = 1; l <= levels; ++l) {
        std::vector<Eigen::VectorXd> Bx(static_cast<std::size_t>(P) + 1);
        for (int j = 0; j <= P; ++j) Bx[static_cast<std::size_t>(j)] = B * prev[static_cast<std::size_t>(j)];
        std::vector<Eigen::VectorXd> cur(static_cast<std::size_t>(P) + 1);
        for (int j = 0; j <= P; ++j) {
            const auto uj = static_cast<std::size_t>(j);
            const Eigen::VectorXd acc = S[uj] * x0;
            if (j == 0) {
                cur[uj] = acc;
                continue;
            }
            auto f = [&](int i) -> Eigen::VectorXd {
                return S[static_cast<std::size_t>(j - i)] * Bx[static_cast<std::size_t>(i)];
            };
            Eigen::VectorXd integral = Eigen::VectorXd::Zero(x0.size());
            if (j == 1) {
                const Eigen::VectorXd mid =
                    P >= 2 ? Eigen::VectorXd((3.0 * Bx[0] + 6.0 * Bx[1] - Bx[2]) / 8.0) : Eigen::VectorXd(0.5 * (Bx[0] + Bx[1]));
                integral = h / 6.0 * (f(0) + 4.0 * (Shalf * mid) + f(1));
            } else {
                const int simpson_end = (j % 2 == 0) ? j : j - 3;
                for (int i = 0; i + 2 <= simpson_end; i += 2) integral += h / 3.0 * (f(i) + 4.0 * f(i + 1) + f(i + 2));
                if (j % 2 == 1)
                    integral += 3.0 * h / 8.0 * (f(j - 3) + 3.0 * f(j - 2) + 3.0 * f(j - 1) + f(j));
            }
            cur[uj] = acc + integral;
        }
        out.push_back(cur);
        prev = std::move(cur);
    }
    return out;
}

}  // namespace detail

/// Picard iterates at time t with `panels` quadrature panels; when `richardson`
/// is set the run is repeated at 2·panels and the difference recorded.
inline PicardResult picard_iterate_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                          const Eigen::VectorXd& x0, double t, int levels, int panels = 64,
                                          bool richardson = true) {
    if (!(t >= 0.0)) throw InvalidArgument("picard_iterate: t must be >= 0");
    if (panels < 1) throw InvalidArgument("picard_iterate: need at least one panel");
    if (levels < 0) throw InvalidArgument("picard_iterate: levels must be >= 0");
    PicardResult res;
    if (t == 0.0) {
        res.iterates.assign(static_cast<std::size_t>(levels) + 1, x0);
        res.quadrature_error.assign(static_cast<std::size_t>(levels) + 1, 0.0);
        return res;
    }
    const auto grid = detail::picard_grid(A, B, x0, t, levels, panels);
    for (const auto& g : grid) res.iterates.push_back(g.back());
    res.quadrature_error.assign(static_cast<std::size_t>(levels) + 1, 0.0);
    if (richardson) {
        const auto fine = detail::picard_grid(A, B, x0, t, levels, 2 * panels);
        for (int l = 0; l <= levels; ++l)
            res.quadrature_error[static_cast<std::size_t>(l)] =
                (fine[static_cast<std::size_t>(l)].back() - res.iterates[static_cast<std::size_t>(l)]).cwiseAbs().maxCoeff();
    }
    return res;
}

/// G^{(l)}_t for l = 0..sched.n; refuses t >= T unless allow_beyond_T.
inline std::vector<TruncatedFunction> picard_iterate(const TruncatedOperator& A, const TruncatedOperator& B,
                                                     const TruncatedFunction& G0, const OvcyannikovSchedule& sched,
                                                     double t, int panels = 64, bool allow_beyond_T = false) {
    if (!allow_beyond_T && !(t < sched.T))
        throw InvalidArgument("picard_iterate: t = " + std::to_string(t) + " is outside the guaranteed interval [0, " +
                              std::to_string(sched.T) + ")");
    const auto res = picard_iterate_matrix(A.matrix, B.matrix, G0.values(), t, sched.n, panels, false);
    std::vector<TruncatedFunction> out;
    for (const auto& x : res.iterates) out.emplace_back(G0.space(), x);
    return out;
}

/// Sum of the first n+1 terms of the Dyson series, i.e. x^{(n)}_t computed exactly
/// from one block-triangular matrix exponential (reference for the quadrature).
inline std::vector<Eigen::VectorXd> dyson_terms(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                                const Eigen::VectorXd& x0, double t, int levels) {
    const Eigen::Index d = A.rows();
    const Eigen::Index nb = levels + 1;
    Eigen::MatrixXd big = Eigen::MatrixXd::Zero(nb * d, nb * d);
    for (Eigen::Index b = 0; b < nb; ++b) {
        big.block(b * d, b * d, d, d) = A;
        if (b + 1 < nb) big.block(b * d, (b + 1) * d, d, d) = B;
    }
    const Eigen::MatrixXd E = expm(t * big);
    std::vector<Eigen::VectorXd> terms;
    for (Eigen::Index l = 0; l < nb; ++l) terms.push_back(E.block(0, l * d, d, d) * x0);
    return terms;
}

struct CertificateOptions {
    int levels = 5;
    double t_fraction = 0.5;   // t = t_fraction · T (and · T_δ on the k-side)
    int panels = 64;
    double tol = 1e-6;
    int samples = 200;         // random vectors for the sampled operator norms
    std::uint64_t seed = 1;
    std::optional<double> alpha_k;  // k-side target α, default α_* + 0.05(α* - α_*)
    std::optional<double> delta;    // k-side δ, default 0.05(α* - α_*)
};

/// Numerical certificate for the Picard/Ovcyannikov construction on a lattice.
///
/// G-side: for every l <= levels the ladder of depth l ending at sched.alpha is
/// used, and ‖G^{(l)} - G^{(l-1)}‖_α is compared with (1/l!)(l/e)^l (t/T)^l ‖G0‖_{α_*}.
/// The fixed-depth ladder of sched.n is checked as well. k-side: the same with
/// transposed operators, K-norms and T_δ. Operator norms of B and B* on every
/// ladder step are compared with the corresponding closed-form bound.
inline Report verify_bounds(const OvcyannikovSchedule& sched, const LatticeModel& mdl, int cap,
                            const CertificateOptions& opt = {}) {
    Report rep;
    const auto space = make_space(mdl.sites(), cap);
    const auto& sp = *space;
    const double v = mdl.v();
    const auto A = build_operator(mdl, space, Role::A);
    const auto B = build_operator(mdl, space, Role::B);
    const auto Ad = build_operator(mdl, space, Role::Adelta);
    const auto Bd = build_operator(mdl, space, Role::Bdelta);
    Philox4x32 rng(opt.seed, 0);
    const double mp = sched.mass_plus, mm = sched.mass_minus;
    const double span = sched.alpha_high - sched.alpha_low;

    // theta condition on the lattice kernels
    double theta = 0.0;
    for (int i = 0; i < mdl.sites(); ++i)
        for (int j = 0; j < mdl.sites(); ++j) {
            if (i == j) continue;
            const double p = mdl.plus(i, j), c = mdl.competition(i, j);
            if (p > 0.0) theta = c > 0.0 ? std::max(theta, p / c) : std::numeric_limits<double>::infinity();
        }
    rep.add("theta_condition", std::exp(sched.alpha_high) * theta, 1.0, std::exp(sched.alpha_high) * theta < 1.0,
            "e^{alpha_high} theta on lattice kernels");

    // --- operator-norm bounds on the uniform ladders
    double worst_ratio = 0.0, worst_sampled = 0.0;
    for (int n = 1; n <= std::max(opt.levels, sched.n); ++n) {
        const double eps = (sched.alpha - sched.alpha_low) / n;
        for (int l = 1; l <= n; ++l) {
            const double a0 = sched.alpha_low + (l - 1) * eps, a1 = sched.alpha_low + l * eps;
            const double exact = operator_norm_G(B.matrix, sp, v, a0, a1);
            const double bound = b_norm_bound(mp, mm, a0, a1);
            worst_ratio = std::max(worst_ratio, exact / bound);
            worst_sampled = std::max(worst_sampled, sampled_norm_G(B.matrix, space, v, a0, a1, opt.samples / n + 1, rng) /
                                                        std::max(exact, 1e-300));
        }
    }
    rep.add_le("B_norm_over_bound", worst_ratio, 1.0, 1e-12, "max over uniform ladders of exact ||B|| / bound");
    rep.add_le("B_sampled_over_exact", worst_sampled, 1.0, 1e-12, "random unit vectors never exceed the exact norm");

    const double ak = opt.alpha_k.value_or(sched.alpha_low + 0.05 * span);
    const double delta = opt.delta.value_or(0.05 * span);
    if (!(ak > sched.alpha_low && ak < sched.alpha_high && delta > 0 && delta < sched.alpha_high - ak))
        throw InvalidArgument("verify_bounds: need alpha_low < alpha_k < alpha_high and 0 < delta < alpha_high - alpha_k");
    double worst_k = 0.0, worst_k_sampled = 0.0;
    for (int l = 1; l <= opt.levels; ++l) {
        const double eps = (sched.alpha_high - ak - delta) / l;
        for (int s = 1; s <= l; ++s) {
            const double from = sched.alpha_high - static_cast<double>(s) / (l + 1) * delta - (s - 1) * eps;
            const double to = sched.alpha_high - static_cast<double>(s) / (l + 1) * delta - s * eps;
            const double exact = operator_norm_K(Bd.matrix, sp, from, to);
            worst_k = std::max(worst_k, exact / b_norm_bound(mp, mm, from, to));
            worst_k_sampled =
                std::max(worst_k_sampled, sampled_norm_K(Bd.matrix, space, from, to, opt.samples / l + 1, rng) /
                                              std::max(exact, 1e-300));
        }
    }
    rep.add_le("Bstar_norm_over_bound", worst_k, 1.0, 1e-12, "max over k-side ladders of exact ||B*|| / bound");
    rep.add_le("Bstar_sampled_over_exact", worst_k_sampled, 1.0, 1e-12);

    // --- G-side Picard certificate
    const double t = opt.t_fraction * sched.T;
    auto G0 = TruncatedFunction::from(space, [&](Mask) { return 2.0 * rng.uniform() - 1.0; });
    G0.values() /= norm_G(G0, v, sched.alpha_low);
    const int L = std::max(opt.levels, sched.n);
    const auto pic = picard_iterate_matrix(A.matrix, B.matrix, G0.values(), t, L, opt.panels, true);
    double qerr = 0.0;
    for (double e : pic.quadrature_error) qerr = std::max(qerr, e);
    rep.add_le("G_quadrature_error", qerr, opt.tol, 0.0, "Richardson difference at doubled panel count");
    for (int l = 1; l <= opt.levels; ++l) {
        const TruncatedFunction diff(space, pic.iterates[static_cast<std::size_t>(l)] -
                                                pic.iterates[static_cast<std::size_t>(l) - 1]);
        const double lhs = norm_G(diff, v, sched.alpha);
        const double rhs = std::pow(l / M_E, l) / std::tgamma(l + 1.0) * std::pow(t / sched.T, l);
        rep.add_le("G_cauchy_l" + std::to_string(l), lhs, rhs, opt.tol);
    }
    for (int l = 1; l <= sched.n && l <= L; ++l) {
        const TruncatedFunction diff(space, pic.iterates[static_cast<std::size_t>(l)] -
                                                pic.iterates[static_cast<std::size_t>(l) - 1]);
        const double lhs = norm_G(diff, v, sched.alpha_l(l));
        const double rhs = std::pow(t * sched.n / (M_E * sched.T), l) / std::tgamma(l + 1.0);
        rep.add_le("G_fixed_ladder_l" + std::to_string(l), lhs, rhs, opt.tol);
    }

    // --- k-side certificate
    const double T_delta = (sched.alpha_high - ak - delta) / span * sched.T_star;
    const double tk = opt.t_fraction * T_delta;
    auto k0 = TruncatedFunction::from(space, [&](Mask m) {
        return (2.0 * rng.uniform() - 1.0) * std::exp(-sched.alpha_high * popcount(m));
    });
    k0.values() /= norm_K(k0, sched.alpha_high);
    const auto kpic = picard_iterate_matrix(Ad.matrix, Bd.matrix, k0.values(), tk, opt.levels, opt.panels, true);
    double kqerr = 0.0;
    for (double e : kpic.quadrature_error) kqerr = std::max(kqerr, e);
    rep.add_le("k_quadrature_error", kqerr, opt.tol, 0.0);
    for (int l = 1; l <= opt.levels; ++l) {
        const TruncatedFunction diff(space, kpic.iterates[static_cast<std::size_t>(l)] -
                                                kpic.iterates[static_cast<std::size_t>(l) - 1]);
        const double lhs = norm_K(diff, ak);
        const double rhs = std::pow(l / M_E, l) / std::tgamma(l + 1.0) * std::pow(tk / T_delta, l);
        rep.add_le("k_cauchy_l" + std::to_string(l), lhs, rhs, opt.tol);
    }
    return rep;
}

/// Largest ratio |k_t(η)| e^{α_t|η|} / ‖k0‖_{α*} over η and the sampled times,
/// with α_t = α* - (α* - α_*) t / T*. Values <= 1 mean the truncated evolution
/// stays inside the shrinking sub-Poissonian ball.
inline double sub_poissonian_ratio(const TruncatedFunction& k0, const LatticeModel& mdl, double alpha_low,
                                   double alpha_high, const std::vector<double>& times) {
    const auto ld = build_operator(mdl, k0.space(), Role::Ldelta);
    const double Ts = existence_time(alpha_low, alpha_high, mdl);
    const double n0 = norm_K(k0, alpha_high);
    double worst = 0.0;
    for (double t : times) {
        if (!(t >= 0.0 && t < Ts)) throw InvalidArgument("sub_poissonian_ratio: times must lie in [0, T*)");
        const double at = alpha_high - (alpha_high - alpha_low) * t / Ts;
        worst = std::max(worst, norm_K(semigroup_apply(ld, t, k0), at) / n0);
    }
    return worst;
}

}  // namespace spatlog
