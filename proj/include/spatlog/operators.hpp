#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "configspace.hpp"
#include "errors.hpp"
#include "kernels.hpp"

namespace spatlog {

/// How the symbol L̂ and its dual L^Δ treat the single-occupancy constraint of
/// the site lattice.
///
/// `exclusion` makes L̂ = K⁻¹ L K hold exactly for the lattice generator L: a
/// birth aimed at an occupied site is suppressed, which at the level of
/// quasi-observables acts as an extra competition kernel v·a⁺ between distinct
/// sites and an extra mortality v·a⁺(0). `literal` uses the continuum formulas
/// with integrals replaced by v-weighted site sums and nothing else; it
/// differs from the exact lattice symbol by O(v).
enum class SiteRule { exclusion, literal };

/// Kernel tables and energies of the model restricted to a site lattice.
class LatticeModel {
public:
    LatticeModel(SiteLattice lattice, double m, const Kernel& a_plus, const Kernel& a_minus,
                 SiteRule rule = SiteRule::exclusion)
        : lat_(std::move(lattice)), m_(m), rule_(rule) {
        if (!(m >= 0.0)) throw InvalidModel("mortality must be >= 0");
        if (lat_.size() > 64) throw InvalidTruncation("lattice models support at most 64 sites");
        const int M = lat_.size();
        const auto sz = static_cast<std::size_t>(M) * static_cast<std::size_t>(M);
        plus_.resize(sz);
        minus_.resize(sz);
        comp_.resize(sz);
        for (int i = 0; i < M; ++i)
            for (int j = 0; j < M; ++j) {
                const double r = lat_.distance(i, j);
                const auto ij = idx(i, j);
                plus_[ij] = a_plus.radial(r);
                minus_[ij] = a_minus.radial(r);
                comp_[ij] = minus_[ij] + (rule == SiteRule::exclusion && i != j ? lat_.v() * plus_[ij] : 0.0);
            }
        self_plus_ = a_plus.radial(0.0);
    }

    LatticeModel(SiteLattice lattice, const ModelParams& p, SiteRule rule = SiteRule::exclusion)
        : LatticeModel(std::move(lattice), p.m, p.a_plus, p.a_minus, rule) {}

    const SiteLattice& lattice() const { return lat_; }
    int sites() const { return lat_.size(); }
    double v() const { return lat_.v(); }
    double m() const { return m_; }
    SiteRule rule() const { return rule_; }

    double plus(int i, int j) const { return plus_[idx(i, j)]; }
    double minus(int i, int j) const { return minus_[idx(i, j)]; }
    /// Competition kernel seen by L̂ and L^Δ.
    double competition(int i, int j) const { return comp_[idx(i, j)]; }
    /// Mortality seen by L̂ and L^Δ.
    double mortality() const { return m_ + (rule_ == SiteRule::exclusion ? v() * self_plus_ : 0.0); }

    /// E⁺(x, η) = Σ_{z∈η} a⁺(x - z).
    double e_plus(int x, Mask eta) const { return row_sum(plus_, x, eta); }
    /// E⁻(x, η) with the true competition kernel.
    double e_minus(int x, Mask eta) const { return row_sum(minus_, x, eta); }
    /// E⁻(x, η) with the competition kernel seen by L̂ and L^Δ.
    double e_competition(int x, Mask eta) const { return row_sum(comp_, x, eta); }

    /// E(η) = m|η| + Σ_{x∈η} E⁻(x, η∖x) (true energies, as in the generator L).
    double energy(Mask eta) const {
        double e = m_ * popcount(eta);
        for (Mask s = eta; s; s &= s - 1) {
            const int x = std::countr_zero(s);
            e += e_minus(x, eta & ~bit(x));
        }
        return e;
    }

    /// E(η) as it appears on the diagonal of L̂ and L^Δ.
    double symbol_energy(Mask eta) const {
        double e = mortality() * popcount(eta);
        for (Mask s = eta; s; s &= s - 1) {
            const int x = std::countr_zero(s);
            e += e_competition(x, eta & ~bit(x));
        }
        return e;
    }

    /// v Σ_{y∉η} E⁺(y, η): total birth rate out of η on the lattice.
    double birth_mass(Mask eta) const {
        double acc = 0.0;
        for (int y = 0; y < sites(); ++y)
            if (!(eta & bit(y))) acc += e_plus(y, eta);
        return v() * acc;
    }

    /// Lattice ⟨a⁺⟩: max_x v Σ_y a⁺(x - y), self term included.
    double mass_plus() const { return lattice_mass(plus_, true); }
    /// Lattice ⟨a⁻⟩ of the competition kernel seen by L̂: max_x v Σ_{y≠x} a(x - y).
    double mass_competition() const { return lattice_mass(comp_, false); }

    static Mask bit(int i) { return Mask{1} << i; }

private:
    std::size_t idx(int i, int j) const {
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(lat_.size()) + static_cast<std::size_t>(j);
    }
    double row_sum(const std::vector<double>& tab, int x, Mask eta) const {
        double acc = 0.0;
        for (Mask s = eta; s; s &= s - 1) acc += tab[idx(x, std::countr_zero(s))];
        return acc;
    }
    double lattice_mass(const std::vector<double>& tab, bool self) const {
        double best = 0.0;
        for (int x = 0; x < sites(); ++x) {
            double acc = 0.0;
            for (int y = 0; y < sites(); ++y)
                if (self || y != x) acc += tab[idx(x, y)];
            best = std::max(best, v() * acc);
        }
        return best;
    }

    SiteLattice lat_;
    double m_;
    SiteRule rule_;
    std::vector<double> plus_, minus_, comp_;
    double self_plus_ = 0.0;
};

enum class Role { A1, A2, A, B1, B2, B, Lhat, A1delta, A2delta, Adelta, B1delta, B2delta, Bdelta, Ldelta, L, Ldagger };

inline const char* to_string(Role r) {
    switch (r) {
        case Role::A1: return "A1";
        case Role::A2: return "A2";
        case Role::A: return "A";
        case Role::B1: return "B1";
        case Role::B2: return "B2";
        case Role::B: return "B";
        case Role::Lhat: return "Lhat";
        case Role::A1delta: return "A1delta";
        case Role::A2delta: return "A2delta";
        case Role::Adelta: return "Adelta";
        case Role::B1delta: return "B1delta";
        case Role::B2delta: return "B2delta";
        case Role::Bdelta: return "Bdelta";
        case Role::Ldelta: return "Ldelta";
        case Role::L: return "L";
        case Role::Ldagger: return "Ldagger";
    }
    return "?";
}

namespace detail {

inline bool has(Role whole, Role part) {
    switch (whole) {
        case Role::A: return part == Role::A1 || part == Role::A2;
        case Role::B: return part == Role::B1 || part == Role::B2;
        case Role::Lhat: return part == Role::A1 || part == Role::A2 || part == Role::B1 || part == Role::B2;
        case Role::Adelta: return part == Role::A1delta || part == Role::A2delta;
        case Role::Bdelta: return part == Role::B1delta || part == Role::B2delta;
        case Role::Ldelta:
            return part == Role::A1delta || part == Role::A2delta || part == Role::B1delta || part == Role::B2delta;
        default: return whole == part;
    }
}

/// Calls emit(column mask, coefficient) for every term of row η of the operator.
/// Terms whose column lies outside the truncated space are dropped by the caller.
template <class Emit>
void for_each_term(const LatticeModel& mdl, Role role, Mask eta, int cap, Emit&& emit) {
    const int M = mdl.sites();
    const double v = mdl.v();
    const int size = popcount(eta);
    const auto bit = LatticeModel::bit;

    // quasi-observable side: L̂ = A1 + A2 + B1 + B2
    if (has(role, Role::A1)) emit(eta, -mdl.symbol_energy(eta));
    if (has(role, Role::A2) && size < cap)
        for (int y = 0; y < M; ++y)
            if (!(eta & bit(y))) emit(eta | bit(y), v * mdl.e_plus(y, eta));
    if (has(role, Role::B1))
        for (Mask s = eta; s; s &= s - 1) {
            const int x = std::countr_zero(s);
            const Mask rest = eta & ~bit(x);
            emit(rest, -mdl.e_competition(x, rest));
        }
    if (has(role, Role::B2))
        for (Mask s = eta; s; s &= s - 1) {
            const int x = std::countr_zero(s);
            const Mask rest = eta & ~bit(x);
            for (int y = 0; y < M; ++y)
                if (!(rest & bit(y))) emit(rest | bit(y), v * mdl.plus(x, y));
        }

    // correlation-function side: L^Δ = A1^Δ + A2^Δ + B1^Δ + B2^Δ
    if (has(role, Role::A1delta)) emit(eta, -mdl.symbol_energy(eta));
    if (has(role, Role::A2delta))
        for (Mask s = eta; s; s &= s - 1) {
            const int x = std::countr_zero(s);
            const Mask rest = eta & ~bit(x);
            emit(rest, mdl.e_plus(x, rest));
        }
    if (has(role, Role::B1delta) && size < cap)
        for (int y = 0; y < M; ++y)
            if (!(eta & bit(y))) emit(eta | bit(y), -v * mdl.e_competition(y, eta));
    if (has(role, Role::B2delta))
        for (Mask s = eta; s; s &= s - 1) {
            const int x = std::countr_zero(s);
            const Mask rest = eta & ~bit(x);
            for (int y = 0; y < M; ++y)
                if (!(rest & bit(y))) emit(rest | bit(y), v * mdl.plus(x, y));
        }

    // observables: the lattice generator L (births blocked at the cap)
    if (role == Role::L) {
        for (Mask s = eta; s; s &= s - 1) {
            const int x = std::countr_zero(s);
            const Mask rest = eta & ~bit(x);
            const double rate = mdl.m() + mdl.e_minus(x, rest);
            emit(rest, rate);
            emit(eta, -rate);
        }
        if (size < cap)
            for (int y = 0; y < M; ++y)
                if (!(eta & bit(y))) {
                    const double rate = v * mdl.e_plus(y, eta);
                    emit(eta | bit(y), rate);
                    emit(eta, -rate);
                }
    }

    // local densities: L†
    if (role == Role::Ldagger) {
        const double xi = mdl.energy(eta) + (size < cap ? mdl.birth_mass(eta) : 0.0);
        emit(eta, -xi);
        if (size < cap)
            for (int y = 0; y < M; ++y)
                if (!(eta & bit(y))) emit(eta | bit(y), v * (mdl.m() + mdl.e_minus(y, eta)));
        for (Mask s = eta; s; s &= s - 1) {
            const int x = std::countr_zero(s);
            const Mask rest = eta & ~bit(x);
            emit(rest, mdl.e_plus(x, rest));
        }
    }
}

}  // namespace detail

/// Dense matrix of an operator on the subset-indexed space: (Op x)(η) = Σ_ξ M(η, ξ) x(ξ).
struct TruncatedOperator {
    Role role;
    SpacePtr space;
    double v;
    Eigen::MatrixXd matrix;

    TruncatedFunction apply(const TruncatedFunction& x) const {
        return TruncatedFunction(space, matrix * x.values());
    }
};

inline TruncatedOperator build_operator(const LatticeModel& mdl, const SpacePtr& space, Role role) {
    if (space->sites() != mdl.sites()) throw InvalidTruncation("subset space and lattice disagree on M");
    const auto n = static_cast<Eigen::Index>(space->size());
    TruncatedOperator op{role, space, mdl.v(), Eigen::MatrixXd::Zero(n, n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        detail::for_each_term(mdl, role, space->mask(static_cast<std::size_t>(i)), space->cap(),
                              [&](Mask col, double c) {
                                  const auto j = space->index(col);
                                  if (j >= 0) op.matrix(i, j) += c;
                              });
    }
    return op;
}

/// Row η of the operator applied to a function given as a callable f(mask),
/// without enumerating the space (usable on lattices too large for dense matrices).
template <class F>
double apply_row(const LatticeModel& mdl, Role role, Mask eta, int cap, F&& f) {
    double acc = 0.0;
    detail::for_each_term(mdl, role, eta, cap, [&](Mask col, double c) {
        if (popcount(col) <= cap) acc += c * f(col);
    });
    return acc;
}

struct SymbolParts {
    TruncatedOperator A, B;
};

/// L̂ = A + B.
inline SymbolParts build_Lhat(const LatticeModel& mdl, int cap) {
    const auto space = make_space(mdl.sites(), cap);
    return {build_operator(mdl, space, Role::A), build_operator(mdl, space, Role::B)};
}

inline TruncatedOperator build_Ldelta(const LatticeModel& mdl, int cap) {
    return build_operator(mdl, make_space(mdl.sites(), cap), Role::Ldelta);
}

inline TruncatedOperator build_L(const LatticeModel& mdl, int cap) {
    return build_operator(mdl, make_space(mdl.sites(), cap), Role::L);
}

inline TruncatedOperator build_Ldagger(const LatticeModel& mdl, int cap) {
    return build_operator(mdl, make_space(mdl.sites(), cap), Role::Ldagger);
}

/// Matrix of the K-transform on a subset space.
inline Eigen::MatrixXd k_transform_matrix(const SubsetSpace& space) {
    const auto n = static_cast<Eigen::Index>(space.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Mask g = space.mask(static_cast<std::size_t>(i));
        for (Mask sub = g;; sub = (sub - 1) & g) {
            K(i, space.index(sub)) = 1.0;
            if (sub == 0) break;
        }
    }
    return K;
}

/// e^{A} by scaling and squaring with a Padé approximant.
inline Eigen::MatrixXd expm(const Eigen::MatrixXd& A) { return A.exp(); }

/// e^{t Op} x.
inline TruncatedFunction semigroup_apply(const TruncatedOperator& op, double t, const TruncatedFunction& x) {
    if (!(t >= 0.0)) throw InvalidArgument("semigroup_apply: t must be >= 0");
    if (t == 0.0) return x;
    const Eigen::MatrixXd S = expm(t * op.matrix);
    return TruncatedFunction(op.space, S * x.values());
}

/// |⟨⟨e^{tL̂} G0, k0⟩⟩ - ⟨⟨G0, e^{tL^Δ} k0⟩⟩|.
inline double dual_pairing_check(const TruncatedFunction& G0, const TruncatedFunction& k0,
                                 const TruncatedOperator& lhat, const TruncatedOperator& ldelta, double t) {
    const auto Gt = semigroup_apply(lhat, t, G0);
    const auto kt = semigroup_apply(ldelta, t, k0);
    return std::abs(pairing(Gt, k0, lhat.v) - pairing(G0, kt, lhat.v));
}

// ---------------------------------------------------------------------------
// Local densities and correlation functions on the lattice

/// q(η) = Σ_{ξ∩η=∅} R(η ∪ ξ) v^{|ξ|}: correlation function of the local density R.
inline TruncatedFunction correlation_from_density(const TruncatedFunction& R, double v) {
    const auto& sp = *R.space();
    TruncatedFunction q(R.space());
    const Mask all = sp.sites() == 64 ? ~Mask{0} : ((Mask{1} << sp.sites()) - 1);
    for (std::size_t i = 0; i < sp.size(); ++i) {
        const Mask eta = sp.mask(i);
        const Mask free = all & ~eta;
        double acc = 0.0;
        for (Mask xi = free;; xi = (xi - 1) & free) {
            const auto j = sp.index(eta | xi);
            if (j >= 0) acc += R[static_cast<std::size_t>(j)] * std::pow(v, popcount(xi));
            if (xi == 0) break;
        }
        q[i] = acc;
    }
    return q;
}

/// Inverse of correlation_from_density on the space:
/// R(η) = Σ_{ξ∩η=∅} (-v)^{|ξ|} k(η ∪ ξ).
inline TruncatedFunction density_from_correlation(const TruncatedFunction& k, double v) {
    const auto& sp = *k.space();
    TruncatedFunction R(k.space());
    const Mask all = sp.sites() == 64 ? ~Mask{0} : ((Mask{1} << sp.sites()) - 1);
    for (std::size_t i = 0; i < sp.size(); ++i) {
        const Mask eta = sp.mask(i);
        const Mask free = all & ~eta;
        double acc = 0.0;
        for (Mask xi = free;; xi = (xi - 1) & free) {
            const auto j = sp.index(eta | xi);
            if (j >= 0) acc += k[static_cast<std::size_t>(j)] * std::pow(-v, popcount(xi));
            if (xi == 0) break;
        }
        R[i] = acc;
    }
    return R;
}

struct LocalDensityResult {
    double residual = 0.0;     // max_η |q_t(η) - k_t(η)|
    bool realizable = true;    // R_0 >= 0 with unit λ-mass
    double min_density = 0.0;  // min_η R_0(η)
    double mass = 0.0;         // λ-integral of R_0
    TruncatedFunction q_t, k_t;
};

/// Evolves the local density of k0 with e^{tL†}, maps it back to a
/// correlation function and compares with e^{tL^Δ} k0.
///
/// k0 lives on a space with cap N; the local density is built on the same
/// space, i.e. truncated to |η| <= N.
inline LocalDensityResult local_density_check(const TruncatedFunction& k0, const LatticeModel& mdl, double t) {
    if (!(t >= 0.0)) throw InvalidArgument("local_density_check: t must be >= 0");
    const auto& space = k0.space();
    const double v = mdl.v();
    const auto R0 = density_from_correlation(k0, v);
    LocalDensityResult res{0.0, true, R0.values().minCoeff(), lp_integral(R0, v), TruncatedFunction(space),
                           TruncatedFunction(space)};
    res.realizable = res.min_density >= -1e-12 && std::abs(res.mass - 1.0) <= 1e-9;
    const auto q0 = correlation_from_density(R0, v);
    const auto ldagger = build_operator(mdl, space, Role::Ldagger);
    const auto ldelta = build_operator(mdl, space, Role::Ldelta);
    const auto Rt = semigroup_apply(ldagger, t, R0);
    res.q_t = correlation_from_density(Rt, v);
    res.k_t = semigroup_apply(ldelta, t, q0);
    res.residual = (res.q_t.values() - res.k_t.values()).cwiseAbs().maxCoeff();
    return res;
}

/// Product-form correlation function k(η) = Π_{x∈η} c (Poisson with intensity c).
inline TruncatedFunction poisson_correlation(const SpacePtr& space, double c) {
    return TruncatedFunction::from(space, [c](Mask m) { return std::pow(c, popcount(m)); });
}

}  // namespace spatlog
