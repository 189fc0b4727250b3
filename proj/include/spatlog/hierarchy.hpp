#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "kernels.hpp"
#include "kinetic.hpp"

namespace spatlog {

enum class Closure { poisson, kirkwood, zero };

inline const char* to_string(Closure c) {
    switch (c) {
        case Closure::poisson: return "poisson";
        case Closure::kirkwood: return "kirkwood";
        case Closure::zero: return "zero";
    }
    return "?";
}

inline Closure closure_from_string(const std::string& s) {
    if (s == "poisson") return Closure::poisson;
    if (s == "kirkwood") return Closure::kirkwood;
    if (s == "zero") return Closure::zero;
    throw InvalidArgument("unknown closure '" + s + "' (poisson, kirkwood, zero)");
}

/// `order2` evolves (u, w) with a closure for k⁽³⁾. `mean_field` keeps w ≡ u²
/// and evolves u alone (the homogeneous kinetic equation).
enum class HierarchyMode { order2, mean_field };

struct RadialGrid {
    double dr = 0.0;
    double r_max = 0.0;
    int n_phi = 64;  // angular nodes of the d = 2 quadrature
    int size() const { return static_cast<int>(std::lround(r_max / dr)) + 1; }
    double r(int j) const { return j * dr; }
};

/// Δr = r_cut/64 and r_max = 4 r_cut (capped at L/2), r_cut the larger kernel cutoff.
inline RadialGrid default_grid(const ModelParams& p) {
    const double rc = std::max(p.a_plus.is_zero() ? 0.0 : p.a_plus.cutoff(), p.a_minus.is_zero() ? 0.0 : p.a_minus.cutoff());
    if (!(rc > 0.0)) throw InvalidArgument("default_grid: both kernels vanish; give the grid explicitly");
    RadialGrid g;
    g.dr = rc / 64.0;
    g.r_max = std::min(4.0 * rc, 0.5 * p.L);
    g.r_max = g.dr * std::floor(g.r_max / g.dr + 1e-9);
    return g;
}

struct HierarchyState {
    double t = 0.0;
    double u = 0.0;
    std::vector<double> w;
};

/// Precomputed quadrature of the kernel integrals on the radial grid.
///
/// Nodes s_k cover the kernel supports (a grid line in d = 1, polar nodes in
/// d = 2); their weights are rescaled so that Σ_k a(s_k) q_k equals the
/// truncated mass ⟨a⟩ exactly. Distances |r e₁ - s_k| use the torus metric.
class HierarchyModel {
public:
    HierarchyModel(const ModelParams& p, RadialGrid grid, Closure closure, HierarchyMode mode = HierarchyMode::order2)
        : p_(p), g_(grid), closure_(closure), mode_(mode) {
        if (!(g_.dr > 0.0) || !(g_.r_max >= g_.dr)) throw InvalidArgument("radial grid needs 0 < dr <= r_max");
        if (g_.r_max > 0.5 * p.L * (1 + 1e-12)) throw InvalidArgument("radial grid r_max exceeds L/2");
        const double rc = std::max(p.a_plus.is_zero() ? 0.0 : p.a_plus.cutoff(), p.a_minus.is_zero() ? 0.0 : p.a_minus.cutoff());
        if (g_.r_max < rc * (1 - 1e-12)) throw InvalidArgument("radial grid r_max must cover the kernel cutoffs");
        mass_plus_ = p.a_plus.is_zero() ? 0.0 : p.a_plus.total_mass();
        mass_minus_ = p.a_minus.is_zero() ? 0.0 : p.a_minus.total_mass();
        build_nodes(rc);
        build_lookup();
    }

    const RadialGrid& grid() const { return g_; }
    Closure closure() const { return closure_; }
    HierarchyMode mode() const { return mode_; }
    const ModelParams& params() const { return p_; }
    double mass_plus() const { return mass_plus_; }
    double mass_minus() const { return mass_minus_; }
    std::size_t nodes() const { return s_.size(); }

    /// Poisson-like state: u, w ≡ u².
    HierarchyState poisson_state(double u) const {
        return {0.0, u, std::vector<double>(static_cast<std::size_t>(g_.size()), u * u)};
    }

    /// (du/dt, dw/dt).
    void rhs(const HierarchyState& s, double& du, std::vector<double>& dw) const {
        const int J = g_.size();
        dw.assign(static_cast<std::size_t>(J), 0.0);
        if (mode_ == HierarchyMode::mean_field) {
            du = (mass_plus_ - p_.m) * s.u - mass_minus_ * s.u * s.u;
            for (int j = 0; j < J; ++j) dw[static_cast<std::size_t>(j)] = 2.0 * s.u * du;
            return;
        }
        if (closure_ == Closure::kirkwood && s.u < 1e-12)
            throw ClosureSingularity("kirkwood closure needs u >= 1e-12, got " + std::to_string(s.u));
        double comp = 0.0;
        for (std::size_t k = 0; k < s_.size(); ++k) comp += q_minus_[k] * at(s.w, norm_idx_[k]);
        du = (mass_plus_ - p_.m) * s.u - comp;

        const double u3 = s.u * s.u * s.u;
        const std::size_t K = s_.size();
        for (int j = 0; j < J; ++j) {
            const double r = g_.r(j);
            const double wr = s.w[static_cast<std::size_t>(j)];
            double conv = 0.0, closure_term = 0.0;
            const Interp* row = &shift_idx_[static_cast<std::size_t>(j) * K];
            for (std::size_t k = 0; k < K; ++k) {
                const double w_shift = at(s.w, row[k]);
                conv += q_plus_[k] * w_shift;
                if (q_minus_[k] == 0.0) continue;
                double k3 = 0.0;
                switch (closure_) {
                    case Closure::poisson: k3 = u3; break;
                    case Closure::kirkwood: k3 = wr * at(s.w, norm_idx_[k]) * w_shift / u3; break;
                    case Closure::zero: k3 = 0.0; break;
                }
                closure_term += q_minus_[k] * k3;
            }
            dw[static_cast<std::size_t>(j)] = -2.0 * (p_.m + p_.a_minus.radial(r)) * wr + 2.0 * p_.a_plus.radial(r) * s.u +
                                             2.0 * conv - 2.0 * closure_term;
        }
    }

    /// ∫ a⁻(z) w(|z|) dz with the model quadrature.
    double competition_integral(const std::vector<double>& w) const {
        double acc = 0.0;
        for (std::size_t k = 0; k < s_.size(); ++k) acc += q_minus_[k] * at(w, norm_idx_[k]);
        return acc;
    }

    /// Linear interpolation of w at distance r (constant beyond r_max).
    double interpolate(const std::vector<double>& w, double r) const { return at(w, make_interp(r)); }

private:
    struct Interp {
        int i;
        double f;
    };

    double at(const std::vector<double>& w, const Interp& ip) const {
        const auto i = static_cast<std::size_t>(ip.i);
        return ip.f == 0.0 ? w[i] : w[i] * (1.0 - ip.f) + w[i + 1] * ip.f;
    }

    Interp make_interp(double r) const {
        const int J = g_.size();
        const double x = r / g_.dr;
        if (x >= J - 1) return {J - 1, 0.0};
        const int i = static_cast<int>(std::floor(x + 1e-9));
        const double f = std::max(0.0, x - i);
        return {i, f < 1e-9 ? 0.0 : f};
    }

    void build_nodes(double rc) {
        const double h = g_.dr;
        if (rc <= 0.0) return;
        if (p_.d == 1) {
            const int K = static_cast<int>(std::ceil(rc / h - 1e-9));
            for (int k = -K; k <= K; ++k) {
                s_.push_back({k * h, 0.0});
                base_w_.push_back((k == -K || k == K) ? 0.5 * h : h);
            }
        } else {
            const int K = static_cast<int>(std::ceil(rc / h - 1e-9));
            const int nphi = std::max(8, g_.n_phi);
            const double dphi = 2.0 * M_PI / nphi;
            s_.push_back({0.0, 0.0});
            base_w_.push_back(M_PI * 0.25 * h * h);  // disc of radius h/2
            for (int k = 1; k <= K; ++k) {
                const double rho = k * h;
                const double dr = k == K ? 0.5 * h : h;
                for (int a = 0; a < nphi; ++a) {
                    const double phi = (a + 0.5) * dphi;
                    s_.push_back({rho * std::cos(phi), rho * std::sin(phi)});
                    base_w_.push_back(rho * dr * dphi);
                }
            }
        }
        q_plus_ = weights_for(p_.a_plus, mass_plus_);
        q_minus_ = weights_for(p_.a_minus, mass_minus_);
    }

    std::vector<double> weights_for(const Kernel& a, double mass) const {
        std::vector<double> q(s_.size(), 0.0);
        if (a.is_zero()) return q;
        double acc = 0.0;
        for (std::size_t k = 0; k < s_.size(); ++k) {
            q[k] = base_w_[k] * a.eval(s_[k]);
            acc += q[k];
        }
        if (acc > 0.0)
            for (double& x : q) x *= mass / acc;
        return q;
    }

    void build_lookup() {
        const int J = g_.size();
        const std::size_t K = s_.size();
        norm_idx_.resize(K);
        for (std::size_t k = 0; k < K; ++k) norm_idx_[k] = make_interp(norm(s_[k], p_.d));
        shift_idx_.resize(static_cast<std::size_t>(J) * K);
        for (int j = 0; j < J; ++j)
            for (std::size_t k = 0; k < K; ++k) {
                const Point x{g_.r(j), 0.0};
                shift_idx_[static_cast<std::size_t>(j) * K + k] = make_interp(torus_distance(s_[k], x, p_.L, p_.d));
            }
    }

    ModelParams p_;
    RadialGrid g_;
    Closure closure_;
    HierarchyMode mode_;
    double mass_plus_ = 0.0, mass_minus_ = 0.0;
    std::vector<Point> s_;
    std::vector<double> base_w_, q_plus_, q_minus_;
    std::vector<Interp> norm_idx_, shift_idx_;
};

struct HierarchyTrajectory {
    std::vector<HierarchyState> states;
    std::size_t clip_events = 0;  // grid values (or u) clipped to 0 after a step
};

/// Classical RK4 from s0 to t_max; negative values are clipped to 0 and counted,
/// and |u| > 1e12 or a non-finite value raises DivergenceError.
inline HierarchyTrajectory integrate(const HierarchyModel& model, HierarchyState s0, double dt, double t_max,
                                     int output_every = 1) {
    if (!(dt > 0.0)) throw InvalidArgument("integrate: dt must be > 0");
    if (!(t_max >= 0.0)) throw InvalidArgument("integrate: t_max must be >= 0");
    if (static_cast<int>(s0.w.size()) != model.grid().size())
        throw InvalidArgument("integrate: w does not match the radial grid");
    if (output_every < 1) output_every = 1;
    HierarchyTrajectory tr;
    tr.states.push_back(s0);
    const auto steps = static_cast<long long>(std::llround(t_max / dt));
    const double h = steps > 0 ? t_max / static_cast<double>(steps) : 0.0;
    HierarchyState s = std::move(s0);
    const std::size_t J = s.w.size();
    double k1u, k2u, k3u, k4u;
    std::vector<double> k1w, k2w, k3w, k4w;
    HierarchyState tmp;
    tmp.w.resize(J);
    for (long long n = 1; n <= steps; ++n) {
        model.rhs(s, k1u, k1w);
        tmp.u = s.u + 0.5 * h * k1u;
        for (std::size_t j = 0; j < J; ++j) tmp.w[j] = s.w[j] + 0.5 * h * k1w[j];
        model.rhs(tmp, k2u, k2w);
        tmp.u = s.u + 0.5 * h * k2u;
        for (std::size_t j = 0; j < J; ++j) tmp.w[j] = s.w[j] + 0.5 * h * k2w[j];
        model.rhs(tmp, k3u, k3w);
        tmp.u = s.u + h * k3u;
        for (std::size_t j = 0; j < J; ++j) tmp.w[j] = s.w[j] + h * k3w[j];
        model.rhs(tmp, k4u, k4w);
        s.u += h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u);
        for (std::size_t j = 0; j < J; ++j) s.w[j] += h / 6.0 * (k1w[j] + 2 * k2w[j] + 2 * k3w[j] + k4w[j]);
        s.t = n * h;
        if (!std::isfinite(s.u) || std::abs(s.u) > 1e12) throw DivergenceError("hierarchy diverged", s.t);
        if (s.u < 0.0) {
            s.u = 0.0;
            ++tr.clip_events;
        }
        for (double& x : s.w) {
            if (!std::isfinite(x)) throw DivergenceError("hierarchy diverged", s.t);
            if (x < 0.0) {
                x = 0.0;
                ++tr.clip_events;
            }
        }
        if (n % output_every == 0 || n == steps) tr.states.push_back(s);
    }
    return tr;
}

}  // namespace spatlog
