#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "kernels.hpp"

namespace spatlog {

/// Logistic closed form of du/dt = (b - m)u - c u² with u(0) = u0.
inline double logistic_solution(double u0, double b, double m, double c, double t) {
    const double r = b - m;
    if (u0 == 0.0) return 0.0;
    if (r == 0.0) return u0 / (1.0 + c * u0 * t);
    const double e = std::exp(-r * t);
    return r * u0 / (c * u0 + (r - c * u0) * e);
}

/// Values on the n^d cell centres of [0, L)^d, row-major with x fastest.
struct DensityField {
    double L = 1.0;
    int d = 1;
    int n = 1;
    double t = 0.0;
    std::vector<double> rho;

    double dx() const { return L / n; }
    double x(int i) const { return (i + 0.5) * dx(); }
    static DensityField uniform(double L, int d, int n, double value) {
        const auto cells = static_cast<std::size_t>(d == 1 ? n : n * n);
        return {L, d, n, 0.0, std::vector<double>(cells, value)};
    }
};

/// Periodic truncated-kernel convolutions on a uniform grid.
///
/// Each kernel becomes a stencil of cell offsets within its cutoff with weights
/// ∫_cell a, rescaled so the weights sum to the truncated mass ⟨a⟩.
class KineticModel {
public:
    KineticModel(const ModelParams& p, int n) : p_(p), n_(n) {
        if (n < 1) throw InvalidArgument("kinetic grid needs n >= 1");
        const double dx = p.L / n;
        for (const Kernel* k : {&p.a_plus, &p.a_minus})
            if (!k->is_zero() && dx > k->cutoff() / 8.0 * (1 + 1e-12))
                throw InvalidArgument("kinetic grid spacing " + std::to_string(dx) + " exceeds r_cut/8 = " +
                                      std::to_string(k->cutoff() / 8.0));
        plus_ = stencil(p.a_plus);
        minus_ = stencil(p.a_minus);
        mass_plus_ = p.a_plus.is_zero() ? 0.0 : p.a_plus.total_mass();
        mass_minus_ = p.a_minus.is_zero() ? 0.0 : p.a_minus.total_mass();
    }

    const ModelParams& params() const { return p_; }
    int n() const { return n_; }
    double mass_plus() const { return mass_plus_; }
    double mass_minus() const { return mass_minus_; }
    /// Positive uniform equilibrium (⟨a⁺⟩ - m)/⟨a⁻⟩, or 0 when it does not exist.
    double equilibrium() const {
        if (mass_minus_ <= 0.0 || mass_plus_ <= p_.m) return 0.0;
        return (mass_plus_ - p_.m) / mass_minus_;
    }
    std::size_t cells() const { return static_cast<std::size_t>(p_.d == 1 ? n_ : n_ * n_); }

    DensityField field(double value) const { return DensityField::uniform(p_.L, p_.d, n_, value); }

    /// -mρ + a⁺⋆ρ - ρ (a⁻⋆ρ).
    void rhs(const std::vector<double>& rho, std::vector<double>& out) const {
        if (rho.size() != cells()) throw InvalidArgument("kinetic field size differs from the grid");
        out.resize(rho.size());
        for (std::size_t c = 0; c < rho.size(); ++c) {
            const double gain = convolve(plus_, rho, c);
            const double comp = minus_.empty() ? 0.0 : convolve(minus_, rho, c);
            out[c] = -p_.m * rho[c] + gain - rho[c] * comp;
        }
    }

private:
    struct Tap {
        int di, dj;
        double w;
    };

    // weight = cell average of a by an 8-point (per axis) midpoint rule, times dx^d
    std::vector<Tap> stencil(const Kernel& a) const {
        std::vector<Tap> taps;
        if (a.is_zero()) return taps;
        constexpr int kSub = 8;
        const double dx = p_.L / n_;
        const int reach = std::min(static_cast<int>(std::floor(a.cutoff() / dx + 0.5 + 1e-9)), n_ / 2);
        double acc = 0.0;
        const int jr = p_.d == 2 ? reach : 0;
        const int js = p_.d == 2 ? kSub : 1;
        for (int dj = -jr; dj <= jr; ++dj)
            for (int di = -reach; di <= reach; ++di) {
                double avg = 0.0;
                for (int b = 0; b < js; ++b)
                    for (int c = 0; c < kSub; ++c) {
                        const double x = dx * (di - 0.5 + (c + 0.5) / kSub);
                        const double y = p_.d == 2 ? dx * (dj - 0.5 + (b + 0.5) / kSub) : 0.0;
                        avg += a.radial(std::sqrt(x * x + y * y));
                    }
                avg /= kSub * js;
                if (avg <= 0.0) continue;
                const double w = avg * std::pow(dx, p_.d);
                taps.push_back({di, dj, w});
                acc += w;
            }
        const double mass = a.total_mass();
        if (acc > 0.0)
            for (auto& t : taps) t.w *= mass / acc;
        return taps;
    }

    double convolve(const std::vector<Tap>& taps, const std::vector<double>& rho, std::size_t c) const {
        const int i = static_cast<int>(c % static_cast<std::size_t>(n_));
        const int j = static_cast<int>(c / static_cast<std::size_t>(n_));
        double acc = 0.0;
        for (const auto& t : taps) {
            int ii = i + t.di, jj = j + t.dj;
            ii = ii < 0 ? ii + n_ : (ii >= n_ ? ii - n_ : ii);
            jj = jj < 0 ? jj + n_ : (jj >= n_ ? jj - n_ : jj);
            acc += t.w * rho[static_cast<std::size_t>(jj) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(ii)];
        }
        return acc;
    }

    ModelParams p_;
    int n_;
    std::vector<Tap> plus_, minus_;
    double mass_plus_ = 0.0, mass_minus_ = 0.0;
};

struct KineticTrajectory {
    std::vector<DensityField> fields;
    std::size_t clip_events = 0;
};

/// RK4 from rho0 to t_max, keeping every output_every-th step (and the last).
/// Negative values are clipped to 0 and counted; |ρ| > 1e12 raises DivergenceError.
inline KineticTrajectory integrate(const KineticModel& model, DensityField rho0, double dt, double t_max,
                                   int output_every = 1) {
    if (!(dt > 0.0)) throw InvalidArgument("integrate: dt must be > 0");
    if (!(t_max >= 0.0)) throw InvalidArgument("integrate: t_max must be >= 0");
    if (rho0.rho.size() != model.cells()) throw InvalidArgument("integrate: field does not match the grid");
    if (output_every < 1) output_every = 1;
    KineticTrajectory tr;
    tr.fields.push_back(rho0);
    const auto steps = static_cast<long long>(std::llround(t_max / dt));
    const double h = steps > 0 ? t_max / static_cast<double>(steps) : 0.0;
    DensityField s = std::move(rho0);
    const std::size_t C = s.rho.size();
    std::vector<double> k1, k2, k3, k4, tmp(C);
    for (long long n = 1; n <= steps; ++n) {
        model.rhs(s.rho, k1);
        for (std::size_t c = 0; c < C; ++c) tmp[c] = s.rho[c] + 0.5 * h * k1[c];
        model.rhs(tmp, k2);
        for (std::size_t c = 0; c < C; ++c) tmp[c] = s.rho[c] + 0.5 * h * k2[c];
        model.rhs(tmp, k3);
        for (std::size_t c = 0; c < C; ++c) tmp[c] = s.rho[c] + h * k3[c];
        model.rhs(tmp, k4);
        s.t = n * h;
        for (std::size_t c = 0; c < C; ++c) {
            double& x = s.rho[c];
            x += h / 6.0 * (k1[c] + 2 * k2[c] + 2 * k3[c] + k4[c]);
            if (!std::isfinite(x) || std::abs(x) > 1e12) throw DivergenceError("kinetic solution diverged", s.t);
            if (x < 0.0) {
                x = 0.0;
                ++tr.clip_events;
            }
        }
        if (n % output_every == 0 || n == steps) tr.fields.push_back(s);
    }
    return tr;
}

struct FrontSpeed {
    double speed = 0.0;
    double fit_residual = 0.0;  // RMS residual of the linear fit
    double t_begin = 0.0, t_end = 0.0;
    std::size_t points = 0;
    std::vector<double> times, positions;  // every tracked (t, front position)
    bool decayed = false;                  // density fell below the level: no front
    bool saturated = false;                // density above the level everywhere: no front
    bool truncated = false;                // front reached the boundary; window cut short
    std::string warning;
};

/// Rightmost x where ρ crosses `level` from above, linearly interpolated; NaN when
/// ρ < level everywhere and +inf when ρ >= level everywhere (d = 1 fields).
inline double front_position(const DensityField& f, double level) {
    if (f.d != 1) throw InvalidArgument("front_position: only d = 1 fields");
    int last = -1;
    for (int i = f.n - 1; i >= 0; --i)
        if (f.rho[static_cast<std::size_t>(i)] >= level) {
            last = i;
            break;
        }
    if (last < 0) return std::numeric_limits<double>::quiet_NaN();
    if (last == f.n - 1) {
        const bool all = std::all_of(f.rho.begin(), f.rho.end(), [&](double v) { return v >= level; });
        return all ? std::numeric_limits<double>::infinity() : f.x(last);
    }
    const double a = f.rho[static_cast<std::size_t>(last)], b = f.rho[static_cast<std::size_t>(last) + 1];
    return f.x(last) + f.dx() * (a - level) / (a - b);
}

/// Least-squares slope of the front position over the second half of the window.
/// Positions within `margin` of the right edge end the window (truncated flag).
inline FrontSpeed front_speed(const std::vector<DensityField>& traj, double level, double margin = 0.0) {
    if (traj.size() < 2) throw InvalidArgument("front_speed: need at least two snapshots");
    if (!(level > 0.0)) throw InvalidArgument("front_speed: level must be > 0");
    FrontSpeed out;
    const auto& last = traj.back();
    if (margin <= 0.0) margin = 2.0 * last.dx();
    bool all_saturated = true;
    for (const auto& f : traj) {
        const double x = front_position(f, level);
        if (std::isinf(x)) continue;
        all_saturated = false;
        if (std::isnan(x)) {
            if (&f == &last) out.decayed = true;
            continue;
        }
        if (x >= f.L - margin) {
            out.truncated = true;
            out.warning = "front reached the boundary at t = " + std::to_string(f.t) + "; window truncated";
            break;
        }
        out.times.push_back(f.t);
        out.positions.push_back(x);
    }
    if (all_saturated) {
        out.saturated = true;
        out.t_begin = traj.front().t;
        out.t_end = last.t;
        return out;
    }
    if (out.decayed) {
        out.warning = "density fell below the level; no front";
        return out;
    }
    if (out.times.size() < 2) {
        out.warning = "too few front positions for a fit";
        return out;
    }
    const double t_mid = 0.5 * (out.times.front() + out.times.back());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
    for (std::size_t i = 0; i < out.times.size(); ++i) {
        if (out.times[i] < t_mid) continue;
        const double t = out.times[i], y = out.positions[i];
        sx += t;
        sy += y;
        sxx += t * t;
        sxy += t * y;
        n += 1;
        if (out.points == 0) out.t_begin = t;
        out.t_end = t;
        ++out.points;
    }
    if (out.points < 2) {
        out.warning = "too few front positions for a fit";
        return out;
    }
    const double den = n * sxx - sx * sx;
    out.speed = (n * sxy - sx * sy) / den;
    const double icpt = (sy - out.speed * sx) / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < out.times.size(); ++i) {
        if (out.times[i] < t_mid) continue;
        const double e = out.positions[i] - (icpt + out.speed * out.times[i]);
        ss += e * e;
    }
    out.fit_residual = std::sqrt(ss / n);
    return out;
}

/// inf_{λ>0} (∫ψ(x) e^{λx} dx - m)/λ for a 1D kernel ψ (linear spreading speed).
inline double linear_spreading_speed(const Kernel& psi, double m) {
    if (psi.dim() != 1) throw InvalidArgument("linear_spreading_speed: 1D kernels only");
    if (psi.is_zero()) throw InvalidArgument("linear_spreading_speed: zero kernel");
    const double rc = psi.cutoff();
    const int nq = 4000;
    auto mgf = [&](double lam) {
        // 2 ∫_0^rc ψ(r) cosh(λr) dr, composite Simpson
        const double hq = rc / nq;
        double acc = 0.0;
        for (int i = 0; i <= nq; ++i) {
            const double r = i * hq;
            const double w = (i == 0 || i == nq) ? 1.0 : (i % 2 ? 4.0 : 2.0);
            acc += w * psi.radial(std::min(r, rc * (1 - 1e-15))) * std::cosh(lam * r);
        }
        return 2.0 * acc * hq / 3.0;
    };
    auto f = [&](double lam) { return (mgf(lam) - m) / lam; };
    double best_l = 1e-3, best = f(best_l);
    for (double lam = 1e-3; lam < 50.0 / rc; lam *= 1.05) {
        const double v = f(lam);
        if (v < best) {
            best = v;
            best_l = lam;
        }
    }
    double a = best_l / 1.05, b = best_l * 1.05;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 200 && b - a > 1e-12 * b; ++it) {
        const double c = b - g * (b - a), d = a + g * (b - a);
        if (f(c) < f(d))
            b = d;
        else
            a = c;
    }
    return f(0.5 * (a + b));
}

}  // namespace spatlog
