#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "rng.hpp"

namespace spatlog {

enum class KernelShape { zero, gaussian, tophat, exponential, tabulated };

inline const char* to_string(KernelShape s) {
    switch (s) {
        case KernelShape::zero: return "zero";
        case KernelShape::gaussian: return "gaussian";
        case KernelShape::tophat: return "tophat";
        case KernelShape::exponential: return "exponential";
        case KernelShape::tabulated: return "tabulated";
    }
    return "?";
}

/// Radially symmetric, nonnegative interaction kernel with a hard cutoff.
///
/// The kernel is immutable. Every quantity derived from it (total mass,
/// sampling law, lattice sums) refers to the truncated kernel, i.e. the
/// profile multiplied by 1{|x| <= cutoff()}.
class Kernel {
public:
    /// Radius beyond which the default cutoff treats the kernel as zero:
    /// eval < kTailFraction * sup_norm.
    static constexpr double kTailFraction = 1e-8;

    static Kernel zero(int d) {
        Kernel k(KernelShape::zero, d);
        k.cutoff_ = 0.0;
        return k;
    }

    /// mass * N(0, σ² I_d) density.
    static Kernel gaussian(int d, double sigma, double mass = 1.0,
                           std::optional<double> r_cut = std::nullopt) {
        if (!(sigma > 0.0)) throw InvalidKernel("gaussian kernel needs sigma > 0");
        if (!(mass >= 0.0)) throw InvalidKernel("gaussian kernel needs mass >= 0");
        Kernel k(KernelShape::gaussian, d);
        k.p0_ = sigma;
        k.p1_ = mass;
        k.set_cutoff(r_cut, sigma * std::sqrt(-2.0 * std::log(kTailFraction)));
        return k;
    }

    /// height * 1{|x| <= radius}.
    static Kernel tophat(int d, double height, double radius,
                         std::optional<double> r_cut = std::nullopt) {
        if (!(radius > 0.0)) throw InvalidKernel("tophat kernel needs radius > 0");
        if (!(height >= 0.0)) throw InvalidKernel("tophat kernel needs height >= 0");
        Kernel k(KernelShape::tophat, d);
        k.p0_ = height;
        k.p1_ = radius;
        k.set_cutoff(r_cut, radius);
        if (k.cutoff_ > radius) k.cutoff_ = radius;
        return k;
    }

    /// amplitude * exp(-rate |x|).
    static Kernel exponential(int d, double rate, double amplitude,
                              std::optional<double> r_cut = std::nullopt) {
        if (!(rate > 0.0)) throw InvalidKernel("exponential kernel needs rate > 0");
        if (!(amplitude >= 0.0)) throw InvalidKernel("exponential kernel needs amplitude >= 0");
        Kernel k(KernelShape::exponential, d);
        k.p0_ = rate;
        k.p1_ = amplitude;
        k.set_cutoff(r_cut, -std::log(kTailFraction) / rate);
        return k;
    }

    /// Piecewise-linear radial profile through (r_i, value_i); zero past the last node.
    static Kernel tabulated(int d, std::vector<double> r, std::vector<double> values,
                            std::optional<double> r_cut = std::nullopt) {
        if (r.size() < 2 || r.size() != values.size())
            throw InvalidKernel("tabulated kernel needs at least two (r, value) rows");
        if (r.front() != 0.0) throw InvalidKernel("tabulated kernel radii must start at 0");
        for (std::size_t i = 1; i < r.size(); ++i)
            if (!(r[i] > r[i - 1])) throw InvalidKernel("tabulated kernel radii must be strictly increasing");
        for (double v : values)
            if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidKernel("tabulated kernel values must be finite and >= 0");
        Kernel k(KernelShape::tabulated, d);
        k.table_r_ = std::move(r);
        k.table_v_ = std::move(values);
        k.set_cutoff(r_cut, k.table_r_.back());
        if (k.cutoff_ > k.table_r_.back()) k.cutoff_ = k.table_r_.back();
        return k;
    }

    /// Two-column CSV `r,value` (an optional non-numeric header line is skipped).
    static Kernel from_csv(int d, const std::string& path, std::optional<double> r_cut = std::nullopt) {
        std::ifstream in(path);
        if (!in) throw InvalidKernel("cannot open kernel table '" + path + "'");
        std::vector<double> r, v;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            std::replace(line.begin(), line.end(), ',', ' ');
            std::istringstream ss(line);
            double a = 0, b = 0;
            if (!(ss >> a >> b)) {
                if (lineno == 1) continue;
                throw InvalidKernel(path + ":" + std::to_string(lineno) + ": expected 'r,value'");
            }
            r.push_back(a);
            v.push_back(b);
        }
        return tabulated(d, std::move(r), std::move(v), r_cut);
    }

    /// Same profile, explicit cutoff.
    Kernel with_cutoff(double r_cut) const {
        if (!(r_cut >= 0.0)) throw InvalidKernel("kernel cutoff must be >= 0");
        Kernel k = *this;
        k.cutoff_ = r_cut;
        if (shape_ == KernelShape::tophat) k.cutoff_ = std::min(r_cut, p1_);
        if (shape_ == KernelShape::tabulated) k.cutoff_ = std::min(r_cut, table_r_.back());
        k.default_cutoff_ = false;
        return k;
    }

    /// Same shape, every value multiplied by factor >= 0.
    Kernel scaled(double factor) const {
        if (!(factor >= 0.0)) throw InvalidKernel("kernel scale factor must be >= 0");
        Kernel k = *this;
        switch (shape_) {
            case KernelShape::zero: break;
            case KernelShape::gaussian: k.p1_ *= factor; break;
            case KernelShape::tophat: k.p0_ *= factor; break;
            case KernelShape::exponential: k.p1_ *= factor; break;
            case KernelShape::tabulated:
                for (double& v : k.table_v_) v *= factor;
                break;
        }
        return k;
    }

    KernelShape shape() const { return shape_; }
    int dim() const { return dim_; }
    double cutoff() const { return cutoff_; }
    bool cutoff_is_default() const { return default_cutoff_; }

    /// True when the kernel vanishes identically.
    bool is_zero() const { return shape_ == KernelShape::zero || !(sup_norm() > 0.0) || cutoff_ <= 0.0; }

    // shape parameters (meaning depends on shape)
    double sigma() const { return p0_; }
    double gaussian_mass() const { return p1_; }
    double height() const { return p0_; }
    double radius() const { return p1_; }
    double rate() const { return p0_; }
    double amplitude() const { return p1_; }
    const std::vector<double>& table_r() const { return table_r_; }
    const std::vector<double>& table_values() const { return table_v_; }

    /// Radial profile a(r), zero for r > cutoff().
    double radial(double r) const {
        if (r > cutoff_) return 0.0;
        switch (shape_) {
            case KernelShape::zero: return 0.0;
            case KernelShape::gaussian:
                return p1_ * gauss_norm() * std::exp(-0.5 * r * r / (p0_ * p0_));
            case KernelShape::tophat: return p0_;
            case KernelShape::exponential: return p1_ * std::exp(-p0_ * r);
            case KernelShape::tabulated: return interpolate(r);
        }
        return 0.0;
    }

    double eval(const Point& x) const { return radial(norm(x, dim_)); }

    /// ⟨a⟩ = ∫ a(x) dx over the truncated support.
    double total_mass() const { return mass_within(cutoff_); }

    /// ‖a‖ = max of eval.
    double sup_norm() const {
        switch (shape_) {
            case KernelShape::zero: return 0.0;
            case KernelShape::gaussian: return p1_ * gauss_norm();
            case KernelShape::tophat: return p0_;
            case KernelShape::exponential: return p1_;
            case KernelShape::tabulated: {
                double best = 0.0;
                for (std::size_t i = 0; i < table_r_.size() && table_r_[i] <= cutoff_; ++i)
                    best = std::max(best, table_v_[i]);
                return std::max(best, interpolate(std::min(cutoff_, table_r_.back())));
            }
        }
        return 0.0;
    }

    /// ∫_{|x| <= r} a(x) dx for r <= cutoff (clamped otherwise).
    double mass_within(double r) const {
        r = std::clamp(r, 0.0, cutoff_);
        switch (shape_) {
            case KernelShape::zero: return 0.0;
            case KernelShape::gaussian: {
                const double s = p0_;
                return dim_ == 1 ? p1_ * std::erf(r / (s * std::sqrt(2.0)))
                                 : p1_ * -std::expm1(-0.5 * r * r / (s * s));
            }
            case KernelShape::tophat: return p0_ * ball_volume(std::min(r, p1_), dim_);
            case KernelShape::exponential: {
                const double b = p0_, c = p1_;
                if (dim_ == 1) return 2.0 * c / b * -std::expm1(-b * r);
                return 2.0 * M_PI * c / (b * b) * (1.0 - std::exp(-b * r) * (1.0 + b * r));
            }
            case KernelShape::tabulated: return table_mass_within(r);
        }
        return 0.0;
    }

    /// Random displacement with density eval(·)/total_mass().
    Point sample_displacement(Philox4x32& rng) const {
        if (is_zero()) throw InvalidKernel("cannot sample from a zero kernel");
        Point p{0.0, 0.0};
        switch (shape_) {
            case KernelShape::zero: break;
            case KernelShape::gaussian: {
                std::normal_distribution<double> normal(0.0, p0_);
                do {
                    for (int k = 0; k < dim_; ++k) p[k] = normal(rng);
                } while (norm(p, dim_) > cutoff_);
                return p;
            }
            case KernelShape::tophat: {
                const double R = std::min(p1_, cutoff_);
                if (dim_ == 1) return {(2.0 * rng.uniform() - 1.0) * R, 0.0};
                return on_circle(R * std::sqrt(rng.uniform()), rng);
            }
            case KernelShape::exponential: {
                const double b = p0_;
                if (dim_ == 1) {
                    const double r = -std::log1p(-rng.uniform() * -std::expm1(-b * cutoff_)) / b;
                    return {rng.uniform() < 0.5 ? -r : r, 0.0};
                }
                // radial law ∝ r e^{-br}: Gamma(2, 1/b) truncated to the cutoff
                if (mass_within(cutoff_) / (2.0 * M_PI * p1_ / (b * b)) > 0.5) {
                    double r;
                    do {
                        r = -(std::log1p(-rng.uniform()) + std::log1p(-rng.uniform())) / b;
                    } while (r > cutoff_);
                    return on_circle(r, rng);
                }
                return sample_by_rejection(rng);
            }
            case KernelShape::tabulated: return sample_tabulated(rng);
        }
        return p;
    }

private:
    Kernel(KernelShape s, int d) : shape_(s), dim_(d) {
        if (d != 1 && d != 2) throw InvalidKernel("kernel dimension must be 1 or 2");
    }

    void set_cutoff(std::optional<double> r_cut, double natural) {
        if (r_cut) {
            if (!(*r_cut >= 0.0)) throw InvalidKernel("kernel cutoff must be >= 0");
            cutoff_ = *r_cut;
            default_cutoff_ = false;
        } else {
            cutoff_ = natural;
            default_cutoff_ = true;
        }
    }

    double gauss_norm() const { return std::pow(2.0 * M_PI * p0_ * p0_, -0.5 * dim_); }

    double interpolate(double r) const {
        if (r >= table_r_.back()) return r == table_r_.back() ? table_v_.back() : 0.0;
        const auto it = std::upper_bound(table_r_.begin(), table_r_.end(), r);
        const std::size_t i = static_cast<std::size_t>(it - table_r_.begin()) - 1;
        const double t = (r - table_r_[i]) / (table_r_[i + 1] - table_r_[i]);
        return table_v_[i] + t * (table_v_[i + 1] - table_v_[i]);
    }

    // ∫ r^{d-1} a(r) dr over one linear piece [r0, r1]; Simpson is exact for
    // the (at most quadratic) integrand.
    double segment_radial_mass(double r0, double r1) const {
        const double rm = 0.5 * (r0 + r1);
        auto f = [&](double r) { return (dim_ == 1 ? 1.0 : r) * interpolate(r); };
        return (r1 - r0) / 6.0 * (f(r0) + 4.0 * f(rm) + f(r1));
    }

    double table_mass_within(double r) const {
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < table_r_.size() && table_r_[i] < r; ++i)
            acc += segment_radial_mass(table_r_[i], std::min(table_r_[i + 1], r));
        return (dim_ == 1 ? 2.0 : 2.0 * M_PI) * acc;
    }

    Point on_circle(double r, Philox4x32& rng) const {
        const double phi = 2.0 * M_PI * rng.uniform();
        return {r * std::cos(phi), r * std::sin(phi)};
    }

    // Uniform point in the cutoff ball, accepted with probability a(r)/‖a‖.
    Point sample_by_rejection(Philox4x32& rng) const {
        const double top = sup_norm();
        for (;;) {
            Point p{0.0, 0.0};
            if (dim_ == 1) {
                p[0] = (2.0 * rng.uniform() - 1.0) * cutoff_;
            } else {
                p = on_circle(cutoff_ * std::sqrt(rng.uniform()), rng);
            }
            if (rng.uniform() * top <= radial(norm(p, dim_))) return p;
        }
    }

    Point sample_tabulated(Philox4x32& rng) const {
        std::vector<double> cum;
        std::vector<std::pair<double, double>> seg;
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < table_r_.size() && table_r_[i] < cutoff_; ++i) {
            const double r0 = table_r_[i], r1 = std::min(table_r_[i + 1], cutoff_);
            acc += segment_radial_mass(r0, r1);
            cum.push_back(acc);
            seg.emplace_back(r0, r1);
        }
        const double u = rng.uniform() * acc;
        std::size_t s = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
        s = std::min(s, seg.size() - 1);
        while (s > 0 && cum[s] == cum[s - 1]) --s;
        const auto [r0, r1] = seg[s];
        const double bound = (dim_ == 1 ? 1.0 : r1) * std::max(interpolate(r0), interpolate(r1));
        double r;
        for (;;) {
            r = r0 + (r1 - r0) * rng.uniform();
            if (rng.uniform() * bound <= (dim_ == 1 ? 1.0 : r) * interpolate(r)) break;
        }
        if (dim_ == 1) return {rng.uniform() < 0.5 ? -r : r, 0.0};
        return on_circle(r, rng);
    }

    KernelShape shape_;
    int dim_;
    double p0_ = 0.0, p1_ = 0.0;
    std::vector<double> table_r_, table_v_;
    double cutoff_ = 0.0;
    bool default_cutoff_ = true;
};

/// Parameters of the birth-and-death model on the periodic box [0, L)^d.
struct ModelParams {
    double m = 0.0;
    Kernel a_plus = Kernel::zero(1);
    Kernel a_minus = Kernel::zero(1);
    double L = 1.0;
    int d = 1;
};

/// Every invariant violation, with dot-path field names; empty when valid.
inline std::vector<std::string> model_errors(const ModelParams& p) {
    std::vector<std::string> errs;
    if (!(p.m >= 0.0) || !std::isfinite(p.m)) errs.push_back("model.m: mortality must be finite and >= 0");
    if (!(p.L > 0.0) || !std::isfinite(p.L)) errs.push_back("model.L: box side must be finite and > 0");
    if (p.d != 1 && p.d != 2) errs.push_back("model.d: dimension must be 1 or 2");
    auto check = [&](const Kernel& k, const char* name) {
        if (k.dim() != p.d)
            errs.push_back(std::string("model.") + name + ": kernel dimension differs from model.d");
        if (k.cutoff() > 0.5 * p.L * (1 + 1e-12))
            errs.push_back(std::string("model.") + name + ": cutoff " + std::to_string(k.cutoff()) +
                           " exceeds L/2 = " + std::to_string(0.5 * p.L) + " (minimum-image violation)");
    };
    check(p.a_plus, "a_plus");
    check(p.a_minus, "a_minus");
    return errs;
}

/// Validated model; kernels whose cutoff was chosen by default are capped at L/2.
inline ModelParams make_model(double m, Kernel a_plus, Kernel a_minus, double L, int d) {
    auto cap = [&](Kernel k) {
        if (k.cutoff_is_default() && k.cutoff() > 0.5 * L && k.shape() != KernelShape::tophat &&
            k.shape() != KernelShape::tabulated)
            return k.with_cutoff(0.5 * L);
        return k;
    };
    ModelParams p{m, cap(std::move(a_plus)), cap(std::move(a_minus)), L, d};
    const auto errs = model_errors(p);
    if (!errs.empty()) {
        std::string msg;
        for (const auto& e : errs) msg += (msg.empty() ? "" : "; ") + e;
        throw InvalidModel(msg);
    }
    return p;
}

/// Least θ with a⁺(x) <= θ a⁻(x) for all x; std::nullopt when no finite θ exists.
///
/// Zero a⁺ gives θ = 0. Tophat/tophat, gaussian/gaussian with equal σ and
/// exponential/exponential with equal rate are handled analytically; other
/// pairs use a dense radial grid (including all profile breakpoints), where a
/// ratio above 1e8 or a⁻ vanishing under a⁺ counts as divergence.
inline std::optional<double> domination_theta(const Kernel& plus, const Kernel& minus) {
    if (plus.dim() != minus.dim()) throw InvalidArgument("domination_theta: kernels differ in dimension");
    if (plus.is_zero()) return 0.0;
    if (minus.is_zero()) return std::nullopt;
    const double rp = plus.cutoff(), rm = minus.cutoff();
    if (plus.shape() == minus.shape()) {
        switch (plus.shape()) {
            case KernelShape::tophat:
                if (rp > rm) return std::nullopt;
                return plus.height() / minus.height();
            case KernelShape::gaussian:
                if (plus.sigma() == minus.sigma()) {
                    if (rp > rm) return std::nullopt;
                    return plus.gaussian_mass() / minus.gaussian_mass();
                }
                break;
            case KernelShape::exponential:
                if (plus.rate() == minus.rate()) {
                    if (rp > rm) return std::nullopt;
                    return plus.amplitude() / minus.amplitude();
                }
                break;
            default: break;
        }
    }
    constexpr int kGrid = 20000;
    constexpr double kDiverged = 1e8;
    std::vector<double> radii;
    radii.reserve(kGrid + 16);
    for (int i = 0; i <= kGrid; ++i) radii.push_back(rp * i / kGrid);
    for (const Kernel* k : {&plus, &minus}) {
        if (k->shape() == KernelShape::tabulated)
            for (double r : k->table_r()) radii.push_back(r);
        radii.push_back(k->cutoff());
    }
    double theta = 0.0;
    for (double r : radii) {
        if (r > rp) continue;
        const double num = plus.radial(r);
        if (num <= 0.0) continue;
        const double den = minus.radial(r);
        if (den <= 0.0) return std::nullopt;
        theta = std::max(theta, num / den);
    }
    if (theta > kDiverged) return std::nullopt;
    return theta * (1.0 + 1e-9);
}

/// e^{α*} θ < 1 (strict).
inline bool check_theta_condition(double theta, double alpha_star) {
    if (!(theta > 0.0)) throw InvalidArgument("check_theta_condition: theta must be > 0");
    return std::exp(alpha_star) * theta < 1.0;
}

}  // namespace spatlog
