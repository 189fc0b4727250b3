#pragma once

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "kernels.hpp"

#include <nlohmann/json.hpp>

namespace spatlog {

// ---------------------------------------------------------------------------
// Continuum configurations

/// Finite set of distinct points in the periodic box [0, L)^d.
class Configuration {
public:
    Configuration(double L, int d) : L_(L), d_(d) {}
    Configuration(double L, int d, std::vector<Point> pts) : L_(L), d_(d), points_(std::move(pts)) {
        for (const auto& p : points_) check(p);
        std::set<Point> seen(points_.begin(), points_.end());
        if (seen.size() != points_.size()) throw InvalidArgument("configuration has duplicate points");
    }

    double L() const { return L_; }
    int d() const { return d_; }
    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }
    const std::vector<Point>& points() const { return points_; }
    const Point& operator[](std::size_t i) const { return points_[i]; }

    /// Configuration with point i removed (η \ x).
    Configuration without(std::size_t i) const {
        Configuration c(L_, d_);
        c.points_ = points_;
        c.points_.erase(c.points_.begin() + static_cast<std::ptrdiff_t>(i));
        return c;
    }

private:
    void check(const Point& p) const {
        for (int k = 0; k < d_; ++k)
            if (!(p[k] >= 0.0 && p[k] < L_)) throw InvalidArgument("configuration point outside [0, L)^d");
    }

    double L_;
    int d_;
    std::vector<Point> points_;
};

/// E^±(x, η) = Σ_{y∈η} a(x - y) with minimum-image distances.
inline double energy(const Kernel& a, const Point& x, const Configuration& eta) {
    double acc = 0.0;
    for (const auto& y : eta.points()) acc += a.eval(torus_displacement(y, x, eta.L(), eta.d()));
    return acc;
}
inline double energy_plus(const Point& x, const Configuration& eta, const ModelParams& p) {
    return energy(p.a_plus, x, eta);
}
inline double energy_minus(const Point& x, const Configuration& eta, const ModelParams& p) {
    return energy(p.a_minus, x, eta);
}

struct Energies {
    double competition = 0.0;  // E⁻(η)
    double total = 0.0;        // E(η) = m|η| + E⁻(η)
    double xi = 0.0;           // Ξ(η) = E(η) + ⟨a⁺⟩|η|
};

inline Energies energy_total(const Configuration& eta, const ModelParams& p) {
    Energies e;
    for (std::size_t i = 0; i < eta.size(); ++i) e.competition += energy_minus(eta[i], eta.without(i), p);
    const double n = static_cast<double>(eta.size());
    e.total = p.m * n + e.competition;
    e.xi = e.total + p.a_plus.total_mass() * n;
    return e;
}

// ---------------------------------------------------------------------------
// Discretized finite-volume configuration space

using Mask = std::uint64_t;

inline int popcount(Mask m) { return std::popcount(m); }

/// Sites at the cell centres of a uniform partition of [0, L)^d (or explicit
/// positions); v is the cell volume.
class SiteLattice {
public:
    static SiteLattice uniform(double L, int cells_per_side, int d) {
        if (cells_per_side < 1) throw InvalidArgument("lattice needs at least one cell per side");
        if (d != 1 && d != 2) throw InvalidArgument("lattice dimension must be 1 or 2");
        SiteLattice lat;
        lat.L_ = L;
        lat.d_ = d;
        lat.per_side_ = cells_per_side;
        const double h = L / cells_per_side;
        lat.v_ = std::pow(h, d);
        if (d == 1) {
            for (int i = 0; i < cells_per_side; ++i) lat.sites_.push_back({(i + 0.5) * h, 0.0});
        } else {
            for (int j = 0; j < cells_per_side; ++j)
                for (int i = 0; i < cells_per_side; ++i) lat.sites_.push_back({(i + 0.5) * h, (j + 0.5) * h});
        }
        return lat;
    }

    /// Arbitrary site positions in the box of side L with common cell volume v.
    static SiteLattice explicit_sites(double L, int d, std::vector<Point> sites, double v) {
        if (!(v > 0.0)) throw InvalidArgument("lattice cell volume must be > 0");
        SiteLattice lat;
        lat.L_ = L;
        lat.d_ = d;
        lat.v_ = v;
        lat.sites_ = std::move(sites);
        return lat;
    }

    int size() const { return static_cast<int>(sites_.size()); }
    double L() const { return L_; }
    int d() const { return d_; }
    double v() const { return v_; }
    int cells_per_side() const { return per_side_; }
    const Point& site(int i) const { return sites_[static_cast<std::size_t>(i)]; }
    double distance(int i, int j) const { return torus_distance(site(i), site(j), L_, d_); }

private:
    double L_ = 1.0;
    int d_ = 1;
    int per_side_ = 0;
    double v_ = 1.0;
    std::vector<Point> sites_;
};

/// All site subsets η with |η| <= N, ordered by size then mask value.
class SubsetSpace {
public:
    static constexpr std::size_t kMaxEntries = std::size_t{1} << 22;

    SubsetSpace(int sites, int cap) : sites_(sites), cap_(cap) {
        if (sites < 0 || sites > 64) throw InvalidTruncation("subset space supports 0..64 sites");
        if (cap < 0 || cap > sites) throw InvalidTruncation("particle-number cap N must satisfy 0 <= N <= M");
        double total = 0.0, binom = 1.0;
        for (int k = 0; k <= cap; ++k) {
            total += binom;
            binom = binom * (sites - k) / (k + 1);
        }
        if (total > static_cast<double>(kMaxEntries)) throw InvalidTruncation("subset space too large to enumerate");
        masks_.reserve(static_cast<std::size_t>(total));
        for (int k = 0; k <= cap; ++k) enumerate_size(k);
        if (sites <= 22) {
            dense_.assign(std::size_t{1} << sites, -1);
            for (std::size_t i = 0; i < masks_.size(); ++i) dense_[masks_[i]] = static_cast<std::int32_t>(i);
        } else {
            for (std::size_t i = 0; i < masks_.size(); ++i) sparse_.emplace(masks_[i], static_cast<std::int64_t>(i));
        }
    }

    int sites() const { return sites_; }
    int cap() const { return cap_; }
    std::size_t size() const { return masks_.size(); }
    Mask mask(std::size_t i) const { return masks_[i]; }
    const std::vector<Mask>& masks() const { return masks_; }

    /// Index of the subset, or -1 when it lies outside the space.
    std::int64_t index(Mask m) const {
        if (!dense_.empty()) return m < dense_.size() ? dense_[m] : -1;
        const auto it = sparse_.find(m);
        return it == sparse_.end() ? -1 : it->second;
    }
    bool contains(Mask m) const { return index(m) >= 0; }

private:
    void enumerate_size(int k) {
        if (k == 0) {
            masks_.push_back(0);
            return;
        }
        Mask m = (k == 64) ? ~Mask{0} : ((Mask{1} << k) - 1);
        const Mask limit = (sites_ == 64) ? ~Mask{0} : ((Mask{1} << sites_) - 1);
        while (true) {
            masks_.push_back(m);
            if (m == (limit & ~((Mask{1} << (sites_ - k)) - 1)) || k == sites_) break;
            const Mask c = m & (~m + 1);  // Gosper's hack
            const Mask r = m + c;
            m = (((r ^ m) >> 2) / c) | r;
            if (m > limit) break;
        }
    }

    int sites_, cap_;
    std::vector<Mask> masks_;
    std::vector<std::int32_t> dense_;
    std::unordered_map<Mask, std::int64_t> sparse_;
};

using SpacePtr = std::shared_ptr<const SubsetSpace>;

inline SpacePtr make_space(int sites, int cap) { return std::make_shared<const SubsetSpace>(sites, cap); }

/// A real function on the subsets of a SubsetSpace; entries outside read as 0.
class TruncatedFunction {
public:
    explicit TruncatedFunction(SpacePtr space)
        : space_(std::move(space)), values_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space_->size()))) {}
    TruncatedFunction(SpacePtr space, Eigen::VectorXd values) : space_(std::move(space)), values_(std::move(values)) {
        if (values_.size() != static_cast<Eigen::Index>(space_->size()))
            throw InvalidArgument("truncated function size differs from its subset space");
    }

    const SpacePtr& space() const { return space_; }
    std::size_t size() const { return space_->size(); }
    const Eigen::VectorXd& values() const { return values_; }
    Eigen::VectorXd& values() { return values_; }

    double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }
    double& operator[](std::size_t i) { return values_[static_cast<Eigen::Index>(i)]; }

    double at(Mask m) const {
        const auto i = space_->index(m);
        return i < 0 ? 0.0 : values_[i];
    }
    void set(Mask m, double value) {
        const auto i = space_->index(m);
        if (i < 0) throw InvalidArgument("subset outside the truncated space");
        values_[i] = value;
    }

    /// Build from a callable f(mask).
    template <class F>
    static TruncatedFunction from(SpacePtr space, F&& f) {
        TruncatedFunction g(space);
        for (std::size_t i = 0; i < space->size(); ++i) g[i] = f(space->mask(i));
        return g;
    }

private:
    SpacePtr space_;
    Eigen::VectorXd values_;
};

/// Σ_{|η|<=N} F(η) v^{|η|}: the discrete Lebesgue–Poisson integral.
inline double lp_integral(const TruncatedFunction& F, double v) {
    double acc = 0.0;
    for (std::size_t i = 0; i < F.size(); ++i) acc += F[i] * std::pow(v, popcount(F.space()->mask(i)));
    return acc;
}
inline double lp_integral(const TruncatedFunction& F, const SiteLattice& lat) { return lp_integral(F, lat.v()); }

/// ⟨⟨G, k⟩⟩ = Σ_η G(η) k(η) v^{|η|}.
inline double pairing(const TruncatedFunction& G, const TruncatedFunction& k, double v) {
    if (G.size() != k.size()) throw InvalidArgument("pairing: functions live on different spaces");
    double acc = 0.0;
    for (std::size_t i = 0; i < G.size(); ++i) acc += G[i] * k[i] * std::pow(v, popcount(G.space()->mask(i)));
    return acc;
}
inline double pairing(const TruncatedFunction& G, const TruncatedFunction& k, const SiteLattice& lat) {
    return pairing(G, k, lat.v());
}

/// (KG)(γ) = Σ_{η⊆γ} G(η).
inline TruncatedFunction k_transform(const TruncatedFunction& G) {
    TruncatedFunction out(G.space());
    const auto& sp = *G.space();
    for (std::size_t i = 0; i < sp.size(); ++i) {
        const Mask gamma = sp.mask(i);
        double acc = 0.0;
        for (Mask sub = gamma;; sub = (sub - 1) & gamma) {
            acc += G.at(sub);
            if (sub == 0) break;
        }
        out[i] = acc;
    }
    return out;
}

/// (K⁻¹F)(η) = Σ_{ξ⊆η} (-1)^{|η∖ξ|} F(ξ).
inline TruncatedFunction k_inverse(const TruncatedFunction& F) {
    TruncatedFunction out(F.space());
    const auto& sp = *F.space();
    for (std::size_t i = 0; i < sp.size(); ++i) {
        const Mask eta = sp.mask(i);
        double acc = 0.0;
        for (Mask sub = eta;; sub = (sub - 1) & eta) {
            acc += ((popcount(eta ^ sub) & 1) ? -1.0 : 1.0) * F.at(sub);
            if (sub == 0) break;
        }
        out[i] = acc;
    }
    return out;
}

/// ‖G‖_α = Σ_η |G(η)| e^{-α|η|} v^{|η|}.
inline double norm_G(const TruncatedFunction& G, double v, double alpha) {
    double acc = 0.0;
    for (std::size_t i = 0; i < G.size(); ++i) {
        const int n = popcount(G.space()->mask(i));
        acc += std::abs(G[i]) * std::exp(-alpha * n) * std::pow(v, n);
    }
    return acc;
}
inline double norm_G(const TruncatedFunction& G, const SiteLattice& lat, double alpha) {
    return norm_G(G, lat.v(), alpha);
}

/// ‖k‖_α = max_η |k(η)| e^{α|η|}.
inline double norm_K(const TruncatedFunction& k, double alpha) {
    double best = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i)
        best = std::max(best, std::abs(k[i]) * std::exp(alpha * popcount(k.space()->mask(i))));
    return best;
}

// ---------------------------------------------------------------------------
// JSON: {"sites": M, "cap": N, "entries": [[[site indices...], value], ...]}

inline nlohmann::json to_json(const TruncatedFunction& f) {
    nlohmann::json entries = nlohmann::json::array();
    for (std::size_t i = 0; i < f.size(); ++i) {
        nlohmann::json idx = nlohmann::json::array();
        for (Mask m = f.space()->mask(i); m; m &= m - 1) idx.push_back(std::countr_zero(m));
        entries.push_back(nlohmann::json::array({idx, f[i]}));
    }
    return {{"sites", f.space()->sites()}, {"cap", f.space()->cap()}, {"entries", entries}};
}

inline TruncatedFunction truncated_function_from_json(const nlohmann::json& j, SpacePtr space = nullptr) {
    const int M = j.at("sites").get<int>();
    const int N = j.at("cap").get<int>();
    if (!space) space = make_space(M, N);
    if (space->sites() != M || space->cap() != N) throw InvalidArgument("truncated function JSON: space mismatch");
    TruncatedFunction f(space);
    std::set<Mask> seen;
    for (const auto& e : j.at("entries")) {
        Mask m = 0;
        for (const auto& s : e.at(0)) {
            const int site = s.get<int>();
            if (site < 0 || site >= M) throw InvalidArgument("truncated function JSON: site index out of range");
            if (m & (Mask{1} << site)) throw InvalidArgument("truncated function JSON: repeated site in subset");
            m |= Mask{1} << site;
        }
        if (popcount(m) > N) throw InvalidArgument("truncated function JSON: subset larger than cap");
        if (!seen.insert(m).second) throw InvalidArgument("truncated function JSON: duplicate subset");
        f.set(m, e.at(1).get<double>());
    }
    return f;
}

}  // namespace spatlog
