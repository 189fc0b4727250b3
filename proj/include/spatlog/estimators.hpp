#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"

namespace spatlog {

/// One point set per replica, all at the same time.
using Ensemble = std::vector<std::vector<Point>>;

struct ValueWithError {
    double value = 0.0;
    double stderr_ = 0.0;
    bool stderr_defined = false;  // false with fewer than two replicas
    bool defined = true;          // false when the estimator itself is undefined (e.g. k1 = 0)
};

struct CorrelationEstimate {
    double L = 1.0;
    int d = 1;
    std::size_t samples = 0;
    ValueWithError k1;
    std::vector<double> edges;
    std::vector<double> k2, k2_stderr;
};

namespace detail {

inline void mean_and_stderr(const std::vector<double>& x, ValueWithError& out) {
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    out.value = mean;
    if (x.size() < 2) {
        out.stderr_ = 0.0;
        out.stderr_defined = false;
        return;
    }
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    out.stderr_ = std::sqrt(ss / (n - 1) / n);
    out.stderr_defined = true;
}

inline double volume(double L, int d) { return std::pow(L, d); }

/// Measure of the shell {r_lo <= |z| < r_hi}.
inline double shell_measure(double r_lo, double r_hi, int d) { return ball_volume(r_hi, d) - ball_volume(r_lo, d); }

inline void check_edges(const std::vector<double>& edges, double L) {
    if (edges.size() < 2) throw InvalidArgument("need at least two bin edges");
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (!(edges[i] > edges[i - 1])) throw InvalidArgument("bin edges must be strictly increasing");
    if (edges.front() < 0.0) throw InvalidArgument("bin edges must be >= 0");
    if (edges.back() > 0.5 * L * (1 + 1e-12)) throw InvalidArgument("bin edges beyond L/2");
}

/// Ordered-pair counts per bin for one point set.
inline std::vector<double> pair_counts(const std::vector<Point>& pts, const std::vector<double>& edges, double L,
                                       int d) {
    std::vector<double> c(edges.size() - 1, 0.0);
    const double rmax = edges.back();
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            const double r = torus_distance(pts[i], pts[j], L, d);
            if (r < edges.front() || r >= rmax) continue;
            const auto it = std::upper_bound(edges.begin(), edges.end(), r);
            c[static_cast<std::size_t>(it - edges.begin()) - 1] += 2.0;
        }
    return c;
}

}  // namespace detail

/// Mean of N / L^d with across-replica standard error.
inline ValueWithError estimate_k1(const Ensemble& ens, double L, int d) {
    if (ens.empty()) throw InvalidArgument("estimate_k1: empty ensemble");
    std::vector<double> x;
    for (const auto& pts : ens) x.push_back(static_cast<double>(pts.size()) / detail::volume(L, d));
    ValueWithError out;
    detail::mean_and_stderr(x, out);
    return out;
}

/// k̂2 per bin: ordered pairs at distance in the bin / (L^d · shell measure), averaged over replicas.
inline CorrelationEstimate estimate_k2_radial(const Ensemble& ens, const std::vector<double>& edges, double L, int d) {
    if (ens.empty()) throw InvalidArgument("estimate_k2_radial: empty ensemble");
    detail::check_edges(edges, L);
    CorrelationEstimate est;
    est.L = L;
    est.d = d;
    est.samples = ens.size();
    est.edges = edges;
    est.k1 = estimate_k1(ens, L, d);
    const std::size_t nb = edges.size() - 1;
    std::vector<std::vector<double>> per_bin(nb);
    for (const auto& pts : ens) {
        const auto c = detail::pair_counts(pts, edges, L, d);
        for (std::size_t b = 0; b < nb; ++b)
            per_bin[b].push_back(c[b] / (detail::volume(L, d) * detail::shell_measure(edges[b], edges[b + 1], d)));
    }
    for (std::size_t b = 0; b < nb; ++b) {
        ValueWithError v;
        detail::mean_and_stderr(per_bin[b], v);
        est.k2.push_back(v.value);
        est.k2_stderr.push_back(v.stderr_);
    }
    return est;
}

namespace detail {
inline std::size_t bins_below(const std::vector<double>& edges, double r0) {
    if (std::abs(edges.front()) > 1e-12) throw InvalidArgument("cluster_index: bins must start at 0");
    std::size_t nb = 0;
    while (nb + 1 < edges.size() && edges[nb + 1] <= r0 * (1 + 1e-12)) ++nb;
    if (nb == 0 || std::abs(edges[nb] - r0) > 1e-9 * std::max(1.0, r0))
        throw InvalidArgument("cluster_index: bins must cover [0, r0) exactly");
    return nb;
}
}  // namespace detail

/// Mean of k̂2 over the bins below r0, divided by k̂1².
inline ValueWithError cluster_index(const CorrelationEstimate& est, double r0) {
    const std::size_t nb = detail::bins_below(est.edges, r0);
    ValueWithError out;
    if (!(est.k1.value > 0.0)) {
        out.defined = false;
        return out;
    }
    double acc = 0.0;
    for (std::size_t b = 0; b < nb; ++b) acc += est.k2[b];
    out.value = acc / nb / (est.k1.value * est.k1.value);
    return out;
}

/// Cluster index with a leave-one-replica-out jackknife standard error.
inline ValueWithError cluster_index(const Ensemble& ens, const std::vector<double>& edges, double r0, double L, int d) {
    if (ens.empty()) throw InvalidArgument("cluster_index: empty ensemble");
    detail::check_edges(edges, L);
    const std::size_t nb = detail::bins_below(edges, r0);
    const std::size_t R = ens.size();
    std::vector<double> n(R);
    std::vector<std::vector<double>> c(R);
    std::vector<double> n_tot(1, 0.0), c_tot(nb, 0.0);
    for (std::size_t r = 0; r < R; ++r) {
        n[r] = static_cast<double>(ens[r].size());
        c[r] = detail::pair_counts(ens[r], std::vector<double>(edges.begin(), edges.begin() + static_cast<long>(nb) + 1), L, d);
        n_tot[0] += n[r];
        for (std::size_t b = 0; b < nb; ++b) c_tot[b] += c[r][b];
    }
    const double vol = detail::volume(L, d);
    auto stat = [&](double ns, const std::vector<double>& cs, double reps, bool& ok) {
        const double k1 = ns / (reps * vol);
        ok = k1 > 0.0;
        if (!ok) return 0.0;
        double acc = 0.0;
        for (std::size_t b = 0; b < nb; ++b) acc += cs[b] / (reps * vol * detail::shell_measure(edges[b], edges[b + 1], d));
        return acc / static_cast<double>(nb) / (k1 * k1);
    };
    ValueWithError out;
    bool ok = false;
    out.value = stat(n_tot[0], c_tot, static_cast<double>(R), ok);
    out.defined = ok;
    if (!ok || R < 2) return out;
    std::vector<double> loo(R);
    std::vector<double> cs(nb);
    for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t b = 0; b < nb; ++b) cs[b] = c_tot[b] - c[r][b];
        bool okr = false;
        loo[r] = stat(n_tot[0] - n[r], cs, static_cast<double>(R - 1), okr);
        if (!okr) return out;
    }
    const double mean = std::accumulate(loo.begin(), loo.end(), 0.0) / static_cast<double>(R);
    double ss = 0.0;
    for (double v : loo) ss += (v - mean) * (v - mean);
    out.stderr_ = std::sqrt(ss * static_cast<double>(R - 1) / static_cast<double>(R));
    out.stderr_defined = true;
    return out;
}

/// Axis-aligned sub-window [lo, hi) per coordinate.
struct Window {
    Point lo{0.0, 0.0};
    Point hi{1.0, 1.0};
};

struct DobrushinMoment {
    double value = 1.0;      // mean of exp(α |γ ∩ W|)
    double log_value = 0.0;  // its logarithm, finite even when value overflows
    double stderr_ = 0.0;
};

/// Empirical exponential moment E exp(α |γ ∩ W|), evaluated via log-sum-exp.
inline DobrushinMoment dobrushin_moment(const Ensemble& ens, double alpha, const Window& w, double L, int d) {
    if (ens.empty()) throw InvalidArgument("dobrushin_moment: empty ensemble");
    if (!(alpha >= 0.0)) throw InvalidArgument("dobrushin_moment: alpha must be >= 0");
    for (int k = 0; k < d; ++k)
        if (!(w.lo[k] >= 0.0 && w.hi[k] <= L && w.lo[k] < w.hi[k]))
            throw InvalidArgument("dobrushin_moment: window must lie inside the box");
    std::vector<double> logs;
    for (const auto& pts : ens) {
        std::size_t count = 0;
        for (const auto& x : pts) {
            bool in = true;
            for (int k = 0; k < d; ++k) in = in && x[k] >= w.lo[k] && x[k] < w.hi[k];
            count += in;
        }
        logs.push_back(alpha * static_cast<double>(count));
    }
    const double mx = *std::max_element(logs.begin(), logs.end());
    double s = 0.0, s2 = 0.0;
    for (double l : logs) {
        const double e = std::exp(l - mx);
        s += e;
        s2 += e * e;
    }
    const double n = static_cast<double>(logs.size());
    DobrushinMoment out;
    out.log_value = mx + std::log(s / n);
    out.value = std::exp(out.log_value);
    if (logs.size() > 1) {
        const double mean = s / n;
        const double var = std::max(0.0, (s2 / n - mean * mean) * n / (n - 1));
        out.stderr_ = std::exp(mx) * std::sqrt(var / n);
    }
    return out;
}

/// Measure of {(y, z) : |y| < r, |z| < r, |y - z| < r}.
inline double triple_measure(double r, int d) {
    if (d == 1) return 3.0 * r * r;
    // ∫_{|y|<r} |B(0,r) ∩ B(y,r)| dy with the lens area, by Simpson in |y|
    const int n = 2000;
    const double h = r / n;
    auto lens = [r](double s) { return 2 * r * r * std::acos(s / (2 * r)) - 0.5 * s * std::sqrt(4 * r * r - s * s); };
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double s = i * h;
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += w * 2 * M_PI * s * lens(s);
    }
    return acc * h / 3.0;
}

/// Average of k⁽³⁾ over ordered triples whose three distances are all below r.
/// Cost is cubic in the particle count; refuses snapshots above max_points.
inline ValueWithError estimate_k3_triplet(const Ensemble& ens, double r, double L, int d,
                                          std::size_t max_points = 2000) {
    if (ens.empty()) throw InvalidArgument("estimate_k3_triplet: empty ensemble");
    if (!(r > 0.0 && r <= 0.5 * L)) throw InvalidArgument("estimate_k3_triplet: need 0 < r <= L/2");
    std::vector<double> x;
    const double norm = detail::volume(L, d) * triple_measure(r, d);
    for (const auto& pts : ens) {
        if (pts.size() > max_points) throw InvalidArgument("estimate_k3_triplet: snapshot too large");
        double count = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t j = i + 1; j < pts.size(); ++j) {
                if (torus_distance(pts[i], pts[j], L, d) >= r) continue;
                for (std::size_t k = j + 1; k < pts.size(); ++k)
                    if (torus_distance(pts[i], pts[k], L, d) < r && torus_distance(pts[j], pts[k], L, d) < r)
                        count += 6.0;
            }
        x.push_back(count / norm);
    }
    ValueWithError out;
    detail::mean_and_stderr(x, out);
    return out;
}

}  // namespace spatlog
