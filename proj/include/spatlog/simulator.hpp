#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <thread>
#include <utility>
#include <vector>

#include "configspace.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "kernels.hpp"
#include "rng.hpp"

namespace spatlog {

struct InitialCondition {
    enum class Kind { poisson, explicit_points } kind = Kind::poisson;
    double kappa = 0.0;
    std::vector<Point> points;
};

struct SimConfig {
    ModelParams model;
    double t_max = 0.0;
    InitialCondition initial;
    std::vector<double> snapshot_times;  // sorted, each <= t_max; empty means {0, t_max}
    std::uint64_t seed = 0;
    int replicas = 1;
    std::size_t max_particles = 5'000'000;
    int threads = 0;  // 0: hardware concurrency
};

struct Snapshot {
    double t = 0.0;
    std::vector<Point> points;
};

struct Trajectory {
    std::uint64_t replica = 0;
    std::vector<Snapshot> snapshots;
    std::uint64_t events = 0;
    std::uint64_t births = 0;
    std::uint64_t deaths = 0;
};

enum class EventKind { none, birth, death };

struct Event {
    EventKind kind = EventKind::none;
    double t = 0.0;
    Point where{0.0, 0.0};
};

namespace detail {

/// Fenwick tree with prefix search, used for the cell level of death selection.
class Fenwick {
public:
    explicit Fenwick(std::size_t n = 0) : tree_(n + 1, 0.0), n_(n) {}
    void add(std::size_t i, double delta) {
        for (++i; i <= n_; i += i & (~i + 1)) tree_[i] += delta;
    }
    void rebuild(const std::vector<double>& values) {
        std::fill(tree_.begin(), tree_.end(), 0.0);
        for (std::size_t i = 1; i <= n_; ++i) {
            tree_[i] += values[i - 1];
            const std::size_t j = i + (i & (~i + 1));
            if (j <= n_) tree_[j] += tree_[i];
        }
    }
    double total() const {
        double acc = 0.0;
        for (std::size_t i = n_; i > 0; i -= i & (~i + 1)) acc += tree_[i];
        return acc;
    }
    /// First index whose inclusive prefix sum exceeds target, and target minus
    /// the prefix before it (clamped to the last index).
    std::pair<std::size_t, double> search(double target) const {
        std::size_t pos = 0;
        std::size_t step = 1;
        while (step * 2 <= n_) step *= 2;
        for (; step; step /= 2)
            if (pos + step <= n_ && tree_[pos + step] <= target) {
                pos += step;
                target -= tree_[pos];
            }
        return {std::min(pos, n_ - 1), target};
    }

private:
    std::vector<double> tree_;
    std::size_t n_;
};

}  // namespace detail

/// State of one replica: positions, per-particle death rates m + E⁻(x, γ∖x),
/// a cell list with cell side >= r_cut(a⁻), and the total death rate D.
class SimState {
public:
    static constexpr std::uint64_t kResumInterval = 4096;

    SimState(const ModelParams& p, std::uint64_t seed, std::uint64_t stream)
        : p_(p), rng_(seed, stream), birth_mass_(p.a_plus.is_zero() ? 0.0 : p.a_plus.total_mass()) {
        const double rc = p.a_minus.is_zero() ? 0.0 : p.a_minus.cutoff();
        per_side_ = rc > 0.0 ? std::max(1, static_cast<int>(std::floor(p.L / rc))) : std::max(1, static_cast<int>(std::floor(p.L)));
        per_side_ = std::min(per_side_, p.d == 1 ? 1 << 20 : 1 << 10);
        cell_side_ = p.L / per_side_;
        const std::size_t ncell = p.d == 1 ? static_cast<std::size_t>(per_side_)
                                           : static_cast<std::size_t>(per_side_) * static_cast<std::size_t>(per_side_);
        cells_.resize(ncell);
        cell_sum_.assign(ncell, 0.0);
        fenwick_ = detail::Fenwick(ncell);
        build_neighbours();
    }

    const ModelParams& params() const { return p_; }
    double t() const { return t_; }
    std::size_t size() const { return pos_.size(); }
    const std::vector<Point>& points() const { return pos_; }
    const std::vector<double>& death_rates() const { return rate_; }
    double death_total() const { return D_; }
    double birth_total() const { return birth_mass_ * static_cast<double>(pos_.size()); }
    std::uint64_t events() const { return events_; }
    Philox4x32& rng() { return rng_; }
    int cells_per_side() const { return per_side_; }

    /// Adds a particle at x (wrapped into the box) and updates neighbour rates.
    void insert(Point x) {
        for (int k = 0; k < p_.d; ++k) x[k] = wrap(x[k], p_.L);
        const std::size_t c = cell_of(x);
        double own = p_.m;
        touched_.clear();
        for (std::size_t nc : neigh_[c]) {
            bool hit = false;
            for (std::uint32_t j : cells_[nc]) {
                const double a = p_.a_minus.radial(torus_distance(x, pos_[j], p_.L, p_.d));
                if (a != 0.0) {
                    own += a;
                    rate_[j] += a;
                    D_ += a;
                    hit = true;
                }
            }
            if (hit) touched_.push_back(nc);
        }
        const auto id = static_cast<std::uint32_t>(pos_.size());
        pos_.push_back(x);
        rate_.push_back(own);
        cell_.push_back(static_cast<std::uint32_t>(c));
        slot_.push_back(static_cast<std::uint32_t>(cells_[c].size()));
        cells_[c].push_back(id);
        D_ += own;
        touched_.push_back(c);
        refresh_cells();
    }

    /// Removes particle i (swap-with-last) and updates neighbour rates.
    void remove(std::size_t i) {
        const Point x = pos_[i];
        const std::size_t c = cell_[i];
        // unlink i from its cell
        auto& home = cells_[c];
        const std::uint32_t moved = home.back();
        home[slot_[i]] = moved;
        slot_[moved] = slot_[i];
        home.pop_back();
        D_ -= rate_[i];
        touched_.clear();
        touched_.push_back(c);
        for (std::size_t nc : neigh_[c]) {
            bool hit = false;
            for (std::uint32_t j : cells_[nc]) {
                const double a = p_.a_minus.radial(torus_distance(x, pos_[j], p_.L, p_.d));
                if (a != 0.0) {
                    rate_[j] -= a;
                    D_ -= a;
                    hit = true;
                }
            }
            if (hit) touched_.push_back(nc);
        }
        // move the last particle into slot i
        const std::size_t last = pos_.size() - 1;
        if (i != last) {
            pos_[i] = pos_[last];
            rate_[i] = rate_[last];
            cell_[i] = cell_[last];
            slot_[i] = slot_[last];
            cells_[cell_[i]][slot_[i]] = static_cast<std::uint32_t>(i);
        }
        pos_.pop_back();
        rate_.pop_back();
        cell_.pop_back();
        slot_.pop_back();
        refresh_cells();
    }

    /// Draws N ~ Poisson(κ L^d) uniform points, or inserts the explicit list.
    void initialize(const InitialCondition& ic) {
        if (ic.kind == InitialCondition::Kind::poisson) {
            if (!(ic.kappa >= 0.0)) throw InvalidArgument("initial intensity must be >= 0");
            const double mean = ic.kappa * std::pow(p_.L, p_.d);
            std::poisson_distribution<long long> pois(mean);
            const long long n = mean > 0.0 ? pois(rng_) : 0;
            for (long long k = 0; k < n; ++k) {
                Point x{0.0, 0.0};
                for (int q = 0; q < p_.d; ++q) x[q] = p_.L * rng_.uniform();
                insert(x);
            }
        } else {
            for (const auto& x : ic.points) {
                for (int q = 0; q < p_.d; ++q)
                    if (!(x[q] >= 0.0 && x[q] < p_.L))
                        throw InvalidArgument("initial point outside the box [0, L)^d");
                insert(x);
            }
        }
        resum();
    }

    /// Time of the next event without applying it (+∞ when absorbed).
    double draw_waiting_time() {
        const double R = D_ + birth_total();
        if (!(R > 0.0) || pos_.empty()) return std::numeric_limits<double>::infinity();
        return -std::log1p(-rng_.uniform()) / R;
    }

    /// Applies one event at time t + tau (tau from draw_waiting_time).
    Event apply_event(double tau) {
        const double Bt = birth_total();
        const double R = D_ + Bt;
        if (!(R > 0.0) || pos_.empty()) return {EventKind::none, t_, {0, 0}};
        t_ += tau;
        ++events_;
        Event ev;
        ev.t = t_;
        if (rng_.uniform() * R < D_) {
            const std::size_t i = select_death();
            ev.kind = EventKind::death;
            ev.where = pos_[i];
            remove(i);
        } else {
            const std::size_t parent = std::min(pos_.size() - 1, static_cast<std::size_t>(rng_.uniform() * pos_.size()));
            Point x = pos_[parent];
            const Point dx = p_.a_plus.sample_displacement(rng_);
            for (int q = 0; q < p_.d; ++q) x[q] = wrap(x[q] + dx[q], p_.L);
            ev.kind = EventKind::birth;
            ev.where = x;
            insert(x);
        }
        if (events_ % kResumInterval == 0) resum();
        return ev;
    }

    /// One Gillespie step: waiting time then event.
    Event step() { return apply_event(draw_waiting_time()); }

    /// From-scratch death-rate total (for coherence checks).
    double recompute_death_total() const {
        double acc = 0.0;
        for (std::size_t i = 0; i < pos_.size(); ++i) acc += p_.m + competition_at(i);
        return acc;
    }

    /// From-scratch rate of particle i.
    double recompute_rate(std::size_t i) const { return p_.m + competition_at(i); }

    /// Re-sums D and the cell sums from the per-particle rates.
    void resum() {
        double acc = 0.0;
        for (double r : rate_) acc += r;
        D_ = acc;
        for (std::size_t c = 0; c < cells_.size(); ++c) cell_sum_[c] = cell_total(c);
        fenwick_.rebuild(cell_sum_);
    }

    /// Every particle appears in exactly one cell, at its recorded slot.
    bool cells_consistent() const {
        std::size_t count = 0;
        for (std::size_t c = 0; c < cells_.size(); ++c) {
            for (std::size_t s = 0; s < cells_[c].size(); ++s) {
                const auto j = cells_[c][s];
                if (cell_[j] != c || slot_[j] != s) return false;
                if (cell_of(pos_[j]) != c) return false;
            }
            count += cells_[c].size();
        }
        return count == pos_.size();
    }

private:
    std::size_t cell_of(const Point& x) const {
        auto idx = [&](double coord) {
            return std::min(per_side_ - 1, std::max(0, static_cast<int>(coord / cell_side_)));
        };
        if (p_.d == 1) return static_cast<std::size_t>(idx(x[0]));
        return static_cast<std::size_t>(idx(x[1])) * static_cast<std::size_t>(per_side_) +
               static_cast<std::size_t>(idx(x[0]));
    }

    void build_neighbours() {
        neigh_.resize(cells_.size());
        const int n = per_side_;
        for (std::size_t c = 0; c < cells_.size(); ++c) {
            std::vector<std::size_t> nb;
            const int cx = p_.d == 1 ? static_cast<int>(c) : static_cast<int>(c % static_cast<std::size_t>(n));
            const int cy = p_.d == 1 ? 0 : static_cast<int>(c / static_cast<std::size_t>(n));
            for (int dy = (p_.d == 2 ? -1 : 0); dy <= (p_.d == 2 ? 1 : 0); ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int x = ((cx + dx) % n + n) % n;
                    const int y = ((cy + dy) % n + n) % n;
                    nb.push_back(p_.d == 1 ? static_cast<std::size_t>(x)
                                           : static_cast<std::size_t>(y) * static_cast<std::size_t>(n) +
                                                 static_cast<std::size_t>(x));
                }
            std::sort(nb.begin(), nb.end());
            nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
            neigh_[c] = std::move(nb);
        }
    }

    double competition_at(std::size_t i) const {
        double acc = 0.0;
        for (std::size_t nc : neigh_[cell_[i]])
            for (std::uint32_t j : cells_[nc])
                if (j != i) acc += p_.a_minus.radial(torus_distance(pos_[i], pos_[j], p_.L, p_.d));
        return acc;
    }

    double cell_total(std::size_t c) const {
        double acc = 0.0;
        for (std::uint32_t j : cells_[c]) acc += rate_[j];
        return acc;
    }

    void refresh_cells() {
        std::sort(touched_.begin(), touched_.end());
        touched_.erase(std::unique(touched_.begin(), touched_.end()), touched_.end());
        for (std::size_t c : touched_) {
            const double s = cell_total(c);
            fenwick_.add(c, s - cell_sum_[c]);
            cell_sum_[c] = s;
        }
    }

    std::size_t select_death() {
        const double u = rng_.uniform();
        for (int attempt = 0; attempt < 2; ++attempt) {
            auto [c, within] = fenwick_.search(u * fenwick_.total());
            // rounding can land on an empty cell; walk to the next occupied one
            for (std::size_t guard = 0; cells_[c].empty() && guard < cells_.size(); ++guard) {
                c = (c + 1) % cells_.size();
                within = 0.0;
            }
            const auto& members = cells_[c];
            for (std::uint32_t j : members) {
                within -= rate_[j];
                if (within < 0.0) return j;
            }
            if (!members.empty()) return members.back();
            resum();
        }
        throw Error("death selection failed: no particle carries a positive rate");
    }

    ModelParams p_;
    Philox4x32 rng_;
    double birth_mass_;
    int per_side_ = 1;
    double cell_side_ = 1.0;
    std::vector<Point> pos_;
    std::vector<double> rate_;
    std::vector<std::uint32_t> cell_, slot_;
    std::vector<std::vector<std::uint32_t>> cells_;
    std::vector<std::vector<std::size_t>> neigh_;
    std::vector<double> cell_sum_;
    detail::Fenwick fenwick_;
    std::vector<std::size_t> touched_;
    double D_ = 0.0;
    double t_ = 0.0;
    std::uint64_t events_ = 0;
};

inline std::vector<double> resolved_snapshot_times(const SimConfig& sc) {
    std::vector<double> ts = sc.snapshot_times;
    if (ts.empty()) ts = sc.t_max > 0.0 ? std::vector<double>{0.0, sc.t_max} : std::vector<double>{0.0};
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (!(ts[i] >= 0.0 && ts[i] <= sc.t_max)) throw InvalidArgument("snapshot times must lie in [0, t_max]");
        if (i > 0 && !(ts[i] >= ts[i - 1])) throw InvalidArgument("snapshot times must be sorted");
    }
    return ts;
}

/// Initial state of replica r.
inline SimState init(const SimConfig& sc, std::uint64_t replica = 0) {
    SimState s(sc.model, sc.seed, replica);
    s.initialize(sc.initial);
    return s;
}

/// Runs replica r to t_max, recording deep-copied snapshots.
inline Trajectory run_replica(const SimConfig& sc, std::uint64_t replica) {
    const auto times = resolved_snapshot_times(sc);
    SimState s = init(sc, replica);
    Trajectory tr;
    tr.replica = replica;
    std::size_t next = 0;
    while (next < times.size()) {
        const double tau = s.draw_waiting_time();
        const double t_event = s.t() + tau;
        while (next < times.size() && times[next] < t_event) tr.snapshots.push_back({times[next++], s.points()});
        if (next >= times.size() || !std::isfinite(t_event)) break;
        const auto ev = s.apply_event(tau);
        if (ev.kind == EventKind::birth) ++tr.births;
        if (ev.kind == EventKind::death) ++tr.deaths;
        if (s.size() > sc.max_particles)
            throw DivergenceError("particle count exceeded max_particles", s.t());
    }
    while (next < times.size()) tr.snapshots.push_back({times[next++], {}});
    tr.events = s.events();
    return tr;
}

/// All replicas, run concurrently; the result is ordered by replica index and
/// independent of the thread count.
inline std::vector<Trajectory> run(const SimConfig& sc) {
    if (sc.replicas < 1) throw InvalidArgument("replica count must be >= 1");
    if (!(sc.t_max >= 0.0)) throw InvalidArgument("t_max must be >= 0");
    std::vector<Trajectory> out(static_cast<std::size_t>(sc.replicas));
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned nthreads =
        std::min<unsigned>(sc.threads > 0 ? static_cast<unsigned>(sc.threads) : hw, static_cast<unsigned>(sc.replicas));
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (int r = next++; r < sc.replicas; r = next++) {
            try {
                out[static_cast<std::size_t>(r)] = run_replica(sc, static_cast<std::uint64_t>(r));
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned k = 0; k < nthreads; ++k) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

/// Point sets of every replica at snapshot index k.
inline std::vector<std::vector<Point>> ensemble_at(const std::vector<Trajectory>& trs, std::size_t k) {
    std::vector<std::vector<Point>> out;
    out.reserve(trs.size());
    for (const auto& tr : trs) out.push_back(tr.snapshots.at(k).points);
    return out;
}

}  // namespace spatlog
