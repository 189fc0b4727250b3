#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "estimators.hpp"
#include "hierarchy.hpp"
#include "kinetic.hpp"
#include "kernels.hpp"
#include "simulator.hpp"
#include "verify.hpp"

namespace spatlog {

using nlohmann::json;

/// Every problem found in a run config, each prefixed by its dot-path.
struct ConfigError : Error {
    explicit ConfigError(std::vector<std::string> errs) : Error(join(errs)), errors(std::move(errs)) {}
    std::vector<std::string> errors;

private:
    static std::string join(const std::vector<std::string>& e) {
        std::string s;
        for (const auto& x : e) s += (s.empty() ? "" : "\n") + x;
        return s;
    }
};

struct SimBlock {
    double t_max = 0.0;
    std::vector<double> snapshot_times;
    InitialCondition initial;
    std::size_t max_particles = 5'000'000;
    int threads = 0;
};

struct EstBlock {
    std::vector<std::filesystem::path> inputs;  // empty: simulate with the sim block
    std::vector<double> times;                  // empty: every snapshot time
    std::vector<double> edges;
    double r0 = 0.5;
    double dobrushin_alpha = 0.1;
    Window window;
    std::optional<double> k3_radius;
};

enum class KinInitKind { uniform, block, gaussian, sine };

struct KinBlock {
    int n = 0;
    double dt = 0.01;
    double t_max = 0.0;
    KinInitKind kind = KinInitKind::uniform;
    double value = 0.0;  // uniform level, block height or gaussian amplitude
    bool value_is_equilibrium = false;
    double lo = 0.0, hi = 0.0;          // block
    double center = 0.0, width = 1.0;   // gaussian
    double mean = 0.0, amplitude = 0.0; // sine
    int modes = 1;
    int stride = 10;
    std::optional<double> front_level;
};

struct HierBlock {
    Closure closure = Closure::kirkwood;
    HierarchyMode mode = HierarchyMode::order2;
    double u0 = 0.0;
    double dt = 0.01;
    double t_max = 0.0;
    RadialGrid grid;
    int output_every = 10;
};

struct RunConfig {
    std::filesystem::path source;
    std::string label;
    std::uint64_t seed = 1;
    int replicas = 1;
    std::string out = "runs";
    ModelParams model;
    std::optional<SimBlock> sim;
    std::optional<EstBlock> est;
    std::optional<HierBlock> hier;
    std::optional<KinBlock> kin;
    std::optional<VerifyConfig> verify;
    json resolved;  // the validated input with every default filled in

    SimConfig sim_config() const {
        SimConfig sc;
        sc.model = model;
        sc.t_max = sim->t_max;
        sc.initial = sim->initial;
        sc.snapshot_times = sim->snapshot_times;
        sc.seed = seed;
        sc.replicas = replicas;
        sc.max_particles = sim->max_particles;
        sc.threads = sim->threads;
        return sc;
    }
};

namespace detail {

/// Reads fields of one JSON object, filling defaults into `res` and
/// collecting errors under `path`.
class FieldReader {
public:
    FieldReader(const json& in, json& res, std::vector<std::string>& errs, std::string path)
        : in_(in), res_(res), errs_(errs), path_(std::move(path)) {
        if (!res_.is_object()) res_ = json::object();
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    void error(const std::string& key, const std::string& msg) { errs_.push_back(at(key) + ": " + msg); }
    bool has(const std::string& key) const { return in_.is_object() && in_.contains(key); }
    const json& raw(const std::string& key) const { return in_.at(key); }

    std::optional<double> number(const std::string& key, std::optional<double> def, const char* cond = nullptr,
                                 bool (*ok)(double) = nullptr) {
        seen_.push_back(key);
        if (!has(key)) {
            if (!def) {
                error(key, "required number is missing");
                return std::nullopt;
            }
            res_[key] = *def;
            return def;
        }
        const auto& v = in_.at(key);
        if (!v.is_number()) {
            error(key, "expected a number");
            return std::nullopt;
        }
        const double x = v.get<double>();
        if (!std::isfinite(x) || (ok && !ok(x))) {
            error(key, std::string("must be ") + (cond ? cond : "finite") + ", got " + v.dump());
            return std::nullopt;
        }
        res_[key] = v;
        return x;
    }

    std::optional<std::int64_t> integer(const std::string& key, std::optional<std::int64_t> def, std::int64_t lo,
                                        std::int64_t hi) {
        seen_.push_back(key);
        if (!has(key)) {
            if (!def) {
                error(key, "required integer is missing");
                return std::nullopt;
            }
            res_[key] = *def;
            return def;
        }
        const auto& v = in_.at(key);
        if (!v.is_number_integer()) {
            error(key, "expected an integer");
            return std::nullopt;
        }
        const auto x = v.get<std::int64_t>();
        if (x < lo || x > hi) {
            error(key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "], got " + v.dump());
            return std::nullopt;
        }
        res_[key] = x;
        return x;
    }

    std::optional<std::uint64_t> seed(const std::string& key, std::uint64_t def) {
        seen_.push_back(key);
        if (!has(key)) {
            res_[key] = def;
            return def;
        }
        const auto& v = in_.at(key);
        if (v.is_number_unsigned()) {
            res_[key] = v;
            return v.get<std::uint64_t>();
        }
        if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
            res_[key] = v;
            return static_cast<std::uint64_t>(v.get<std::int64_t>());
        }
        error(key, "expected a non-negative integer");
        return std::nullopt;
    }

    std::optional<std::string> string(const std::string& key, std::optional<std::string> def,
                                      const std::vector<std::string>& allowed = {}) {
        seen_.push_back(key);
        if (!has(key)) {
            if (!def) {
                error(key, "required string is missing");
                return std::nullopt;
            }
            res_[key] = *def;
            return def;
        }
        const auto& v = in_.at(key);
        if (!v.is_string()) {
            error(key, "expected a string");
            return std::nullopt;
        }
        const auto s = v.get<std::string>();
        if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), s) == allowed.end()) {
            std::string opts;
            for (const auto& a : allowed) opts += (opts.empty() ? "" : ", ") + a;
            error(key, "'" + s + "' is not one of {" + opts + "}");
            return std::nullopt;
        }
        res_[key] = s;
        return s;
    }

    std::optional<bool> boolean(const std::string& key, bool def) {
        seen_.push_back(key);
        if (!has(key)) {
            res_[key] = def;
            return def;
        }
        if (!in_.at(key).is_boolean()) {
            error(key, "expected true or false");
            return std::nullopt;
        }
        res_[key] = in_.at(key);
        return in_.at(key).get<bool>();
    }

    std::optional<std::vector<double>> numbers(const std::string& key, std::optional<std::vector<double>> def) {
        seen_.push_back(key);
        if (!has(key)) {
            if (!def) {
                error(key, "required array is missing");
                return std::nullopt;
            }
            res_[key] = *def;
            return def;
        }
        const auto& v = in_.at(key);
        if (!v.is_array()) {
            error(key, "expected an array of numbers");
            return std::nullopt;
        }
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number() || !std::isfinite(v[i].get<double>())) {
                errs_.push_back(at(key) + "[" + std::to_string(i) + "]: expected a finite number");
                return std::nullopt;
            }
            out.push_back(v[i].get<double>());
        }
        res_[key] = v;
        return out;
    }

    std::optional<std::vector<int>> integers(const std::string& key, std::vector<int> def, int lo, int hi) {
        seen_.push_back(key);
        if (!has(key)) {
            res_[key] = def;
            return def;
        }
        const auto& v = in_.at(key);
        if (!v.is_array() || v.empty()) {
            error(key, "expected a non-empty array of integers");
            return std::nullopt;
        }
        std::vector<int> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number_integer() || v[i].get<int>() < lo || v[i].get<int>() > hi) {
                errs_.push_back(at(key) + "[" + std::to_string(i) + "]: expected an integer in [" + std::to_string(lo) +
                                ", " + std::to_string(hi) + "]");
                return std::nullopt;
            }
            out.push_back(v[i].get<int>());
        }
        res_[key] = v;
        return out;
    }

    /// Sub-object reader; `required` reports a missing object.
    std::optional<FieldReader> object(const std::string& key, bool required) {
        seen_.push_back(key);
        if (!has(key)) {
            if (required) error(key, "required object is missing");
            return std::nullopt;
        }
        if (!in_.at(key).is_object()) {
            error(key, "expected an object");
            return std::nullopt;
        }
        return FieldReader(in_.at(key), res_[key], errs_, at(key));
    }

    void mark(const std::string& key) { seen_.push_back(key); }
    void set(const std::string& key, json value) { res_[key] = std::move(value); }

    /// Unknown keys are errors (catches typos).
    void finish() {
        if (!in_.is_object()) return;
        for (auto it = in_.begin(); it != in_.end(); ++it)
            if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end()) error(it.key(), "unknown field");
    }

private:
    const json& in_;
    json& res_;
    std::vector<std::string>& errs_;
    std::string path_;
    std::vector<std::string> seen_;
};

inline bool positive(double x) { return x > 0.0; }
inline bool nonnegative(double x) { return x >= 0.0; }

inline std::optional<Kernel> read_kernel(FieldReader& r, int d, const std::filesystem::path& base) {
    const auto shape = r.string("shape", std::nullopt, {"zero", "gaussian", "tophat", "exponential", "tabulated"});
    std::optional<double> rc;
    if (r.has("r_cut")) rc = r.number("r_cut", std::nullopt, "> 0", positive);
    else r.mark("r_cut");
    std::optional<Kernel> k;
    if (shape) {
        try {
            if (*shape == "zero") {
                k = Kernel::zero(d);
            } else if (*shape == "gaussian") {
                const auto s = r.number("sigma", std::nullopt, "> 0", positive);
                const auto m = r.number("mass", 1.0, ">= 0", nonnegative);
                if (s && m) k = Kernel::gaussian(d, *s, *m, rc);
            } else if (*shape == "tophat") {
                const auto h = r.number("height", std::nullopt, ">= 0", nonnegative);
                const auto R = r.number("radius", std::nullopt, "> 0", positive);
                if (h && R) k = Kernel::tophat(d, *h, *R, rc);
            } else if (*shape == "exponential") {
                const auto a = r.number("rate", std::nullopt, "> 0", positive);
                const auto b = r.number("amplitude", std::nullopt, ">= 0", nonnegative);
                if (a && b) k = Kernel::exponential(d, *a, *b, rc);
            } else {
                const auto f = r.string("file", std::nullopt);
                if (f) {
                    const auto p = std::filesystem::path(*f).is_absolute() ? std::filesystem::path(*f) : base / *f;
                    if (!std::filesystem::exists(p))
                        r.error("file", "kernel table '" + p.string() + "' does not exist");
                    else
                        k = Kernel::from_csv(d, p.string(), rc);
                }
            }
        } catch (const InvalidKernel& e) {
            r.error("shape", e.what());
            k.reset();
        }
    }
    r.finish();
    return k;
}

inline std::optional<ModelParams> read_model(FieldReader r, const std::filesystem::path& base,
                                             std::vector<std::string>& errs) {
    const auto m = r.number("m", std::nullopt, "finite and >= 0", nonnegative);
    const auto L = r.number("L", std::nullopt, "> 0", positive);
    const auto d = r.integer("d", 1, 1, 2);
    const int dd = d ? static_cast<int>(*d) : 1;
    std::optional<Kernel> ap = Kernel::zero(dd), am = Kernel::zero(dd);
    auto sp = r.object("a_plus", false);
    auto sm = r.object("a_minus", false);
    if (sp) ap = read_kernel(*sp, dd, base);
    if (sm) am = read_kernel(*sm, dd, base);
    r.finish();
    if (!(L && d && ap && am)) return std::nullopt;
    try {
        auto p = make_model(m ? *m : 0.0, *ap, *am, *L, dd);
        if (!m) return std::nullopt;
        // echo the effective cutoffs
        if (sp && !p.a_plus.is_zero()) sp->set("r_cut", p.a_plus.cutoff());
        if (sm && !p.a_minus.is_zero()) sm->set("r_cut", p.a_minus.cutoff());
        return p;
    } catch (const InvalidModel&) {
        ModelParams p{m ? *m : 0.0, *ap, *am, *L, dd};
        for (const auto& e : model_errors(p)) errs.push_back(e);
        return std::nullopt;
    }
}

inline std::optional<SimBlock> read_sim(FieldReader r, const ModelParams* model) {
    SimBlock s;
    const auto t = r.number("t_max", std::nullopt, ">= 0", nonnegative);
    const auto ts = r.numbers("snapshot_times", std::vector<double>{});
    const auto mp = r.integer("max_particles", 5'000'000, 1, std::int64_t{1} << 40);
    const auto th = r.integer("threads", 0, 0, 4096);
    bool ok = t && ts && mp && th;
    if (auto ini = r.object("initial", true)) {
        const auto kind = ini->string("kind", "poisson", {"poisson", "points"});
        if (kind && *kind == "poisson") {
            const auto kap = ini->number("kappa", std::nullopt, ">= 0", nonnegative);
            ok = ok && kap;
            if (kap) s.initial.kappa = *kap;
        } else if (kind) {
            s.initial.kind = InitialCondition::Kind::explicit_points;
            ini->mark("points");
            if (!ini->has("points") || !ini->raw("points").is_array()) {
                ini->error("points", "expected an array of coordinate arrays");
                ok = false;
            } else {
                const auto& pts = ini->raw("points");
                const int d = model ? model->d : 1;
                for (std::size_t i = 0; i < pts.size(); ++i) {
                    const auto& p = pts[i];
                    if (!p.is_array() || static_cast<int>(p.size()) != d || !p[0].is_number() ||
                        (d == 2 && !p[1].is_number())) {
                        ini->error("points[" + std::to_string(i) + "]", "expected " + std::to_string(d) + " numbers");
                        ok = false;
                        continue;
                    }
                    Point q{p[0].get<double>(), d == 2 ? p[1].get<double>() : 0.0};
                    if (model)
                        for (int k = 0; k < d; ++k)
                            if (!(q[k] >= 0.0 && q[k] < model->L)) {
                                ini->error("points[" + std::to_string(i) + "]", "coordinate outside [0, L)");
                                ok = false;
                            }
                    s.initial.points.push_back(q);
                }
                ini->mark("points");
            }
        }
        ok = ok && kind;
        ini->finish();
    } else {
        ok = false;
    }
    r.finish();
    if (!ok) return std::nullopt;
    s.t_max = *t;
    s.snapshot_times = *ts;
    for (std::size_t i = 0; i < s.snapshot_times.size(); ++i) {
        if (s.snapshot_times[i] < 0.0 || s.snapshot_times[i] > s.t_max) {
            r.error("snapshot_times", "times must lie in [0, t_max]");
            return std::nullopt;
        }
        if (i && !(s.snapshot_times[i] > s.snapshot_times[i - 1])) {
            r.error("snapshot_times", "times must be strictly increasing");
            return std::nullopt;
        }
    }
    s.max_particles = static_cast<std::size_t>(*mp);
    s.threads = static_cast<int>(*th);
    return s;
}

inline std::optional<EstBlock> read_est(FieldReader r, const ModelParams* model, const std::filesystem::path& base) {
    EstBlock e;
    bool ok = true;
    r.mark("input");
    if (r.has("input")) {
        const auto& in = r.raw("input");
        std::vector<std::string> names;
        if (in.is_string()) {
            names.push_back(in.get<std::string>());
        } else if (in.is_array()) {
            for (const auto& x : in) {
                if (!x.is_string()) {
                    r.error("input", "expected a path or an array of paths");
                    ok = false;
                    break;
                }
                names.push_back(x.get<std::string>());
            }
        } else {
            r.error("input", "expected a path or an array of paths");
            ok = false;
        }
        for (const auto& n : names) {
            const auto p = std::filesystem::path(n).is_absolute() ? std::filesystem::path(n) : base / n;
            if (!std::filesystem::exists(p)) {
                r.error("input", "snapshot CSV '" + p.string() + "' does not exist");
                ok = false;
            }
            e.inputs.push_back(p);
        }
    }
    const auto times = r.numbers("times", std::vector<double>{});
    const double half = model ? 0.5 * model->L : 1.0;
    const auto r0 = r.number("r0", 0.5, "> 0", positive);
    ok = ok && times && r0;
    if (times) e.times = *times;
    if (r0) e.r0 = *r0;
    if (r.has("edges")) {
        const auto ed = r.numbers("edges", std::nullopt);
        ok = ok && ed;
        if (ed) e.edges = *ed;
    } else {
        r.mark("edges");
        // default: bins of width r0/5 out to min(L/2, 10 r0)
        const double w = r0 ? *r0 / 5.0 : 0.1;
        const double rmax_def = w * std::floor(std::min(half, 10.0 * w * 5.0) / w + 1e-9);
        double rmax = rmax_def;
        std::int64_t count = std::max<std::int64_t>(1, std::llround(rmax_def / w));
        if (auto b = r.object("bins", false)) {
            const auto rm = b->number("r_max", rmax_def, "> 0", positive);
            const auto ct = b->integer("count", count, 1, 100000);
            b->finish();
            ok = ok && rm && ct;
            if (rm) rmax = *rm;
            if (ct) count = *ct;
        } else {
            r.set("bins", {{"r_max", rmax}, {"count", count}});
        }
        if (ok)
            for (std::int64_t i = 0; i <= count; ++i) e.edges.push_back(rmax * static_cast<double>(i) / count);
    }
    if (ok) {
        if (e.edges.size() < 2) {
            r.error("edges", "need at least two bin edges");
            ok = false;
        } else {
            for (std::size_t i = 1; i < e.edges.size(); ++i)
                if (!(e.edges[i] > e.edges[i - 1])) {
                    r.error("edges", "bin edges must be strictly increasing");
                    ok = false;
                    break;
                }
            if (e.edges.front() != 0.0) {
                r.error("edges", "bins must start at 0");
                ok = false;
            }
            if (model && e.edges.back() > half * (1 + 1e-12)) {
                r.error("edges", "largest bin edge exceeds L/2");
                ok = false;
            }
            bool hit = false;
            for (double x : e.edges) hit = hit || std::abs(x - e.r0) <= 1e-9 * std::max(1.0, e.r0);
            if (!hit) {
                r.error("r0", "must coincide with a bin edge");
                ok = false;
            }
        }
    }
    if (auto db = r.object("dobrushin", false)) {
        const auto a = db->number("alpha", 0.1, ">= 0", nonnegative);
        const int d = model ? model->d : 1;
        const double L = model ? model->L : 1.0;
        const auto lo = db->numbers("lo", std::vector<double>(static_cast<std::size_t>(d), 0.0));
        const auto hi = db->numbers("hi", std::vector<double>(static_cast<std::size_t>(d), L));
        db->finish();
        ok = ok && a && lo && hi;
        if (a) e.dobrushin_alpha = *a;
        if (lo && hi) {
            if (static_cast<int>(lo->size()) != d || static_cast<int>(hi->size()) != d) {
                db->error("lo", "window corners need d coordinates");
                ok = false;
            } else {
                for (int k = 0; k < d; ++k) {
                    e.window.lo[k] = (*lo)[static_cast<std::size_t>(k)];
                    e.window.hi[k] = (*hi)[static_cast<std::size_t>(k)];
                    if (!(e.window.lo[k] >= 0 && e.window.hi[k] <= L && e.window.lo[k] < e.window.hi[k])) {
                        db->error("hi", "window must satisfy 0 <= lo < hi <= L");
                        ok = false;
                    }
                }
            }
        }
    } else if (model) {
        for (int k = 0; k < model->d; ++k) e.window.hi[k] = model->L;
    }
    if (r.has("k3_radius")) {
        const auto k3 = r.number("k3_radius", std::nullopt, "> 0", positive);
        ok = ok && k3;
        if (k3) {
            if (model && *k3 > half) {
                r.error("k3_radius", "must be <= L/2");
                ok = false;
            }
            e.k3_radius = k3;
        }
    } else {
        r.mark("k3_radius");
    }
    r.finish();
    if (!ok) return std::nullopt;
    return e;
}

inline std::optional<HierBlock> read_hier(FieldReader r, const ModelParams* model) {
    HierBlock h;
    const auto cl = r.string("closure", "kirkwood", {"poisson", "kirkwood", "zero"});
    const auto mode = r.string("mode", "order2", {"order2", "mean_field"});
    const auto u0 = r.number("u0", std::nullopt, ">= 0", nonnegative);
    const auto dt = r.number("dt", 0.01, "> 0", positive);
    const auto t = r.number("t_max", std::nullopt, ">= 0", nonnegative);
    const auto oe = r.integer("output_every", 10, 1, 1'000'000'000);
    std::optional<RadialGrid> def;
    if (model) {
        try {
            def = default_grid(*model);
        } catch (const InvalidArgument&) {
        }
    }
    std::optional<double> dr, rmax;
    if (def) {
        dr = r.number("dr", def->dr, "> 0", positive);
        rmax = r.number("r_max", def->r_max, "> 0", positive);
    } else {
        dr = r.number("dr", std::nullopt, "> 0", positive);
        rmax = r.number("r_max", std::nullopt, "> 0", positive);
    }
    const auto nphi = r.integer("n_phi", 64, 8, 4096);
    r.finish();
    if (!(cl && mode && u0 && dt && t && oe && dr && rmax && nphi)) return std::nullopt;
    h.closure = closure_from_string(*cl);
    h.mode = *mode == "mean_field" ? HierarchyMode::mean_field : HierarchyMode::order2;
    h.u0 = *u0;
    h.dt = *dt;
    h.t_max = *t;
    h.output_every = static_cast<int>(*oe);
    h.grid = RadialGrid{*dr, *rmax, static_cast<int>(*nphi)};
    if (model) {
        try {
            HierarchyModel probe(*model, h.grid, h.closure, h.mode);
            (void)probe;
        } catch (const InvalidArgument& e) {
            r.error("r_max", e.what());
            return std::nullopt;
        }
    }
    return h;
}

inline std::optional<KinBlock> read_kin(FieldReader r, const ModelParams* model) {
    KinBlock k;
    std::optional<std::int64_t> n;
    if (model) {
        double rc = 1e300;
        for (const Kernel* q : {&model->a_plus, &model->a_minus})
            if (!q->is_zero()) rc = std::min(rc, q->cutoff());
        const auto def = rc < 1e300 ? static_cast<std::int64_t>(std::ceil(model->L / (rc / 8.0) - 1e-9)) : 64;
        n = r.integer("n", def, 1, 1 << 24);
    } else {
        n = r.integer("n", std::nullopt, 1, 1 << 24);
    }
    const auto dt = r.number("dt", 0.01, "> 0", positive);
    const auto t = r.number("t_max", std::nullopt, ">= 0", nonnegative);
    const auto stride = r.integer("stride", 10, 1, 1'000'000'000);
    bool ok = n && dt && t && stride;
    if (r.has("front_level")) {
        const auto fl = r.number("front_level", std::nullopt, "> 0", positive);
        ok = ok && fl;
        k.front_level = fl;
        if (model && model->d != 1) {
            r.error("front_level", "front tracking needs d = 1");
            ok = false;
        }
    } else {
        r.mark("front_level");
    }
    if (auto ini = r.object("initial", true)) {
        const auto kind = ini->string("kind", "uniform", {"uniform", "block", "gaussian", "sine"});
        auto value = [&](const char* key) {
            ini->mark(key);
            if (ini->has(key) && ini->raw(key).is_string()) {
                if (ini->raw(key).get<std::string>() == "equilibrium") {
                    k.value_is_equilibrium = true;
                    ini->set(key, "equilibrium");
                    return true;
                }
                ini->error(key, "expected a number or \"equilibrium\"");
                return false;
            }
            const auto v = ini->number(key, std::nullopt, ">= 0", nonnegative);
            if (v) k.value = *v;
            return static_cast<bool>(v);
        };
        if (kind) {
            if (*kind == "uniform") {
                k.kind = KinInitKind::uniform;
                ok = value("value") && ok;
            } else if (*kind == "block") {
                k.kind = KinInitKind::block;
                ok = value("value") && ok;
                const auto lo = ini->number("lo", std::nullopt), hi = ini->number("hi", std::nullopt);
                ok = ok && lo && hi;
                if (lo && hi) {
                    k.lo = *lo;
                    k.hi = *hi;
                    if (!(k.lo < k.hi)) {
                        ini->error("hi", "block needs lo < hi");
                        ok = false;
                    }
                }
            } else if (*kind == "gaussian") {
                k.kind = KinInitKind::gaussian;
                ok = value("amplitude") && ok;
                const auto c = ini->number("center", std::nullopt), w = ini->number("width", 1.0, "> 0", positive);
                ok = ok && c && w;
                if (c) k.center = *c;
                if (w) k.width = *w;
            } else {
                k.kind = KinInitKind::sine;
                const auto mean = ini->number("mean", std::nullopt, ">= 0", nonnegative);
                const auto amp = ini->number("amplitude", std::nullopt, ">= 0", nonnegative);
                const auto modes = ini->integer("modes", 1, 1, 1 << 20);
                ok = ok && mean && amp && modes;
                if (mean && amp) {
                    k.mean = *mean;
                    k.amplitude = *amp;
                    if (k.amplitude > k.mean) {
                        ini->error("amplitude", "must not exceed mean (density would be negative)");
                        ok = false;
                    }
                }
                if (modes) k.modes = static_cast<int>(*modes);
            }
        }
        ok = ok && kind;
        ini->finish();
    } else {
        ok = false;
    }
    r.finish();
    if (!ok) return std::nullopt;
    k.n = static_cast<int>(*n);
    k.dt = *dt;
    k.t_max = *t;
    k.stride = static_cast<int>(*stride);
    if (model) {
        try {
            KineticModel probe(*model, k.n);
            (void)probe;
        } catch (const InvalidArgument& e) {
            r.error("n", e.what());
            return std::nullopt;
        }
    }
    return k;
}

inline std::optional<VerifyConfig> read_verify(FieldReader r, const ModelParams* model, std::uint64_t seed) {
    VerifyConfig v;
    const auto sites = r.integers("sites", v.duality_sites, 1, 8);
    const auto draws = r.integer("draws", v.duality_draws, 1, 1'000'000);
    const auto st = r.numbers("stochastic_times", v.stochastic_times);
    const auto ks = r.integer("ktransform_sites", v.ktransform_sites, 1, 12);
    const auto kd = r.integer("ktransform_draws", v.ktransform_draws, 1, 1'000'000);
    const auto ls = r.integer("local_sites", v.local_sites, 1, 8);
    const auto lt = r.numbers("local_times", v.local_times);
    const auto li = r.number("local_intensity", v.local_intensity, ">= 0", nonnegative);
    const auto cert = r.boolean("certificate", v.certificate);
    const auto cs = r.integer("certificate_sites", v.certificate_sites, 1, 8);
    const auto cc = r.integer("certificate_cap", v.certificate_cap, 1, 8);
    const auto al = r.number("alpha_low", v.alpha_low);
    const auto ah = r.number("alpha_high", v.alpha_high);
    const auto lv = r.integer("levels", v.certificate_options.levels, 1, 12);
    const auto tf = r.number("t_fraction", v.certificate_options.t_fraction, "in (0, 1)",
                             [](double x) { return x > 0.0 && x < 1.0; });
    const auto pn = r.integer("panels", v.certificate_options.panels, 2, 4096);
    const auto tol = r.number("tol", v.certificate_options.tol, "> 0", positive);
    const auto smp = r.integer("samples", v.certificate_options.samples, 1, 1'000'000);
    r.finish();
    if (!(sites && draws && st && ks && kd && ls && lt && li && cert && cs && cc && al && ah && lv && tf && pn && tol &&
          smp))
        return std::nullopt;
    if (!(*al < *ah)) {
        r.error("alpha_low", "must be < alpha_high");
        return std::nullopt;
    }
    if (*cc > *cs * (model ? (model->d == 2 ? *cs : 1) : 1)) {
        r.error("certificate_cap", "must not exceed the number of certificate sites");
        return std::nullopt;
    }
    for (double t : *st)
        if (t < 0) {
            r.error("stochastic_times", "times must be >= 0");
            return std::nullopt;
        }
    for (double t : *lt)
        if (t < 0) {
            r.error("local_times", "times must be >= 0");
            return std::nullopt;
        }
    if (model && model->d == 2)
        for (int s : *sites)
            if (s * s > 6) {
                r.error("sites", "d = 2 lattices have sites^2 points; keep sites <= 2");
                return std::nullopt;
            }
    if (model) v.model = *model;
    v.seed = seed;
    v.duality_sites = *sites;
    v.duality_draws = static_cast<int>(*draws);
    v.stochastic_times = *st;
    v.ktransform_sites = static_cast<int>(*ks);
    v.ktransform_draws = static_cast<int>(*kd);
    v.local_sites = static_cast<int>(*ls);
    v.local_times = *lt;
    v.local_intensity = *li;
    v.certificate = *cert;
    v.certificate_sites = static_cast<int>(*cs);
    v.certificate_cap = static_cast<int>(*cc);
    v.alpha_low = *al;
    v.alpha_high = *ah;
    v.certificate_options.levels = static_cast<int>(*lv);
    v.certificate_options.t_fraction = *tf;
    v.certificate_options.panels = static_cast<int>(*pn);
    v.certificate_options.tol = *tol;
    v.certificate_options.samples = static_cast<int>(*smp);
    v.certificate_options.seed = seed;
    return v;
}

/// "line L, column C" of a byte offset in text.
inline std::string locate(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace detail

/// Sets `value` at a dot-path such as `model.a_plus.radius`; the value is read
/// as JSON when it parses, otherwise as a string.
inline void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError({"--override: expected key=value, got '" + assignment + "'"});
    const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    json* node = &j;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (parts[i].empty()) throw ConfigError({"--override: empty path component in '" + key + "'"});
        if (!node->is_object() && !node->is_null()) throw ConfigError({"--override " + key + ": parent is not an object"});
        if (i + 1 == parts.size())
            (*node)[parts[i]] = value;
        else
            node = &(*node)[parts[i]];
    }
}

/// Validates a parsed config; throws ConfigError listing every problem.
inline RunConfig config_from_json(const json& in, const std::filesystem::path& base_dir = ".") {
    std::vector<std::string> errs;
    if (!in.is_object()) throw ConfigError({"config: top level must be an object"});
    RunConfig rc;
    json res = json::object();
    detail::FieldReader top(in, res, errs, "");
    if (top.has("label")) {
        if (const auto l = top.string("label", std::nullopt)) {
            rc.label = *l;
            if (rc.label.empty() || rc.label.find('/') != std::string::npos || rc.label == "." || rc.label == "..")
                top.error("label", "must be a plain non-empty directory name");
        }
    } else {
        top.mark("label");
    }
    if (const auto s = top.seed("seed", 1)) rc.seed = *s;
    if (const auto r = top.integer("replicas", 1, 1, 10'000'000)) rc.replicas = static_cast<int>(*r);
    if (const auto o = top.string("out", "runs")) rc.out = *o;
    std::optional<ModelParams> model;
    if (auto m = top.object("model", true)) model = detail::read_model(*m, base_dir, errs);
    const ModelParams* mp = model ? &*model : nullptr;
    if (model) rc.model = *model;
    if (auto s = top.object("sim", false)) rc.sim = detail::read_sim(*s, mp);
    if (auto s = top.object("est", false)) rc.est = detail::read_est(*s, mp, base_dir);
    if (auto s = top.object("hier", false)) rc.hier = detail::read_hier(*s, mp);
    if (auto s = top.object("kin", false)) rc.kin = detail::read_kin(*s, mp);
    if (auto s = top.object("verify", false)) rc.verify = detail::read_verify(*s, mp, rc.seed);
    top.finish();
    if (!errs.empty()) throw ConfigError(errs);
    rc.resolved = res;
    return rc;
}

/// Reads JSON (comments allowed), applies overrides, validates.
inline RunConfig parse_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {},
                              json* raw_out = nullptr) {
    std::ifstream f(path);
    if (!f) throw ConfigError({"config: cannot read '" + path.string() + "'"});
    std::stringstream buf;
    buf << f.rdbuf();
    const std::string text = buf.str();
    json j;
    try {
        j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError({path.string() + ": " + detail::locate(text, e.byte ? e.byte - 1 : 0) + ": " + e.what()});
    }
    for (const auto& o : overrides) apply_override(j, o);
    if (raw_out) *raw_out = j;
    auto rc = config_from_json(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
    rc.source = path;
    return rc;
}

}  // namespace spatlog
