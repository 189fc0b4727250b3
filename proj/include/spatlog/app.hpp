#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>
#include <openssl/opensslv.h>

#include "config.hpp"
#include "estimators.hpp"
#include "hierarchy.hpp"
#include "io.hpp"
#include "kinetic.hpp"
#include "simulator.hpp"
#include "verify.hpp"

namespace spatlog::app {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { ok = 0, validation_error = 1, verification_failure = 2, divergence = 3 };

struct Options {
    std::string subcommand;  // simulate | estimate | hierarchy | kinetic | verify
    std::filesystem::path config;
    std::optional<std::uint64_t> seed;
    std::optional<int> replicas;
    std::optional<std::string> out;
    bool plots = false;
    std::vector<std::string> overrides;
};

struct RunResult {
    int exit_code = ok;
    std::filesystem::path dir;  // empty when nothing was written
    std::string message;
};

namespace detail {

inline std::string hex(const unsigned char* p, unsigned n) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    for (unsigned i = 0; i < n; ++i) {
        s += digits[p[i] >> 4];
        s += digits[p[i] & 15];
    }
    return s;
}

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) { EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr); }
    ~Sha256() { EVP_MD_CTX_free(ctx_); }
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;
    void update(const std::string& s) { EVP_DigestUpdate(ctx_, s.data(), s.size()); }
    std::string final_hex() {
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned n = 0;
        EVP_DigestFinal_ex(ctx_, md, &n);
        return hex(md, n);
    }

private:
    EVP_MD_CTX* ctx_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline void write_json(const std::filesystem::path& p, const json& j) {
    std::ofstream f(p);
    if (!f) throw Error("cannot write '" + p.string() + "'");
    f << j.dump(2) << '\n';
}

inline std::string timestamp_utc(std::chrono::system_clock::time_point tp, const char* fmt) {
    const std::time_t tt = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[64];
    std::strftime(buf, sizeof buf, fmt, &tm);
    return buf;
}

inline json value_json(const ValueWithError& v) {
    json j = {{"value", v.defined ? json(v.value) : json(nullptr)}};
    j["stderr"] = v.stderr_defined && v.defined ? json(v.stderr_) : json(nullptr);
    return j;
}

inline std::string time_tag(double t) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%g", t);
    return buf;
}

/// Files a config points at: tabulated kernels and estimate inputs.
inline std::vector<std::filesystem::path> referenced_files(const RunConfig& rc, const json& raw) {
    std::vector<std::filesystem::path> files;
    const auto base = rc.source.parent_path().empty() ? std::filesystem::path(".") : rc.source.parent_path();
    for (const char* k : {"a_plus", "a_minus"})
        if (raw.contains("model") && raw["model"].contains(k) && raw["model"][k].contains("file") &&
            raw["model"][k]["file"].is_string()) {
            const std::filesystem::path f = raw["model"][k]["file"].get<std::string>();
            files.push_back(f.is_absolute() ? f : base / f);
        }
    if (rc.est)
        for (const auto& f : rc.est->inputs) files.push_back(f);
    return files;
}

}  // namespace detail

/// Runs one subcommand; every artifact lands in the returned directory.
class Runner {
public:
    Runner(RunConfig rc, json raw, Options opt, std::ostream& log)
        : rc_(std::move(rc)), raw_(std::move(raw)), opt_(std::move(opt)), log_(log) {}

    RunResult run() {
        const auto start = std::chrono::system_clock::now();
        const auto t0 = std::chrono::steady_clock::now();
        RunResult res;
        require_block();
        make_dir(start);
        res.dir = dir_;
        detail::write_json(dir_ / "resolved_config.json", rc_.resolved);
        json summary;
        try {
            if (opt_.subcommand == "simulate") summary = simulate();
            else if (opt_.subcommand == "estimate") summary = estimate();
            else if (opt_.subcommand == "hierarchy") summary = hierarchy();
            else if (opt_.subcommand == "kinetic") summary = kinetic();
            else summary = verify(res);
        } catch (const DivergenceError& e) {
            res.exit_code = divergence;
            res.message = std::string(e.what()) + " at t = " + std::to_string(e.time);
            summary = {{"error", "divergence"}, {"message", e.what()}, {"time", e.time}};
        }
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_manifest(start, wall, res.exit_code);
        if (res.exit_code == divergence) detail::write_json(dir_ / "error.json", summary);
        return res;
    }

private:
    void require_block() const {
        const auto& s = opt_.subcommand;
        std::vector<std::string> errs;
        if (s == "simulate" && !rc_.sim) errs.push_back("sim: block required for simulate");
        if (s == "estimate" && !rc_.est) errs.push_back("est: block required for estimate");
        if (s == "estimate" && rc_.est && rc_.est->inputs.empty() && !rc_.sim)
            errs.push_back("est.input: give snapshot CSVs or a sim block to simulate from");
        if (s == "hierarchy" && !rc_.hier) errs.push_back("hier: block required for hierarchy");
        if (s == "kinetic" && !rc_.kin) errs.push_back("kin: block required for kinetic");
        if (!errs.empty()) throw ConfigError(errs);
    }

    void make_dir(std::chrono::system_clock::time_point start) {
        const std::filesystem::path root = std::filesystem::path(rc_.out) / opt_.subcommand;
        std::string name = rc_.label.empty() ? detail::timestamp_utc(start, "%Y%m%dT%H%M%SZ") : rc_.label;
        dir_ = root / name;
        if (rc_.label.empty()) {
            for (int k = 1; std::filesystem::exists(dir_); ++k) dir_ = root / (name + "-" + std::to_string(k));
        } else if (std::filesystem::exists(dir_)) {
            // a rerun of the same label replaces that run, never anything else
            if (!std::filesystem::exists(dir_ / "manifest.json"))
                throw ConfigError({"label: '" + dir_.string() + "' exists and is not a previous run directory"});
            std::filesystem::remove_all(dir_);
        }
        std::filesystem::create_directories(dir_);
    }

    void write_manifest(std::chrono::system_clock::time_point start, double wall, int code) {
        detail::Sha256 h;
        h.update(detail::slurp(rc_.source));
        for (const auto& o : opt_.overrides) h.update("\n--override " + o);
        if (opt_.seed) h.update("\n--seed " + std::to_string(*opt_.seed));
        if (opt_.replicas) h.update("\n--replicas " + std::to_string(*opt_.replicas));
        json files = json::array();
        for (const auto& f : detail::referenced_files(rc_, raw_)) {
            detail::Sha256 hf;
            hf.update(detail::slurp(f));
            const auto digest = hf.final_hex();
            h.update("\n" + digest);
            files.push_back({{"path", f.string()}, {"sha256", digest}});
        }
        json m;
        m["subcommand"] = opt_.subcommand;
        m["config"] = std::filesystem::absolute(rc_.source).string();
        m["overrides"] = opt_.overrides;
        m["inputs_sha256"] = h.final_hex();
        m["input_files"] = files;
        m["seed"] = rc_.seed;
        m["replicas"] = rc_.replicas;
        m["started_utc"] = detail::timestamp_utc(start, "%Y-%m-%dT%H:%M:%SZ");
        m["wall_time_s"] = wall;
        m["exit_code"] = code;
        m["versions"] = {
            {"spatlog", kVersion},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
            {"openssl", OPENSSL_VERSION_TEXT},
            {"compiler", __VERSION__},
        };
        detail::write_json(dir_ / "manifest.json", m);
    }

    std::filesystem::path plot_path(const std::string& name) const { return dir_ / (name + ".svg"); }

    json simulate() {
        const auto sc = rc_.sim_config();
        const auto times = resolved_snapshot_times(sc);
        log_ << "simulate: " << sc.replicas << " replicas to t = " << sc.t_max << "\n";
        const auto trs = spatlog::run(sc);
        std::filesystem::create_directories(dir_ / "snapshots");
        std::uint64_t events = 0, births = 0, deaths = 0;
        for (const auto& tr : trs) {
            char name[48];
            std::snprintf(name, sizeof name, "replica_%05llu.csv", static_cast<unsigned long long>(tr.replica));
            io::write_snapshots(dir_ / "snapshots" / name, tr, rc_.model.d);
            events += tr.events;
            births += tr.births;
            deaths += tr.deaths;
        }
        json per_time = json::array();
        io::Series density{"k1", {}, {}};
        for (std::size_t k = 0; k < times.size(); ++k) {
            const auto ens = ensemble_at(trs, k);
            const auto k1 = estimate_k1(ens, rc_.model.L, rc_.model.d);
            std::vector<double> counts;
            for (const auto& e : ens) counts.push_back(static_cast<double>(e.size()));
            ValueWithError n;
            spatlog::detail::mean_and_stderr(counts, n);
            per_time.push_back(json{{"t", times[k]}, {"mean_count", detail::value_json(n)}, {"k1", detail::value_json(k1)}});
            density.x.push_back(times[k]);
            density.y.push_back(k1.value);
        }
        json s = {{"replicas", sc.replicas}, {"t_max", sc.t_max}, {"snapshots", per_time},
                  {"events", events}, {"births", births}, {"deaths", deaths}};
        detail::write_json(dir_ / "summary.json", s);
        if (opt_.plots) io::write_svg_plot(plot_path("density"), "particle density", "t", "k1", {density});
        return s;
    }

    json estimate() {
        const auto& e = *rc_.est;
        const int d = rc_.model.d;
        const double L = rc_.model.L;
        io::SnapshotTable table;
        table.d = d;
        std::vector<Trajectory> trs;
        std::vector<double> available;
        if (!e.inputs.empty()) {
            for (const auto& f : e.inputs) io::read_snapshots(f, table);
            if (table.d != d) throw ConfigError({"est.input: snapshot dimension differs from model.d"});
            available = table.times();
        } else {
            log_ << "estimate: simulating " << rc_.replicas << " replicas\n";
            trs = spatlog::run(rc_.sim_config());
            available = resolved_snapshot_times(rc_.sim_config());
        }
        std::vector<double> times = e.times.empty() ? available : e.times;
        auto ensemble = [&](double t) -> Ensemble {
            if (!e.inputs.empty()) return table.at(t);
            for (std::size_t k = 0; k < available.size(); ++k)
                if (std::abs(available[k] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return ensemble_at(trs, k);
            throw ConfigError({"est.times: no snapshot at t = " + detail::time_tag(t)});
        };
        json per_time = json::array();
        std::vector<io::Series> k2plot;
        for (double t : times) {
            const auto ens = ensemble(t);
            const auto est = estimate_k2_radial(ens, e.edges, L, d);
            io::CsvWriter w(dir_ / ("k2_t" + detail::time_tag(t) + ".csv"));
            w.header({"r_lo", "r_hi", "k2", "stderr"});
            io::Series s{"t = " + detail::time_tag(t), {}, {}};
            for (std::size_t b = 0; b < est.k2.size(); ++b) {
                w.row(est.edges[b], est.edges[b + 1], est.k2[b], est.k2_stderr[b]);
                s.x.push_back(0.5 * (est.edges[b] + est.edges[b + 1]));
                s.y.push_back(est.k2[b]);
            }
            k2plot.push_back(std::move(s));
            const auto ci = cluster_index(ens, e.edges, e.r0, L, d);
            const auto dm = dobrushin_moment(ens, e.dobrushin_alpha, e.window, L, d);
            json entry = {{"t", t},
                          {"replicas", ens.size()},
                          {"k1", detail::value_json(est.k1)},
                          {"cluster_index", detail::value_json(ci)},
                          {"r0", e.r0},
                          {"dobrushin", {{"alpha", e.dobrushin_alpha},
                                         {"value", std::isfinite(dm.value) ? json(dm.value) : json(nullptr)},
                                         {"log_value", dm.log_value},
                                         {"stderr", dm.stderr_}}}};
            if (e.k3_radius)
                entry["k3"] = detail::value_json(estimate_k3_triplet(ens, *e.k3_radius, L, d));
            per_time.push_back(entry);
        }
        json s = {{"source", e.inputs.empty() ? "simulated" : "csv"}, {"estimates", per_time}};
        detail::write_json(dir_ / "summary.json", s);
        if (opt_.plots) io::write_svg_plot(plot_path("k2"), "pair correlation", "r", "k2", k2plot);
        return s;
    }

    json hierarchy() {
        const auto& h = *rc_.hier;
        const HierarchyModel model(rc_.model, h.grid, h.closure, h.mode);
        log_ << "hierarchy: closure " << to_string(h.closure) << ", t_max " << h.t_max << "\n";
        const auto tr = integrate(model, model.poisson_state(h.u0), h.dt, h.t_max, h.output_every);
        io::CsvWriter u(dir_ / "u.csv"), w(dir_ / "w.csv");
        u.header({"t", "u"});
        w.header({"t", "r", "w"});
        io::Series us{"u", {}, {}};
        for (const auto& s : tr.states) {
            u.row(s.t, s.u);
            us.x.push_back(s.t);
            us.y.push_back(s.u);
            for (int j = 0; j < h.grid.size(); ++j) w.row(s.t, h.grid.r(j), s.w[static_cast<std::size_t>(j)]);
        }
        const auto& last = tr.states.back();
        json m = {{"closure", to_string(h.closure)},
                  {"mode", h.mode == HierarchyMode::mean_field ? "mean_field" : "order2"},
                  {"u0", h.u0},
                  {"dt", h.dt},
                  {"t_max", h.t_max},
                  {"grid", {{"dr", h.grid.dr}, {"r_max", h.grid.r_max}, {"points", h.grid.size()}, {"n_phi", h.grid.n_phi}}},
                  {"mass_plus", model.mass_plus()},
                  {"mass_minus", model.mass_minus()},
                  {"clip_events", tr.clip_events},
                  {"final", {{"t", last.t}, {"u", last.u}, {"w_at_0", last.w.front()}, {"w_at_r_max", last.w.back()}}}};
        if (tr.clip_events > 0) log_ << "warning: " << tr.clip_events << " negative values clipped to 0\n";
        detail::write_json(dir_ / "metadata.json", m);
        if (opt_.plots) {
            io::write_svg_plot(plot_path("density"), "hierarchy density", "t", "u", {us});
            io::Series ws{"t = " + detail::time_tag(last.t), {}, {}};
            for (int j = 0; j < h.grid.size(); ++j) {
                ws.x.push_back(h.grid.r(j));
                ws.y.push_back(last.w[static_cast<std::size_t>(j)]);
            }
            io::write_svg_plot(plot_path("w"), "pair function", "r", "w", {ws});
        }
        return m;
    }

    DensityField initial_field(const KineticModel& model) const {
        const auto& k = *rc_.kin;
        const double value = k.value_is_equilibrium ? model.equilibrium() : k.value;
        auto f = model.field(0.0);
        const int n = model.n();
        const double L = rc_.model.L;
        for (std::size_t c = 0; c < f.rho.size(); ++c) {
            const int i = static_cast<int>(c % static_cast<std::size_t>(n));
            const int j = static_cast<int>(c / static_cast<std::size_t>(n));
            const double x = f.x(i), y = f.x(j);
            double& r = f.rho[c];
            switch (k.kind) {
                case KinInitKind::uniform: r = value; break;
                case KinInitKind::block: r = (x >= k.lo && x <= k.hi) ? value : 0.0; break;
                case KinInitKind::gaussian: {
                    const double dx = min_image(x - k.center, L);
                    const double dy = rc_.model.d == 2 ? min_image(y - k.center, L) : 0.0;
                    r = value * std::exp(-0.5 * (dx * dx + dy * dy) / (k.width * k.width));
                    break;
                }
                case KinInitKind::sine: r = k.mean + k.amplitude * std::cos(2 * M_PI * k.modes * x / L); break;
            }
        }
        return f;
    }

    json kinetic() {
        const auto& k = *rc_.kin;
        const KineticModel model(rc_.model, k.n);
        log_ << "kinetic: n = " << k.n << ", dt = " << k.dt << ", t_max = " << k.t_max << "\n";
        const auto tr = integrate(model, initial_field(model), k.dt, k.t_max, k.stride);
        io::CsvWriter w(dir_ / "rho.csv");
        const int d = rc_.model.d, n = model.n();
        if (d == 1) w.header({"t", "x", "rho"});
        else w.header({"t", "x0", "x1", "rho"});
        io::Series mean{"mean density", {}, {}};
        for (const auto& f : tr.fields) {
            double acc = 0.0;
            for (std::size_t c = 0; c < f.rho.size(); ++c) {
                const int i = static_cast<int>(c % static_cast<std::size_t>(n));
                const int j = static_cast<int>(c / static_cast<std::size_t>(n));
                if (d == 1) w.row(f.t, f.x(i), f.rho[c]);
                else w.row(f.t, f.x(i), f.x(j), f.rho[c]);
                acc += f.rho[c];
            }
            mean.x.push_back(f.t);
            mean.y.push_back(acc / static_cast<double>(f.rho.size()));
        }
        json s = {{"n", n},
                  {"dx", rc_.model.L / n},
                  {"dt", k.dt},
                  {"t_max", k.t_max},
                  {"mass_plus", model.mass_plus()},
                  {"mass_minus", model.mass_minus()},
                  {"equilibrium", model.equilibrium()},
                  {"clip_events", tr.clip_events},
                  {"frames", tr.fields.size()},
                  {"final_mean_density", mean.y.back()}};
        if (k.kind == KinInitKind::uniform) {
            // homogeneous data stays homogeneous: compare with the logistic closed form
            const double u0 = tr.fields.front().rho.front();
            double err = 0.0;
            for (const auto& f : tr.fields) {
                const double exact = logistic_solution(u0, model.mass_plus(), rc_.model.m, model.mass_minus(), f.t);
                for (double v : f.rho) err = std::max(err, std::abs(v - exact));
            }
            s["max_abs_error"] = err;
            s["closed_form_final"] =
                logistic_solution(u0, model.mass_plus(), rc_.model.m, model.mass_minus(), tr.fields.back().t);
        }
        if (k.front_level) {
            const auto fs = front_speed(tr.fields, *k.front_level);
            json fj = {{"level", *k.front_level},
                       {"speed", fs.speed},
                       {"fit_residual", fs.fit_residual},
                       {"window", {fs.t_begin, fs.t_end}},
                       {"points", fs.points},
                       {"decayed", fs.decayed},
                       {"saturated", fs.saturated},
                       {"truncated", fs.truncated}};
            if (!fs.warning.empty()) {
                fj["warning"] = fs.warning;
                log_ << "warning: " << fs.warning << "\n";
            }
            if (!rc_.model.a_plus.is_zero() && model.mass_plus() > rc_.model.m)
                fj["linear_spreading_speed"] = linear_spreading_speed(rc_.model.a_plus, rc_.model.m);
            s["front"] = fj;
            if (opt_.plots && !fs.times.empty())
                io::write_svg_plot(plot_path("front"), "front position", "t", "x", {{"front", fs.times, fs.positions}});
        }
        if (tr.clip_events > 0) log_ << "warning: " << tr.clip_events << " negative values clipped to 0\n";
        detail::write_json(dir_ / "summary.json", s);
        if (opt_.plots) io::write_svg_plot(plot_path("density"), "kinetic density", "t", "mean rho", {mean});
        return s;
    }

    json verify(RunResult& res) {
        VerifyConfig vc;
        if (rc_.verify) {
            vc = *rc_.verify;
        } else {
            vc.model = rc_.model;
            vc.seed = rc_.seed;
            vc.certificate_options.seed = rc_.seed;
        }
        log_ << "verify: running the lattice battery\n";
        const auto rep = verify_all(vc);
        json j = {{"all_pass", rep.all_pass()}, {"checks", rep.to_json()}};
        detail::write_json(dir_ / "report.json", j);
        for (const auto& c : rep.checks)
            log_ << (c.pass ? "PASS " : "FAIL ") << c.name << " value=" << c.value << " bound=" << c.bound << "\n";
        if (!rep.all_pass()) {
            res.exit_code = verification_failure;
            res.message = "verification failed";
        }
        return j;
    }

    RunConfig rc_;
    json raw_;
    Options opt_;
    std::ostream& log_;
    std::filesystem::path dir_;
};

/// Parses, validates and runs; maps failures to exit codes. Errors go to `err`.
inline RunResult run_cli(const Options& opt, std::ostream& log, std::ostream& err) {
    RunResult res;
    try {
        std::vector<std::string> overrides = opt.overrides;
        if (opt.seed) overrides.push_back("seed=" + std::to_string(*opt.seed));
        if (opt.replicas) overrides.push_back("replicas=" + std::to_string(*opt.replicas));
        if (opt.out) overrides.push_back("out=" + json(*opt.out).dump());
        json raw;
        auto rc = parse_config(opt.config, overrides, &raw);
        Runner runner(std::move(rc), std::move(raw), opt, log);
        res = runner.run();
        if (res.exit_code != ok) err << "error: " << res.message << "\n";
    } catch (const ConfigError& e) {
        for (const auto& m : e.errors) err << "config error: " << m << "\n";
        res.exit_code = validation_error;
        res.message = e.what();
    } catch (const DivergenceError& e) {
        err << "error: " << e.what() << " at t = " << e.time << "\n";
        res.exit_code = divergence;
        res.message = e.what();
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        res.exit_code = validation_error;
        res.message = e.what();
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        res.exit_code = validation_error;
        res.message = e.what();
    }
    return res;
}

}  // namespace spatlog::app
