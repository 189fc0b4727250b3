#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "estimators.hpp"
#include "geometry.hpp"
#include "simulator.hpp"

namespace spatlog::io {

/// Shortest round-trip-safe text for a double (17 significant digits).
inline std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path) : out_(path) {
        if (!out_) throw Error("cannot write '" + path.string() + "'");
    }
    void header(const std::vector<std::string>& cols) {
        for (std::size_t i = 0; i < cols.size(); ++i) out_ << (i ? "," : "") << cols[i];
        out_ << '\n';
    }
    template <class... T>
    void row(const T&... v) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(v), first = false), ...);
        out_ << '\n';
    }
    void row(const std::vector<double>& v) {
        for (std::size_t i = 0; i < v.size(); ++i) out_ << (i ? "," : "") << num(v[i]);
        out_ << '\n';
    }

private:
    static std::string cell(double x) { return num(x); }
    static std::string cell(float x) { return num(x); }
    template <class I>
    static std::enable_if_t<std::is_integral_v<I>, std::string> cell(I x) {
        return std::to_string(x);
    }
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }
    std::ofstream out_;
};

/// Snapshot CSV of one replica: `t,replica,particle_index,x0[,x1]`.
inline void write_snapshots(const std::filesystem::path& path, const Trajectory& tr, int d) {
    CsvWriter w(path);
    if (d == 1)
        w.header({"t", "replica", "particle_index", "x0"});
    else
        w.header({"t", "replica", "particle_index", "x0", "x1"});
    for (const auto& s : tr.snapshots)
        for (std::size_t i = 0; i < s.points.size(); ++i) {
            if (d == 1)
                w.row(s.t, tr.replica, i, s.points[i][0]);
            else
                w.row(s.t, tr.replica, i, s.points[i][0], s.points[i][1]);
        }
}

/// Snapshots read back from CSV, keyed by time then replica. Empty snapshots
/// are not representable in the row format; `times` lists every time seen.
struct SnapshotTable {
    int d = 1;
    std::map<double, std::map<std::uint64_t, std::vector<Point>>> data;
    std::vector<std::uint64_t> replicas;

    /// Ensemble at time t (closest recorded time within 1e-9); replicas with no
    /// row at t contribute an empty configuration.
    Ensemble at(double t) const {
        const auto it = std::min_element(data.begin(), data.end(), [&](const auto& a, const auto& b) {
            return std::abs(a.first - t) < std::abs(b.first - t);
        });
        if (it == data.end() || std::abs(it->first - t) > 1e-9 * std::max(1.0, std::abs(t)))
            throw InvalidArgument("no snapshot at t = " + std::to_string(t));
        Ensemble e;
        for (auto r : replicas) {
            const auto jt = it->second.find(r);
            e.push_back(jt == it->second.end() ? std::vector<Point>{} : jt->second);
        }
        return e;
    }
    std::vector<double> times() const {
        std::vector<double> ts;
        for (const auto& [t, _] : data) ts.push_back(t);
        return ts;
    }
};

inline void read_snapshots(const std::filesystem::path& path, SnapshotTable& table) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open snapshot CSV '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw InvalidArgument(path.string() + ": empty file");
    const int d = line == "t,replica,particle_index,x0,x1" ? 2 : 1;
    if (d == 1 && line != "t,replica,particle_index,x0")
        throw InvalidArgument(path.string() + ":1: expected header t,replica,particle_index,x0[,x1]");
    if (!table.data.empty() && table.d != d) throw InvalidArgument(path.string() + ": dimension differs between files");
    table.d = d;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double t = 0, x0 = 0, x1 = 0;
        std::uint64_t rep = 0, idx = 0;
        if (!(ss >> t >> rep >> idx >> x0) || (d == 2 && !(ss >> x1)))
            throw InvalidArgument(path.string() + ":" + std::to_string(lineno) + ": malformed row");
        table.data[t][rep].push_back({x0, x1});
        if (std::find(table.replicas.begin(), table.replicas.end(), rep) == table.replicas.end())
            table.replicas.push_back(rep);
    }
    std::sort(table.replicas.begin(), table.replicas.end());
}

struct Series {
    std::string name;
    std::vector<double> x, y;
};

/// Minimal SVG line plot with axes, tick labels and a legend.
inline void write_svg_plot(const std::filesystem::path& path, const std::string& title, const std::string& xlabel,
                           const std::string& ylabel, const std::vector<Series>& series) {
    const double W = 640, H = 420, l = 70, r = 20, t = 40, b = 55;
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    if (x0 > x1) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y0 -= 0.5, y1 += 0.5;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    auto px = [&](double x) { return l + (x - x0) / (x1 - x0) * (W - l - r); };
    auto py = [&](double y) { return H - b - (y - y0) / (y1 - y0) * (H - t - b); };
    std::ofstream o(path);
    if (!o) throw Error("cannot write '" + path.string() + "'");
    char buf[160];
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
    o << "<line x1=\"" << l << "\" y1=\"" << H - b << "\" x2=\"" << W - r << "\" y2=\"" << H - b << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << l << "\" y1=\"" << t << "\" x2=\"" << l << "\" y2=\"" << H - b << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = x0 + k * (x1 - x0) / 4, yv = y0 + k * (y1 - y0) / 4;
        std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%.3g</text>\n", px(xv),
                      H - b + 18, xv);
        o << buf;
        std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.3g</text>\n", l - 6,
                      py(yv) + 4, yv);
        o << buf;
    }
    o << "<text x=\"" << (l + W - r) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
    o << "<text transform=\"translate(16," << (t + H - b) / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << ylabel
      << "</text>\n";
    static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* c = colours[si % 6];
        o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(s.x[i]), py(s.y[i]));
            o << buf;
        }
        o << "\"/>\n";
        o << "<text x=\"" << W - r - 140 << "\" y=\"" << t + 14 + 16 * si << "\" fill=\"" << c << "\">" << s.name
          << "</text>\n";
    }
    o << "</svg>\n";
}

}  // namespace spatlog::io
