#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace spatlog {

/// One named numerical check: pass iff value <= bound (unless stated otherwise by the producer).
struct Check {
    std::string name;
    double value = 0.0;
    double bound = 0.0;
    bool pass = false;
    std::string note;
};

struct Report {
    std::vector<Check> checks;

    void add(std::string name, double value, double bound, bool pass, std::string note = {}) {
        checks.push_back({std::move(name), value, bound, pass, std::move(note)});
    }
    /// value <= bound + tol
    void add_le(std::string name, double value, double bound, double tol = 0.0, std::string note = {}) {
        add(std::move(name), value, bound, value <= bound + tol, std::move(note));
    }
    void append(const Report& other) { checks.insert(checks.end(), other.checks.begin(), other.checks.end()); }

    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& c : checks) {
            nlohmann::json e = {{"value", c.value}, {"bound", c.bound}, {"pass", c.pass}};
            if (!c.note.empty()) e["note"] = c.note;
            j[c.name] = e;
        }
        return j;
    }
};

}  // namespace spatlog
