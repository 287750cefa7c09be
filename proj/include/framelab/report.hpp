#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace framelab {

inline constexpr const char* artifact_name = "framelab";
inline constexpr const char* artifact_version = "0.1.0";

// One numeric verdict: the measured value, the tolerance it was held to, how
// they were compared, and which module produced it.
struct CheckResult {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    std::string comparator = "<=";  // "<=", ">=" or "info"
    std::string verdict = "pass";   // "pass", "fail", "warn" or "info"
    std::string provenance;

    static CheckResult with_max(const std::string& name, double value, double tol, const std::string& provenance) {
        CheckResult c;
        c.name = name;
        c.value = value;
        c.tolerance = tol;
        c.comparator = "<=";
        c.verdict = value <= tol ? "pass" : "fail";
        c.provenance = provenance;
        return c;
    }

    static CheckResult with_min(const std::string& name, double value, double tol, const std::string& provenance) {
        CheckResult c;
        c.name = name;
        c.value = value;
        c.tolerance = tol;
        c.comparator = ">=";
        c.verdict = value >= tol ? "pass" : "fail";
        c.provenance = provenance;
        return c;
    }

    static CheckResult flag(const std::string& name, bool ok, const std::string& provenance) {
        CheckResult c;
        c.name = name;
        c.value = ok ? 1.0 : 0.0;
        c.tolerance = 1.0;
        c.comparator = ">=";
        c.verdict = ok ? "pass" : "fail";
        c.provenance = provenance;
        return c;
    }

    static CheckResult info(const std::string& name, double value, const std::string& provenance) {
        CheckResult c;
        c.name = name;
        c.value = value;
        c.comparator = "info";
        c.verdict = "info";
        c.provenance = provenance;
        return c;
    }
};

struct StatReport {
    std::string experiment;
    std::vector<CheckResult> checks;
    std::vector<std::string> notes;
    nlohmann::json extra = nlohmann::json::object();

    void add(CheckResult c) { checks.push_back(std::move(c)); }

    void warn(const std::string& name, const std::string& reason) {
        CheckResult c;
        c.name = name;
        c.comparator = "info";
        c.verdict = "warn";
        c.provenance = reason;
        checks.push_back(std::move(c));
    }

    bool all_pass() const {
        for (const CheckResult& c : checks)
            if (c.verdict == "fail" || c.verdict == "warn") return false;
        return true;
    }
};

inline nlohmann::json to_json(const CheckResult& c) {
    nlohmann::json j;
    j["name"] = c.name;
    j["value"] = c.value;
    j["tolerance"] = c.tolerance;
    j["comparator"] = c.comparator;
    j["verdict"] = c.verdict;
    j["provenance"] = c.provenance;
    return j;
}

inline nlohmann::json to_json(const StatReport& r) {
    nlohmann::json j;
    j["experiment"] = r.experiment;
    j["checks"] = nlohmann::json::array();
    for (const CheckResult& c : r.checks) j["checks"].push_back(to_json(c));
    j["notes"] = r.notes;
    if (!r.extra.empty()) j["extra"] = r.extra;
    j["pass"] = r.all_pass();
    return j;
}

}  // namespace framelab
