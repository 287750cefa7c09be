#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "framelab/core.hpp"
#include "framelab/ito_approx.hpp"

namespace framelab {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Flat `key = value` configuration with optional `[experiment]` sections.
// A key inside a section only applies when that experiment is selected and
// overrides the same key at top level. Lines starting with '#' are comments.
class ConfigMap {
  public:
    void parse(std::istream& in) {
        std::string line;
        std::string section;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            std::string s = trim(line);
            if (s.empty() || s[0] == '#') continue;
            if (s.front() == '[' && s.back() == ']') {
                section = trim(s.substr(1, s.size() - 2));
                if (section.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty section name");
                continue;
            }
            auto eq = s.find('=');
            if (eq == std::string::npos)
                throw ConfigError("line " + std::to_string(line_no) + ": expected `key = value`, got `" + s + "`");
            std::string key = trim(s.substr(0, eq));
            std::string value = trim(s.substr(eq + 1));
            if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
            std::string full = section.empty() ? key : section + "." + key;
            values_[full] = value;
        }
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    bool has(const std::string& key, const std::string& section) const {
        return values_.count(section + "." + key) > 0 || values_.count(key) > 0;
    }

    std::string raw(const std::string& key, const std::string& section) const {
        auto it = values_.find(section + "." + key);
        if (it != values_.end()) return it->second;
        it = values_.find(key);
        if (it != values_.end()) return it->second;
        throw ConfigError("missing required key `" + key + "`");
    }

    std::string get_string(const std::string& key, const std::string& section, const std::string& fallback) const {
        return has(key, section) ? raw(key, section) : fallback;
    }

    double get_real(const std::string& key, const std::string& section, double fallback) const {
        if (!has(key, section)) return fallback;
        return parse_real(key, section);
    }

    std::int64_t get_int(const std::string& key, const std::string& section, std::int64_t fallback) const {
        if (!has(key, section)) return fallback;
        return parse_int(key, section);
    }

    bool get_bool(const std::string& key, const std::string& section, bool fallback) const {
        if (!has(key, section)) return fallback;
        std::string v = raw(key, section);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ConfigError(field_path(key, section) + ": expected a boolean, got `" + v + "`");
    }

    const std::map<std::string, std::string>& entries() const { return values_; }

    std::string field_path(const std::string& key, const std::string& section) const {
        return values_.count(section + "." + key) ? section + "." + key : key;
    }

  private:
    double parse_real(const std::string& key, const std::string& section) const {
        const std::string v = raw(key, section);
        try {
            std::size_t pos = 0;
            double x = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return x;
        } catch (const std::exception&) {
            throw ConfigError(field_path(key, section) + ": expected a real number, got `" + v + "`");
        }
    }

    std::int64_t parse_int(const std::string& key, const std::string& section) const {
        const std::string v = raw(key, section);
        try {
            std::size_t pos = 0;
            long long x = std::stoll(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return x;
        } catch (const std::exception&) {
            throw ConfigError(field_path(key, section) + ": expected an integer, got `" + v + "`");
        }
    }

    static std::string trim(const std::string& s) {
        std::size_t a = 0, b = s.size();
        while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
        while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
        return s.substr(a, b - a);
    }

    std::map<std::string, std::string> values_;
};

// Schedule grammar: semicolon-separated stages `j:k:ell:m`, e.g.
// `1:1:4:16; 2:2:16:128; 2:3:128:1024; 1e9:4:4096:4096`.
inline ApproxSchedule parse_schedule(const std::string& text, int t_max) {
    ApproxSchedule schedule;
    schedule.t_max = t_max;
    std::stringstream ss(text);
    std::string stage_text;
    while (std::getline(ss, stage_text, ';')) {
        std::stringstream fs(stage_text);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(fs, field, ':')) fields.push_back(field);
        if (fields.size() != 4) throw ConfigError("schedule: each stage must be `j:k:ell:m`, got `" + stage_text + "`");
        ApproxStage stage;
        try {
            stage.hs_bound = std::stod(fields[0]);
            stage.rank = std::stoi(fields[1]);
            stage.mollify_rate = std::stoi(fields[2]);
            stage.step_rate = std::stoi(fields[3]);
        } catch (const std::exception&) {
            throw ConfigError("schedule: could not parse stage `" + stage_text + "`");
        }
        schedule.stages.push_back(stage);
    }
    try {
        schedule.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("schedule: ") + e.what());
    }
    return schedule;
}

// Validated parameters for one experiment run.
struct ExperimentConfig {
    std::string experiment;
    std::uint64_t seed = 1;

    // time grid
    double t_end = 1.0;
    int n_steps = 1024;

    // spaces
    int n_modes = 4;   // state modes N
    int n_noise = 4;   // driver modes K
    double x_min = -8.0;
    double x_max = 1.0;
    double h = 0.0;  // 0 means "equal to dt"

    // monte carlo
    int n_paths = 100;

    // experiment specific
    double eps = 0.1;
    double alpha_level = 0.001;
    ApproxSchedule schedule;
    int recon_paths = 256;

    // io
    std::string out_dir;
    bool dump_paths = false;
    bool dump_driver = false;
    bool dump_convergence = true;

    double dt() const { return t_end / n_steps; }
    double spacing() const { return h > 0.0 ? h : dt(); }
};

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {"dilation-check", "frame-roundtrip", "correspondence",
                                                   "ito-approx",     "tanaka",          "monotone"};
    return names;
}

inline ApproxSchedule default_schedule() {
    return parse_schedule("1:1:4:16; 2:2:16:128; 2:3:128:1024; 1e9:4:4096:4096", 1);
}

// Defaults reproduce the shipped verification settings for each experiment.
inline ExperimentConfig default_config(const std::string& experiment) {
    ExperimentConfig c;
    c.experiment = experiment;
    c.seed = 20240901;
    if (experiment == "dilation-check") {
        c.n_modes = 8;
        c.x_min = -12.0;
        c.x_max = 4.0;
        c.h = 1.0 / 16.0;
        c.t_end = 2.0;
        c.n_steps = 32;
        c.n_paths = 100;
    } else if (experiment == "frame-roundtrip") {
        c.n_modes = 8;
        c.n_noise = 8;
        c.t_end = 1.0;
        c.n_steps = 256;
        c.x_min = -8.0;
        c.x_max = 1.25;
        c.n_paths = 100;
    } else if (experiment == "correspondence") {
        c.n_modes = 4;
        c.n_noise = 4;
        c.t_end = 1.0;
        c.n_steps = 4096;  // reference resolution; coarse levels divide it
        c.x_min = -7.0;
        c.x_max = 1.0;
        c.n_paths = 32;
    } else if (experiment == "ito-approx") {
        c.n_modes = 4;
        c.n_noise = 4;
        c.t_end = 1.0;
        c.n_steps = 4096;
        c.n_paths = 16;
        c.schedule = default_schedule();
    } else if (experiment == "tanaka") {
        c.n_modes = 4;
        c.n_noise = 4;
        c.t_end = 1.0;
        c.n_steps = 1024;
        c.n_paths = 20000;
        c.recon_paths = 256;
    } else if (experiment == "monotone") {
        c.n_modes = 4;
        c.n_noise = 4;
        c.t_end = 1.0;
        c.n_steps = 256;
        c.n_paths = 64;
        c.eps = 0.1;
    } else {
        throw ConfigError("unknown experiment `" + experiment + "`; expected one of: dilation-check, frame-roundtrip, "
                          "correspondence, ito-approx, tanaka, monotone");
    }
    return c;
}

inline void validate(const ExperimentConfig& c);

inline ExperimentConfig config_from_map(const ConfigMap& map) {
    std::string experiment = map.get_string("experiment", "", "");
    if (experiment.empty()) throw ConfigError("missing required key `experiment`");
    ExperimentConfig c = default_config(experiment);
    const std::string& s = experiment;
    c.seed = static_cast<std::uint64_t>(map.get_int("seed", s, static_cast<std::int64_t>(c.seed)));
    c.t_end = map.get_real("t_end", s, c.t_end);
    c.n_steps = static_cast<int>(map.get_int("n_steps", s, c.n_steps));
    c.n_modes = static_cast<int>(map.get_int("n_modes", s, c.n_modes));
    c.n_noise = static_cast<int>(map.get_int("n_noise", s, c.n_noise));
    c.x_min = map.get_real("x_min", s, c.x_min);
    c.x_max = map.get_real("x_max", s, c.x_max);
    c.h = map.get_real("h", s, c.h);
    c.n_paths = static_cast<int>(map.get_int("n_paths", s, c.n_paths));
    c.eps = map.get_real("eps", s, c.eps);
    c.alpha_level = map.get_real("alpha_level", s, c.alpha_level);
    c.recon_paths = static_cast<int>(map.get_int("recon_paths", s, c.recon_paths));
    c.dump_paths = map.get_bool("dump_paths", s, c.dump_paths);
    c.dump_driver = map.get_bool("dump_driver", s, c.dump_driver);
    c.dump_convergence = map.get_bool("dump_convergence", s, c.dump_convergence);
    if (map.has("schedule", s)) c.schedule = parse_schedule(map.raw("schedule", s), static_cast<int>(std::ceil(c.t_end)));
    validate(c);
    return c;
}

inline void validate(const ExperimentConfig& c) {
    if (!(c.t_end > 0.0)) throw ConfigError("t_end: must be positive, got " + std::to_string(c.t_end));
    if (c.n_steps < 1) throw ConfigError("n_steps: must be a positive integer");
    if (c.n_modes < 1) throw ConfigError("n_modes: must be a positive integer");
    if (c.n_noise < 1) throw ConfigError("n_noise: must be a positive integer");
    if (c.n_paths < 1) throw ConfigError("n_paths: must be a positive integer");
    if (!(c.alpha_level > 0.0 && c.alpha_level < 1.0)) throw ConfigError("alpha_level: must be in (0, 1)");
    if (c.eps < 0.0) throw ConfigError("eps: must be nonnegative");
    if (c.experiment == "dilation-check" || c.experiment == "frame-roundtrip" || c.experiment == "correspondence") {
        if (!(c.x_min < 0.0)) throw ConfigError("x_min: must be negative (profiles live on x < 0)");
        if (!(c.x_max > 0.0)) throw ConfigError("x_max: must be positive");
        double dt = c.dt();
        double spacing = c.spacing();
        double ratio = dt / spacing;
        if (std::abs(ratio - std::lround(ratio)) > 1e-9 || ratio < 1.0 - 1e-9)
            throw ConfigError("h: dt = " + std::to_string(dt) + " must be a positive integer multiple of h = " +
                              std::to_string(spacing));
    }
}

}  // namespace framelab
