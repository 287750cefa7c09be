// Acceptance suite: runs every shipped verification criterion at its pinned
// tolerance and prints one pass/fail line per criterion.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "framelab/experiments.hpp"

using namespace framelab;

namespace {

struct CriterionLine {
    int id;
    std::string name;
    bool pass = true;
    std::string detail;
};

std::string brief(double v) {
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

// Gate a criterion on all checks whose name starts with one of the prefixes.
CriterionLine gate(int id, const std::string& name, const StatReport& section,
                   const std::vector<std::string>& prefixes) {
    CriterionLine line{id, name, true, ""};
    std::ostringstream detail;
    int matched = 0;
    for (const CheckResult& c : section.checks) {
        bool wanted = false;
        for (const std::string& p : prefixes)
            if (c.name.rfind(p, 0) == 0) wanted = true;
        if (!wanted || c.verdict == "info") continue;
        ++matched;
        if (c.verdict != "pass") line.pass = false;
        if (matched > 1) detail << ", ";
        detail << c.name << "=" << brief(c.value) << " " << c.comparator << " " << brief(c.tolerance);
    }
    if (matched == 0) {
        line.pass = false;
        detail << "no matching checks found";
    }
    line.detail = detail.str();
    return line;
}

void print_line(const CriterionLine& line) {
    std::printf("[%s] criterion %2d: %s (%s)\n", line.pass ? "PASS" : "FAIL", line.id, line.name.c_str(),
                line.detail.c_str());
    std::fflush(stdout);
}

}  // namespace

int main() {
    std::vector<CriterionLine> lines;

    // 1-2: dilation diagram, adjointness and isometry
    {
        ExperimentConfig cfg = default_config("dilation-check");
        StatReport section = run_dilation_check_section(cfg);
        lines.push_back(gate(1, "dilation diagram pi U_t l = S_t on [-12,4], h = 1/16, k <= 8", section,
                             {"dilation_diagram_max_error"}));
        lines.push_back(gate(2, "adjointness and isometry of the embedding on 100 random pairs", section,
                             {"adjointness_defect", "isometry_defect"}));
        print_line(lines[lines.size() - 2]);
        print_line(lines.back());
    }

    // 3: frame round trip
    {
        ExperimentConfig cfg = default_config("frame-roundtrip");
        StatReport section = run_frame_roundtrip_section(cfg);
        lines.push_back(gate(3, "wind/unwind round trip, 100 paths, N = 8, 256 steps (plus group case)", section,
                             {"unwind_of_wind_defect", "group_case_right_inverse", "group_case_left_inverse"}));
        print_line(lines.back());
    }

    // 4: solution correspondence under refinement
    {
        ExperimentConfig cfg = default_config("correspondence");
        StatReport section = run_correspondence_section(cfg);
        lines.push_back(gate(4, "correspondence: frame pipeline against the fine mild reference", section,
                             {"errors_strictly_decreasing", "coarse_to_fine_error_ratio", "error_at_finest_dt"}));
        print_line(lines.back());
    }

    // 5: staged approximation of the stochastic integral
    {
        ExperimentConfig cfg = default_config("ito-approx");
        StatReport section = run_ito_approx_section(cfg);
        lines.push_back(gate(5, "staged Ito approximation: nonincreasing stage errors, final <= 0.01", section,
                             {"mean_errors_nonincreasing", "final_stage_mean_error"}));
        print_line(lines.back());
    }

    // 6-10: Tanaka laboratory
    {
        ExperimentConfig cfg = default_config("tanaka");
        StatReport section = run_tanaka_section(cfg, nullptr);
        lines.push_back(gate(6, "Tanaka second-moment oracle (1-e^{-2kt})/(2k^3), 2e4 paths", section,
                             {"moment_defect"}));
        print_line(lines.back());
        lines.push_back(gate(7, "realized covariation of B within 5 SE of diag(1/k^2)", section, {"covariation"}));
        print_line(lines.back());
        lines.push_back(
            gate(8, "KS law tests at alpha = 0.001: sign flip and Phi(B) reconstruction", section, {"ks_"}));
        print_line(lines.back());
        lines.push_back(gate(9, "pathwise non-uniqueness: zero flip residual, escape probability >= 0.9", section,
                             {"signflip_residual", "sup_escape_probability"}));
        print_line(lines.back());
        lines.push_back(gate(10, "Phi(B) reconstruction error <= 0.01 and halves under refinement", section,
                             {"reconstruction_mean_sup_error", "reconstruction_halving"}));
        print_line(lines.back());
    }

    // 11: monotonicity certificates and Gronwall bounds
    {
        ExperimentConfig cfg = default_config("monotone");
        StatReport section = run_monotone_section(cfg);
        lines.push_back(gate(11, "monotone certificates and Gronwall gap bounds (64 paths)", section,
                             {"certificate_", "gronwall_"}));
        print_line(lines.back());
    }

    // 12: reproducibility of reports
    {
        CriterionLine line{12, "identical (config, seed) reproduces the report modulo timing", true, ""};
        ExperimentConfig small = default_config("tanaka");
        small.n_paths = 400;
        small.n_steps = 256;
        small.recon_paths = 8;
        RunReport a = run_experiment(small);
        RunReport b = run_experiment(small);
        ExperimentConfig dil = default_config("dilation-check");
        RunReport c = run_experiment(dil);
        RunReport d = run_experiment(dil);
        bool same_tanaka = a.to_json(false).dump() == b.to_json(false).dump();
        bool same_dilation = c.to_json(false).dump() == d.to_json(false).dump();
        line.pass = same_tanaka && same_dilation;
        line.detail = std::string("tanaka rerun identical = ") + (same_tanaka ? "yes" : "no") +
                      ", dilation rerun identical = " + (same_dilation ? "yes" : "no");
        lines.push_back(line);
        print_line(lines.back());
    }

    int failures = 0;
    for (const CriterionLine& line : lines)
        if (!line.pass) ++failures;
    if (failures == 0)
        std::printf("acceptance: all %zu criteria passed\n", lines.size());
    else
        std::printf("acceptance: %d of %zu criteria FAILED\n", failures, lines.size());
    return failures == 0 ? 0 : 1;
}
