#include "radialflow/analysis.hpp"
#include "radialflow/common.hpp"
#include "radialflow/energy.hpp"
#include "radialflow/fixed_point.hpp"
#include "radialflow/homogeneous.hpp"
#include "radialflow/network.hpp"
#include "radialflow/oracle.hpp"
#include "radialflow/relaxation.hpp"
#include "radialflow/report.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace {

using namespace radialflow;

constexpr int kExitSolved = 0;
constexpr int kExitInputError = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitInconclusive = 3;

int status_exit(SolveStatus status) {
    switch (status) {
        case SolveStatus::Solved: return kExitSolved;
        case SolveStatus::Infeasible: return kExitInfeasible;
        case SolveStatus::Inconclusive: return kExitInconclusive;
    }
    return kExitInconclusive;
}

/// Parsed case plus the derived quantities every command needs.
struct LoadedCase {
    ParsedCase parsed;
    TransformedSystem ts;
    LineFlows flows;
    std::uint64_t digest = 0;
};

LoadedCase load(const std::string& path) {
    ParsedCase parsed = load_case(path);
    TransformedSystem ts = transform(parsed.network, parsed.injections);
    LineFlows flows = solve_line_flows(parsed.network, ts);
    const std::uint64_t digest = instance_digest(parsed.network, ts);
    return LoadedCase{std::move(parsed), std::move(ts), std::move(flows), digest};
}

void emit(const nlohmann::json& report, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << report.dump(2) << '\n';
        return;
    }
    std::ofstream out(out_path);
    if (!out) throw Error("cannot open output file: " + out_path);
    out << report.dump(2) << '\n';
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
}

int cmd_solve(const std::string& path, const std::string& method, double tol,
              const std::string& out_path) {
    const LoadedCase c = load(path);
    const RadialNetwork& network = c.parsed.network;

    std::vector<std::pair<std::string, SolveMethod>> selected;
    if (method == "fixed-point" || method == "all") {
        selected.emplace_back("fixed_point", SolveMethod::FixedPoint);
    }
    if (method == "relaxation" || method == "all") {
        selected.emplace_back("relaxation", SolveMethod::Relaxation);
    }
    if (method == "energy" || method == "all") {
        selected.emplace_back("energy", SolveMethod::Energy);
    }

    std::vector<std::pair<std::string, MethodReport>> reports;
    for (const auto& [name, kind] : selected) {
        MethodReport report;
        const auto start = std::chrono::steady_clock::now();
        switch (kind) {
            case SolveMethod::FixedPoint: {
                FixedPointConfig config;
                if (tol > 0.0) config.tol = tol;
                FixedPointResult r = solve_fixed_point(network, c.ts, c.flows, config);
                report.status = r.status;
                report.solution = std::move(r.solution);
                report.iterations = r.trace.iterations;
                break;
            }
            case SolveMethod::Relaxation: {
                RelaxationConfig config;
                if (tol > 0.0) config.newton_tol = tol;
                RelaxationResult r = solve_relaxation(network, c.ts, c.flows, config);
                report.status = r.status;
                report.solution = std::move(r.solution);
                report.iterations = r.outcome.newton_iters;
                break;
            }
            case SolveMethod::Energy: {
                EnergyConfig config;
                if (tol > 0.0) config.grad_tol = tol;
                EnergyResult r = solve_energy(network, c.ts, c.flows, config);
                report.status = r.status;
                report.solution = std::move(r.solution);
                report.iterations = r.newton_iters;
                break;
            }
        }
        report.wall_time_ms = elapsed_ms(start);
        if (report.status == SolveStatus::Solved && report.solution) {
            report.stable = certify_stability(network, c.ts, *report.solution);
        }
        reports.emplace_back(name, std::move(report));
    }

    // Cross-method agreement: max pairwise deviation over the solved results.
    std::optional<double> max_deviation;
    if (reports.size() > 1) {
        double dev = 0.0;
        bool any_pair = false;
        for (std::size_t i = 0; i < reports.size(); ++i) {
            for (std::size_t k = i + 1; k < reports.size(); ++k) {
                if (!reports[i].second.solution || !reports[k].second.solution) continue;
                any_pair = true;
                dev = std::max(dev, compare_solutions(*reports[i].second.solution,
                                                      *reports[k].second.solution, 1e-7)
                                        .max_deviation);
            }
        }
        if (any_pair) max_deviation = dev;
    }

    emit(solve_report(c.digest, network.bus_count(), reports, max_deviation), out_path);

    SolveStatus combined = reports.front().second.status;
    for (const auto& [name, report] : reports) {
        (void)name;
        if (report.status != combined) combined = SolveStatus::Inconclusive;
    }
    return status_exit(combined);
}

int cmd_certify(const std::string& path, const std::string& out_path) {
    const LoadedCase c = load(path);
    const RadialNetwork& network = c.parsed.network;

    FixedPointResult fp = solve_fixed_point(network, c.ts, c.flows);
    if (fp.status == SolveStatus::Solved && fp.solution) {
        const PFSolution& sol = *fp.solution;
        const ReducedJacobian jac = reduced_jacobian(network, c.ts, c.flows, sol.v);
        bool sensitivity_positive = false;
        try {
            voltage_sensitivity(jac, sol.v);
            sensitivity_positive = true;
        } catch (const Error&) {
            sensitivity_positive = false;
        }
        const DomainCheck dc = check_convexity_domain(network, c.ts, sol.v, sol.theta);
        const bool stable = certify_stability(network, c.ts, sol);
        emit(certify_report(c.digest, fp.status, fp.solution, &jac, sensitivity_positive,
                            dc.in_domain, stable, 0.0, to_string(fp.trace.status),
                            fp.trace.iterations),
             out_path);
        return kExitSolved;
    }

    double phase1_tau = 0.0;
    if (fp.status == SolveStatus::Infeasible) {
        // Independent certificate: the phase-one optimum bounds how far the
        // reactive constraints are from satisfiable.
        phase1_tau = phase_one(network, c.ts, c.flows).tau;
    }
    emit(certify_report(c.digest, fp.status, std::nullopt, nullptr, false, false, false,
                        phase1_tau, to_string(fp.trace.status), fp.trace.iterations),
         out_path);
    return status_exit(fp.status);
}

int cmd_scan(const std::string& path, double lambda_max, int samples, double bisect_tol,
             const std::string& out_path, bool cross_check) {
    const LoadedCase c = load(path);
    ContinuationConfig config;
    config.coarse_samples = samples;
    config.cross_check = cross_check;
    const ContinuationResult result =
        continuation_scan(c.parsed.network, c.parsed.injections, lambda_max, bisect_tol, config);

    if (out_path.empty()) {
        write_scan_csv(std::cout, result);
        log_info("scan summary: " + scan_report(c.digest, result).dump());
    } else {
        std::ofstream out(out_path);
        if (!out) throw Error("cannot open output file: " + out_path);
        write_scan_csv(out, result);
        std::cout << scan_report(c.digest, result).dump(2) << '\n';
    }
    return kExitSolved;
}

int cmd_enumerate(const std::string& path, int density, const std::string& out_path) {
    const LoadedCase c = load(path);
    const RadialNetwork& network = c.parsed.network;
    const SolutionSet set = enumerate_solutions(network, c.ts, c.flows, density);

    std::vector<bool> stable;
    std::vector<PFSolution> assembled;
    stable.reserve(set.solutions.size());
    for (const Vector& v : set.solutions) {
        bool flag = false;
        try {
            PFSolution sol =
                assemble_solution(network, c.ts, c.flows, v, SolveMethod::FixedPoint, 1e-6);
            flag = certify_stability(network, c.ts, sol);
        } catch (const Error&) {
            flag = false;
        }
        stable.push_back(flag);
    }
    std::vector<std::vector<bool>> dominance(set.solutions.size(),
                                             std::vector<bool>(set.solutions.size(), false));
    for (std::size_t i = 0; i < set.solutions.size(); ++i) {
        for (std::size_t k = 0; k < set.solutions.size(); ++k) {
            dominance[i][k] =
                ((set.solutions[i].array() >= set.solutions[k].array() - 1e-8).all());
        }
    }
    emit(enumerate_report(c.digest, set, stable, dominance), out_path);
    return set.solutions.empty() ? kExitInfeasible : kExitSolved;
}

int cmd_sensitivity(const std::string& path, const std::string& out_path) {
    const LoadedCase c = load(path);
    const RadialNetwork& network = c.parsed.network;

    FixedPointResult fp = solve_fixed_point(network, c.ts, c.flows);
    if (fp.status != SolveStatus::Solved || !fp.solution) {
        log_error("sensitivity requires a solvable instance (status: " +
                  std::string(to_string(fp.status)) + ")");
        return status_exit(fp.status);
    }
    const PFSolution& sol = *fp.solution;
    const ReducedJacobian jac = reduced_jacobian(network, c.ts, c.flows, sol.v);
    try {
        const SensitivityMatrix sens = voltage_sensitivity(jac, sol.v);
        emit(sensitivity_report(c.digest, sol, sens, true), out_path);
        return kExitSolved;
    } catch (const Error& e) {
        log_error(std::string("sensitivity unavailable: ") + e.what());
        return kExitInconclusive;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AC power flow on radial networks with homogeneous lines: "
                 "monotone fixed point, convex relaxation, and energy minimization"};
    app.require_subcommand(1);

    std::string path;
    std::string out_path;
    std::string method = "all";
    double tol = 0.0;
    double lambda_max = 3.0;
    int samples = 13;
    double bisect_tol = 1e-4;
    bool cross_check = true;
    int density = 64;

    CLI::App* solve = app.add_subcommand("solve", "solve the power flow by one or all methods");
    solve->add_option("network", path, "network case (JSON file or CSV directory)")->required();
    solve->add_option("--method", method, "fixed-point | relaxation | energy | all")
        ->check(CLI::IsMember({"fixed-point", "relaxation", "energy", "all"}))
        ->capture_default_str();
    solve->add_option("--tol", tol, "override the per-method convergence tolerance");
    solve->add_option("--out", out_path, "write the JSON report here instead of stdout");

    CLI::App* certify =
        app.add_subcommand("certify", "solve and certify stability of the solution");
    certify->add_option("network", path, "network case (JSON file or CSV directory)")->required();
    certify->add_option("--out", out_path, "write the JSON certificate here instead of stdout");

    CLI::App* scan = app.add_subcommand("scan", "continuation scan along the loading ray");
    scan->add_option("network", path, "network case (JSON file or CSV directory)")->required();
    scan->add_option("--lambda-max", lambda_max, "largest loading multiplier")
        ->capture_default_str();
    scan->add_option("--samples", samples, "coarse samples in [0, lambda-max]")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    scan->add_option("--bisect-tol", bisect_tol, "target width of the boundary bracket")
        ->capture_default_str();
    scan->add_option("--out", out_path, "write CSV here (summary JSON then goes to stdout)");
    scan->add_flag("--cross-check,!--no-cross-check", cross_check,
                   "verify coarse feasible samples with all three solvers")
        ->capture_default_str();

    CLI::App* enumerate =
        app.add_subcommand("enumerate", "enumerate all power-flow solutions (n <= 4)");
    enumerate->add_option("network", path, "network case (JSON file or CSV directory)")
        ->required();
    enumerate->add_option("--density", density, "multistart grid points per axis")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    enumerate->add_option("--out", out_path, "write the JSON report here instead of stdout");

    CLI::App* sensitivity =
        app.add_subcommand("sensitivity", "voltage sensitivity dv/dq at the solution");
    sensitivity->add_option("network", path, "network case (JSON file or CSV directory)")
        ->required();
    sensitivity->add_option("--out", out_path, "write the JSON report here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInputError;
    }

    try {
        if (solve->parsed()) return cmd_solve(path, method, tol, out_path);
        if (certify->parsed()) return cmd_certify(path, out_path);
        if (scan->parsed()) {
            return cmd_scan(path, lambda_max, samples, bisect_tol, out_path, cross_check);
        }
        if (enumerate->parsed()) return cmd_enumerate(path, density, out_path);
        if (sensitivity->parsed()) return cmd_sensitivity(path, out_path);
    } catch (const DimensionTooLargeError& e) {
        std::cerr << "radialflow: " << e.what() << '\n';
        return kExitInputError;
    } catch (const Error& e) {
        std::cerr << "radialflow: " << e.what() << '\n';
        return kExitInputError;
    } catch (const std::exception& e) {
        std::cerr << "radialflow: unexpected error: " << e.what() << '\n';
        return kExitInputError;
    }
    return kExitInputError;
}
