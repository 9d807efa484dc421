#pragma once

#include "radialflow/analysis.hpp"
#include "radialflow/common.hpp"
#include "radialflow/homogeneous.hpp"
#include "radialflow/oracle.hpp"

#include <json.hpp>

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace radialflow {

/// Machine-readable output schemas.  Every JSON report carries
/// {"schema": "radialflow/1"}; identical inputs and flags produce
/// byte-identical reports except for wall-time fields.

/// One solver's contribution to a solve report.
struct MethodReport {
    SolveStatus status = SolveStatus::Inconclusive;
    std::optional<PFSolution> solution;
    bool stable = false;      ///< certify_stability verdict (Solved only)
    int iterations = 0;
    double wall_time_ms = 0.0;
};

std::string digest_hex(std::uint64_t digest);

nlohmann::json json_vector(const Vector& v);
nlohmann::json json_matrix(const Matrix& m);

/// Report for cmd_solve: per-method blocks plus cross-method agreement when
/// more than one method ran.
nlohmann::json solve_report(std::uint64_t digest, int bus_count,
                            const std::vector<std::pair<std::string, MethodReport>>& methods,
                            std::optional<double> max_deviation);

/// Certificate for cmd_certify.  On Solved: Jacobian spectrum/structure and
/// sensitivity verdicts; on Infeasible: the phase-one optimum and the
/// fixed-point trace summary.
nlohmann::json certify_report(std::uint64_t digest, SolveStatus status,
                              const std::optional<PFSolution>& solution,
                              const ReducedJacobian* jac, bool sensitivity_positive,
                              bool convexity_domain, bool stable, double phase1_tau,
                              const std::string& fixed_point_status, int fp_iterations);

/// Scan summary (the CSV carries the per-sample rows).
nlohmann::json scan_report(std::uint64_t digest, const ContinuationResult& result);

/// CSV rows for a continuation scan, ascending in lambda:
/// header `lambda,feasible,min_v,residual,iterations`.
void write_scan_csv(std::ostream& out, const ContinuationResult& result);

/// Enumeration report with per-solution stability flags and the pairwise
/// dominance matrix (entry [i][j] true iff solution i >= solution j − 1e-8
/// componentwise).
nlohmann::json enumerate_report(std::uint64_t digest, const SolutionSet& set,
                                const std::vector<bool>& stable,
                                const std::vector<std::vector<bool>>& dominance);

nlohmann::json sensitivity_report(std::uint64_t digest, const PFSolution& solution,
                                  const SensitivityMatrix& sens, bool entrywise_positive);

}  // namespace radialflow
