#include "radialflow/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <utility>

namespace radialflow {

namespace {

constexpr const char* kSchema = "radialflow/1";

nlohmann::json solution_block(const PFSolution& sol) {
    return {
        {"v", json_vector(sol.v)},          {"theta", json_vector(sol.theta)},
        {"s", json_vector(sol.s)},          {"c", json_vector(sol.c)},
        {"residual_inf", sol.residual_inf},
    };
}

}  // namespace

std::string digest_hex(std::uint64_t digest) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(digest));
    return buf;
}

nlohmann::json json_vector(const Vector& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

nlohmann::json json_matrix(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        rows.push_back(std::move(row));
    }
    return rows;
}

nlohmann::json solve_report(std::uint64_t digest, int bus_count,
                            const std::vector<std::pair<std::string, MethodReport>>& methods,
                            std::optional<double> max_deviation) {
    nlohmann::json blocks = nlohmann::json::object();
    for (const auto& [name, report] : methods) {
        nlohmann::json block = {
            {"status", to_string(report.status)},
            {"iterations", report.iterations},
            {"wall_time_ms", report.wall_time_ms},
        };
        if (report.solution) {
            block.update(solution_block(*report.solution));
            block["stable"] = report.stable;
        }
        blocks[name] = std::move(block);
    }
    nlohmann::json out = {
        {"schema", kSchema},
        {"command", "solve"},
        {"instance_digest", digest_hex(digest)},
        {"buses", bus_count},
        {"methods", std::move(blocks)},
    };
    if (max_deviation) {
        out["agreement"] = {{"max_deviation", *max_deviation}};
    }
    return out;
}

nlohmann::json certify_report(std::uint64_t digest, SolveStatus status,
                              const std::optional<PFSolution>& solution,
                              const ReducedJacobian* jac, bool sensitivity_positive,
                              bool convexity_domain, bool stable, double phase1_tau,
                              const std::string& fixed_point_status, int fp_iterations) {
    nlohmann::json out = {
        {"schema", kSchema},
        {"command", "certify"},
        {"instance_digest", digest_hex(digest)},
        {"status", to_string(status)},
    };
    if (status == SolveStatus::Solved && solution && jac != nullptr) {
        out["v"] = json_vector(solution->v);
        out["min_eig"] = jac->min_eig;
        out["z_matrix"] = jac->is_Z;
        out["positive_definite"] = jac->is_PD;
        out["sensitivity_positive"] = sensitivity_positive;
        out["convexity_domain"] = convexity_domain;
        out["stable"] = stable;
    } else if (status == SolveStatus::Infeasible) {
        out["certificate"] = {
            {"phase1_tau", phase1_tau},
            {"fixed_point_status", fixed_point_status},
            {"fixed_point_iterations", fp_iterations},
        };
    }
    return out;
}

nlohmann::json scan_report(std::uint64_t digest, const ContinuationResult& result) {
    nlohmann::json out = {
        {"schema", kSchema},
        {"command", "scan"},
        {"instance_digest", digest_hex(digest)},
        {"samples", result.samples.size()},
        {"feasible_samples", result.solutions.size()},
        {"inconclusive_samples", result.inconclusive_count},
        {"cross_check_failures", result.cross_check_failures},
        {"lambda_lo", result.lambda_lo},
    };
    if (std::isfinite(result.lambda_hi)) {
        out["lambda_hi"] = result.lambda_hi;
        out["bracket_width"] = result.bracket_width;
    } else {
        // No infeasible sample within the scanned range: the bracket is open.
        out["lambda_hi"] = nullptr;
        out["bracket_width"] = nullptr;
    }
    if (!result.solutions.empty()) {
        out["min_v_last_feasible"] = result.solutions.back().v.minCoeff();
    }
    return out;
}

void write_scan_csv(std::ostream& out, const ContinuationResult& result) {
    std::vector<ContinuationSample> rows = result.samples;
    std::sort(rows.begin(), rows.end(),
              [](const ContinuationSample& a, const ContinuationSample& b) {
                  return a.lambda < b.lambda;
              });
    out << "lambda,feasible,min_v,residual,iterations\n";
    for (const ContinuationSample& row : rows) {
        const nlohmann::json lambda = row.lambda;  // shortest round-trip formatting
        const nlohmann::json residual = row.residual;
        out << lambda.dump() << ',' << (row.status == SolveStatus::Solved ? 1 : 0) << ',';
        if (std::isnan(row.min_v)) {
            out << "nan";
        } else {
            out << nlohmann::json(row.min_v).dump();
        }
        out << ',' << residual.dump() << ',' << row.iterations << '\n';
    }
}

nlohmann::json enumerate_report(std::uint64_t digest, const SolutionSet& set,
                                const std::vector<bool>& stable,
                                const std::vector<std::vector<bool>>& dominance) {
    nlohmann::json solutions = nlohmann::json::array();
    for (std::size_t i = 0; i < set.solutions.size(); ++i) {
        solutions.push_back({
            {"v", json_vector(set.solutions[i])},
            {"stable", stable[i]},
        });
    }
    nlohmann::json dom = nlohmann::json::array();
    for (const auto& row : dominance) {
        nlohmann::json r = nlohmann::json::array();
        for (bool cell : row) r.push_back(cell);
        dom.push_back(std::move(r));
    }
    return {
        {"schema", kSchema},
        {"command", "enumerate"},
        {"instance_digest", digest_hex(digest)},
        {"count", set.solutions.size()},
        {"complete_claim", set.complete_claim},
        {"solutions", std::move(solutions)},
        {"dominance", std::move(dom)},
    };
}

nlohmann::json sensitivity_report(std::uint64_t digest, const PFSolution& solution,
                                  const SensitivityMatrix& sens, bool entrywise_positive) {
    return {
        {"schema", kSchema},
        {"command", "sensitivity"},
        {"instance_digest", digest_hex(digest)},
        {"v", json_vector(solution.v)},
        {"dv_dq", json_matrix(sens.dv_dq)},
        {"entrywise_positive", entrywise_positive},
    };
}

}  // namespace radialflow
