#include "radialflow/analysis.hpp"

#include "radialflow/energy.hpp"
#include "radialflow/relaxation.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace radialflow {

namespace {

/// Relative deviation |a − b| / max(1, |a|, |b|).
double rel_dev(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

/// Line cosine terms c = √(v_i v_k − s²); throws on domain violation.
Vector line_cosines(const RadialNetwork& network, const LineFlows& flows, const Vector& v) {
    const int n = network.non_slack_count();
    Vector c(n);
    std::vector<int> violated;
    for (int line = 0; line < n; ++line) {
        const int child = line + 1;
        const int parent = network.parent(child);
        const double v_parent = parent == 0 ? 1.0 : v[parent - 1];
        const double d = v[child - 1] * v_parent - flows.s[line] * flows.s[line];
        if (!(d > 0.0)) {
            violated.push_back(line);
            continue;
        }
        c[line] = std::sqrt(d);
    }
    if (!violated.empty()) {
        throw DomainViolationError(violated, "Jacobian undefined: v_i v_k <= s^2 on some lines");
    }
    return c;
}

}  // namespace

ReducedJacobian reduced_jacobian(const RadialNetwork& network, const TransformedSystem& ts,
                                 const LineFlows& flows, const Vector& v) {
    const int n = network.non_slack_count();
    const Vector c = line_cosines(network, flows, v);

    ReducedJacobian jac;
    jac.J = Matrix::Zero(n, n);
    jac.J.diagonal() = ts.b_total.cwiseProduct(v);
    for (int line = 0; line < n; ++line) {
        const int child = line + 1;
        const int parent = network.parent(child);
        const double v_parent = parent == 0 ? 1.0 : v[parent - 1];
        const double coef = 0.5 * ts.b_line[line] * v[child - 1] * v_parent / c[line];
        jac.J(child - 1, child - 1) -= coef;
        if (parent != 0) {
            jac.J(parent - 1, parent - 1) -= coef;
            jac.J(child - 1, parent - 1) -= coef;
            jac.J(parent - 1, child - 1) -= coef;
        }
    }

    jac.is_Z = true;
    for (int i = 0; i < n && jac.is_Z; ++i) {
        for (int k = 0; k < n; ++k) {
            if (i != k && jac.J(i, k) > 0.0) {
                jac.is_Z = false;
                break;
            }
        }
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(jac.J, Eigen::EigenvaluesOnly);
    jac.min_eig = es.eigenvalues()(0);
    jac.is_PD = jac.min_eig > 0.0;
    return jac;
}

bool verify_jacobian_identity(const RadialNetwork& network, const TransformedSystem& ts,
                              const LineFlows& flows, const Vector& v) {
    const int n = network.non_slack_count();
    const Matrix J = reduced_jacobian(network, ts, flows, v).J;
    const double scale = std::max(1.0, J.cwiseAbs().maxCoeff());
    const double h = 1e-6;

    // Central differences of γ ↦ B̃ ∘ (e^γ − g(e^γ)).
    const Vector gamma = v.array().log();
    Matrix fd(n, n);
    for (int k = 0; k < n; ++k) {
        Vector gp = gamma;
        Vector gm = gamma;
        gp[k] += h;
        gm[k] -= h;
        const Vector vp = gp.array().exp();
        const Vector vm = gm.array().exp();
        const GEval ep = eval_g(network, ts, flows, vp);
        const GEval em = eval_g(network, ts, flows, vm);
        if (!ep.ok() || !em.ok()) return false;
        fd.col(k) = ts.b_total.cwiseProduct(vp - ep.g - vm + em.g) / (2.0 * h);
    }
    if ((fd - J).cwiseAbs().maxCoeff() > 1e-6 * scale) return false;

    // Same matrix via the reactive-residual Jacobian: (∂q/∂v)·diag(v), with
    // ∂q/∂v taken by central differences of v ↦ B̃∘v − Σ B̃ c(v).
    Matrix fd_q(n, n);
    for (int k = 0; k < n; ++k) {
        Vector vp = v;
        Vector vm = v;
        const double step = h * std::max(1.0, std::abs(v[k]));
        vp[k] += step;
        vm[k] -= step;
        const ResidualEval rp = residuals(network, ts, flows, vp);
        const ResidualEval rm = residuals(network, ts, flows, vm);
        if (!rp.ok() || !rm.ok()) return false;
        fd_q.col(k) = (rp.r - rm.r) / (2.0 * step) * v[k];
    }
    return (fd_q - J).cwiseAbs().maxCoeff() <= 1e-6 * scale;
}

SensitivityMatrix voltage_sensitivity(const ReducedJacobian& jac, const Vector& v) {
    if (!jac.is_PD) throw NotPDError("voltage sensitivity requires a positive-definite Jacobian");
    const int n = static_cast<int>(jac.J.rows());
    Eigen::LDLT<Matrix> ldlt(jac.J);
    if (ldlt.info() != Eigen::Success) {
        throw NotPDError("voltage sensitivity: factorization failed");
    }
    SensitivityMatrix sens;
    sens.dv_dq = ldlt.solve(Matrix::Identity(n, n));
    sens.dv_dq.array().colwise() *= v.array();

    // The M-matrix inverse-positivity invariant applies within each
    // connected component of the Jacobian's sparsity graph. The slack splits
    // the tree into independently coupled branches: when it feeds several
    // lines, cross-branch sensitivities are structurally zero (a reactive
    // perturbation cannot propagate through the fixed slack voltage), so
    // only same-branch entries must be strictly positive.
    std::vector<int> component(static_cast<size_t>(n), -1);
    int components = 0;
    std::vector<int> stack;
    for (int seed = 0; seed < n; ++seed) {
        if (component[static_cast<size_t>(seed)] >= 0) continue;
        component[static_cast<size_t>(seed)] = components;
        stack.assign(1, seed);
        while (!stack.empty()) {
            const int at = stack.back();
            stack.pop_back();
            for (int k = 0; k < n; ++k) {
                if (k != at && component[static_cast<size_t>(k)] < 0 && jac.J(at, k) != 0.0) {
                    component[static_cast<size_t>(k)] = components;
                    stack.push_back(k);
                }
            }
        }
        ++components;
    }
    const double scale = std::max(1.0, sens.dv_dq.cwiseAbs().maxCoeff());
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) {
            if (component[static_cast<size_t>(i)] == component[static_cast<size_t>(k)]) {
                if (!(sens.dv_dq(i, k) > 0.0)) {
                    throw Error("voltage sensitivity: inverse lost entrywise positivity");
                }
            } else if (std::abs(sens.dv_dq(i, k)) > 1e-9 * scale) {
                throw Error("voltage sensitivity: cross-branch coupling should vanish");
            }
        }
    }
    return sens;
}

bool certify_stability(const RadialNetwork& network, const TransformedSystem& ts,
                       const PFSolution& solution) {
    try {
        const DomainCheck dc = check_convexity_domain(network, ts, solution.v, solution.theta);
        // Strict interior clearance at solver scale: boundary-coalesced
        // profiles carry a near-zero eigenvalue and must fail.
        const double scale =
            std::max(1.0, 2.0 * ts.b_total.cwiseProduct(solution.v).maxCoeff());
        if (!(dc.min_c > 1e-12) || !(dc.min_eigenvalue > 1e-8 * scale)) return false;
        LineFlows flows{solution.s};
        const ReducedJacobian jac = reduced_jacobian(network, ts, flows, solution.v);
        return jac.is_PD;
    } catch (const Error&) {
        return false;
    }
}

ComparisonResult compare_solutions(const PFSolution& a, const PFSolution& b, double rel_tol) {
    if (a.digest != b.digest) {
        throw InstanceMismatchError("compared solutions belong to different instances");
    }
    ComparisonResult result;
    const auto scan = [&result](const Vector& x, const Vector& y) {
        for (int i = 0; i < x.size(); ++i) {
            result.max_deviation = std::max(result.max_deviation, rel_dev(x[i], y[i]));
        }
    };
    scan(a.v, b.v);
    scan(a.theta, b.theta);
    scan(a.s, b.s);
    scan(a.c, b.c);
    result.equal = result.max_deviation <= rel_tol;
    return result;
}

namespace {

enum class SampleVerdict { Feasible, Infeasible, Inconclusive };

struct SampleEval {
    SampleVerdict verdict = SampleVerdict::Inconclusive;
    ContinuationSample sample;
    std::optional<PFSolution> solution;
};

SampleEval evaluate_lambda(const RadialNetwork& network, const Injections& base, double lambda,
                           const ContinuationConfig& config) {
    SampleEval eval;
    eval.sample.lambda = lambda;
    Injections scaled{lambda * base.p, lambda * base.q};
    const TransformedSystem ts = transform(network, scaled);
    const LineFlows flows = solve_line_flows(network, ts);
    FixedPointResult fp = solve_fixed_point(network, ts, flows, config.fp);
    eval.sample.status = fp.status;
    eval.sample.residual = fp.trace.final_residual;
    eval.sample.iterations = fp.trace.iterations;
    switch (fp.status) {
        case SolveStatus::Solved:
            eval.verdict = SampleVerdict::Feasible;
            eval.solution = std::move(fp.solution);
            eval.sample.min_v = eval.solution->v.minCoeff();
            break;
        case SolveStatus::Infeasible:
            eval.verdict = SampleVerdict::Infeasible;
            eval.sample.min_v = std::numeric_limits<double>::quiet_NaN();
            break;
        case SolveStatus::Inconclusive:
            eval.verdict = SampleVerdict::Inconclusive;
            eval.sample.min_v = std::numeric_limits<double>::quiet_NaN();
            break;
    }
    return eval;
}

void cross_check_sample(const RadialNetwork& network, const Injections& base, double lambda,
                        const PFSolution& reference, ContinuationResult& result) {
    Injections scaled{lambda * base.p, lambda * base.q};
    const TransformedSystem ts = transform(network, scaled);
    const LineFlows flows = solve_line_flows(network, ts);
    bool ok = true;
    RelaxationResult relax = solve_relaxation(network, ts, flows);
    if (relax.status != SolveStatus::Solved ||
        !compare_solutions(reference, *relax.solution, 1e-7).equal) {
        ok = false;
    }
    EnergyResult energy = solve_energy(network, ts, flows);
    if (energy.status != SolveStatus::Solved ||
        !compare_solutions(reference, *energy.solution, 1e-7).equal) {
        ok = false;
    }
    if (!ok) {
        ++result.cross_check_failures;
        log_warn("continuation: cross-check disagreement at lambda = " + std::to_string(lambda));
    }
}

}  // namespace

ContinuationResult continuation_scan(const RadialNetwork& network, const Injections& base,
                                     double lambda_max, double bisection_tol,
                                     const ContinuationConfig& config) {
    if (!(lambda_max > 0.0) || !(bisection_tol > 0.0)) {
        throw Error("continuation: lambda_max and bisection_tol must be positive");
    }
    ContinuationResult result;
    std::vector<std::pair<double, std::optional<PFSolution>>> feasible_samples;

    const auto record = [&](const SampleEval& eval) {
        result.samples.push_back(eval.sample);
        if (eval.verdict == SampleVerdict::Inconclusive) {
            ++result.inconclusive_count;
            log_info("continuation: inconclusive sample at lambda = " +
                     std::to_string(eval.sample.lambda));
        }
    };

    // Coarse sweep.
    double lambda_lo = 0.0;
    double lambda_hi = std::numeric_limits<double>::infinity();
    const int count = std::max(config.coarse_samples, 2);
    for (int i = 0; i < count; ++i) {
        const double lambda = lambda_max * static_cast<double>(i) / (count - 1);
        SampleEval eval = evaluate_lambda(network, base, lambda, config);
        record(eval);
        if (eval.verdict == SampleVerdict::Feasible) {
            if (lambda < lambda_hi) lambda_lo = std::max(lambda_lo, lambda);
            if (config.cross_check) {
                cross_check_sample(network, base, lambda, *eval.solution, result);
            }
            feasible_samples.emplace_back(lambda, std::move(eval.solution));
        } else if (eval.verdict == SampleVerdict::Infeasible) {
            lambda_hi = std::min(lambda_hi, lambda);
        }
    }

    // Bisection of the certified gap.  Inconclusive midpoints are retried at
    // nudged positions; if every candidate stays inconclusive the bracket is
    // reported at its current (honest) width.
    while (std::isfinite(lambda_hi) && lambda_hi - lambda_lo > bisection_tol) {
        const double gap = lambda_hi - lambda_lo;
        const double mid = 0.5 * (lambda_lo + lambda_hi);
        const double candidates[] = {mid, mid - gap / 8.0, mid + gap / 8.0, mid - gap / 4.0,
                                     mid + gap / 4.0};
        bool resolved = false;
        for (double lambda : candidates) {
            if (!(lambda > lambda_lo) || !(lambda < lambda_hi)) continue;
            SampleEval eval = evaluate_lambda(network, base, lambda, config);
            record(eval);
            if (eval.verdict == SampleVerdict::Feasible) {
                lambda_lo = lambda;
                feasible_samples.emplace_back(lambda, std::move(eval.solution));
                resolved = true;
                break;
            }
            if (eval.verdict == SampleVerdict::Infeasible) {
                lambda_hi = lambda;
                resolved = true;
                break;
            }
        }
        if (!resolved) {
            log_warn("continuation: bisection stalled on inconclusive samples; bracket width " +
                     std::to_string(lambda_hi - lambda_lo));
            break;
        }
    }

    std::sort(feasible_samples.begin(), feasible_samples.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [lambda, solution] : feasible_samples) {
        (void)lambda;
        result.solutions.push_back(std::move(*solution));
    }
    result.lambdas.reserve(result.samples.size());
    for (const ContinuationSample& sample : result.samples) {
        result.lambdas.push_back(sample.lambda);
    }
    std::sort(result.lambdas.begin(), result.lambdas.end());
    result.lambda_lo = lambda_lo;
    result.lambda_hi = lambda_hi;
    result.bracket_width = lambda_hi - lambda_lo;
    return result;
}

}  // namespace radialflow
