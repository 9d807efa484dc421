#include "radialflow/relaxation.hpp"

#include "radialflow/analysis.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <limits>
#include <string>
#include <utility>

namespace radialflow {

namespace {

std::string fmt_log(const char* format, ...) {
    char buf[256];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

/// Constraint values at a point: h_i = B̃_i v_i − Σ B̃_ik √(v_i v_k − s²) − q̃_i
/// and the per-line domain quantities d_ℓ = v_i v_k − s². `h` is only
/// complete when domain_ok (all d > eps).
struct ConstraintPoint {
    Vector h;
    Vector d;
    bool domain_ok = true;
};

ConstraintPoint eval_point(const RadialNetwork& network, const TransformedSystem& ts,
                           const LineFlows& flows, const Vector& v, double eps) {
    const int n = network.non_slack_count();
    ConstraintPoint point;
    point.h = ts.b_total.cwiseProduct(v) - ts.q_tilde;
    point.d.resize(n);
    for (int line = 0; line < n; ++line) {
        const int child = line + 1;
        const int parent = network.parent(child);
        const double v_parent = parent == 0 ? 1.0 : v[parent - 1];
        const double d = v[child - 1] * v_parent - flows.s[line] * flows.s[line];
        point.d[line] = d;
        if (!(d > eps)) {
            point.domain_ok = false;
            continue;
        }
        const double c = std::sqrt(d);
        point.h[child - 1] -= ts.b_line[line] * c;
        if (parent != 0) point.h[parent - 1] -= ts.b_line[line] * c;
    }
    return point;
}

/// Adds Σ_ℓ coef_ℓ · (−Hess √(v_a v_b − s²)) to the v-block of `hess`,
/// where coef_ℓ = B̃_ℓ (weight_a + weight_b) combines the barrier weights of
/// the two constraints the line appears in. This is the curvature the
/// concave √ terms contribute to −log barriers (positive semidefinite).
void add_sqrt_curvature(const RadialNetwork& network, const TransformedSystem& ts,
                        const LineFlows& flows, const Vector& v, const Vector& per_bus_weight,
                        Matrix& hess) {
    const int n = network.non_slack_count();
    for (int line = 0; line < n; ++line) {
        const int a = line + 1;
        const int b = network.parent(a);
        const double v_b = b == 0 ? 1.0 : v[b - 1];
        const double v_a = v[a - 1];
        const double s2 = flows.s[line] * flows.s[line];
        const double d = v_a * v_b - s2;
        const double c = std::sqrt(d);
        const double inv4c3 = 1.0 / (4.0 * c * c * c);
        double coef = ts.b_line[line] * per_bus_weight[a - 1];
        if (b != 0) coef += ts.b_line[line] * per_bus_weight[b - 1];
        // −Hess(√): diag +v_other²/(4c³), cross −(v_a v_b − 2s²)/(4c³).
        hess(a - 1, a - 1) += coef * v_b * v_b * inv4c3;
        if (b != 0) {
            hess(b - 1, b - 1) += coef * v_a * v_a * inv4c3;
            const double cross = -coef * (v_a * v_b - 2.0 * s2) * inv4c3;
            hess(a - 1, b - 1) += cross;
            hess(b - 1, a - 1) += cross;
        }
    }
}

/// Adds the domain barriers −log(d_ℓ − eps) to value/gradient/Hessian
/// (v-block). The Hessian part is indefinite in general; callers rely on the
/// ridge fallback in the Newton loop.
void add_domain_barrier(const RadialNetwork& network, const LineFlows& flows, const Vector& v,
                        double eps, double* value, Vector* grad, Matrix* hess) {
    const int n = network.non_slack_count();
    for (int line = 0; line < n; ++line) {
        const int a = line + 1;
        const int b = network.parent(a);
        const double v_b = b == 0 ? 1.0 : v[b - 1];
        const double v_a = v[a - 1];
        const double margin = v_a * v_b - flows.s[line] * flows.s[line] - eps;
        if (value != nullptr) *value -= std::log(margin);
        if (grad != nullptr) {
            (*grad)[a - 1] -= v_b / margin;
            if (b != 0) (*grad)[b - 1] -= v_a / margin;
        }
        if (hess != nullptr) {
            const double inv2 = 1.0 / (margin * margin);
            (*hess)(a - 1, a - 1) += v_b * v_b * inv2;
            if (b != 0) {
                (*hess)(b - 1, b - 1) += v_a * v_a * inv2;
                (*hess)(a - 1, b - 1) += v_a * v_b * inv2 - 1.0 / margin;
                (*hess)(b - 1, a - 1) += v_a * v_b * inv2 - 1.0 / margin;
            }
        }
    }
}

enum class CenterStatus { Centered, Breakdown, Budget };

/// Accepting an iterate as "centered" with Newton decrement λ²/2 below this
/// is sound: path following only needs λ ≤ 1/4 (here λ ≤ 0.045), and the
/// suboptimality the gap bound quotes is inflated by at most λ²/2. The loose
/// gate only applies when roundoff in the barrier value stops the line
/// search or the step budget runs out; the primary exit stays at the
/// configured tolerance.
constexpr double kCenteredGate = 1e-3;

/// Damped Newton minimization of a barrier composite. `derivs` must only be
/// called at feasible points; `feasible` performs the strict checks. Exits
/// once the Newton decrement λ²/2 drops below tol.
template <class ValueFn, class FeasibleFn, class DerivsFn>
CenterStatus newton_center(Vector& x, double tol, const RelaxationConfig& config,
                           ValueFn&& value, FeasibleFn&& feasible, DerivsFn&& derivs,
                           int& iters_used) {
    const int dim = static_cast<int>(x.size());
    Vector grad(dim);
    Matrix hess(dim, dim);
    double last_decrement2 = std::numeric_limits<double>::infinity();
    int ridged_iters = 0;
    for (int iter = 0; iter < config.max_newton; ++iter) {
        derivs(x, grad, hess);
        const double diag_scale = std::max(hess.diagonal().cwiseAbs().maxCoeff(), 1.0);
        Vector step;
        double ridge = 0.0;
        bool solved = false;
        while (true) {
            Matrix regularized = hess;
            if (ridge > 0.0) regularized.diagonal().array() += ridge;
            Eigen::LDLT<Matrix> ldlt(regularized);
            if (ldlt.info() == Eigen::Success) {
                step = ldlt.solve(-grad);
                if (step.allFinite() && grad.dot(step) < 0.0) {
                    solved = true;
                    break;
                }
            }
            ridge = ridge == 0.0 ? 1e-10 * diag_scale : ridge * 100.0;
            if (ridge > 1e10 * diag_scale) break;
        }
        if (!solved) {
            log_debug("relaxation: newton system unsolvable even with ridge");
            return CenterStatus::Breakdown;
        }

        ++iters_used;
        if (ridge > 0.0) ++ridged_iters;
        const double decrement2 = -grad.dot(step);
        if (0.5 * decrement2 <= tol) return CenterStatus::Centered;
        last_decrement2 = decrement2;

        const double f0 = value(x);
        const double slope = grad.dot(step);
        // At large barrier weights |f| can reach ~1e10, and the Armijo
        // decrease of a damped step drowns in the value's own roundoff.
        // Accepting up to that granularity keeps the search moving; the
        // centering exit is on the decrement, not on measured decrease.
        const double f_noise = 1e-12 * (1.0 + std::abs(f0));
        double alpha = 1.0;
        bool accepted = false;
        double f_accepted = f0;
        while (alpha >= 1e-14) {
            Vector candidate = x + alpha * step;
            if (feasible(candidate)) {
                const double f_cand = value(candidate);
                if (f_cand <= f0 + config.armijo * alpha * slope + f_noise) {
                    x = std::move(candidate);
                    f_accepted = f_cand;
                    accepted = true;
                    break;
                }
            }
            alpha *= config.shrink;
        }
        if (accepted && 0.5 * decrement2 <= kCenteredGate && f0 - f_accepted <= f_noise) {
            // Progress has sunk below the value's own roundoff while the
            // decrement already certifies a near-central point; further
            // steps only burn the budget.
            return CenterStatus::Centered;
        }
        if (!accepted) {
            // No feasible decrease left: either centered to roundoff or
            // wedged against the nonconvex domain barrier.
            if (0.5 * decrement2 <= kCenteredGate) return CenterStatus::Centered;
            log_debug("relaxation: line search stalled, decrement^2/2 = " +
                      std::to_string(0.5 * decrement2) + ", f = " + std::to_string(f0));
            return CenterStatus::Breakdown;
        }
    }
    if (0.5 * last_decrement2 <= kCenteredGate) return CenterStatus::Centered;
    log_debug(fmt_log("relaxation: newton budget exhausted, decrement^2/2 = %.3e, ridged = %d",
                      0.5 * last_decrement2, ridged_iters));
    return CenterStatus::Budget;
}

Vector effective_weights(const RelaxationConfig& config, int n) {
    if (config.weights.size() == 0) return Vector::Ones(n);
    if (config.weights.size() != n) throw Error("relaxation: weight vector size mismatch");
    if ((config.weights.array() <= 0.0).any()) throw Error("relaxation: weights must be > 0");
    return config.weights;
}

}  // namespace

PhaseOneResult phase_one(const RadialNetwork& network, const TransformedSystem& ts,
                         const LineFlows& flows, const RelaxationConfig& config) {
    const int n = network.non_slack_count();
    PhaseOneResult result;
    const double scale = 1.0 + ts.q_tilde.cwiseAbs().maxCoeff() + ts.b_total.maxCoeff();
    // Two feasibility gates: anything below feasible_exit proves the set is
    // nonempty, but phase II needs breathing room to center from, so the
    // early exits insist on deep_exit and only thin feasible sets fall back
    // to the shallow bound at the duality-gap exit.
    const double feasible_exit = 1e-6 * scale;
    const double deep_exit = 1e-3 * scale;
    // The verdict only compares τ* against 0 at feasible_exit resolution, so
    // the barrier stops once m/t reaches half of that. Driving the gap to the
    // phase-II tolerance instead would push the slacks to the roundoff floor
    // of the constraint evaluation (τ − h ≈ 1e-12) where centering cannot
    // finish.
    const double gap_exit = 0.5 * feasible_exit;

    // Cheap strictly-feasible probes before any barrier machinery: scaled
    // copies of the voltage upper bound and of the flat profile. The deepest
    // probe doubles as a fallback start should the barrier loop break down.
    Vector best_probe;
    double best_probe_worst = std::numeric_limits<double>::infinity();
    Vector vmax = compute_vmax_unchecked(network, ts);
    std::vector<Vector> probes;
    if ((vmax.array() > 0.0).all()) {
        for (double factor : {0.999, 0.99, 0.95, 0.9, 0.8, 0.6, 0.4, 0.25}) {
            probes.push_back((factor * vmax).cwiseMax(1e-8));
        }
    }
    for (double level : {1.0, 0.95, 0.85, 0.7, 0.5}) {
        probes.push_back(Vector::Constant(n, level));
    }
    for (const Vector& probe : probes) {
        ConstraintPoint point = eval_point(network, ts, flows, probe, 1e-9);
        if (!point.domain_ok) continue;
        const double worst = point.h.maxCoeff();
        if (worst < best_probe_worst) {
            best_probe_worst = worst;
            best_probe = probe;
        }
    }
    if (best_probe_worst <= -deep_exit) {
        result.feasible = true;
        result.v = best_probe;
        result.tau = best_probe_worst;
        return result;
    }

    // Barrier phase I in (v, τ): minimize t·τ with barriers on τ − h_i, the
    // line domains, and a box around v. The box keeps the problem coercive;
    // it cannot cut off feasibility: any feasible profile satisfies
    // 0 < v ≤ v^max (componentwise) which lies strictly inside.
    const double lo = 1e-10;
    Vector hi(n);
    Vector v0(n);
    for (int i = 0; i < n; ++i) {
        double base = std::max(vmax[i], 1.0);
        // The start must satisfy every incident domain constraint
        // v_i v_k − s² > 0.  Lines into the slack (v = 1) need v > s², others
        // get the product of two inflated endpoints, so max(|s|, s²) covers
        // both cases with margin.
        double s_need = std::max(std::abs(flows.s[i]), flows.s[i] * flows.s[i]);
        for (int child : network.children(i + 1)) {
            const double sc = std::abs(flows.s[child - 1]);
            s_need = std::max(s_need, std::max(sc, sc * sc));
        }
        base = std::max(base, s_need + 1.0);
        v0[i] = base + 0.5;
        hi[i] = base + 1.0;
    }

    const int m = 4 * n;  // n reactive + n domain + 2n box constraints
    Vector x(n + 1);
    x.head(n) = v0;
    {
        ConstraintPoint point = eval_point(network, ts, flows, v0, config.eps_dom);
        if (!point.domain_ok) {
            // Should not happen by construction of v0; fail honestly.
            result.breakdown = true;
            return result;
        }
        x[n] = point.h.maxCoeff() + 1.0 + 0.1 * scale;
    }

    auto feasible = [&](const Vector& cand) {
        if ((cand.head(n).array() <= lo).any()) return false;
        if ((cand.head(n).array() >= hi.array()).any()) return false;
        ConstraintPoint point = eval_point(network, ts, flows, cand.head(n), config.eps_dom);
        if (!point.domain_ok) return false;
        return (point.h.array() < cand[n]).all();
    };
    double t = config.t0;
    auto value = [&](const Vector& cand) {
        ConstraintPoint point = eval_point(network, ts, flows, cand.head(n), config.eps_dom);
        double val = t * cand[n];
        val -= (cand[n] - point.h.array()).log().sum();
        val -= (point.d.array() - config.eps_dom).log().sum();
        val -= (cand.head(n).array() - lo).log().sum();
        val -= (hi.array() - cand.head(n).array()).log().sum();
        return val;
    };
    auto derivs = [&](const Vector& at, Vector& grad, Matrix& hess) {
        const Vector v = at.head(n);
        const double tau = at[n];
        ConstraintPoint point = eval_point(network, ts, flows, v, config.eps_dom);
        Matrix jac = residual_jacobian_v(network, ts, flows, v);  // rows = ∇h_i
        const Vector slack = Vector::Constant(n, tau) - point.h;
        const Vector inv_slack = slack.cwiseInverse();

        grad.setZero(n + 1);
        grad[n] = t - inv_slack.sum();
        grad.head(n) = jac.transpose() * inv_slack;
        grad.head(n) -= (v.array() - lo).inverse().matrix();
        grad.head(n) += (hi - v).cwiseInverse();

        hess.setZero(n + 1, n + 1);
        // Rank-one parts of −log(τ − h_i): rows of [−∇h_i, 1] / slack_i.
        Matrix rows(n, n + 1);
        rows.leftCols(n) = -jac;
        rows.col(n).setOnes();
        rows.array().colwise() *= inv_slack.array();
        hess = rows.transpose() * rows;
        // Curvature of the √ terms inside h_i, weighted by 1/slack at each
        // endpoint's constraint.
        Vector bus_weight = inv_slack;
        Matrix vblock = Matrix::Zero(n, n);
        add_sqrt_curvature(network, ts, flows, v, bus_weight, vblock);
        add_domain_barrier(network, flows, v, config.eps_dom, nullptr, nullptr, &vblock);
        hess.topLeftCorner(n, n) += vblock;
        hess.topLeftCorner(n, n).diagonal() +=
            ((v.array() - lo).square().inverse() + (hi - v).array().square().inverse()).matrix();
        // Domain barrier gradient lives on the v block only.
        Vector dummy = Vector::Zero(n);
        add_domain_barrier(network, flows, v, config.eps_dom, nullptr, &dummy, nullptr);
        grad.head(n) += dummy;
    };

    while (true) {
        const int before = result.newton_iters;
        CenterStatus status = newton_center(x, config.newton_tol, config, value, feasible, derivs,
                                            result.newton_iters);
        log_debug(fmt_log("relaxation: phase1 stage t=%.3e, %d steps, status=%d", t,
                          result.newton_iters - before, static_cast<int>(status)));
        if (status != CenterStatus::Centered) {
            if (best_probe_worst <= -feasible_exit) {
                // The barrier ran into numerical trouble but a probe already
                // proved feasibility; hand phase II the best point we have.
                result.feasible = true;
                result.v = best_probe;
                result.tau = best_probe_worst;
                return result;
            }
            result.breakdown = true;
            result.tau = x[n];
            return result;
        }
        ConstraintPoint point = eval_point(network, ts, flows, x.head(n), config.eps_dom);
        const double worst = point.domain_ok ? point.h.maxCoeff() : 1.0;
        if (point.domain_ok && worst <= -deep_exit) {
            result.feasible = true;
            result.v = x.head(n);
            result.tau = worst;
            return result;
        }
        if (static_cast<double>(m) / t <= gap_exit) {
            // Certified-optimum exit: the feasible set is thin (or empty), so
            // accept whichever strictly feasible point runs deepest. Every
            // barrier iterate keeps h_i < τ, so τ < 0 already names a
            // strictly feasible point.
            result.tau = x[n];
            const bool x_ok = point.domain_ok && worst <= -feasible_exit;
            if (x_ok && worst <= best_probe_worst) {
                result.feasible = true;
                result.v = x.head(n);
                result.tau = worst;
            } else if (best_probe_worst <= -feasible_exit) {
                result.feasible = true;
                result.v = best_probe;
                result.tau = best_probe_worst;
            } else if (point.domain_ok && x[n] < 0.0) {
                result.feasible = true;
                result.v = x.head(n);
                result.tau = worst;
            }
            return result;
        }
        t *= config.barrier_mu;
    }
}

RelaxationResult solve_relaxation(const RadialNetwork& network, const TransformedSystem& ts,
                                  const LineFlows& flows, const RelaxationConfig& config) {
    const int n = network.non_slack_count();
    RelaxationResult result;
    RelaxationOutcome& outcome = result.outcome;
    outcome.weights = effective_weights(config, n);

    PhaseOneResult start = phase_one(network, ts, flows, config);
    outcome.newton_iters = start.newton_iters;
    outcome.phase1_tau = start.tau;
    if (start.breakdown) {
        result.numerical_breakdown = true;
        result.status = SolveStatus::Inconclusive;
        return result;
    }
    if (!start.feasible) {
        outcome.status = RelaxationStatus::PhaseOneInfeasible;
        result.status = SolveStatus::Infeasible;
        log_debug("relaxation: phase one certified infeasibility, tau = " +
                  std::to_string(start.tau));
        return result;
    }

    // Phase II: maximize Σ w log v  ⇔  minimize −Σ w log v, barriers on the
    // n reactive constraints and the n line domains.
    const int m = 2 * n;
    Vector x = start.v;
    double t = config.t0;
    const Vector& w = outcome.weights;
    // The reactive constraints are evaluated to roughly machine epsilon times
    // this magnitude, so barrier stages whose slacks sink to that floor can
    // no longer be centered; the t-march stops there and the gap reports
    // what was actually certified.
    const double slack_floor =
        1e-12 * (1.0 + ts.q_tilde.cwiseAbs().maxCoeff() + ts.b_total.maxCoeff());

    auto feasible = [&](const Vector& cand) {
        if ((cand.array() <= 0.0).any()) return false;
        ConstraintPoint point = eval_point(network, ts, flows, cand, config.eps_dom);
        if (!point.domain_ok) return false;
        return (point.h.array() < 0.0).all();
    };
    auto value = [&](const Vector& cand) {
        ConstraintPoint point = eval_point(network, ts, flows, cand, config.eps_dom);
        double val = -t * (w.array() * cand.array().log()).sum();
        val -= (-point.h.array()).log().sum();
        val -= (point.d.array() - config.eps_dom).log().sum();
        return val;
    };
    auto derivs = [&](const Vector& at, Vector& grad, Matrix& hess) {
        ConstraintPoint point = eval_point(network, ts, flows, at, config.eps_dom);
        Matrix jac = residual_jacobian_v(network, ts, flows, at);
        const Vector slack = -point.h;
        const Vector inv_slack = slack.cwiseInverse();

        grad = -t * (w.array() / at.array()).matrix();
        grad += jac.transpose() * inv_slack;

        Matrix rows = jac;
        rows.array().colwise() *= inv_slack.array();
        hess = rows.transpose() * rows;
        hess.diagonal() += (t * w.array() / at.array().square()).matrix();
        add_sqrt_curvature(network, ts, flows, at, inv_slack, hess);
        add_domain_barrier(network, flows, at, config.eps_dom, nullptr, &grad, &hess);
    };

    if (!feasible(x)) {
        // The phase-one point must be strictly feasible; anything else is a
        // numerical inconsistency.
        result.numerical_breakdown = true;
        result.status = SolveStatus::Inconclusive;
        return result;
    }

    while (true) {
        const int before = outcome.newton_iters;
        CenterStatus status = newton_center(x, config.newton_tol, config, value, feasible, derivs,
                                            outcome.newton_iters);
        log_debug(fmt_log("relaxation: phase2 stage t=%.3e, %d steps, status=%d", t,
                          outcome.newton_iters - before, static_cast<int>(status)));
        if (status != CenterStatus::Centered) {
            result.numerical_breakdown = true;
            result.status = SolveStatus::Inconclusive;
            log_warn("relaxation: barrier centering broke down; reporting inconclusive");
            return result;
        }
        if (static_cast<double>(m) / t <= config.duality_gap_tol) break;
        const ConstraintPoint stage_point = eval_point(network, ts, flows, x, config.eps_dom);
        if ((-stage_point.h).minCoeff() <= slack_floor) {
            log_debug(fmt_log("relaxation: slack floor reached at t=%.3e, gap %.3e certified", t,
                              static_cast<double>(m) / t));
            break;
        }
        t *= config.barrier_mu;
    }

    ConstraintPoint final_point = eval_point(network, ts, flows, x, config.eps_dom);
    outcome.v_opt = x;
    outcome.slacks = -final_point.h;
    outcome.gap = static_cast<double>(m) / t;
    outcome.kkt_multipliers = (t * outcome.slacks.array()).inverse().matrix();

    const double max_slack = outcome.slacks.maxCoeff();
    if (max_slack <= config.tightness_tol) {
        outcome.status = RelaxationStatus::TightOptimum;
        const double min_b = std::max(ts.b_total.minCoeff(), 1e-12);
        const double gate = std::max(config.tightness_tol / min_b, 1e-9);
        try {
            result.solution =
                assemble_solution(network, ts, flows, x, SolveMethod::Relaxation, gate);
            result.status = SolveStatus::Solved;
        } catch (const Error& e) {
            log_warn(std::string("relaxation: tight optimum failed assembly: ") + e.what());
            result.numerical_breakdown = true;
            result.status = SolveStatus::Inconclusive;
        }
        return result;
    }
    outcome.status = RelaxationStatus::SlackOptimum;
    result.status = SolveStatus::Infeasible;
    log_debug("relaxation: slack optimum (max slack " + std::to_string(max_slack) +
              "), instance infeasible");
    return result;
}

bool kkt_check(const RelaxationOutcome& outcome, const ReducedJacobian& jac) {
    if (outcome.status != RelaxationStatus::TightOptimum) return false;
    const Matrix& J = jac.J;
    const int n = static_cast<int>(J.rows());
    Vector w = outcome.weights.size() == n ? outcome.weights : Vector::Ones(n);
    Eigen::LDLT<Matrix> ldlt(J);
    if (ldlt.info() != Eigen::Success) return false;
    // J is symmetric, so the stationarity system (∂g̃/∂γ)ᵀ λ = w is solved
    // directly.
    Vector lambda = ldlt.solve(w);
    if (!lambda.allFinite()) return false;
    const double resid = (J.transpose() * lambda - w).cwiseAbs().maxCoeff();
    if (resid > 1e-6 * std::max(1.0, w.cwiseAbs().maxCoeff())) return false;
    const double lambda_scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
    return (lambda.array() >= -1e-6 * lambda_scale).all();
}

}  // namespace radialflow
