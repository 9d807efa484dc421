#include "radialflow/energy.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace radialflow {

namespace {

constexpr double kMembershipCFloor = 1e-12;
constexpr double kMembershipEigFloor = -1e-12;

/// Trigonometric line terms at (v, θ) for one line, oriented child − parent.
struct LineGeometry {
    double c;  ///< √(v_a v_b) cos(θ_a − θ_b)
    double s;  ///< √(v_a v_b) sin(θ_a − θ_b)
};

LineGeometry line_geometry(const RadialNetwork& network, const Vector& v, const Vector& theta,
                           int line) {
    const int child = line + 1;
    const int parent = network.parent(child);
    const double v_parent = parent == 0 ? 1.0 : v[parent - 1];
    const double root = std::sqrt(v[child - 1] * v_parent);
    const double angle = theta[child] - theta[parent];
    return {root * std::cos(angle), root * std::sin(angle)};
}

}  // namespace

double energy_value(const RadialNetwork& network, const TransformedSystem& ts, const Vector& v,
                    const Vector& theta) {
    const int n = network.non_slack_count();
    double e = 0.0;
    for (int line = 0; line < n; ++line) {
        const int child = line + 1;
        const int parent = network.parent(child);
        const double v_parent = parent == 0 ? 1.0 : v[parent - 1];
        const LineGeometry geom = line_geometry(network, v, theta, line);
        e += ts.b_line[line] * (v[child - 1] + v_parent - 2.0 * geom.c);
    }
    for (int bus = 1; bus <= n; ++bus) {
        e -= 2.0 * ts.p_tilde[bus - 1] * theta[bus];
        e -= ts.q_tilde[bus - 1] * std::log(v[bus - 1]);
    }
    return e;
}

Vector energy_gradient(const RadialNetwork& network, const TransformedSystem& ts, const Vector& v,
                       const Vector& theta) {
    const int n = network.non_slack_count();
    Vector grad(2 * n);
    grad.head(n) = ts.b_total.cwiseProduct(v) - ts.q_tilde;
    grad.tail(n) = -2.0 * ts.p_tilde;
    for (int line = 0; line < n; ++line) {
        const int child = line + 1;
        const int parent = network.parent(child);
        const LineGeometry geom = line_geometry(network, v, theta, line);
        const double b = ts.b_line[line];
        grad[child - 1] -= b * geom.c;
        grad[n + child - 1] += 2.0 * b * geom.s;
        if (parent != 0) {
            grad[parent - 1] -= b * geom.c;
            grad[n + parent - 1] -= 2.0 * b * geom.s;
        }
    }
    return grad;
}

Matrix energy_hessian(const RadialNetwork& network, const TransformedSystem& ts, const Vector& v,
                      const Vector& theta) {
    const int n = network.non_slack_count();
    Matrix h = Matrix::Zero(2 * n, 2 * n);
    for (int line = 0; line < n; ++line) {
        const int child = line + 1;
        const int parent = network.parent(child);
        const int ia = child - 1;
        const LineGeometry geom = line_geometry(network, v, theta, line);
        const double b = ts.b_line[line];

        h(ia, ia) += b * (v[ia] - 0.5 * geom.c);
        h(ia, n + ia) += b * geom.s;
        h(n + ia, ia) += b * geom.s;
        h(n + ia, n + ia) += 2.0 * b * geom.c;

        if (parent != 0) {
            const int ib = parent - 1;
            h(ib, ib) += b * (v[ib] - 0.5 * geom.c);
            h(ia, ib) -= 0.5 * b * geom.c;
            h(ib, ia) -= 0.5 * b * geom.c;

            h(ia, n + ib) -= b * geom.s;
            h(n + ib, ia) -= b * geom.s;
            h(ib, n + ia) += b * geom.s;
            h(n + ia, ib) += b * geom.s;
            h(ib, n + ib) -= b * geom.s;
            h(n + ib, ib) -= b * geom.s;

            h(n + ia, n + ib) -= 2.0 * b * geom.c;
            h(n + ib, n + ia) -= 2.0 * b * geom.c;
            h(n + ib, n + ib) += 2.0 * b * geom.c;
        }
    }
    return h;
}

Matrix convexity_domain_matrix(const RadialNetwork& network, const TransformedSystem& ts,
                               const Vector& v, const Vector& c_line) {
    const int n = network.non_slack_count();
    std::vector<int> bad;
    for (int line = 0; line < n; ++line) {
        if (!(c_line[line] > 0.0)) bad.push_back(line);
    }
    if (!bad.empty()) {
        throw DomainViolationError(bad, "convexity matrix undefined: nonpositive line cosines");
    }

    Matrix d = Matrix::Zero(n, n);
    d.diagonal() = 2.0 * ts.b_total.cwiseProduct(v);
    for (int line = 0; line < n; ++line) {
        const int child = line + 1;
        const int parent = network.parent(child);
        const double v_parent = parent == 0 ? 1.0 : v[parent - 1];
        const double coef = ts.b_line[line] * (v[child - 1] * v_parent / c_line[line]);
        d(child - 1, child - 1) -= coef;
        if (parent != 0) {
            d(parent - 1, parent - 1) -= coef;
            d(child - 1, parent - 1) -= coef;
            d(parent - 1, child - 1) -= coef;
        }
    }
    return d;
}

DomainCheck check_convexity_domain(const RadialNetwork& network, const TransformedSystem& ts,
                                   const Vector& v, const Vector& theta) {
    const int n = network.non_slack_count();
    DomainCheck result;
    Vector c(n);
    result.min_c = std::numeric_limits<double>::infinity();
    for (int line = 0; line < n; ++line) {
        c[line] = line_geometry(network, v, theta, line).c;
        result.min_c = std::min(result.min_c, c[line]);
    }
    if (!(result.min_c > kMembershipCFloor)) {
        result.in_domain = false;
        result.min_eigenvalue = -std::numeric_limits<double>::infinity();
        return result;
    }
    const Matrix d = convexity_domain_matrix(network, ts, v, c);
    Eigen::SelfAdjointEigenSolver<Matrix> es(d, Eigen::EigenvaluesOnly);
    result.min_eigenvalue = es.eigenvalues()(0);
    result.in_domain = result.min_eigenvalue >= kMembershipEigFloor;
    return result;
}

namespace {

/// Strict interior test used for step acceptance: keeps iterates away from
/// the cosine and eigenvalue boundaries by the configured floors.
bool strictly_inside(const RadialNetwork& network, const TransformedSystem& ts, const Vector& v,
                     const Vector& theta, const EnergyConfig& config, DomainCheck* out = nullptr) {
    DomainCheck dc = check_convexity_domain(network, ts, v, theta);
    if (out != nullptr) *out = dc;
    return dc.min_c > config.c_floor && dc.min_eigenvalue >= config.eig_floor;
}

}  // namespace

EnergyResult solve_energy(const RadialNetwork& network, const TransformedSystem& ts,
                          const LineFlows& flows, const EnergyConfig& config) {
    const int n = network.non_slack_count();
    EnergyResult result;

    // Flat start; provably interior (the domain matrix there is the scaled
    // reduced Laplacian, positive definite on a connected tree).  The upper
    // bound profile with recovered angles is the fallback start.
    Vector gamma = Vector::Zero(n);
    Vector theta = Vector::Zero(n + 1);
    if (!strictly_inside(network, ts, Vector::Ones(n), theta, config)) {
        try {
            const Vector vmax = compute_vmax(network, ts);
            const Vector theta_max = recover_angles(network, flows, vmax);
            if (strictly_inside(network, ts, vmax, theta_max, config)) {
                gamma = vmax.array().log();
                theta = theta_max;
            }
        } catch (const Error&) {
            // keep the flat start; the domain guard below copes
        }
    }

    Vector v = gamma.array().exp();
    double value = energy_value(network, ts, v, theta);
    Vector grad = energy_gradient(network, ts, v, theta);
    if (config.record_trace) result.trace.push_back(value);

    const auto finish_state = [&](bool in_domain) {
        result.state.gamma = gamma;
        result.state.theta = theta;
        result.state.value = value;
        result.state.grad = grad;
        result.state.hess = energy_hessian(network, ts, v, theta);
        result.state.in_domain = in_domain;
    };

    // Attempts an Armijo backtracking line search along `dir`.  Reports
    // whether any trial point was rejected for leaving the domain, which is
    // the boundary-wedge signal used for the Infeasible verdict.
    struct SearchOutcome {
        bool accepted = false;
        bool domain_rejected = false;
    };
    const auto line_search = [&](const Vector& dir, double slope) {
        SearchOutcome out;
        double alpha = 1.0;
        while (alpha >= 1e-14) {
            Vector gamma_c = gamma + alpha * dir.head(n);
            Vector theta_c = theta;
            theta_c.tail(n) += alpha * dir.tail(n);
            Vector v_c = gamma_c.array().exp();
            if (!strictly_inside(network, ts, v_c, theta_c, config)) {
                out.domain_rejected = true;
                alpha *= config.shrink;
                continue;
            }
            const double f = energy_value(network, ts, v_c, theta_c);
            if (f <= value + config.armijo * alpha * slope) {
                gamma = std::move(gamma_c);
                theta = std::move(theta_c);
                v = std::move(v_c);
                value = f;
                grad = energy_gradient(network, ts, v, theta);
                if (config.record_trace) result.trace.push_back(value);
                out.accepted = true;
                return out;
            }
            alpha *= config.shrink;
        }
        return out;
    };

    int polish_steps = 0;
    for (int iter = 0; iter < config.max_newton; ++iter) {
        if (grad.cwiseAbs().maxCoeff() <= config.grad_tol) {
            DomainCheck dc = check_convexity_domain(network, ts, v, theta);
            finish_state(dc.in_domain);
            if (!dc.in_domain) {
                // Stationary on/outside the boundary: not a certified solution.
                result.status = SolveStatus::Inconclusive;
                return result;
            }
            try {
                result.solution =
                    assemble_solution(network, ts, flows, v, SolveMethod::Energy, 1e-8);
                result.status = SolveStatus::Solved;
            } catch (const Error& e) {
                log_warn(std::string("energy: stationary point failed residual check: ") +
                         e.what());
                result.status = SolveStatus::Inconclusive;
            }
            return result;
        }
        ++result.newton_iters;

        // Damped Newton direction with a ridge fallback on factorization or
        // descent failure; steepest descent as the last resort.
        Matrix hess = energy_hessian(network, ts, v, theta);
        const double diag_scale = std::max(hess.diagonal().cwiseAbs().maxCoeff(), 1.0);
        Vector newton_dir;
        bool have_newton = false;
        double ridge = 0.0;
        while (true) {
            Matrix regularized = hess;
            if (ridge > 0.0) regularized.diagonal().array() += ridge;
            Eigen::LDLT<Matrix> ldlt(regularized);
            if (ldlt.info() == Eigen::Success) {
                newton_dir = ldlt.solve(-grad);
                if (newton_dir.allFinite() && grad.dot(newton_dir) < 0.0) {
                    have_newton = true;
                    break;
                }
            }
            ridge = ridge == 0.0 ? 1e-10 * diag_scale : ridge * 100.0;
            if (ridge > 1e10 * diag_scale) break;
        }

        bool domain_rejected = false;
        if (have_newton) {
            const double slope = grad.dot(newton_dir);
            if (-slope <= 1e-13 * (1.0 + std::abs(value)) && polish_steps < 40) {
                // Predicted decrease is below value roundoff, so Armijo can
                // no longer steer.  Inside the convexity domain the gradient
                // norm is still measured at full relative precision, and a
                // raw Newton step must shrink it (quadratically, near the
                // minimum); that replaces the value test as the guard.
                Vector gamma_c = gamma + newton_dir.head(n);
                Vector theta_c = theta;
                theta_c.tail(n) += newton_dir.tail(n);
                Vector v_c = gamma_c.array().exp();
                if (strictly_inside(network, ts, v_c, theta_c, config)) {
                    Vector grad_c = energy_gradient(network, ts, v_c, theta_c);
                    if (grad_c.cwiseAbs().maxCoeff() <= 0.9 * grad.cwiseAbs().maxCoeff()) {
                        gamma = std::move(gamma_c);
                        theta = std::move(theta_c);
                        v = std::move(v_c);
                        value = energy_value(network, ts, v, theta);
                        grad = std::move(grad_c);
                        ++polish_steps;
                        continue;
                    }
                }
                finish_state(check_convexity_domain(network, ts, v, theta).in_domain);
                result.status = SolveStatus::Inconclusive;
                log_warn("energy: stalled at value roundoff with gradient above tolerance");
                return result;
            }
            SearchOutcome out = line_search(newton_dir, slope);
            if (out.accepted) {
                polish_steps = 0;
                continue;
            }
            domain_rejected = out.domain_rejected;
        }

        Vector steepest = -grad;
        SearchOutcome out = line_search(steepest, -grad.squaredNorm());
        if (out.accepted) {
            polish_steps = 0;
            continue;
        }
        domain_rejected = domain_rejected || out.domain_rejected;

        finish_state(check_convexity_domain(network, ts, v, theta).in_domain);
        if (domain_rejected) {
            // Wedged against the convexity-domain boundary with a nonzero
            // gradient: no interior stationary point exists.
            result.status = SolveStatus::Infeasible;
            log_debug("energy: descent blocked at the domain boundary, grad_inf = " +
                      std::to_string(grad.cwiseAbs().maxCoeff()));
        } else {
            result.status = SolveStatus::Inconclusive;
            log_warn("energy: line search stagnated in the interior");
        }
        return result;
    }

    finish_state(check_convexity_domain(network, ts, v, theta).in_domain);
    result.status = SolveStatus::Inconclusive;
    log_warn("energy: iteration budget exhausted");
    return result;
}

}  // namespace radialflow
