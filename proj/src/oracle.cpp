#include "radialflow/oracle.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

namespace radialflow {

namespace {

/// Validates a quadratic-formula candidate against the un-squared equation.
bool valid_two_bus_root(double v, double b_tilde, double s, double q_tilde) {
    if (!(v > 0.0)) return false;
    const double d = v - s * s;
    if (d < -kDomainSlack) return false;
    const double c = std::sqrt(std::max(d, 0.0));
    const double scale = std::abs(b_tilde) * std::max(1.0, std::abs(v)) + std::abs(q_tilde);
    return std::abs(b_tilde * (v - c) - q_tilde) <= 1e-10 * scale;
}

}  // namespace

SolutionSet two_bus_closed_form(double b_tilde, double s, double q_tilde) {
    if (!(b_tilde > 0.0)) throw Error("two_bus_closed_form: B̃ must be > 0");
    SolutionSet set;
    set.complete_claim = true;
    const double t = q_tilde / b_tilde;
    const double discriminant = 4.0 * t + 1.0 - 4.0 * s * s;
    if (discriminant < 0.0) return set;
    const double sum = 2.0 * t + 1.0;
    const double root = std::sqrt(discriminant);
    const double v_high = (sum + root) / 2.0;
    // Smaller root via the product of roots, avoiding cancellation.
    const double product = t * t + s * s;
    const double v_low = v_high != 0.0 ? product / v_high : (sum - root) / 2.0;
    for (double v : {v_high, v_low}) {
        if (!valid_two_bus_root(v, b_tilde, s, q_tilde)) continue;
        const bool duplicate =
            !set.solutions.empty() &&
            std::abs(set.solutions.back()[0] - v) <= 1e-12 * std::max(1.0, std::abs(v));
        if (duplicate) continue;
        Vector entry(1);
        entry[0] = v;
        set.solutions.push_back(entry);
    }
    return set;
}

namespace {

struct NewtonOutcome {
    Vector v;
    bool converged = false;
};

/// Damped Newton on the residual system from one start; backtracks to stay
/// inside {v > 0, v_i v_k > s²} and to decrease ‖r‖².
NewtonOutcome newton_from(const RadialNetwork& network, const TransformedSystem& ts,
                          const LineFlows& flows, Vector v, double accept_tol) {
    constexpr int kMaxIter = 60;
    constexpr double kDomainFloor = 1e-13;

    const int n = network.non_slack_count();
    auto in_domain = [&](const Vector& candidate) {
        if ((candidate.array() <= 1e-12).any()) return false;
        for (int line = 0; line < n; ++line) {
            const int child = line + 1;
            const int parent = network.parent(child);
            const double v_parent = parent == 0 ? 1.0 : candidate[parent - 1];
            if (candidate[child - 1] * v_parent - flows.s[line] * flows.s[line] <= kDomainFloor) {
                return false;
            }
        }
        return true;
    };

    NewtonOutcome out;
    if (!in_domain(v)) return out;
    ResidualEval res = residuals(network, ts, flows, v);
    double phi = res.r.squaredNorm();
    for (int iter = 0; iter < kMaxIter; ++iter) {
        if (res.r.cwiseAbs().maxCoeff() <= accept_tol) {
            out.v = v;
            out.converged = true;
            return out;
        }
        Matrix jac;
        try {
            jac = residual_jacobian_v(network, ts, flows, v);
        } catch (const DomainViolationError&) {
            return out;
        }
        Vector step = jac.partialPivLu().solve(-res.r);
        if (!step.allFinite()) return out;
        double alpha = 1.0;
        bool accepted = false;
        while (alpha >= 1e-12) {
            Vector candidate = v + alpha * step;
            if (in_domain(candidate)) {
                ResidualEval cand_res = residuals(network, ts, flows, candidate);
                const double cand_phi = cand_res.r.squaredNorm();
                if (cand_phi <= (1.0 - 1e-4 * alpha) * phi) {
                    v = std::move(candidate);
                    res = std::move(cand_res);
                    phi = cand_phi;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if (!accepted) return out;
    }
    if (res.r.cwiseAbs().maxCoeff() <= accept_tol) {
        out.v = v;
        out.converged = true;
    }
    return out;
}

}  // namespace

SolutionSet enumerate_solutions(const RadialNetwork& network, const TransformedSystem& ts,
                                const LineFlows& flows, int grid_density) {
    const int n = network.non_slack_count();
    if (n > 4) {
        throw DimensionTooLargeError("enumerate_solutions supports at most 4 non-slack buses, got " +
                                     std::to_string(n));
    }
    if (grid_density < 1) throw Error("enumerate_solutions: grid_density must be >= 1");

    SolutionSet set;
    set.complete_claim = false;
    Vector vmax = compute_vmax_unchecked(network, ts);
    // A nonpositive component of the upper bound certifies an empty set.
    if ((vmax.array() <= 0.0).any()) return set;

    const double scale = 1.0 + ts.q_tilde.cwiseAbs().maxCoeff() + ts.b_total.maxCoeff();
    const double newton_tol = 1e-11 * scale;
    const double validate_tol = 1e-9;
    const double lo = 1e-4;

    std::vector<int> index(static_cast<size_t>(n), 0);
    const long total = static_cast<long>(std::pow(static_cast<double>(grid_density), n));
    for (long start = 0; start < total; ++start) {
        long rest = start;
        Vector v0(n);
        for (int i = 0; i < n; ++i) {
            index[static_cast<size_t>(i)] = static_cast<int>(rest % grid_density);
            rest /= grid_density;
            const double hi = vmax[i] + 0.5;
            const double frac =
                (static_cast<double>(index[static_cast<size_t>(i)]) + 0.5) / grid_density;
            v0[i] = lo + frac * (hi - lo);
        }
        NewtonOutcome outcome = newton_from(network, ts, flows, v0, newton_tol);
        if (!outcome.converged) continue;
        // Polish with a few undamped steps for full precision.
        for (int polish = 0; polish < 3; ++polish) {
            try {
                Matrix jac = residual_jacobian_v(network, ts, flows, outcome.v);
                ResidualEval res = residuals(network, ts, flows, outcome.v);
                Vector step = jac.partialPivLu().solve(-res.r);
                if (!step.allFinite()) break;
                Vector candidate = outcome.v + step;
                ResidualEval cand = residuals(network, ts, flows, candidate);
                if (!cand.ok() || (candidate.array() <= 0.0).any()) break;
                if (cand.r.cwiseAbs().maxCoeff() < res.r.cwiseAbs().maxCoeff()) {
                    outcome.v = candidate;
                }
            } catch (const DomainViolationError&) {
                break;
            }
        }
        ResidualEval final_res = residuals(network, ts, flows, outcome.v);
        if (!final_res.ok() || final_res.r.cwiseAbs().maxCoeff() > validate_tol) continue;
        bool duplicate = false;
        for (const Vector& known : set.solutions) {
            bool same = true;
            for (int i = 0; i < n; ++i) {
                const double denom = std::max({1.0, std::abs(known[i]), std::abs(outcome.v[i])});
                if (std::abs(known[i] - outcome.v[i]) > 1e-8 * denom) {
                    same = false;
                    break;
                }
            }
            if (same) {
                duplicate = true;
                break;
            }
        }
        if (!duplicate) set.solutions.push_back(outcome.v);
    }
    std::sort(set.solutions.begin(), set.solutions.end(), [](const Vector& a, const Vector& b) {
        if (a.sum() != b.sum()) return a.sum() > b.sum();
        for (int i = 0; i < a.size(); ++i) {
            if (a[i] != b[i]) return a[i] > b[i];
        }
        return false;
    });
    return set;
}

Vector dense_solve(const Matrix& matrix, const Vector& rhs) {
    if (matrix.rows() != matrix.cols() || matrix.rows() != rhs.size()) {
        throw Error("dense_solve: dimension mismatch");
    }
    Eigen::PartialPivLU<Matrix> lu(matrix);
    Vector x = lu.solve(rhs);
    const double scale =
        matrix.cwiseAbs().rowwise().sum().maxCoeff() * x.cwiseAbs().maxCoeff() +
        rhs.cwiseAbs().maxCoeff();
    if (!x.allFinite() || (matrix * x - rhs).cwiseAbs().maxCoeff() > 1e-8 * std::max(scale, 1e-30)) {
        throw SingularMatrixError("dense_solve: system is singular to working accuracy");
    }
    return x;
}

}  // namespace radialflow
