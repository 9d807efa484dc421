#include "radialflow/homogeneous.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace radialflow {

namespace {

/// Domain quantity of one line: v_i v_k − s², with v_0 = 1 at the slack.
double domain_value(const RadialNetwork& network, const LineFlows& flows, const Vector& v,
                    int line) {
    const int child = line + 1;
    const int parent = network.parent(child);
    const double v_parent = parent == 0 ? 1.0 : v[parent - 1];
    return v[child - 1] * v_parent - flows.s[line] * flows.s[line];
}

}  // namespace

TransformedSystem transform(const RadialNetwork& network, const Injections& injections) {
    const int n = network.non_slack_count();
    if (injections.p.size() != n || injections.q.size() != n) {
        throw Error("transform: injection size mismatch");
    }
    TransformedSystem ts;
    ts.kappa = network.kappa();
    ts.p_tilde = injections.p - ts.kappa * injections.q;
    ts.q_tilde = injections.q + ts.kappa * injections.p;
    const double factor = 1.0 + ts.kappa * ts.kappa;
    ts.b_line.resize(n);
    for (int i = 0; i < n; ++i) ts.b_line[i] = factor * network.line(i).susceptance;
    ts.b_total = Vector::Zero(n);
    for (int bus = 1; bus <= n; ++bus) {
        ts.b_total[bus - 1] += ts.b_line[bus - 1];
        for (int child : network.children(bus)) ts.b_total[bus - 1] += ts.b_line[child - 1];
    }
    return ts;
}

LineFlows solve_line_flows(const RadialNetwork& network, const TransformedSystem& ts) {
    const int n = network.non_slack_count();
    Vector subtree = ts.p_tilde;
    for (int bus : network.postorder()) {
        if (bus == 0) continue;
        const int parent = network.parent(bus);
        if (parent != 0) subtree[parent - 1] += subtree[bus - 1];
    }
    LineFlows flows;
    flows.s = subtree.cwiseQuotient(ts.b_line.head(n));
    return flows;
}

Vector compute_vmax_unchecked(const RadialNetwork& network, const TransformedSystem& ts) {
    ReducedLaplacian laplacian(network, ts.b_line);
    return Vector::Ones(network.non_slack_count()) + 2.0 * laplacian.solve(ts.q_tilde);
}

Vector compute_vmax(const RadialNetwork& network, const TransformedSystem& ts) {
    Vector vmax = compute_vmax_unchecked(network, ts);
    if ((vmax.array() <= 0.0).any()) {
        int worst = 0;
        vmax.minCoeff(&worst);
        throw VmaxNonpositiveError(
            vmax, "voltage upper bound nonpositive at bus " + std::to_string(worst + 1) +
                      " (value " + std::to_string(vmax[worst]) +
                      "): the instance has no solution");
    }
    return vmax;
}

GEval eval_g(const RadialNetwork& network, const TransformedSystem& ts, const LineFlows& flows,
             const Vector& v) {
    const int n = network.non_slack_count();
    GEval out;
    out.g = ts.q_tilde;
    for (int line = 0; line < n; ++line) {
        double d = domain_value(network, flows, v, line);
        if (d < -kDomainSlack) {
            out.violated_lines.push_back(line);
            continue;
        }
        const double c = std::sqrt(std::max(d, 0.0));
        const int child = line + 1;
        const int parent = network.parent(child);
        out.g[child - 1] += ts.b_line[line] * c;
        if (parent != 0) out.g[parent - 1] += ts.b_line[line] * c;
    }
    if (!out.ok()) {
        out.g.resize(0);
        return out;
    }
    out.g = out.g.cwiseQuotient(ts.b_total);
    return out;
}

ResidualEval residuals(const RadialNetwork& network, const TransformedSystem& ts,
                       const LineFlows& flows, const Vector& v) {
    GEval ge = eval_g(network, ts, flows, v);
    ResidualEval out;
    out.violated_lines = std::move(ge.violated_lines);
    if (!out.ok()) return out;
    out.r = ts.b_total.cwiseProduct(v - ge.g);
    return out;
}

Matrix residual_jacobian_v(const RadialNetwork& network, const TransformedSystem& ts,
                           const LineFlows& flows, const Vector& v) {
    const int n = network.non_slack_count();
    Matrix jac = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) jac(i, i) = ts.b_total[i];
    for (int line = 0; line < n; ++line) {
        const int child = line + 1;
        const int parent = network.parent(child);
        const double v_parent = parent == 0 ? 1.0 : v[parent - 1];
        const double d = v[child - 1] * v_parent - flows.s[line] * flows.s[line];
        if (!(d > 0.0)) {
            throw DomainViolationError({line}, "residual Jacobian undefined on line " +
                                                   std::to_string(line) + " (c = 0)");
        }
        const double c = std::sqrt(d);
        const double half_b = 0.5 * ts.b_line[line];
        // d/dv of -B̃ sqrt(v_child v_parent - s²) in each endpoint.
        jac(child - 1, child - 1) -= half_b * v_parent / c;
        if (parent != 0) {
            jac(child - 1, parent - 1) -= half_b * v[child - 1] / c;
            jac(parent - 1, parent - 1) -= half_b * v[child - 1] / c;
            jac(parent - 1, child - 1) -= half_b * v_parent / c;
        }
    }
    return jac;
}

Vector recover_angles(const RadialNetwork& network, const LineFlows& flows, const Vector& v) {
    const int bus_count = network.bus_count();
    Vector theta = Vector::Zero(bus_count);
    const auto& order = network.postorder();
    // Reverse postorder walks parents before children.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const int bus = *it;
        if (bus == 0) continue;
        const int parent = network.parent(bus);
        const double v_parent = parent == 0 ? 1.0 : v[parent - 1];
        const double scale = std::sqrt(v[bus - 1] * v_parent);
        if (!(scale > 0.0)) {
            throw DomainViolationError({bus - 1},
                                       "angle recovery failed on line " + std::to_string(bus - 1) +
                                           ": sqrt(v_i v_k) is not positive");
        }
        double arg = flows.s[bus - 1] / scale;
        if (std::abs(arg) > 1.0 + 1e-12) {
            throw DomainViolationError(
                {bus - 1}, "angle recovery failed on line " + std::to_string(bus - 1) +
                               ": |s|/sqrt(v_i v_k) = " + std::to_string(std::abs(arg)));
        }
        arg = std::clamp(arg, -1.0, 1.0);
        theta[bus] = theta[parent] + std::asin(arg);
    }
    return theta;
}

std::uint64_t instance_digest(const RadialNetwork& network, const TransformedSystem& ts) {
    std::uint64_t hash = 1469598103934665603ULL;  // FNV-1a offset basis
    auto mix_bytes = [&hash](const void* data, size_t size) {
        const unsigned char* bytes = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < size; ++i) {
            hash ^= bytes[i];
            hash *= 1099511628211ULL;  // FNV-1a prime
        }
    };
    auto mix_double = [&](double value) { mix_bytes(&value, sizeof(value)); };
    const int n = network.non_slack_count();
    mix_bytes(&n, sizeof(n));
    for (int bus = 1; bus <= n; ++bus) {
        const int parent = network.parent(bus);
        mix_bytes(&parent, sizeof(parent));
    }
    mix_double(ts.kappa);
    for (int i = 0; i < n; ++i) mix_double(ts.b_line[i]);
    for (int i = 0; i < n; ++i) mix_double(ts.p_tilde[i]);
    for (int i = 0; i < n; ++i) mix_double(ts.q_tilde[i]);
    return hash;
}

PFSolution assemble_solution(const RadialNetwork& network, const TransformedSystem& ts,
                             const LineFlows& flows, const Vector& v, SolveMethod method,
                             double residual_tol) {
    const int n = network.non_slack_count();
    if (v.size() != n) throw Error("assemble_solution: voltage size mismatch");
    if ((v.array() <= 0.0).any()) {
        throw DomainViolationError({}, "assemble_solution: voltages must be > 0");
    }
    PFSolution sol;
    sol.v = v;
    sol.s = flows.s;
    sol.c.resize(n);
    std::vector<int> violated;
    for (int line = 0; line < n; ++line) {
        const double d = domain_value(network, flows, v, line);
        if (d < -kDomainSlack) {
            violated.push_back(line);
            continue;
        }
        sol.c[line] = std::sqrt(std::max(d, 0.0));
    }
    if (!violated.empty()) {
        throw DomainViolationError(violated, "assemble_solution: point outside the domain on " +
                                                 std::to_string(violated.size()) + " line(s)");
    }
    GEval ge = eval_g(network, ts, flows, v);
    const double residual_g = (ge.g - v).cwiseAbs().maxCoeff();
    sol.residual_inf = (ts.b_total.cwiseProduct(v - ge.g)).cwiseAbs().maxCoeff();
    if (!(residual_g <= residual_tol)) {
        throw ResidualTooLargeError("assemble_solution: residual " + std::to_string(residual_g) +
                                    " exceeds tolerance " + std::to_string(residual_tol));
    }
    sol.theta = recover_angles(network, flows, v);
    sol.method = method;
    sol.digest = instance_digest(network, ts);
    return sol;
}

}  // namespace radialflow
