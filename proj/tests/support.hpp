#pragma once

// Shared helpers for the unit and acceptance test suites: tiny hand-built
// networks with known behaviour, seeded random instance generators, and a
// bisection search for the loadability limit along an injection ray.

#include "radialflow/analysis.hpp"
#include "radialflow/energy.hpp"
#include "radialflow/fixed_point.hpp"
#include "radialflow/homogeneous.hpp"
#include "radialflow/network.hpp"
#include "radialflow/oracle.hpp"
#include "radialflow/relaxation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace rftest {

using namespace radialflow;

/// Everything derived from one (network, injections) pair, bundled so tests
/// can pass a single object around.
struct Instance {
    RadialNetwork network;
    Injections injections;
    TransformedSystem ts;
    LineFlows flows;
};

inline Instance make_instance(RadialNetwork network, Injections injections) {
    Instance inst{std::move(network), std::move(injections), {}, {}};
    inst.ts = transform(inst.network, inst.injections);
    inst.flows = solve_line_flows(inst.network, inst.ts);
    return inst;
}

/// Slack--load pair joined by one line of susceptance b and ratio kappa
/// (conductance kappa*b).
inline RadialNetwork two_bus_network(double b = 1.0, double kappa = 0.0) {
    return RadialNetwork::build({{0, true, ""}, {1, false, ""}},
                                {{0, 1, kappa * b, b}});
}

inline Instance two_bus_case(double p, double q, double b = 1.0, double kappa = 0.0) {
    Injections inj;
    inj.p = Vector::Constant(1, p);
    inj.q = Vector::Constant(1, q);
    return make_instance(two_bus_network(b, kappa), std::move(inj));
}

/// Path 0-1-...-n with n lines of equal susceptance b.
inline RadialNetwork path_network(int n, double b = 1.0, double kappa = 0.0) {
    std::vector<Bus> buses;
    std::vector<Line> lines;
    buses.push_back({0, true, ""});
    for (int i = 1; i <= n; ++i) {
        buses.push_back({i, false, ""});
        lines.push_back({i - 1, i, kappa * b, b});
    }
    return RadialNetwork::build(std::move(buses), std::move(lines));
}

/// Uniform random recursive tree on n non-slack buses: bus i+1 attaches to a
/// uniformly random earlier bus. Susceptances are uniform in [bmin, bmax] and
/// every line gets conductance kappa*b, so the ratio G/B is exactly kappa.
/// Random feeder-shaped tree: the slack feeds a single head bus (bus 1) and
/// the remaining buses attach uniformly at random below it. Keeping one
/// slack child makes the reduced (grounded) system irreducible, which is the
/// regime where the strict positivity claims (Laplacian inverse, dv/dq)
/// hold; a slack with several children decouples its branches exactly.
inline RadialNetwork random_tree(std::mt19937& rng, int n, double bmin = 0.5,
                                 double bmax = 5.0, double kappa = 0.0) {
    std::uniform_real_distribution<double> b_dist(bmin, bmax);
    std::vector<Bus> buses;
    std::vector<Line> lines;
    buses.push_back({0, true, ""});
    for (int i = 1; i <= n; ++i) {
        buses.push_back({i, false, ""});
        std::uniform_int_distribution<int> parent_dist(i == 1 ? 0 : 1, i - 1);
        const double b = b_dist(rng);
        lines.push_back({parent_dist(rng), i, kappa * b, b});
    }
    return RadialNetwork::build(std::move(buses), std::move(lines));
}

/// Random injections whose rotated reactive part is negative at every bus,
/// which guarantees a finite loadability limit along the ray lambda *
/// (p, q): v^max(lambda) decreases linearly and eventually certifies
/// infeasibility. Active parts are two-sided.
inline Injections random_injections(std::mt19937& rng, const RadialNetwork& network,
                                    double p_span = 0.4, double q_lo = -0.5,
                                    double q_hi = -0.02) {
    const int n = network.non_slack_count();
    const double kappa = network.kappa();
    std::uniform_real_distribution<double> p_dist(-p_span, p_span);
    std::uniform_real_distribution<double> qt_dist(q_lo, q_hi);
    Injections inj;
    inj.p = Vector::Zero(n);
    inj.q = Vector::Zero(n);
    for (int i = 0; i < n; ++i) {
        const double p = p_dist(rng);
        const double q_tilde = qt_dist(rng);  // target rotated reactive value
        inj.p(i) = p;
        inj.q(i) = q_tilde - kappa * p;
    }
    return inj;
}

inline Injections scale_injections(const Injections& base, double lambda) {
    return Injections{base.p * lambda, base.q * lambda};
}

/// Fixed-point verdict at one loading level. Inconclusive outcomes are
/// reported as such so callers can decide how to treat them.
enum class RayVerdict { Feasible, Infeasible, Unknown };

inline RayVerdict probe_lambda(const RadialNetwork& network, const Injections& base,
                               double lambda, int max_iter = 300000) {
    FixedPointConfig cfg;
    cfg.max_iter = max_iter;
    const Injections scaled = scale_injections(base, lambda);
    const TransformedSystem ts = transform(network, scaled);
    const LineFlows flows = solve_line_flows(network, ts);
    const FixedPointResult res = solve_fixed_point(network, ts, flows, cfg);
    if (res.status == SolveStatus::Solved) return RayVerdict::Feasible;
    if (res.status == SolveStatus::Infeasible) return RayVerdict::Infeasible;
    return RayVerdict::Unknown;
}

struct LambdaBracket {
    double lo = 0.0;  ///< certified (or assumed) feasible loading
    double hi = 0.0;  ///< loading treated as beyond the limit
};

/// Bisection for the loadability limit along lambda * (p, q). Unknown
/// verdicts are folded into the upper side, which can only under-estimate
/// the limit -- safe for sampling interior loadings. Requires injections
/// with a finite limit (see random_injections). The iteration budget must
/// absorb the solver's diffusive convergence on deep trees (the contraction
/// factor approaches 1 - O(1/n^2) even at light loading).
inline LambdaBracket find_lambda_star(const RadialNetwork& network, const Injections& base,
                                      double rel_tol = 1e-3, int max_iter = 300000) {
    double lo = 0.0;
    double hi = 1.0;
    for (int k = 0; k < 60; ++k) {
        if (probe_lambda(network, base, hi, max_iter) != RayVerdict::Feasible) break;
        lo = hi;
        hi *= 2.0;
    }
    while (hi - lo > rel_tol * hi) {
        const double mid = 0.5 * (lo + hi);
        if (probe_lambda(network, base, mid, max_iter) == RayVerdict::Feasible) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return {lo, hi};
}

/// Random injections scaled to a fraction of the certified-feasible loading,
/// so the resulting instance is solvable by construction.
inline Injections random_feasible_injections(std::mt19937& rng, const RadialNetwork& network,
                                             double fraction = 0.5) {
    const Injections base = random_injections(rng, network);
    const LambdaBracket bracket = find_lambda_star(network, base);
    return scale_injections(base, fraction * bracket.lo);
}

/// Max relative componentwise deviation with the same normalization the
/// library uses when comparing solutions.
inline double rel_dev(const Vector& a, const Vector& b) {
    double worst = 0.0;
    for (int i = 0; i < a.size(); ++i) {
        const double denom = std::max({1.0, std::abs(a(i)), std::abs(b(i))});
        worst = std::max(worst, std::abs(a(i) - b(i)) / denom);
    }
    return worst;
}

}  // namespace rftest
