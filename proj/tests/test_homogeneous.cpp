#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace radialflow;
using rftest::make_instance;
using rftest::two_bus_case;

TEST_CASE("rotation decouples conductances") {
    // p~ = p - kappa q, q~ = q + kappa p, B~ = (1 + kappa^2) B.
    const auto inst = two_bus_case(0.2, -0.05, 1.0, 0.5);
    CHECK(inst.ts.kappa == doctest::Approx(0.5));
    CHECK(inst.ts.p_tilde(0) == doctest::Approx(0.225));
    CHECK(inst.ts.q_tilde(0) == doctest::Approx(0.05));
    CHECK(inst.ts.b_line(0) == doctest::Approx(1.25));
    CHECK(inst.ts.b_total(0) == doctest::Approx(1.25));
    CHECK(inst.flows.s(0) == doctest::Approx(0.225 / 1.25));
}

TEST_CASE("rotation is the identity for purely reactive lines") {
    const auto inst = two_bus_case(0.2, -0.05);
    CHECK(inst.ts.kappa == doctest::Approx(0.0));
    CHECK(inst.ts.p_tilde(0) == doctest::Approx(0.2));
    CHECK(inst.ts.q_tilde(0) == doctest::Approx(-0.05));
    CHECK(inst.ts.b_line(0) == doctest::Approx(1.0));
}

TEST_CASE("incident susceptance sums") {
    Injections zero{Vector::Zero(2), Vector::Zero(2)};
    auto net = RadialNetwork::build({{0, true, ""}, {1, false, ""}, {2, false, ""}},
                                    {{0, 1, 0.0, 1.0}, {1, 2, 0.0, 2.0}});
    const auto ts = transform(net, zero);
    CHECK(ts.b_total(0) == doctest::Approx(3.0));
    CHECK(ts.b_total(1) == doctest::Approx(2.0));
}

TEST_CASE("line flows are subtree sums of rotated active power") {
    auto net = RadialNetwork::build(
        {{0, true, ""}, {1, false, ""}, {2, false, ""}, {3, false, ""}},
        {{0, 1, 0.0, 2.0}, {1, 2, 0.0, 1.0}, {1, 3, 0.0, 4.0}});
    Injections inj;
    inj.p = Vector(3);
    inj.p << 0.1, -0.2, 0.3;
    inj.q = Vector::Zero(3);
    const auto ts = transform(net, inj);
    const auto flows = solve_line_flows(net, ts);
    CHECK(flows.s(0) == doctest::Approx((0.1 - 0.2 + 0.3) / 2.0));
    CHECK(flows.s(1) == doctest::Approx(-0.2 / 1.0));
    CHECK(flows.s(2) == doctest::Approx(0.3 / 4.0));
}

TEST_CASE("voltage upper bound v^max = 1 + 2 L~^{-1} q~") {
    const auto inst = two_bus_case(0.0, -0.1);
    CHECK(compute_vmax(inst.network, inst.ts)(0) == doctest::Approx(0.8));

    // Unit-weight path: L~^{-1} = [[1, 1], [1, 2]].
    auto net = rftest::path_network(2);
    Injections inj{Vector::Zero(2), Vector::Constant(2, -0.1)};
    const auto ts = transform(net, inj);
    const Vector vmax = compute_vmax(net, ts);
    CHECK(vmax(0) == doctest::Approx(0.6));
    CHECK(vmax(1) == doctest::Approx(0.4));
}

TEST_CASE("nonpositive upper bound certifies infeasibility") {
    const auto inst = two_bus_case(0.0, -0.6);
    const Vector raw = compute_vmax_unchecked(inst.network, inst.ts);
    CHECK(raw(0) == doctest::Approx(-0.2));
    CHECK_THROWS_AS(compute_vmax(inst.network, inst.ts), VmaxNonpositiveError);
    try {
        compute_vmax(inst.network, inst.ts);
    } catch (const VmaxNonpositiveError& e) {
        CHECK(e.vmax()(0) == doctest::Approx(-0.2));
    }
}

TEST_CASE("fixed-point map value and fixed point") {
    const auto inst = two_bus_case(0.2, -0.05);
    const auto at = [&](double v) {
        return eval_g(inst.network, inst.ts, inst.flows, Vector::Constant(1, v));
    };
    // v = 0.85 is the dominant fixed point: g = -0.05 + sqrt(0.85 - 0.04) = 0.85.
    CHECK(at(0.85).ok());
    CHECK(at(0.85).g(0) == doctest::Approx(0.85).epsilon(1e-14));
    CHECK(at(1.0).g(0) == doctest::Approx(-0.05 + std::sqrt(0.96)));
    // Below s^2/v_parent the square root argument goes negative.
    const auto bad = at(0.02);
    CHECK_FALSE(bad.ok());
    CHECK(bad.violated_lines == std::vector<int>{0});
    // Exactly at the boundary the argument clamps to zero.
    const auto edge = at(0.04);
    CHECK(edge.ok());
    CHECK(edge.g(0) == doctest::Approx(-0.05));
}

TEST_CASE("residuals are susceptance-scaled balance errors") {
    const auto inst = two_bus_case(0.2, -0.05);
    const auto r = residuals(inst.network, inst.ts, inst.flows, Vector::Constant(1, 0.9));
    CHECK(r.ok());
    CHECK(r.r(0) == doctest::Approx(0.9 - std::sqrt(0.86) + 0.05));
    const auto at_solution =
        residuals(inst.network, inst.ts, inst.flows, Vector::Constant(1, 0.85));
    CHECK(std::abs(at_solution.r(0)) < 1e-14);
}

TEST_CASE("residual jacobian matches finite differences") {
    std::mt19937 rng(7);
    const auto net = rftest::random_tree(rng, 6, 0.5, 3.0, 0.4);
    const auto inj = rftest::random_feasible_injections(rng, net);
    const auto inst = make_instance(net, inj);
    const Vector vmax = compute_vmax(inst.network, inst.ts);
    const Vector v = 0.9 * vmax.cwiseMax(0.5);
    REQUIRE(residuals(inst.network, inst.ts, inst.flows, v).ok());

    const Matrix jac = residual_jacobian_v(inst.network, inst.ts, inst.flows, v);
    const int n = static_cast<int>(v.size());
    for (int k = 0; k < n; ++k) {
        const double h = 1e-7 * std::max(1.0, std::abs(v(k)));
        Vector vp = v, vm = v;
        vp(k) += h;
        vm(k) -= h;
        const Vector fd = (residuals(inst.network, inst.ts, inst.flows, vp).r -
                           residuals(inst.network, inst.ts, inst.flows, vm).r) /
                          (2.0 * h);
        CHECK((fd - jac.col(k)).cwiseAbs().maxCoeff() < 1e-5);
    }
}

TEST_CASE("angle recovery walks the tree from the root") {
    const auto inst = two_bus_case(0.2, -0.05);
    const Vector theta =
        recover_angles(inst.network, inst.flows, Vector::Constant(1, 0.85));
    REQUIRE(theta.size() == 2);
    CHECK(theta(0) == 0.0);
    CHECK(theta(1) == doctest::Approx(0.21866894587394195).epsilon(1e-14));

    // Inconsistent flows: |s| exceeds sqrt(v_child v_parent).
    LineFlows bad{Vector::Constant(1, 2.0)};
    CHECK_THROWS_AS(recover_angles(inst.network, bad, Vector::Constant(1, 0.85)),
                    DomainViolationError);
}

TEST_CASE("instance digests tell instances apart") {
    const auto a = two_bus_case(0.2, -0.05);
    const auto b = two_bus_case(0.2, -0.05);
    const auto c = two_bus_case(0.2, -0.06);
    CHECK(instance_digest(a.network, a.ts) == instance_digest(b.network, b.ts));
    CHECK(instance_digest(a.network, a.ts) != instance_digest(c.network, c.ts));
    const auto path = make_instance(rftest::path_network(2),
                                    Injections{Vector::Zero(2), Vector::Zero(2)});
    CHECK(instance_digest(a.network, a.ts) != instance_digest(path.network, path.ts));
}

TEST_CASE("solution assembly derives the cosine part and gates the residual") {
    const auto inst = two_bus_case(0.2, -0.05);
    const PFSolution sol = assemble_solution(inst.network, inst.ts, inst.flows,
                                             Vector::Constant(1, 0.85),
                                             SolveMethod::FixedPoint, 1e-10);
    CHECK(sol.v(0) == doctest::Approx(0.85));
    CHECK(sol.s(0) == doctest::Approx(0.2));
    CHECK(sol.c(0) == doctest::Approx(0.9).epsilon(1e-14));
    CHECK(sol.theta(1) == doctest::Approx(0.21866894587394195));
    CHECK(sol.residual_inf < 1e-12);
    CHECK(sol.method == SolveMethod::FixedPoint);
    CHECK(sol.digest == instance_digest(inst.network, inst.ts));

    CHECK_THROWS_AS(assemble_solution(inst.network, inst.ts, inst.flows,
                                      Vector::Constant(1, 0.86), SolveMethod::FixedPoint, 1e-6),
                    ResidualTooLargeError);
    CHECK_THROWS_AS(assemble_solution(inst.network, inst.ts, inst.flows,
                                      Vector::Constant(1, 0.02), SolveMethod::FixedPoint, 1e-6),
                    DomainViolationError);
    CHECK_THROWS_AS(assemble_solution(inst.network, inst.ts, inst.flows,
                                      Vector::Constant(1, -0.5), SolveMethod::FixedPoint, 1e-6),
                    DomainViolationError);
}
