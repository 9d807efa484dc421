#pragma once

#include "radialflow/common.hpp"
#include "radialflow/network.hpp"

#include <cstdint>
#include <vector>

namespace radialflow {

/// Injections and susceptances after the homogeneous rotation.
///
/// With a uniform ratio κ = G/B on every line, multiplying the complex power
/// balance by the unit rotation (1 + jκ)/|1 + jκ| decouples conductances:
/// substituting G = κB into the active/reactive balances and forming the
/// combinations p̃ = p − κq, q̃ = q + κp eliminates every mixed term and
/// leaves the network of purely reactive lines with susceptance
/// B̃ = (1 + κ²)B (the κ-rotation applied twice: once per balance equation).
struct TransformedSystem {
    double kappa = 0.0;
    Vector p_tilde;  ///< rotated active injections, non-slack buses
    Vector q_tilde;  ///< rotated reactive injections, non-slack buses
    Vector b_line;   ///< B̃ per canonical line
    Vector b_total;  ///< B̃_i = sum of incident B̃ per non-slack bus
};

TransformedSystem transform(const RadialNetwork& network, const Injections& injections);

/// Scaled angle variables per canonical line: s_ik = sqrt(v_i v_k) sin(θi−θk)
/// with i the child bus. Fixed by the active balance alone on a tree.
struct LineFlows {
    Vector s;
};

/// Unique solution of B̃_ik s_ik = subtree active sum: each line carries the
/// total rotated active injection of the subtree hanging below it.
LineFlows solve_line_flows(const RadialNetwork& network, const TransformedSystem& ts);

/// Componentwise upper bound on any solution's squared voltage magnitudes:
/// v ≤ v^max = 1 + 2 L̃⁻¹ q̃ with L̃ the B̃-weighted reduced Laplacian.
/// The unchecked variant returns the raw vector; the checked one throws
/// VmaxNonpositiveError when some component is ≤ 0, which certifies that no
/// solution exists.
Vector compute_vmax_unchecked(const RadialNetwork& network, const TransformedSystem& ts);
Vector compute_vmax(const RadialNetwork& network, const TransformedSystem& ts);

/// Slack tolerated on the domain quantity v_i v_k − s_ik² before a point is
/// declared outside the operator domain (covers roundoff at the boundary).
inline constexpr double kDomainSlack = 1e-14;

/// Value of the monotone fixed-point map
///   g_i(v) = q̃_i/B̃_i + Σ_k (B̃_ik/B̃_i) sqrt(v_i v_k − s_ik²),  v_0 = 1.
/// `violated_lines` lists canonical lines with v_i v_k − s² < −kDomainSlack;
/// `g` is only meaningful when the list is empty. Arguments in
/// [−kDomainSlack, 0) are clamped to 0.
struct GEval {
    Vector g;
    std::vector<int> violated_lines;
    bool ok() const { return violated_lines.empty(); }
};

GEval eval_g(const RadialNetwork& network, const TransformedSystem& ts, const LineFlows& flows,
             const Vector& v);

/// Reactive balance residuals r_i = B̃_i (v_i − g_i(v))
///                                = B̃_i v_i − Σ_k B̃_ik sqrt(v_i v_k − s²) − q̃_i.
struct ResidualEval {
    Vector r;
    std::vector<int> violated_lines;
    bool ok() const { return violated_lines.empty(); }
};

ResidualEval residuals(const RadialNetwork& network, const TransformedSystem& ts,
                       const LineFlows& flows, const Vector& v);

/// Jacobian ∂r/∂v of the reactive balance residual (nonsymmetric): Newton
/// matrix for root-finding in v and building block of the barrier Hessians.
/// Requires a strictly in-domain point (c > 0 on every line).
Matrix residual_jacobian_v(const RadialNetwork& network, const TransformedSystem& ts,
                           const LineFlows& flows, const Vector& v);

/// Recovers bus angles from the line flows: θ_child = θ_parent +
/// asin(s / sqrt(v_child v_parent)) walking the tree from the root (θ_0 = 0).
/// Arguments are clamped into [−1, 1] when within 1e-12 of it; beyond that
/// the flows are inconsistent with v and DomainViolationError is thrown.
/// Returns length bus_count with index 0 = slack.
Vector recover_angles(const RadialNetwork& network, const LineFlows& flows, const Vector& v);

/// A fully assembled power-flow solution at the non-slack buses.
struct PFSolution {
    Vector v;      ///< squared voltage magnitudes, non-slack buses
    Vector theta;  ///< angles, all buses (theta[0] = 0)
    Vector s;      ///< sqrt(v_i v_k) sin(θi−θk) per canonical line
    Vector c;      ///< sqrt(v_i v_k) cos(θi−θk) per canonical line
    double residual_inf = 0.0;  ///< max |reactive balance residual|
    SolveMethod method = SolveMethod::FixedPoint;
    std::uint64_t digest = 0;  ///< instance digest, for compare_solutions
};

/// FNV-1a digest of the instance (topology, B̃, κ, p̃, q̃); identical inputs
/// give identical digests, used to refuse cross-instance comparisons.
std::uint64_t instance_digest(const RadialNetwork& network, const TransformedSystem& ts);

/// Builds a PFSolution from candidate voltages: derives c from the domain
/// identity c² + s² = v_i v_k, recovers angles, evaluates residuals and
/// enforces ‖g(v) − v‖∞ ≤ residual_tol, in voltage units
/// (ResidualTooLargeError otherwise). The stored residual_inf is the
/// susceptance-scaled balance residual ‖B̃∘(v − g(v))‖∞. Requires v > 0 and
/// an in-domain point (DomainViolationError otherwise).
PFSolution assemble_solution(const RadialNetwork& network, const TransformedSystem& ts,
                             const LineFlows& flows, const Vector& v, SolveMethod method,
                             double residual_tol);

}  // namespace radialflow
