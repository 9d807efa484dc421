#pragma once

#include "radialflow/common.hpp"
#include "radialflow/fixed_point.hpp"
#include "radialflow/homogeneous.hpp"
#include "radialflow/network.hpp"

#include <vector>

namespace radialflow {

/// Reduced voltage Jacobian ∂g̃/∂γ at a voltage profile, where
/// g̃(γ) = B̃ ∘ (e^γ − g(e^γ)) is the scaled fixed-point residual in
/// log-voltage coordinates.  Entries (c_ik = √(v_i v_k − s_ik²)):
///
///   J_ik = −(B̃_ik / 2) · v_i v_k / c_ik                 (i ≠ k adjacent)
///   J_ii = B̃_i v_i − Σ_k (B̃_ik / 2) · v_i v_k / c_ik   (slack neighbor has v = 1)
///
/// Symmetric with nonpositive off-diagonals (a Z-matrix); positive definite
/// exactly at stable high-voltage profiles, where Z + PD makes it an
/// M-matrix with entrywise-positive inverse.
struct ReducedJacobian {
    Matrix J;
    bool is_Z = false;
    bool is_PD = false;
    double min_eig = 0.0;
};

/// Voltage sensitivity at a solution: dv_dq = diag(v) · J⁻¹ = ∂v/∂q̃.
/// Entrywise positive at stable solutions (raising any reactive injection
/// raises every voltage).
struct SensitivityMatrix {
    Matrix dv_dq;
};

/// Outcome of comparing two solutions of the same instance.
struct ComparisonResult {
    bool equal = false;
    double max_deviation = 0.0;
};

/// One solver call in a continuation scan.
struct ContinuationSample {
    double lambda = 0.0;
    SolveStatus status = SolveStatus::Inconclusive;
    double min_v = 0.0;      ///< smallest squared voltage (feasible samples)
    double residual = 0.0;   ///< final fixed-point residual ‖g(v) − v‖∞
    int iterations = 0;
};

/// Loading-ray scan result.  Injections are scaled as λ·(p, q); the
/// solvability boundary λ* is bracketed between the largest certified
/// feasible multiplier and the smallest certified infeasible one.
struct ContinuationResult {
    std::vector<double> lambdas;        ///< all sampled multipliers, ascending
    std::vector<PFSolution> solutions;  ///< solutions of the feasible samples, same order
    double lambda_lo = 0.0;             ///< largest certified-feasible λ
    double lambda_hi = 0.0;             ///< smallest certified-infeasible λ (∞ if none)
    double bracket_width = 0.0;         ///< lambda_hi − lambda_lo
    std::vector<ContinuationSample> samples;  ///< per-call log, evaluation order
    int inconclusive_count = 0;
    int cross_check_failures = 0;
};

struct ContinuationConfig {
    int coarse_samples = 13;   ///< evenly spaced multipliers in [0, λ_max]
    bool cross_check = true;   ///< verify coarse feasible samples with the other two solvers
    FixedPointConfig fp{.max_iter = 50000};  ///< per-sample solver settings
};

/// Exact reduced Jacobian per the formulas above.  Throws
/// DomainViolationError if any line has v_i v_k ≤ s_ik².
ReducedJacobian reduced_jacobian(const RadialNetwork& network, const TransformedSystem& ts,
                                 const LineFlows& flows, const Vector& v);

/// Finite-difference validation of the reduced Jacobian: central differences
/// of γ ↦ B̃ ∘ (e^γ − g(e^γ)) (h = 1e-6) must match to 1e-6 relative, and the
/// column-scaled reactive-residual Jacobian (∂q/∂v)·diag(v) must agree with
/// it to the same tolerance.
bool verify_jacobian_identity(const RadialNetwork& network, const TransformedSystem& ts,
                              const LineFlows& flows, const Vector& v);

/// dv_dq = diag(v)·J⁻¹.  Requires jac.is_PD (throws NotPDError otherwise).
/// Entries coupling buses on the same slack branch must be strictly
/// positive (M-matrix invariant; Error otherwise); when the slack feeds
/// several lines the branches decouple exactly and cross-branch entries are
/// structurally zero.
SensitivityMatrix voltage_sensitivity(const ReducedJacobian& jac, const Vector& v);

/// True iff the solution lies strictly inside the energy convexity domain
/// (minimum eigenvalue clear of zero at solver scale) and the reduced
/// Jacobian is positive definite.  Boundary-coalesced solutions fail.
bool certify_stability(const RadialNetwork& network, const TransformedSystem& ts,
                       const PFSolution& solution);

/// Componentwise relative comparison over v, θ, s and c.  Throws
/// InstanceMismatchError when the solutions' instance digests differ.
ComparisonResult compare_solutions(const PFSolution& a, const PFSolution& b, double rel_tol);

/// Scans the loading ray λ·(p, q) for λ ∈ [0, lambda_max]: coarse sweep with
/// the fixed-point solver, then bisection of the feasible/infeasible gap
/// down to bisection_tol.  A λ counts as infeasible only on a hard
/// certificate (nonpositive bound, domain violation, or stalled
/// non-fixed-point); iteration-budget samples are logged as inconclusive and
/// excluded from the bracket, which is then reported honestly wider.
ContinuationResult continuation_scan(const RadialNetwork& network, const Injections& base,
                                     double lambda_max, double bisection_tol,
                                     const ContinuationConfig& config = {});

}  // namespace radialflow
