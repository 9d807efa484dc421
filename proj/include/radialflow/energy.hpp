#pragma once

#include "radialflow/common.hpp"
#include "radialflow/homogeneous.hpp"
#include "radialflow/network.hpp"

#include <optional>
#include <vector>

namespace radialflow {

/// Energy-function solver.
///
/// The scalar function
///
///   E(γ, θ) = Σ_lines B̃_ik (v_i + v_k − 2√(v_i v_k) cos(θ_i − θ_k))
///             − 2 Σ_i p̃_i θ_i − Σ_i q̃_i γ_i,        v_i = exp(γ_i), v_0 = 1, θ_0 = 0
///
/// has the power-flow solutions as its stationary points:
///
///   ∂E/∂γ_i = B̃_i v_i − Σ_k B̃_ik √(v_i v_k) cos(θ_i − θ_k) − q̃_i   (reactive mismatch, ×1)
///   ∂E/∂θ_i = 2 (Σ_k B̃_ik √(v_i v_k) sin(θ_i − θ_k) − p̃_i)          (active mismatch, ×2)
///
/// The proportionality constants (1 on the γ side, 2 on the θ side) follow
/// from differentiating the line terms; they are fixed here so the gradient
/// is exactly the mismatch vector used by the other solvers.  E is convex in
/// (γ, θ) on the domain where every line cosine is positive and the matrix
/// returned by convexity_domain_matrix is positive semidefinite, so a
/// domain-guarded damped Newton method is globally convergent there.

struct EnergyConfig {
    double grad_tol = 1e-10;    ///< stationarity threshold on ‖∇E‖∞
    int max_newton = 500;       ///< damped Newton iteration budget
    double c_floor = 1e-12;     ///< minimum line cosine for step acceptance
    double eig_floor = 1e-12;   ///< minimum convexity-matrix eigenvalue for step acceptance
    double armijo = 0.01;       ///< sufficient-decrease fraction
    double shrink = 0.5;        ///< backtracking factor
    bool record_trace = false;  ///< keep energy values of accepted iterates
};

/// Snapshot of the optimizer state at a point (γ, θ).
struct EnergyState {
    Vector gamma;          ///< log squared voltages, non-slack buses
    Vector theta;          ///< angles, length n+1 with theta[0] = 0
    double value = 0.0;    ///< E(γ, θ)
    Vector grad;           ///< length 2n: (∂E/∂γ, ∂E/∂θ_{1..n})
    Matrix hess;           ///< (2n)×(2n) symmetric second derivative
    bool in_domain = false;  ///< convexity-domain membership (PSD within roundoff)
};

/// Result of a convexity-domain membership test.
struct DomainCheck {
    bool in_domain = false;
    double min_eigenvalue = 0.0;  ///< smallest eigenvalue of the domain matrix
    double min_c = 0.0;           ///< smallest line cosine term
};

struct EnergyResult {
    SolveStatus status = SolveStatus::Inconclusive;
    std::optional<PFSolution> solution;  ///< present iff status == Solved
    EnergyState state;                   ///< final iterate
    std::vector<double> trace;           ///< accepted-iterate energies (if recorded)
    int newton_iters = 0;
};

/// E(γ, θ) evaluated at squared voltages v (= exp γ) and angles theta
/// (length n+1, theta[0] ignored as slack reference — callers pass 0).
double energy_value(const RadialNetwork& network, const TransformedSystem& ts, const Vector& v,
                    const Vector& theta);

/// Exact gradient, length 2n, ordered (γ_1..γ_n, θ_1..θ_n).
Vector energy_gradient(const RadialNetwork& network, const TransformedSystem& ts, const Vector& v,
                       const Vector& theta);

/// Exact symmetric Hessian in (γ, θ), size (2n)×(2n), same ordering.
///
/// At a flow-consistent point (θ recovered from the line flows at v) the
/// angle Schur complement of this matrix,
/// H_γγ − H_γθ H_θθ⁻¹ H_θγ, equals the reduced Jacobian ∂g̃/∂γ, and the
/// convexity-domain matrix equals twice that Jacobian.  These identities are
/// the cross-module consistency checks.
Matrix energy_hessian(const RadialNetwork& network, const TransformedSystem& ts, const Vector& v,
                      const Vector& theta);

/// The convexity certificate matrix restricted to non-slack buses:
///
///   D = Σ_i 2 B̃_i v_i e_i e_iᵀ − Σ_lines B̃_ik (v_i v_k / c_ik) (e_i + e_k)(e_i + e_k)ᵀ
///
/// where c_line[ℓ] holds the cosine term of line ℓ and slack coordinates are
/// dropped (a line into the slack contributes only its non-slack diagonal).
/// Requires every c_line > 0.
Matrix convexity_domain_matrix(const RadialNetwork& network, const TransformedSystem& ts,
                               const Vector& v, const Vector& c_line);

/// Membership test at (v, θ): all line cosines above the floor and D PSD
/// within roundoff (min eigenvalue ≥ −1e-12).  When a cosine fails the
/// floor, min_eigenvalue is reported as −∞ (the matrix is undefined there).
DomainCheck check_convexity_domain(const RadialNetwork& network, const TransformedSystem& ts,
                                   const Vector& v, const Vector& theta);

/// Minimizes E by damped Newton from the flat start (γ = 0, θ = 0; always
/// strictly inside the domain), falling back to (log v^max, recovered
/// angles) if the flat point were ever outside.  Steps that leave the
/// domain are rejected by backtracking.  Termination:
///  - ‖∇E‖∞ ≤ grad_tol strictly inside ⇒ Solved (stationary point is a
///    power-flow solution; cross-checked against the fixed-point residual
///    before assembly),
///  - line search wedged against the domain boundary with a nonzero
///    gradient ⇒ Infeasible (no interior stationary point exists),
///  - iteration budget exhausted ⇒ Inconclusive.
EnergyResult solve_energy(const RadialNetwork& network, const TransformedSystem& ts,
                          const LineFlows& flows, const EnergyConfig& config = {});

}  // namespace radialflow
