#pragma once

#include "radialflow/common.hpp"
#include "radialflow/homogeneous.hpp"
#include "radialflow/network.hpp"

#include <optional>

namespace radialflow {

struct ReducedJacobian;  // analysis.hpp

struct RelaxationConfig {
    /// Objective weights w > 0 (all-ones when empty). The argmax is
    /// weight-independent for solvable instances; see weight-invariance test.
    Vector weights;
    double barrier_mu = 10.0;       ///< multiplicative barrier update
    double t0 = 1.0;                ///< initial barrier weight
    double newton_tol = 1e-10;      ///< centering threshold (Newton decrement)
    /// Target duality gap: the barrier weight grows until m/t falls below
    /// this, or until the tightest slack reaches the constraint-evaluation
    /// roundoff floor; `gap` reports whichever bound was actually certified.
    double duality_gap_tol = 1e-10;
    double tightness_tol = 1e-7;    ///< max slack to still declare tightness
    int max_newton = 500;           ///< Newton steps per centering
    double eps_dom = 1e-12;         ///< interior margin on v_i v_k − s²
    double armijo = 0.01;
    double shrink = 0.5;
};

enum class RelaxationStatus { TightOptimum, SlackOptimum, PhaseOneInfeasible };

constexpr const char* to_string(RelaxationStatus s) {
    switch (s) {
        case RelaxationStatus::TightOptimum: return "tight_optimum";
        case RelaxationStatus::SlackOptimum: return "slack_optimum";
        case RelaxationStatus::PhaseOneInfeasible: return "phase_one_infeasible";
    }
    return "unknown";
}

struct RelaxationOutcome {
    RelaxationStatus status = RelaxationStatus::PhaseOneInfeasible;
    Vector v_opt;
    /// Constraint slacks q̃_i − (B̃_i v_i − Σ B̃_ik √(v_i v_k − s²)) ≥ 0.
    Vector slacks;
    /// Barrier estimates of the KKT multipliers of the reactive constraints.
    Vector kkt_multipliers;
    Vector weights;          ///< weights the optimum was computed with
    double phase1_tau = 0.0; ///< phase-one optimal τ (< 0 iff strictly feasible)
    double gap = 0.0;        ///< final m/t duality gap bound
    int newton_iters = 0;    ///< total Newton steps across both phases
};

struct RelaxationResult {
    SolveStatus status = SolveStatus::Inconclusive;
    RelaxationOutcome outcome;
    /// Set when the barrier Newton system broke down beyond ridge recovery;
    /// the result status is then Inconclusive.
    bool numerical_breakdown = false;
    std::optional<PFSolution> solution;
};

/// Maximizes Σ w_i log v_i subject to the reactive-balance inequalities
/// B̃_i v_i − Σ B̃_ik √(v_i v_k − s²) ≤ q̃_i by a log-barrier interior-point
/// method (phase I below finds the strictly feasible start). A tight optimum
/// (all slacks ≤ tightness_tol) is the dominant power-flow solution;
/// SlackOptimum and PhaseOneInfeasible both certify infeasibility of the
/// power-flow instance.
RelaxationResult solve_relaxation(const RadialNetwork& network, const TransformedSystem& ts,
                                  const LineFlows& flows, const RelaxationConfig& config = {});

struct PhaseOneResult {
    bool feasible = false;
    bool breakdown = false;
    Vector v;           ///< strictly feasible point when feasible
    double tau = 0.0;   ///< best τ bound (min over v of max_i constraint value)
    int newton_iters = 0;
};

/// Minimizes τ s.t. B̃_i v_i − Σ B̃_ik √(v_i v_k − s²) − q̃_i ≤ τ within the
/// operator domain, starting from v = max(v^max, 1) + margin. Exits early
/// once any iterate is strictly feasible (τ would be < 0); declares
/// infeasibility when the certified optimum is ≥ 0 within the gap tolerance.
PhaseOneResult phase_one(const RadialNetwork& network, const TransformedSystem& ts,
                         const LineFlows& flows, const RelaxationConfig& config = {});

/// Verifies the stationarity system of the weighted log-voltage objective at
/// a tight optimum: exists λ ≥ 0 with (∂g̃/∂γ)ᵀ λ = w to 1e-6 relative.
/// False for non-tight outcomes.
bool kkt_check(const RelaxationOutcome& outcome, const ReducedJacobian& jac);

}  // namespace radialflow
