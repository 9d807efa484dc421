#pragma once

#include "radialflow/common.hpp"
#include "radialflow/homogeneous.hpp"
#include "radialflow/network.hpp"

#include <optional>
#include <vector>

namespace radialflow {

struct FixedPointConfig {
    double tol = 1e-12;           ///< sup-norm step size declaring convergence
    double residual_tol = 1e-10;  ///< residual gate at the converged point
    int max_iter = 10000;
    bool record_iterates = false;  ///< keep the full iterate sequence in the trace
};

/// Fine-grained outcome of the iteration. DomainViolation also covers an
/// iterate with a nonpositive component (the next evaluation would violate
/// the domain); all of {DomainViolation, VmaxNonpositive, NotAFixedPoint}
/// are hard infeasibility certificates, MaxIterExceeded is not.
enum class FixedPointStatus {
    Converged,
    DomainViolation,
    VmaxNonpositive,
    MaxIterExceeded,
    NotAFixedPoint,
};

constexpr const char* to_string(FixedPointStatus s) {
    switch (s) {
        case FixedPointStatus::Converged: return "converged";
        case FixedPointStatus::DomainViolation: return "domain_violation";
        case FixedPointStatus::VmaxNonpositive: return "vmax_nonpositive";
        case FixedPointStatus::MaxIterExceeded: return "max_iter_exceeded";
        case FixedPointStatus::NotAFixedPoint: return "not_a_fixed_point";
    }
    return "unknown";
}

struct FixedPointTrace {
    FixedPointStatus status = FixedPointStatus::MaxIterExceeded;
    int iterations = 0;
    double final_step = 0.0;      ///< last sup-norm step
    double final_residual = 0.0;  ///< ‖r‖∞ at the final point (when evaluable)
    /// Iterate sequence including the start v^max (only if record_iterates).
    /// The iteration is componentwise non-increasing from v^max; tests
    /// assert this monotonicity on the recorded sequence.
    std::vector<Vector> iterates;
};

struct FixedPointResult {
    SolveStatus status = SolveStatus::Inconclusive;
    FixedPointTrace trace;
    std::optional<PFSolution> solution;
};

/// Monotone fixed-point iteration v ← g(v) started from the upper bound
/// v^max. Since g is monotone and v^max dominates every solution, the
/// iteration decreases componentwise and, when a solution exists, converges
/// to the componentwise-largest one (the dominant solution). Declares
/// Infeasible on a hard certificate only.
FixedPointResult solve_fixed_point(const RadialNetwork& network, const TransformedSystem& ts,
                                   const LineFlows& flows, const FixedPointConfig& config = {});

/// True when v is a subsolution: g(v) ≥ v − 1e-12 componentwise (the
/// iteration started above any solution stays above it; subsolutions
/// certify the lower side).
bool check_subsolution(const RadialNetwork& network, const TransformedSystem& ts,
                       const LineFlows& flows, const Vector& v);

}  // namespace radialflow
