#pragma once

#include "radialflow/common.hpp"
#include "radialflow/homogeneous.hpp"
#include "radialflow/network.hpp"

#include <vector>

namespace radialflow {

/// All power-flow solutions found for one instance, dominant (componentwise
/// largest) first. `complete_claim` is true only for the 2-bus closed form,
/// where the quadratic argument is exhaustive; grid enumeration is heuristic.
struct SolutionSet {
    std::vector<Vector> solutions;
    bool complete_claim = false;
};

/// Exact solution set of the single-line instance B̃v − B̃√(v − s²) = q̃
/// (parent at v=1): squaring gives v² − (2t+1)v + (t² + s²) = 0 with
/// t = q̃/B̃; roots are kept only when they satisfy the un-squared equation
/// with the positive √ branch and v > s². Returns 0, 1 (coalesced) or 2
/// solutions.
SolutionSet two_bus_closed_form(double b_tilde, double s, double q_tilde);

/// Multistart damped Newton on the reactive residual system in v, started
/// from a grid_density^n grid over (ε, v^max + margin]. Results are polished,
/// validated to residual ≤ 1e-9 and deduplicated at 1e-8 relative.
/// Throws DimensionTooLargeError when n > 4.
SolutionSet enumerate_solutions(const RadialNetwork& network, const TransformedSystem& ts,
                                const LineFlows& flows, int grid_density);

/// Dense LU with partial pivoting; independent cross-check for the O(n) tree
/// solver. Throws SingularMatrixError when the system is not solvable to
/// working accuracy.
Vector dense_solve(const Matrix& matrix, const Vector& rhs);

}  // namespace radialflow
