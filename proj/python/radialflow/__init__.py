"""AC power flow on radial networks with homogeneous lines.

Thin package wrapper around the compiled extension module.  The heavy
lifting lives in the C++ core; this package re-exports the bound types and
operations: case loading, the three equivalent solvers (monotone fixed
point, log-barrier relaxation, energy minimization), the closed-form and
multistart oracles, and the analysis helpers (Jacobians, sensitivity,
stability certification, continuation scans).
"""

from ._radialflow import *  # noqa: F401,F403
from ._radialflow import __doc__ as _core_doc  # noqa: F401

__version__ = "1.0.0"
