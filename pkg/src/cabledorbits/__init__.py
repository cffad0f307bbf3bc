"""Numerical construction and certification of cabled-pair periodic orbits.

One body of a planar or spatial central configuration is replaced by a tight
binary; the resulting loop is refined to a critical point of a normalised
action functional in truncated Fourier space and certified by independent
equation-of-motion residuals and braid invariants.
"""

from .model import (
    CablingSetup,
    CaseC1,
    CaseC2,
    CaseC3,
    CollisionError,
    ConfigurationError,
    ConvergenceError,
    MassSystem,
    ParameterError,
)
from .central import (
    Configuration,
    SpectrumReport,
    lagrange_polygon,
    maxwell_configuration,
    nondegeneracy_report,
    solve_central_configuration,
)
from .loops import LoopState, SymmetryAction
from .action import ActionParams, action_total, gradient, scaled_gradient

__version__ = "0.1.0"
