"""Exception hierarchy shared across the package.

``BandHJBError`` marks numerical/geometric failures (CLI exit code 3);
``ConfigError`` marks bad user input (CLI exit code 2).
"""


class BandHJBError(Exception):
    """Base class for numerical and geometric failures."""


class ConfigError(Exception):
    """Invalid configuration or input files."""


# -- geometry -----------------------------------------------------------


class MedialAxisPoint(BandHJBError):
    """Query point sits on (or too close to) the medial axis of the surface."""


class DegenerateBand(BandHJBError):
    """A closest-point Jacobian singular value is non-positive."""


# -- point cloud --------------------------------------------------------


class DegenerateNeighborhood(BandHJBError):
    """Neighborhood covariance is rank deficient (collinear samples)."""


class NewtonDiverged(BandHJBError):
    """Closest-point Newton iteration failed to converge."""


# -- band ---------------------------------------------------------------


class BandTooThin(BandHJBError):
    """eps <= 2*sqrt(3)*h: finite-difference/closure stencils do not fit."""


class BandTooThick(BandHJBError):
    """eps exceeds the curvature bound 1/max|kappa| (or reaches the medial axis)."""


class StencilEscapesBand(BandHJBError):
    """A ghost-closure interpolation stencil leaves the discrete band."""


class EmptyTarget(BandHJBError):
    """No grid node qualified as a target node."""


# -- hamiltonian --------------------------------------------------------


class NotTangent(BandHJBError):
    """Control vector is not tangent to the surface frame."""


# -- solvers ------------------------------------------------------------


class NotConverged(BandHJBError):
    """Sweeping iteration hit max_sweeps before reaching tolerance."""

    def __init__(self, residual: float, sweeps: int):
        self.residual = residual
        self.sweeps = sweeps
        super().__init__(f"no convergence after {sweeps} sweeps (max update {residual:.3e})")


class NotSteady(BandHJBError):
    """Time marching hit max_steps before the steady-state tolerance."""

    def __init__(self, residual: float, steps: int):
        self.residual = residual
        self.steps = steps
        super().__init__(f"not steady after {steps} steps (residual {residual:.3e})")


# -- paths / metrics ----------------------------------------------------


class StagnatedPath(BandHJBError):
    """Characteristic tracing stalled away from the target (cut locus)."""


class PointOutsideBand(BandHJBError):
    """Query point has no complete interpolation stencil inside the band."""


class EmptySamples(BandHJBError):
    """An error norm was requested over an empty sample set."""
