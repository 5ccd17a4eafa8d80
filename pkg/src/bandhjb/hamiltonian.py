"""Running cost and speed models, control discretization, Hamiltonian evaluation.

Scalar fields (running cost r, isotropic speed f, exit penalty g) are
closures of the closest point: they are always evaluated at P(z), which
makes their extensions constant along surface normals by construction.

The extended Hamiltonian is  min_a { r(z,a) + p . f(z,a) B(z,mu) a }  with
controls a on the tangent circle of the frame.  For isotropic data the
minimum over the full control sphere has the closed form r - f ||B p||;
restricting to the tangent circle instead gives r - f ||(B p)_tan||.  Both
define the same viscosity solution (which is constant along normals); the
sweeping solver uses the tangential reduction so that the isotropic and
b=0 anisotropic routes coincide discretely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NotTangent
from .geometry import ClosestPointRecord, b_tensor

TANGENT_TOL = 1e-8


def _ones_field(pts: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(pts)
    return np.ones(pts.shape[0])


def _zeros_field(pts: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(pts)
    return np.zeros(pts.shape[0])


def constant_field(c: float) -> Callable[[np.ndarray], np.ndarray]:
    def f(pts: np.ndarray) -> np.ndarray:
        return np.full(np.atleast_2d(pts).shape[0], float(c))

    return f


@dataclass
class Isotropic:
    """Direction-independent speed f(x), bounded 0 < f1 <= f <= f2."""

    f: Callable[[np.ndarray], np.ndarray] = _ones_field
    f1: float = 1.0
    f2: float = 1.0

    def __post_init__(self):
        if not (0 < self.f1 <= self.f2):
            raise ValueError("need 0 < f1 <= f2")


@dataclass
class CurvatureAniso:
    """Curvature-minimizing speed f(x,a) = exp(-b |kappa_a(x)|), b >= 0."""

    b: float = 0.0

    def __post_init__(self):
        if self.b < 0:
            raise ValueError("b must be >= 0")


SpeedModel = Isotropic | CurvatureAniso


@dataclass
class CostModel:
    """Running cost r(x) (isotropic) and exit penalty g(x) on targets."""

    r: Callable[[np.ndarray], np.ndarray] = _ones_field
    g: Callable[[np.ndarray], np.ndarray] = _zeros_field
    r1: float = 1.0
    r2: float = 1.0

    def __post_init__(self):
        if not (0 < self.r1 <= self.r2):
            raise ValueError("need 0 < r1 <= r2")


@dataclass
class ControlDisc:
    """Uniform sampling of the tangent circle with n_theta angles."""

    n_theta: int = 32

    def __post_init__(self):
        if self.n_theta < 8:
            raise ValueError("n_theta must be >= 8")

    def angles(self) -> np.ndarray:
        return np.arange(self.n_theta) * (2.0 * np.pi / self.n_theta)


@dataclass
class HamiltonianModel:
    """Bundle of speed/cost models, control discretization and mu."""

    speed: SpeedModel = field(default_factory=Isotropic)
    cost: CostModel = field(default_factory=CostModel)
    disc: ControlDisc = field(default_factory=ControlDisc)
    mu: float = 1.0

    @property
    def is_isotropic(self) -> bool:
        return isinstance(self.speed, Isotropic)

    def speed_bounds(self, recs) -> tuple[float, float]:
        """(F1, F2) over the given band records."""
        if isinstance(self.speed, Isotropic):
            return self.speed.f1, self.speed.f2
        kmax = float(np.max(np.maximum(np.abs(recs.kappa1), np.abs(recs.kappa2))))
        return float(np.exp(-self.speed.b * kmax)), 1.0


def normal_curvature(rec: ClosestPointRecord, a: np.ndarray) -> float:
    """Normal curvature kappa_a = kappa1 (a.t1)^2 + kappa2 (a.t2)^2 for tangent a."""
    a = np.asarray(a, dtype=float)
    if abs(float(np.dot(a, rec.n))) > TANGENT_TOL:
        raise NotTangent(f"control has normal component {np.dot(a, rec.n):.2e}")
    c1 = float(np.dot(a, rec.t1))
    c2 = float(np.dot(a, rec.t2))
    return rec.kappa1 * c1 * c1 + rec.kappa2 * c2 * c2


def speed(model: SpeedModel, rec: ClosestPointRecord, a: np.ndarray) -> float:
    """Speed at the closest point of ``rec`` in direction ``a``."""
    if isinstance(model, Isotropic):
        return float(model.f(rec.cp[None, :])[0])
    return float(np.exp(-model.b * abs(normal_curvature(rec, a))))


def hamiltonian_value(
    rec: ClosestPointRecord,
    mu: float,
    p: np.ndarray,
    model: HamiltonianModel,
    disc: ControlDisc | None = None,
) -> tuple[float, np.ndarray]:
    """min_a { r + p . f B a } at one point, with the minimizing control.

    Isotropic speed: closed form r - f ||B p|| (minimum over the full control
    sphere), argmin the negated, normalized tangential part of B p.
    Anisotropic speed: exhaustive minimum over the sampled tangent circle,
    sharpened by bracketed golden-section refinement in the angle.
    """
    p = np.asarray(p, dtype=float)
    disc = disc or model.disc
    r_val = float(model.cost.r(rec.cp[None, :])[0])
    bp = b_tensor(rec, mu) @ p

    if isinstance(model.speed, Isotropic):
        f_val = float(model.speed.f(rec.cp[None, :])[0])
        value = r_val - f_val * float(np.linalg.norm(bp))
        bp_tan = bp - float(np.dot(bp, rec.n)) * rec.n
        nrm = float(np.linalg.norm(bp_tan))
        a_star = -bp_tan / nrm if nrm > 0 else rec.t1.copy()
        return value, a_star

    # anisotropic: objective over the tangent angle
    q1 = float(np.dot(p, rec.t1)) / rec.sigma1
    q2 = float(np.dot(p, rec.t2)) / rec.sigma2
    b = model.speed.b
    k1, k2 = rec.kappa1, rec.kappa2

    def obj(theta: float) -> float:
        c, s = np.cos(theta), np.sin(theta)
        f_val = np.exp(-b * abs(k1 * c * c + k2 * s * s))
        return r_val + f_val * (q1 * c + q2 * s)

    thetas = disc.angles()
    vals = np.array([obj(t) for t in thetas])
    k_best = int(np.argmin(vals))
    dtheta = 2.0 * np.pi / disc.n_theta
    lo = thetas[k_best] - dtheta
    hi = thetas[k_best] + dtheta
    theta_star, value = _golden_min(obj, lo, hi)
    if vals[k_best] < value:
        theta_star, value = thetas[k_best], float(vals[k_best])
    a_star = np.cos(theta_star) * rec.t1 + np.sin(theta_star) * rec.t2
    return value, a_star


def _golden_min(fn, lo: float, hi: float, iters: int = 40) -> tuple[float, float]:
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    x = 0.5 * (a + b)
    return x, float(fn(x))
