"""Analytic surfaces, closest-point maps, local frames and projection tensors.

Every point near a closed surface carries a geometric payload: its closest
point on the surface, the signed distance (positive outside the enclosed
volume), an orthonormal frame (t1, t2, n) aligned with the principal
directions of the parallel surface through the point, the singular values
(sigma1, sigma2) of the closest-point Jacobian and the principal curvatures
(kappa1, kappa2) of that parallel surface.  The identities

    sigma_i = 1 - dist * kappa_i,        P' = sigma1 t1 t1^T + sigma2 t2 t2^T

hold exactly for the analytic surfaces implemented here.

Sign conventions: the normal points outward, curvatures are positive for a
sphere seen from outside, so sigma_i < 1 outside and > 1 inside.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBand, MedialAxisPoint

_MEDIAL_TOL = 1e-9


@dataclass(frozen=True)
class ClosestPointRecord:
    """Geometric payload of a single point near a surface."""

    cp: np.ndarray
    dist: float
    t1: np.ndarray
    t2: np.ndarray
    n: np.ndarray
    sigma1: float
    sigma2: float
    kappa1: float
    kappa2: float


class CPRecords:
    """Struct-of-arrays form of `ClosestPointRecord` for M points."""

    __slots__ = ("cp", "dist", "t1", "t2", "n", "sigma1", "sigma2", "kappa1", "kappa2")

    def __init__(self, cp, dist, t1, t2, n, sigma1, sigma2, kappa1, kappa2):
        self.cp = cp
        self.dist = dist
        self.t1 = t1
        self.t2 = t2
        self.n = n
        self.sigma1 = sigma1
        self.sigma2 = sigma2
        self.kappa1 = kappa1
        self.kappa2 = kappa2

    def __len__(self) -> int:
        return self.dist.shape[0]

    def record(self, i: int) -> ClosestPointRecord:
        return ClosestPointRecord(
            cp=self.cp[i].copy(),
            dist=float(self.dist[i]),
            t1=self.t1[i].copy(),
            t2=self.t2[i].copy(),
            n=self.n[i].copy(),
            sigma1=float(self.sigma1[i]),
            sigma2=float(self.sigma2[i]),
            kappa1=float(self.kappa1[i]),
            kappa2=float(self.kappa2[i]),
        )


@dataclass(frozen=True)
class Sphere:
    """Sphere of radius ``radius`` centered at ``center``; interior is the ball."""

    center: tuple[float, float, float]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("sphere radius must be positive")

    def bounding_radius(self) -> float:
        return self.radius


@dataclass(frozen=True)
class Torus:
    """Torus with major radius ``major`` and tube radius ``minor``, axis along z."""

    center: tuple[float, float, float]
    major: float
    minor: float

    def __post_init__(self):
        if not (self.major > self.minor > 0):
            raise ValueError("torus requires major > minor > 0")

    def bounding_radius(self) -> float:
        return self.major + self.minor


AnalyticSurface = Sphere | Torus


def _deterministic_tangent_pair(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal tangent pair chosen from the smallest-component axis of n.

    The choice is arbitrary on umbilic surfaces; picking the axis with the
    smallest |n| component makes frames reproducible across runs.
    """
    n = np.atleast_2d(n)
    m = n.shape[0]
    axis = np.argmin(np.abs(n), axis=1)
    e = np.zeros((m, 3))
    e[np.arange(m), axis] = 1.0
    t1 = np.cross(n, e)
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    t2 = np.cross(n, t1)
    return t1, t2


def sphere_distance(surface: Sphere, pts: np.ndarray) -> np.ndarray:
    q = pts - np.asarray(surface.center)
    return np.linalg.norm(q, axis=-1) - surface.radius


def torus_distance(surface: Torus, pts: np.ndarray) -> np.ndarray:
    q = pts - np.asarray(surface.center)
    rho_xy = np.hypot(q[..., 0], q[..., 1])
    return np.hypot(rho_xy - surface.major, q[..., 2]) - surface.minor


def surface_distance(surface: AnalyticSurface, pts: np.ndarray) -> np.ndarray:
    """Signed distance, vectorized over the leading axes of ``pts``."""
    if isinstance(surface, Sphere):
        return sphere_distance(surface, pts)
    return torus_distance(surface, pts)


def sphere_records(surface: Sphere, pts: np.ndarray) -> CPRecords:
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    c = np.asarray(surface.center, dtype=float)
    q = pts - c
    r = np.linalg.norm(q, axis=1)
    if np.any(r < _MEDIAL_TOL):
        raise MedialAxisPoint("point coincides with the sphere center")
    n = q / r[:, None]
    cp = c + surface.radius * n
    dist = r - surface.radius
    kappa = 1.0 / r
    sigma = surface.radius / r
    t1, t2 = _deterministic_tangent_pair(n)
    return CPRecords(cp, dist, t1, t2, n, sigma.copy(), sigma.copy(), kappa.copy(), kappa.copy())


def torus_records(surface: Torus, pts: np.ndarray) -> CPRecords:
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    c = np.asarray(surface.center, dtype=float)
    big_r, rho = surface.major, surface.minor
    q = pts - c
    rho_xy = np.hypot(q[:, 0], q[:, 1])
    if np.any(rho_xy < _MEDIAL_TOL):
        raise MedialAxisPoint("point lies on the torus axis")
    # radial unit vector in the xy-plane and the nearest center-circle point
    u = np.zeros_like(q)
    u[:, 0] = q[:, 0] / rho_xy
    u[:, 1] = q[:, 1] / rho_xy
    ring = c + big_r * u
    m = pts - ring
    s = np.linalg.norm(m, axis=1)
    if np.any(s < _MEDIAL_TOL):
        raise MedialAxisPoint("point lies on the torus center circle")
    n = m / s[:, None]
    cp = ring + rho * n
    dist = s - rho
    # tube angle: n = cos(theta) u + sin(theta) z
    cos_t = np.einsum("ij,ij->i", n, u)
    sin_t = n[:, 2]
    # principal directions of the parallel torus through each point
    t1 = -sin_t[:, None] * u
    t1[:, 2] += cos_t
    t2 = np.zeros_like(q)
    t2[:, 0] = -u[:, 1]
    t2[:, 1] = u[:, 0]
    kappa1 = 1.0 / s
    denom = big_r + s * cos_t
    if np.any(np.abs(denom) < _MEDIAL_TOL):
        raise MedialAxisPoint("point lies on the torus axis")
    kappa2 = cos_t / denom
    sigma1 = rho / s
    sigma2 = (big_r + rho * cos_t) / denom
    return CPRecords(cp, dist, t1, t2, n, sigma1, sigma2, kappa1, kappa2)


def surface_records(surface: AnalyticSurface, pts: np.ndarray) -> CPRecords:
    """Closest-point records, vectorized over an (M, 3) array of points."""
    if isinstance(surface, Sphere):
        return sphere_records(surface, pts)
    return torus_records(surface, pts)


def closest_point(surface: AnalyticSurface, z) -> ClosestPointRecord:
    """Closest-point record of a single point ``z`` near ``surface``.

    Raises
    ------
    MedialAxisPoint
        If ``z`` is within 1e-9 of the sphere center / torus axis or center
        circle, where the closest-point map is ill defined.
    """
    recs = surface_records(surface, np.asarray(z, dtype=float)[None, :])
    return recs.record(0)


def b_tensor(rec: ClosestPointRecord, mu: float) -> np.ndarray:
    """Projection tensor  B = t1 t1^T/sigma1 + t2 t2^T/sigma2 + mu n n^T.

    B rescales tangential motion so that equal controls cost equal time on
    every parallel surface; its eigenpairs are exactly (1/sigma1, t1),
    (1/sigma2, t2) and (mu, n).
    """
    if rec.sigma1 <= 0 or rec.sigma2 <= 0:
        raise DegenerateBand(
            f"non-positive singular value (sigma1={rec.sigma1:.3e}, sigma2={rec.sigma2:.3e})"
        )
    return (
        np.outer(rec.t1, rec.t1) / rec.sigma1
        + np.outer(rec.t2, rec.t2) / rec.sigma2
        + mu * np.outer(rec.n, rec.n)
    )


def projection_jacobian(rec: ClosestPointRecord) -> np.ndarray:
    """Jacobian of the closest-point map:  sigma1 t1 t1^T + sigma2 t2 t2^T."""
    return rec.sigma1 * np.outer(rec.t1, rec.t1) + rec.sigma2 * np.outer(rec.t2, rec.t2)


class AnalyticProvider:
    """Closest-point provider backed by a closed-form surface."""

    def __init__(self, surface: AnalyticSurface):
        self.surface = surface

    def coarse_distance(self, pts: np.ndarray) -> np.ndarray:
        return surface_distance(self.surface, pts)

    def records(self, pts: np.ndarray) -> CPRecords:
        return surface_records(self.surface, pts)

    def record(self, z) -> ClosestPointRecord:
        return closest_point(self.surface, z)

    def max_abs_curvature(self, recs: CPRecords) -> float:
        return float(np.max(np.maximum(np.abs(recs.kappa1), np.abs(recs.kappa2))))
