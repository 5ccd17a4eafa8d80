"""Characteristic extraction: geodesics, control replay, distance belts.

Isotropic geodesics integrate dy/dt = -grad v / |grad v| with Heun steps of
h/2, reprojecting onto the surface after every step; the gradient field is
formed from nodal central differences and interpolated tricubically.
Anisotropic paths replay the per-node minimizing controls stored by the
sweeping solver, angle-averaged in the local frame of the current point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .band import GHOST, NarrowBand
from .errors import ConfigError, PointOutsideBand, StagnatedPath
from .hamiltonian import HamiltonianModel, Isotropic, speed
from .interp import BandInterpolator
from .solver_sweep import SolutionField

REACHED_TARGET = "ReachedTarget"
MAX_STEPS = "MaxSteps"
LEFT_BAND = "LeftBand"


@dataclass
class PathConfig:
    step: float | None = None       # default h/2
    max_steps: int | None = None    # default 40 * diameter / step
    target_radius: float | None = None  # default 2h
    stagnation_factor: float = 1e-3


@dataclass
class SurfacePath:
    vertices: np.ndarray
    arc: np.ndarray
    values: np.ndarray
    terminated: str
    total_cost: float = np.nan

    def __len__(self) -> int:
        return self.vertices.shape[0]


def _nodal_gradients(band: NarrowBand, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference gradient at every band node with six classified neighbors."""
    ok = np.all(band.nbr1 >= 0, axis=1)
    grads = np.zeros((len(band), 3))
    nb = band.nbr1[ok]
    grads[ok] = (v[nb[:, 1::2]] - v[nb[:, 0::2]]) / (2.0 * band.h)
    return grads, ok


class _GradientSampler:
    def __init__(self, band: NarrowBand, v: np.ndarray):
        grads, ok = _nodal_gradients(band, v)
        self.interp = [BandInterpolator(band, grads[:, ax], order=3) for ax in range(3)]
        self.ok = ok
        self.band = band
        # usable stencils must avoid nodes without gradients
        for itp in self.interp:
            itp._usable &= ok

    def __call__(self, y: np.ndarray) -> np.ndarray:
        g = np.empty(3)
        for ax in range(3):
            g[ax] = self.interp[ax](y[None, :])[0]
        return g


def _resolve(cfg: PathConfig, band: NarrowBand) -> tuple[float, int, float]:
    step = cfg.step if cfg.step is not None else 0.5 * band.h
    diam = float(np.linalg.norm((np.array(band.grid.dims) - 1) * band.h))
    max_steps = cfg.max_steps if cfg.max_steps is not None else int(40 * diam / step)
    radius = cfg.target_radius if cfg.target_radius is not None else 2.0 * band.h
    return step, max_steps, radius


def _near_target(band: NarrowBand, y: np.ndarray, radius: float) -> bool:
    tgt = band.recs.cp[band.target_ids]
    return bool(np.min(np.linalg.norm(tgt - y, axis=1)) <= radius)


def trace_isotropic(fieldobj: SolutionField, start, cfg: PathConfig | None = None) -> SurfacePath:
    """Steepest-descent geodesic from ``start`` to the target set.

    Raises
    ------
    StagnatedPath
        If the step displacement collapses away from the target (vanishing
        gradient at the cut locus).
    """
    band = fieldobj.band
    cfg = cfg or PathConfig()
    step, max_steps, radius = _resolve(cfg, band)
    grad = _GradientSampler(band, fieldobj.v)
    vinterp = BandInterpolator(band, fieldobj.v, order=3)
    provider = band.provider

    y = provider.records(np.asarray(start, dtype=float)[None, :]).cp[0]
    verts = [y.copy()]
    arcs = [0.0]
    vals = [float(vinterp(y[None, :])[0])]
    term = MAX_STEPS

    def direction(pt: np.ndarray) -> np.ndarray:
        g = grad(pt)
        nrm = np.linalg.norm(g)
        if not np.isfinite(nrm) or nrm == 0.0:
            raise StagnatedPath("vanishing gradient")
        return -g / nrm

    for _ in range(max_steps):
        if _near_target(band, y, radius):
            term = REACHED_TARGET
            break
        try:
            d1 = direction(y)
            y_mid = y + step * d1
            d2 = direction(y_mid)
        except PointOutsideBand:
            term = LEFT_BAND
            break
        y_new = y + 0.5 * step * (d1 + d2)
        y_new = provider.records(y_new[None, :]).cp[0]
        moved = float(np.linalg.norm(y_new - y))
        if moved < cfg.stagnation_factor * band.h:
            raise StagnatedPath(f"path stalled after {len(verts)} vertices")
        arcs.append(arcs[-1] + moved)
        y = y_new
        verts.append(y.copy())
        vals.append(float(vinterp(y[None, :], strict=False)[0][0]))

    vertices = np.asarray(verts)
    return SurfacePath(vertices=vertices, arc=np.asarray(arcs), values=np.asarray(vals),
                       terminated=term, total_cost=float(arcs[-1]))


def _angle_average_control(band: NarrowBand, controls: np.ndarray, rec, y: np.ndarray) -> np.ndarray:
    """Inverse-distance average of cell-corner controls, done in angle space."""
    h = band.h
    base = np.floor((y - band.grid.origin) / h).astype(int)
    thetas, weights = [], []
    for di in (0, 1):
        for dj in (0, 1):
            for dk in (0, 1):
                idx = (base[0] + di, base[1] + dj, base[2] + dk)
                if any(q < 0 or q >= band.grid.dims[ax] for ax, q in enumerate(idx)):
                    continue
                node = band.node_id[idx]
                if node < 0 or band.cls[node] == GHOST:
                    continue
                a = controls[node]
                if not np.any(a):
                    continue
                th = np.arctan2(float(a @ rec.t2), float(a @ rec.t1))
                if thetas:
                    # unwrap onto the branch of the first corner
                    th += 2.0 * np.pi * np.round((thetas[0] - th) / (2.0 * np.pi))
                w = 1.0 / max(float(np.linalg.norm(band.pos[node] - y)), 1e-12)
                thetas.append(th)
                weights.append(w)
    if not thetas:
        raise PointOutsideBand("no stored controls around the path point")
    theta = float(np.average(thetas, weights=weights))
    return np.cos(theta) * rec.t1 + np.sin(theta) * rec.t2


def trace_anisotropic(fieldobj: SolutionField, start, model: HamiltonianModel,
                      cfg: PathConfig | None = None) -> SurfacePath:
    """Replay the stored minimizing controls from ``start`` to the target set.

    Advances along the interpolated control direction with steps of h/2
    (unit steps in space; the speed enters the accumulated cost), keeping
    the path on the surface by reprojection.
    """
    band = fieldobj.band
    if fieldobj.argmin_control is None:
        raise ConfigError("field has no stored minimizing controls (anisotropic solve required)")
    cfg = cfg or PathConfig()
    step, max_steps, radius = _resolve(cfg, band)
    vinterp = BandInterpolator(band, fieldobj.v, order=3)
    provider = band.provider

    recs0 = provider.records(np.asarray(start, dtype=float)[None, :])
    y = recs0.cp[0]
    rec = recs0.record(0)
    verts = [y.copy()]
    arcs = [0.0]
    vals = [float(vinterp(y[None, :], strict=False)[0][0])]
    cost = 0.0
    term = MAX_STEPS

    for _ in range(max_steps):
        if _near_target(band, y, radius):
            term = REACHED_TARGET
            break
        try:
            a1 = _angle_average_control(band, fieldobj.argmin_control, rec, y)
            ym = provider.records((y + step * a1)[None, :])
            rec_m = ym.record(0)
            a2 = _angle_average_control(band, fieldobj.argmin_control, rec_m, ym.cp[0])
        except PointOutsideBand:
            term = LEFT_BAND
            break
        a_avg = a1 + a2
        nrm = float(np.linalg.norm(a_avg))
        if nrm < 1e-12:
            raise StagnatedPath("opposing controls cancel")
        a_avg /= nrm
        y_new_recs = provider.records((y + step * a_avg)[None, :])
        y_new = y_new_recs.cp[0]
        moved = float(np.linalg.norm(y_new - y))
        if moved < cfg.stagnation_factor * band.h:
            raise StagnatedPath(f"path stalled after {len(verts)} vertices")
        f_here = speed(model.speed, rec, a_avg if isinstance(model.speed, Isotropic) else _tangentialize(a_avg, rec))
        cost += moved / max(f_here, 1e-12)
        rec = y_new_recs.record(0)
        y = y_new
        verts.append(y.copy())
        arcs.append(arcs[-1] + moved)
        vals.append(float(vinterp(y[None, :], strict=False)[0][0]))

    return SurfacePath(vertices=np.asarray(verts), arc=np.asarray(arcs),
                       values=np.asarray(vals), terminated=term, total_cost=cost)


def _tangentialize(a: np.ndarray, rec) -> np.ndarray:
    at = a - float(a @ rec.n) * rec.n
    nrm = np.linalg.norm(at)
    return at / nrm if nrm > 0 else rec.t1


def belt_sort(cloud_points: np.ndarray, fieldobj: SolutionField,
              intervals: list[tuple[float, float]]) -> np.ndarray:
    """Assign each cloud point the index of the first interval [lo, hi) holding
    its interpolated field value; -1 where no interval matches.

    Raises
    ------
    PointOutsideBand
        If a point has no complete interpolation stencil in the band.
    """
    pts = np.atleast_2d(np.asarray(cloud_points, dtype=float))
    interp = BandInterpolator(fieldobj.band, fieldobj.v, order=3)
    vals = interp(pts)
    labels = np.full(pts.shape[0], -1, dtype=int)
    for m, (lo, hi) in enumerate(intervals):
        if lo >= hi:
            continue
        hit = (labels < 0) & (vals >= lo) & (vals < hi)
        labels[hit] = m
    return labels


# -- exports -------------------------------------------------------------


def write_path_csv(path_obj: SurfacePath, path) -> None:
    with open(path, "w") as f:
        f.write("x,y,z,arc,v\n")
        for m in range(len(path_obj)):
            x, y, z = path_obj.vertices[m]
            f.write(f"{x:.17g},{y:.17g},{z:.17g},{path_obj.arc[m]:.17g},{path_obj.values[m]:.17g}\n")


def write_path_ply(path_obj: SurfacePath, path) -> None:
    n = len(path_obj)
    with open(path, "w") as f:
        f.write("ply\nformat ascii 1.0\n")
        f.write(f"element vertex {n}\n")
        f.write("property float x\nproperty float y\nproperty float z\n")
        f.write(f"element edge {max(n - 1, 0)}\n")
        f.write("property int vertex1\nproperty int vertex2\nend_header\n")
        for m in range(n):
            x, y, z = path_obj.vertices[m]
            f.write(f"{x:.9g} {y:.9g} {z:.9g}\n")
        for m in range(n - 1):
            f.write(f"{m} {m + 1}\n")


def write_belts_csv(cloud_points: np.ndarray, labels: np.ndarray, path) -> None:
    with open(path, "w") as f:
        f.write("x,y,z,belt\n")
        for m in range(cloud_points.shape[0]):
            x, y, z = cloud_points[m]
            f.write(f"{x:.17g},{y:.17g},{z:.17g},{labels[m]}\n")
