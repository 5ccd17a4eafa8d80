"""First-order Lax-Friedrichs fast sweeping on the narrow band.

Gauss-Seidel updates run over the 8 lexicographic orderings of the interior
nodes; each directional pass is followed by a ghost-closure refresh.  The
per-node update is the standard LF sweeping formula

    v_new = [ H_min(z, Dv_c) + sum_i sig_i (v_i+ + v_i-) / (2h) ] / (sum_i sig_i / h)

with Dv_c the central-difference gradient and H_min the minimized
Hamiltonian  min_a { r + p . f B a }  over the tangent circle (isotropic
data reduces to  r - f ||(B p)_tan||).  The kept value is min(v_old, v_new),
so node values decrease monotonically from the "big" initialization.

Ghost closures use nonnegative (trilinear) weights while the solution front
is still sweeping through untouched regions -- cubic weights are partly
negative and could lock spurious undershoots under the keep-min rule -- and
switch to the tricubic closure for the final converged phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .band import GHOST, INTERIOR, NarrowBand, build_ghost_closures, refresh_ghosts
from .errors import ConfigError, NotConverged
from .hamiltonian import CurvatureAniso, HamiltonianModel, Isotropic


@dataclass
class SweepConfig:
    tol: float | None = None          # stop when the max kept decrease drops below
    max_sweeps: int = 500             # full 8-direction sweep sets (both phases)
    lf_sigma: np.ndarray | None = None  # per-axis viscosity override
    big: float | None = None          # initialization value
    sigma_scale: float = 1.0
    ghost_depth: float | None = None  # signed projection depth; default eps - 2*sqrt(3)h


@dataclass
class SolutionField:
    """Band-node values plus optional per-node minimizing controls."""

    band: NarrowBand
    v: np.ndarray
    argmin_control: np.ndarray | None = None
    info: dict = field(default_factory=dict)


# ----------------------------------------------------------------------
# numba kernels
# ----------------------------------------------------------------------


@njit(cache=True)
def _refresh_kernel(v, g_ids, g_sid, g_w):
    for g in range(g_ids.shape[0]):
        acc = 0.0
        for j in range(g_sid.shape[1]):
            acc += g_w[g, j] * v[g_sid[g, j]]
        v[g_ids[g]] = acc


@njit(cache=True, inline="always")
def _aniso_objective(theta, q1, q2, r, b, k1, k2):
    c = math.cos(theta)
    s = math.sin(theta)
    f = math.exp(-b * abs(k1 * c * c + k2 * s * s))
    return r + f * (q1 * c + q2 * s)


@njit(cache=True)
def _aniso_hmin(q1, q2, r, b, k1, k2, cosk, sink, frow):
    if b == 0.0:
        return r - math.sqrt(q1 * q1 + q2 * q2)
    nk = cosk.shape[0]
    best = 1e300
    kb = 0
    for k in range(nk):
        val = r + frow[k] * (cosk[k] * q1 + sink[k] * q2)
        if val < best:
            best = val
            kb = k
    dth = 2.0 * math.pi / nk
    a = kb * dth - dth
    bb = kb * dth + dth
    invphi = 0.6180339887498949
    c = bb - invphi * (bb - a)
    d = a + invphi * (bb - a)
    fc = _aniso_objective(c, q1, q2, r, b, k1, k2)
    fd = _aniso_objective(d, q1, q2, r, b, k1, k2)
    for _ in range(34):
        if fc < fd:
            bb = d
            d = c
            fd = fc
            c = bb - invphi * (bb - a)
            fc = _aniso_objective(c, q1, q2, r, b, k1, k2)
        else:
            a = c
            c = d
            fc = fd
            d = a + invphi * (bb - a)
            fd = _aniso_objective(d, q1, q2, r, b, k1, k2)
    mid = _aniso_objective(0.5 * (a + bb), q1, q2, r, b, k1, k2)
    if mid < best:
        best = mid
    return best


@njit(cache=True)
def _sweep_set(v, perms, nbr, w1, w2, rbar, fbar, aniso, b, kap1, kap2,
               cosk, sink, ftab, g_ids, g_sid, g_w, sig0, sig1, sig2, h, keepmin):
    inv2h = 0.5 / h
    den = (sig0 + sig1 + sig2) / h
    maxd = 0.0
    for s in range(perms.shape[0]):
        for m in range(perms.shape[1]):
            i = perms[s, m]
            vxm = v[nbr[i, 0]]
            vxp = v[nbr[i, 1]]
            vym = v[nbr[i, 2]]
            vyp = v[nbr[i, 3]]
            vzm = v[nbr[i, 4]]
            vzp = v[nbr[i, 5]]
            px = (vxp - vxm) * inv2h
            py = (vyp - vym) * inv2h
            pz = (vzp - vzm) * inv2h
            q1 = px * w1[i, 0] + py * w1[i, 1] + pz * w1[i, 2]
            q2 = px * w2[i, 0] + py * w2[i, 1] + pz * w2[i, 2]
            if aniso:
                hmin = _aniso_hmin(q1, q2, rbar[i], b, kap1[i], kap2[i], cosk, sink, ftab[i])
            else:
                hmin = rbar[i] - fbar[i] * math.sqrt(q1 * q1 + q2 * q2)
            cand = (hmin
                    + sig0 * (vxp + vxm) * inv2h
                    + sig1 * (vyp + vym) * inv2h
                    + sig2 * (vzp + vzm) * inv2h) / den
            if keepmin:
                if cand < v[i]:
                    diff = v[i] - cand
                    v[i] = cand
                    if diff > maxd:
                        maxd = diff
            else:
                diff = abs(v[i] - cand)
                v[i] = cand
                if diff > maxd:
                    maxd = diff
        _refresh_kernel(v, g_ids, g_sid, g_w)
    return maxd


@njit(cache=True)
def _argmin_angles(v, int_ids, nbr, w1, w2, rbar, b, kap1, kap2, cosk, sink, ftab, h, out):
    inv2h = 0.5 / h
    nk = cosk.shape[0]
    for m in range(int_ids.shape[0]):
        i = int_ids[m]
        px = (v[nbr[i, 1]] - v[nbr[i, 0]]) * inv2h
        py = (v[nbr[i, 3]] - v[nbr[i, 2]]) * inv2h
        pz = (v[nbr[i, 5]] - v[nbr[i, 4]]) * inv2h
        q1 = px * w1[i, 0] + py * w1[i, 1] + pz * w1[i, 2]
        q2 = px * w2[i, 0] + py * w2[i, 1] + pz * w2[i, 2]
        if b == 0.0:
            out[i] = math.atan2(-q2, -q1)
            continue
        best = 1e300
        kb = 0
        for k in range(nk):
            val = rbar[i] + ftab[i, k] * (cosk[k] * q1 + sink[k] * q2)
            if val < best:
                best = val
                kb = k
        dth = 2.0 * math.pi / nk
        a = kb * dth - dth
        bb = kb * dth + dth
        invphi = 0.6180339887498949
        c = bb - invphi * (bb - a)
        d = a + invphi * (bb - a)
        fc = _aniso_objective(c, q1, q2, rbar[i], b, kap1[i], kap2[i])
        fd = _aniso_objective(d, q1, q2, rbar[i], b, kap1[i], kap2[i])
        for _ in range(34):
            if fc < fd:
                bb = d
                d = c
                fd = fc
                c = bb - invphi * (bb - a)
                fc = _aniso_objective(c, q1, q2, rbar[i], b, kap1[i], kap2[i])
            else:
                a = c
                c = d
                fc = fd
                d = a + invphi * (bb - a)
                fd = _aniso_objective(d, q1, q2, rbar[i], b, kap1[i], kap2[i])
        theta = 0.5 * (a + bb)
        if _aniso_objective(theta, q1, q2, rbar[i], b, kap1[i], kap2[i]) > best:
            theta = kb * dth
        out[i] = theta


# ----------------------------------------------------------------------
# array preparation
# ----------------------------------------------------------------------


def _sweep_orderings(band: NarrowBand) -> np.ndarray:
    ids = band.interior_ids.astype(np.int64)
    ijk = band.ijk[ids].astype(np.int64)
    perms = np.empty((8, ids.shape[0]), dtype=np.int32)
    s = 0
    for si in (1, -1):
        for sj in (1, -1):
            for sk in (1, -1):
                order = np.lexsort((sk * ijk[:, 2], sj * ijk[:, 1], si * ijk[:, 0]))
                perms[s] = ids[order].astype(np.int32)
                s += 1
    return perms


def _weighted_tangents(band: NarrowBand) -> tuple[np.ndarray, np.ndarray]:
    # ghost rows are never read by node updates; keep them finite regardless
    s1 = np.where(band.recs.sigma1 > 0, band.recs.sigma1, 1.0)
    s2 = np.where(band.recs.sigma2 > 0, band.recs.sigma2, 1.0)
    w1 = band.recs.t1 / s1[:, None]
    w2 = band.recs.t2 / s2[:, None]
    return np.ascontiguousarray(w1), np.ascontiguousarray(w2)


def lf_viscosities(band: NarrowBand, f2: float, scale: float = 1.0) -> np.ndarray:
    """Per-axis bounds on |dH/dp_i| over the band:  F2 * max_z sqrt(w1_i^2 + w2_i^2)."""
    w1, w2 = _weighted_tangents(band)
    inside = band.cls != GHOST
    bound = np.sqrt(w1 * w1 + w2 * w2)[inside].max(axis=0)
    return scale * f2 * bound


def _model_arrays(band: NarrowBand, model: HamiltonianModel):
    cp = band.recs.cp
    rbar = np.ascontiguousarray(model.cost.r(cp), dtype=float)
    if isinstance(model.speed, Isotropic):
        fbar = np.ascontiguousarray(model.speed.f(cp), dtype=float)
        cosk = sink = np.zeros(1)
        ftab = np.zeros((1, 1))
        aniso, b = False, 0.0
    else:
        fbar = np.ones(1)
        thetas = model.disc.angles()
        cosk = np.cos(thetas)
        sink = np.sin(thetas)
        b = model.speed.b
        if b > 0.0:
            ka = (band.recs.kappa1[:, None] * cosk[None, :] ** 2
                  + band.recs.kappa2[:, None] * sink[None, :] ** 2)
            ftab = np.exp(-b * np.abs(ka))
        else:
            ftab = np.zeros((1, 1))
        aniso = True
    kap1 = np.ascontiguousarray(band.recs.kappa1, dtype=float)
    kap2 = np.ascontiguousarray(band.recs.kappa2, dtype=float)
    return rbar, fbar, aniso, b, kap1, kap2, cosk, sink, ftab


def default_big(band: NarrowBand, model: HamiltonianModel) -> float:
    """10 x (grid diameter) x R2 / F1: above any admissible value."""
    f1, _ = model.speed_bounds(band.recs)
    diam = float(np.linalg.norm((np.array(band.grid.dims) - 1) * band.h))
    return 10.0 * diam * model.cost.r2 / f1


def tangential_hamiltonian(band: NarrowBand, model: HamiltonianModel, i: int, p: np.ndarray) -> float:
    """H_min at band node ``i`` for gradient ``p`` (solver's reduction)."""
    rbar, fbar, aniso, b, kap1, kap2, cosk, sink, ftab = _model_arrays(band, model)
    w1, w2 = _weighted_tangents(band)
    q1 = float(p @ w1[i])
    q2 = float(p @ w2[i])
    if not aniso:
        return float(rbar[i] - fbar[i] * math.hypot(q1, q2))
    frow = ftab[i] if b > 0.0 else np.ones(cosk.shape[0])
    return float(_aniso_hmin(q1, q2, rbar[i], b, kap1[i], kap2[i], cosk, sink, frow))


def lf_node_update(i: int, v: np.ndarray, band: NarrowBand, model: HamiltonianModel,
                   sig: np.ndarray) -> float:
    """Candidate LF value for one interior node (caller keeps min(v_old, cand))."""
    nb = band.nbr1[i]
    if np.any(nb < 0):
        raise ConfigError("node update requires all six classified neighbors")
    h = band.h
    vm = v[nb[0::2]]
    vp = v[nb[1::2]]
    p = (vp - vm) / (2.0 * h)
    hmin = tangential_hamiltonian(band, model, i, p)
    num = hmin + float(np.sum(sig * (vp + vm) / (2.0 * h)))
    return num / float(np.sum(sig) / h)


# ----------------------------------------------------------------------
# driver
# ----------------------------------------------------------------------


def sweep_solve(band: NarrowBand, model: HamiltonianModel, cfg: SweepConfig | None = None) -> SolutionField:
    """Iterate LF sweeps to convergence; returns the solved band field.

    Raises
    ------
    NotConverged
        If the kept-value decrease never drops below tolerance within
        ``cfg.max_sweeps`` full sweep sets.
    """
    cfg = cfg or SweepConfig()
    if band.target_ids.size == 0:
        raise ConfigError("band has no target nodes; call discretize_target first")

    f1, f2 = model.speed_bounds(band.recs)
    big = cfg.big if cfg.big is not None else default_big(band, model)
    tol = cfg.tol if cfg.tol is not None else 1e-8 * big
    sig = np.asarray(cfg.lf_sigma, dtype=float) if cfg.lf_sigma is not None else \
        lf_viscosities(band, f2, cfg.sigma_scale)

    perms = _sweep_orderings(band)
    w1, w2 = _weighted_tangents(band)
    rbar, fbar, aniso, b, kap1, kap2, cosk, sink, ftab = _model_arrays(band, model)

    closures_lin = build_ghost_closures(band, depth=cfg.ghost_depth, order=1)
    closures_cub = build_ghost_closures(band, depth=cfg.ghost_depth, order=3)

    v = np.full(len(band), big, dtype=float)
    v[band.target_ids] = band.target_values

    history: list[float] = []
    sweeps = 0

    def run_phase(closure, budget: int, keepmin: bool) -> bool:
        nonlocal sweeps
        refresh_ghosts(band, v, closure)
        g_ids, g_sid, g_w = closure.ghost_ids, closure.stencil_ids, closure.weights
        for _ in range(budget):
            maxd = _sweep_set(v, perms, band.nbr1, w1, w2, rbar, fbar, aniso, b,
                              kap1, kap2, cosk, sink, ftab,
                              g_ids, g_sid, g_w, sig[0], sig[1], sig[2], band.h, keepmin)
            sweeps += 1
            history.append(maxd)
            if maxd < tol:
                return True
        return False

    # phase 1: keep-min front propagation under the nonnegative (trilinear)
    # closure, immune to transient interpolation undershoot; phase 2: plain
    # Gauss-Seidel polishing under the tricubic closure.
    if not run_phase(closures_lin, cfg.max_sweeps, keepmin=True):
        raise NotConverged(history[-1], sweeps)
    if not run_phase(closures_cub, cfg.max_sweeps - sweeps, keepmin=False):
        raise NotConverged(history[-1], sweeps)

    argmin_control = None
    if aniso:
        theta = np.zeros(len(band))
        _argmin_angles(v, band.interior_ids.astype(np.int64), band.nbr1, w1, w2, rbar,
                       b, kap1, kap2, cosk, sink,
                       ftab if b > 0.0 else np.ones((len(band), cosk.shape[0])),
                       band.h, theta)
        argmin_control = (np.cos(theta)[:, None] * band.recs.t1
                          + np.sin(theta)[:, None] * band.recs.t2)
        argmin_control[band.cls != INTERIOR] = 0.0

    info = {
        "sweeps": sweeps,
        "history": history,
        "tol": tol,
        "big": big,
        "lf_sigma": sig,
        "closure_depth": closures_cub.depth,
        "converged": True,
    }
    return SolutionField(band=band, v=v, argmin_control=argmin_control, info=info)


def residual(fieldobj: SolutionField, model: HamiltonianModel, exclude: np.ndarray | None = None) -> float:
    """max |H(z, Dv_c)| over interior nodes (diagnostic).

    ``exclude`` masks nodes (band indexing) left out of the maximum, e.g.
    around the cut locus where the solution is not smooth.
    """
    band = fieldobj.band
    v = fieldobj.v
    ids = band.interior_ids
    if exclude is not None:
        ids = ids[~exclude[ids]]
    nb = band.nbr1[ids]
    p = (v[nb[:, 1::2]] - v[nb[:, 0::2]]) / (2.0 * band.h)
    w1, w2 = _weighted_tangents(band)
    q1 = np.einsum("ma,ma->m", p, w1[ids])
    q2 = np.einsum("ma,ma->m", p, w2[ids])
    rbar, fbar, aniso, b, kap1, kap2, cosk, sink, ftab = _model_arrays(band, model)
    if not aniso:
        h_vals = rbar[ids] - fbar[ids] * np.hypot(q1, q2)
    elif b == 0.0:
        h_vals = rbar[ids] - np.hypot(q1, q2)
    else:
        vals = rbar[ids, None] + ftab[ids] * (cosk[None, :] * q1[:, None] + sink[None, :] * q2[:, None])
        h_vals = vals.min(axis=1)
    return float(np.max(np.abs(h_vals)))
