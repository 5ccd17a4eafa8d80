"""Error norms against exact surface solutions and convergence tables.

The band L1 estimator integrates |u(P z) - v| over the band with the
averaging kernel

    K_eps(d) = (1 + cos(pi d / eps)) / (2 eps),      J(z) = sigma1 sigma2,

whose product cancels the co-area volume growth of the band, so

    sum_band |u(P z_i) - v_i| K_eps(d_i) J(z_i) h^3  ~  integral_Gamma |u - u^h| dA.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .band import NarrowBand
from .errors import EmptySamples
from .interp import BandInterpolator
from .solver_sweep import SolutionField


@dataclass
class ErrorReport:
    l1: float
    linf: float
    h: float
    eps: float
    node_count: int

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(asdict(self), f, indent=2)
            f.write("\n")


def band_kernel(band: NarrowBand, ids: np.ndarray | None = None) -> np.ndarray:
    """Quadrature weights K_eps(d) * J * h^3 at the given in-band nodes."""
    if ids is None:
        ids = band.in_band_ids
    d = band.recs.dist[ids]
    k = (1.0 + np.cos(np.pi * d / band.eps)) / (2.0 * band.eps)
    j = band.recs.sigma1[ids] * band.recs.sigma2[ids]
    return k * j * band.h**3


def kernel_surface_area(band: NarrowBand) -> float:
    """sum K_eps J h^3 over the band: approximates the surface area."""
    return float(np.sum(band_kernel(band)))


def l1_band_error(fieldobj: SolutionField, exact, band: NarrowBand | None = None,
                  exclude: np.ndarray | None = None) -> float:
    """Band-integral L1 error of the field against ``exact`` (a function on the surface).

    ``exclude`` optionally masks band indices (e.g. a cut-locus neighborhood)
    from the sum; headline numbers use no mask.
    """
    band = band or fieldobj.band
    ids = band.in_band_ids
    if exclude is not None:
        ids = ids[~exclude[ids]]
    u = exact(band.recs.cp[ids])
    err = np.abs(u - fieldobj.v[ids])
    return float(np.sum(err * band_kernel(band, ids)))


def linf_surface_error(fieldobj: SolutionField, exact, samples: np.ndarray) -> float:
    """max |exact - v| over on-surface sample points, v tricubically interpolated."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] == 0:
        raise EmptySamples("no sample points given")
    interp = BandInterpolator(fieldobj.band, fieldobj.v, order=3)
    v = interp(samples)
    u = exact(samples)
    return float(np.max(np.abs(u - v)))


def sphere_exact_distance(center, r0: float, source):
    """Great-circle distance to ``source`` on the sphere, as a field on (M,3) points."""
    center = np.asarray(center, dtype=float)
    source = np.asarray(source, dtype=float)
    s_dir = (source - center) / r0

    def u(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        cosang = (pts - center) @ s_dir / r0
        return r0 * np.arccos(np.clip(cosang, -1.0, 1.0))

    return u


def convergence_order(e1: float, e2: float, h1: float, h2: float) -> float:
    return math.log(e1 / e2) / math.log(h1 / h2)


def convergence_table(reports: list[ErrorReport]) -> list[dict]:
    """Rows (h, eps, error, order) with order between consecutive refinements."""
    rows = []
    for m, rep in enumerate(reports):
        order = None
        if m > 0 and rep.l1 > 0 and reports[m - 1].l1 > 0:
            order = convergence_order(reports[m - 1].l1, rep.l1, reports[m - 1].h, rep.h)
        rows.append({"h": rep.h, "eps": rep.eps, "error": rep.l1, "order": order})
    return rows


def write_convergence_csv(rows: list[dict], path) -> None:
    with open(path, "w") as f:
        f.write("h,eps,error,order\n")
        for r in rows:
            order = "" if r["order"] is None else f"{r['order']:.6f}"
            f.write(f"{r['h']:.10g},{r['eps']:.10g},{r['error']:.10g},{order}\n")
