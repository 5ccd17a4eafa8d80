"""Tensor-product Lagrange interpolation on the band's Cartesian lattice.

Cubic (4x4x4 stencil, O(h^4)) and linear (2x2x2, O(h^2)) variants share the
same layout: a base index per query point plus per-axis 1-D weights whose
tensor product gives the nodal weights.  Weights sum to one by construction.
"""

from __future__ import annotations

import numpy as np

from .errors import PointOutsideBand


def cubic_weights_1d(xi: np.ndarray) -> np.ndarray:
    """Cubic Lagrange weights on nodes {0,1,2,3} for coordinates ``xi`` in [1,2].

    Returns an (M, 4) array.
    """
    xi = np.asarray(xi, dtype=float)
    w = np.empty(xi.shape + (4,))
    w[..., 0] = -(xi - 1.0) * (xi - 2.0) * (xi - 3.0) / 6.0
    w[..., 1] = xi * (xi - 2.0) * (xi - 3.0) / 2.0
    w[..., 2] = -xi * (xi - 1.0) * (xi - 3.0) / 2.0
    w[..., 3] = xi * (xi - 1.0) * (xi - 2.0) / 6.0
    return w


def cubic_weights_deriv_1d(xi: np.ndarray) -> np.ndarray:
    """Derivative (w.r.t. xi) of `cubic_weights_1d`."""
    xi = np.asarray(xi, dtype=float)
    w = np.empty(xi.shape + (4,))
    w[..., 0] = -((xi - 2.0) * (xi - 3.0) + (xi - 1.0) * (xi - 3.0) + (xi - 1.0) * (xi - 2.0)) / 6.0
    w[..., 1] = ((xi - 2.0) * (xi - 3.0) + xi * (xi - 3.0) + xi * (xi - 2.0)) / 2.0
    w[..., 2] = -((xi - 1.0) * (xi - 3.0) + xi * (xi - 3.0) + xi * (xi - 1.0)) / 2.0
    w[..., 3] = ((xi - 1.0) * (xi - 2.0) + xi * (xi - 1.0) + xi * (xi - 2.0)) / 6.0
    return w


def linear_weights_1d(xi: np.ndarray) -> np.ndarray:
    """Linear weights on nodes {0,1} for coordinates ``xi`` in [0,1]."""
    xi = np.asarray(xi, dtype=float)
    w = np.empty(xi.shape + (2,))
    w[..., 0] = 1.0 - xi
    w[..., 1] = xi
    return w


def stencil_base(pts: np.ndarray, origin: np.ndarray, h: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Base lattice index and in-cell coordinate of each query point.

    For cubic stencils the base is chosen so the point lies in the central
    cell of the 4-node span (local coordinate in [1,2]); for linear stencils
    the point lies in [0,1] of the 2-node span.
    """
    t = (np.atleast_2d(pts) - origin) / h
    if order == 3:
        base = np.floor(t).astype(np.int64) - 1
        xi = t - base
    elif order == 1:
        base = np.floor(t).astype(np.int64)
        xi = t - base
    else:
        raise ValueError(f"unsupported interpolation order {order}")
    return base, xi


def stencil_weights(xi: np.ndarray, order: int, deriv_axis: int | None = None) -> np.ndarray:
    """Tensor-product weights, shape (M, k, k, k) with k = order + 1."""
    if order == 3:
        per_axis = [cubic_weights_1d(xi[:, a]) for a in range(3)]
        if deriv_axis is not None:
            per_axis[deriv_axis] = cubic_weights_deriv_1d(xi[:, deriv_axis])
    else:
        per_axis = [linear_weights_1d(xi[:, a]) for a in range(3)]
        if deriv_axis is not None:
            raise ValueError("derivative weights implemented for cubic only")
    return np.einsum("mi,mj,mk->mijk", per_axis[0], per_axis[1], per_axis[2])


def gather_stencil_ids(node_id: np.ndarray, base: np.ndarray, order: int) -> np.ndarray:
    """Band-node ids of each stencil node, shape (M, k^3); -1 where absent."""
    k = order + 1
    nx, ny, nz = node_id.shape
    off = np.arange(k)
    ii = base[:, 0:1] + off[None, :]
    jj = base[:, 1:2] + off[None, :]
    kk = base[:, 2:3] + off[None, :]
    inside = (
        (ii[:, :, None, None] >= 0) & (ii[:, :, None, None] < nx)
        & (jj[:, None, :, None] >= 0) & (jj[:, None, :, None] < ny)
        & (kk[:, None, None, :] >= 0) & (kk[:, None, None, :] < nz)
    )
    ii_c = np.clip(ii, 0, nx - 1)
    jj_c = np.clip(jj, 0, ny - 1)
    kk_c = np.clip(kk, 0, nz - 1)
    ids = node_id[ii_c[:, :, None, None], jj_c[:, None, :, None], kk_c[:, None, None, :]]
    ids = np.where(inside, ids, -1)
    return ids.reshape(base.shape[0], k * k * k)


class BandInterpolator:
    """Evaluate a node-valued band field (and its gradient) at arbitrary points."""

    def __init__(self, band, values: np.ndarray, order: int = 3, allow_ghosts: bool = True):
        self.band = band
        self.values = np.asarray(values, dtype=float)
        self.order = order
        if allow_ghosts:
            self._usable = np.ones(len(values), dtype=bool)
        else:
            self._usable = band.cls != 2

    def _prepare(self, pts: np.ndarray):
        base, xi = stencil_base(pts, self.band.grid.origin, self.band.grid.h, self.order)
        ids = gather_stencil_ids(self.band.node_id, base, self.order)
        ok = np.all((ids >= 0) & self._usable[np.clip(ids, 0, None)], axis=1)
        return base, xi, ids, ok

    def __call__(self, pts: np.ndarray, strict: bool = True):
        """Interpolated values; raises `PointOutsideBand` on incomplete stencils.

        With ``strict=False`` returns ``(values, ok_mask)`` and leaves NaN at
        uncovered points.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        base, xi, ids, ok = self._prepare(pts)
        k3 = ids.shape[1]
        w = stencil_weights(xi, self.order).reshape(-1, k3)
        safe = np.clip(ids, 0, None)
        vals = np.einsum("mk,mk->m", w, self.values[safe])
        vals[~ok] = np.nan
        if strict:
            if not np.all(ok):
                raise PointOutsideBand(f"{np.count_nonzero(~ok)} point(s) lack a full stencil")
            return vals
        return vals, ok

    def gradient(self, pts: np.ndarray, strict: bool = True):
        """Gradient of the interpolant (cubic order only)."""
        if self.order != 3:
            raise ValueError("gradient available for cubic interpolation only")
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        base, xi, ids, ok = self._prepare(pts)
        k3 = ids.shape[1]
        safe = np.clip(ids, 0, None)
        vals = self.values[safe]
        grad = np.empty((pts.shape[0], 3))
        for ax in range(3):
            w = stencil_weights(xi, 3, deriv_axis=ax).reshape(-1, k3)
            grad[:, ax] = np.einsum("mk,mk->m", w, vals) / self.band.grid.h
        grad[~ok] = np.nan
        if strict:
            if not np.all(ok):
                raise PointOutsideBand(f"{np.count_nonzero(~ok)} point(s) lack a full stencil")
            return grad
        return grad, ok
