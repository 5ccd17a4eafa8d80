"""Cartesian narrow band: node classification, ghost closures, target sets.

The computational domain is the set of grid nodes with |d| < eps around the
surface.  Finite-difference stencils of interior nodes reach outside that
set; those out-of-band nodes are "ghosts" and receive values by projecting
them back toward the surface along the normal and interpolating interior
values around the projected point.  Projection depth and interpolation
order are configurable (cubic 4^3 stencils by default, linear 2^3 as a
monotone fallback used early in the sweeping transient).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import BandTooThick, BandTooThin, ConfigError, EmptyTarget, MedialAxisPoint, StencilEscapesBand
from .geometry import CPRecords
from .interp import gather_stencil_ids, stencil_base, stencil_weights

SQRT3 = np.sqrt(3.0)

INTERIOR, TARGET, GHOST = 0, 1, 2
CLASS_NAMES = {INTERIOR: "interior", TARGET: "target", GHOST: "ghost"}


@dataclass(frozen=True)
class CartesianGrid:
    """Uniform isotropic grid: node (i,j,k) sits at origin + (i,j,k)*h."""

    origin: np.ndarray
    h: float
    dims: tuple[int, int, int]

    def __post_init__(self):
        if self.h <= 0:
            raise ConfigError("grid spacing must be positive")
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))

    def positions(self, ijk: np.ndarray) -> np.ndarray:
        return self.origin + np.asarray(ijk, dtype=float) * self.h

    @property
    def node_count(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz


def unit_cube_grid(h: float) -> CartesianGrid:
    """N^3 grid over [0,1]^3 with h = 1/(N-1)."""
    n = int(round(1.0 / h)) + 1
    if abs((n - 1) * h - 1.0) > 1e-9:
        raise ConfigError(f"h={h} does not evenly divide the unit cube")
    return CartesianGrid(origin=np.zeros(3), h=h, dims=(n, n, n))


def covering_grid(center, bounding_radius: float, eps: float, h: float, pad_cells: int = 4) -> CartesianGrid:
    """Smallest lattice-aligned grid containing the band plus stencil padding."""
    center = np.asarray(center, dtype=float)
    lo = center - bounding_radius - eps - pad_cells * h
    hi = center + bounding_radius + eps + pad_cells * h
    i_lo = np.floor(lo / h).astype(int)
    i_hi = np.ceil(hi / h).astype(int)
    dims = tuple(int(d) for d in (i_hi - i_lo + 1))
    return CartesianGrid(origin=i_lo * h, h=h, dims=dims)


@dataclass
class GhostClosure:
    """Closure of one ghost node: projected point, stencil and weights."""

    ghost_index: int
    z_alpha: np.ndarray
    stencil: np.ndarray
    weights: np.ndarray


class ClosureSet:
    """Array-of-structs view of all ghost closures (order: 1 linear, 3 cubic)."""

    def __init__(self, ghost_ids, stencil_ids, weights, z_alpha, order, depth):
        self.ghost_ids = ghost_ids
        self.stencil_ids = stencil_ids
        self.weights = weights
        self.z_alpha = z_alpha
        self.order = order
        self.depth = depth

    def __len__(self):
        return self.ghost_ids.shape[0]

    def __getitem__(self, g) -> GhostClosure:
        return GhostClosure(
            ghost_index=int(self.ghost_ids[g]),
            z_alpha=self.z_alpha[g].copy(),
            stencil=self.stencil_ids[g].copy(),
            weights=self.weights[g].copy(),
        )


@dataclass
class NarrowBand:
    """Band nodes (interior + target + ghost) with per-node geometry."""

    grid: CartesianGrid
    eps: float
    stencil_radius: int
    provider: object
    ijk: np.ndarray          # (n, 3) int32 lattice indices, lexicographically sorted
    pos: np.ndarray          # (n, 3) node positions
    cls: np.ndarray          # (n,) uint8 in {INTERIOR, TARGET, GHOST}
    recs: CPRecords          # per-node geometry
    node_id: np.ndarray      # dense (nx, ny, nz) int32 map, -1 off band
    nbr1: np.ndarray         # (n, 6) ids at offsets (-x, +x, -y, +y, -z, +z); -1 absent
    nbr2: np.ndarray | None  # same at distance 2 (built when stencil_radius >= 2)
    max_abs_kappa: float
    target_ids: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    target_values: np.ndarray = field(default_factory=lambda: np.empty(0))
    sources: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))

    def __len__(self) -> int:
        return self.ijk.shape[0]

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def interior_ids(self) -> np.ndarray:
        return np.flatnonzero(self.cls == INTERIOR)

    @property
    def ghost_ids(self) -> np.ndarray:
        return np.flatnonzero(self.cls == GHOST)

    @property
    def in_band_ids(self) -> np.ndarray:
        return np.flatnonzero(self.cls != GHOST)

    def node_count_in_band(self) -> int:
        return int(np.count_nonzero(self.cls != GHOST))


def _axis_dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    """Union of +-1..radius shifts of ``mask`` along each axis."""
    out = mask.copy()
    for ax in range(3):
        for r in range(1, radius + 1):
            sl_src = [slice(None)] * 3
            sl_dst = [slice(None)] * 3
            sl_src[ax] = slice(r, None)
            sl_dst[ax] = slice(None, -r)
            out[tuple(sl_dst)] |= mask[tuple(sl_src)]
            sl_src[ax] = slice(None, -r)
            sl_dst[ax] = slice(r, None)
            out[tuple(sl_dst)] |= mask[tuple(sl_src)]
    return out


def _distance_grid(provider, grid: CartesianGrid) -> np.ndarray:
    if hasattr(provider, "distance_grid"):
        return provider.distance_grid(grid)
    nx, ny, nz = grid.dims
    d = np.empty(grid.dims)
    jj, kk = np.meshgrid(np.arange(ny), np.arange(nz), indexing="ij")
    chunk = max(1, int(4e6 // (ny * nz)))
    for i0 in range(0, nx, chunk):
        i1 = min(nx, i0 + chunk)
        ii = np.arange(i0, i1)
        pts = np.empty(((i1 - i0), ny, nz, 3))
        pts[..., 0] = ii[:, None, None] * grid.h + grid.origin[0]
        pts[..., 1] = jj[None] * grid.h + grid.origin[1]
        pts[..., 2] = kk[None] * grid.h + grid.origin[2]
        d[i0:i1] = provider.coarse_distance(pts.reshape(-1, 3)).reshape(i1 - i0, ny, nz)
    return d


def _neighbor_table(node_id: np.ndarray, ijk: np.ndarray, step: int) -> np.ndarray:
    n = ijk.shape[0]
    nbr = np.full((n, 6), -1, dtype=np.int32)
    dims = node_id.shape
    col = 0
    for ax in range(3):
        for s in (-step, step):
            q = ijk.copy()
            q[:, ax] += s
            ok = (q[:, ax] >= 0) & (q[:, ax] < dims[ax])
            nbr[ok, col] = node_id[q[ok, 0], q[ok, 1], q[ok, 2]]
            col += 1
    return nbr


def build_band(grid: CartesianGrid, provider, eps: float, stencil_radius: int = 1) -> NarrowBand:
    """Extract the discrete band {|d| < eps} and its ghost layer.

    Parameters
    ----------
    provider
        Closest-point provider exposing ``coarse_distance`` (full-grid signed
        distance) and ``records`` (per-point geometry); analytic surfaces and
        point clouds both qualify.
    eps
        Band half-thickness; must satisfy 2*sqrt(3)*h < eps < 1/max|kappa|.
    stencil_radius
        Ghost layer depth in cells per axis: 1 for the first-order scheme,
        2 for WENO3.
    """
    h = grid.h
    if eps <= 2.0 * SQRT3 * h:
        raise BandTooThin(f"eps={eps:.4g} <= 2*sqrt(3)*h={2 * SQRT3 * h:.4g}")

    if hasattr(provider, "set_band_thickness"):
        provider.set_band_thickness(eps)
    d_grid = _distance_grid(provider, grid)
    in_band = np.abs(d_grid) < eps
    if not np.any(in_band):
        raise ConfigError("band is empty: no grid node within eps of the surface")
    ghost = _axis_dilate(in_band, stencil_radius) & ~in_band
    member = in_band | ghost

    # every in-band node must have its whole stencil inside the grid box
    idx_in = np.argwhere(in_band)
    for ax in range(3):
        if idx_in[:, ax].min() < stencil_radius or idx_in[:, ax].max() >= grid.dims[ax] - stencil_radius:
            raise ConfigError("grid does not cover the band (increase the grid box)")

    ijk = np.argwhere(member).astype(np.int32)  # argwhere is lexicographic
    node_id = np.full(grid.dims, -1, dtype=np.int32)
    node_id[member] = np.arange(ijk.shape[0], dtype=np.int32)
    pos = grid.positions(ijk)

    try:
        recs = provider.records(pos)
    except MedialAxisPoint as exc:
        raise BandTooThick(f"band reaches the medial axis: {exc}") from exc

    bad = ~np.isfinite(recs.dist)
    if np.any(bad):
        raise BandTooThick(f"closest-point estimation failed at {np.count_nonzero(bad)} band nodes")
    cls = np.where(ghost[tuple(ijk.T)], GHOST, INTERIOR).astype(np.uint8)

    # curvature/thickness bounds apply to the band itself, not the ghost halo
    inside = cls != GHOST
    if np.any(recs.sigma1[inside] <= 0) or np.any(recs.sigma2[inside] <= 0):
        raise BandTooThick("non-positive closest-point singular value inside the band")
    max_kappa = float(np.max(np.maximum(np.abs(recs.kappa1[inside]), np.abs(recs.kappa2[inside]))))
    if eps * max_kappa >= 1.0:
        raise BandTooThick(f"eps={eps:.4g} >= 1/max|kappa|={1.0 / max_kappa:.4g}")

    nbr1 = _neighbor_table(node_id, ijk, 1)
    nbr2 = _neighbor_table(node_id, ijk, 2) if stencil_radius >= 2 else None
    interior = cls == INTERIOR
    if not np.all(nbr1[interior] >= 0):
        raise RuntimeError("internal error: interior node with unclassified neighbor")
    if nbr2 is not None and not np.all(nbr2[interior] >= 0):
        raise RuntimeError("internal error: interior node with unclassified 2-neighbor")

    return NarrowBand(
        grid=grid,
        eps=eps,
        stencil_radius=stencil_radius,
        provider=provider,
        ijk=ijk,
        pos=pos,
        cls=cls,
        recs=recs,
        node_id=node_id,
        nbr1=nbr1,
        nbr2=nbr2,
        max_abs_kappa=max_kappa,
    )


def default_ghost_depth(band: NarrowBand) -> float:
    """Projection depth eps - 2*sqrt(3)*h: as shallow as the 4^3 stencil allows."""
    return band.eps - 2.0 * SQRT3 * band.h


def build_ghost_closures(band: NarrowBand, depth: float | None = None, order: int = 3) -> ClosureSet:
    """Closure stencils for all ghost nodes.

    Each ghost z is projected along its normal to the point at signed
    distance ``depth`` on the same side of the surface, where the
    ``order``-degree tensor Lagrange stencil is guaranteed to fit inside the
    band whenever |depth| <= eps - 2*sqrt(3)*h.
    """
    h = band.h
    max_depth = default_ghost_depth(band)
    if depth is None:
        depth = max_depth
    if abs(depth) > max_depth + 1e-12:
        raise ConfigError(f"|ghost depth|={abs(depth):.4g} exceeds eps - 2*sqrt(3)*h = {max_depth:.4g}")
    gids = band.ghost_ids
    d = band.recs.dist[gids]
    n = band.recs.n[gids]
    side = np.where(d >= 0, 1.0, -1.0)
    alpha = d - side * depth
    z_alpha = band.pos[gids] - alpha[:, None] * n

    base, xi = stencil_base(z_alpha, band.grid.origin, h, order)
    ids = gather_stencil_ids(band.node_id, base, order)
    in_band_node = band.cls != GHOST
    ok = np.all((ids >= 0) & in_band_node[np.clip(ids, 0, None)], axis=1)
    if not np.all(ok):
        raise StencilEscapesBand(
            f"{np.count_nonzero(~ok)} ghost closure stencil(s) leave the band; "
            "increase eps/h or lower the interpolation order"
        )
    k3 = ids.shape[1]
    w = stencil_weights(xi, order).reshape(-1, k3)
    return ClosureSet(gids.astype(np.int32), ids.astype(np.int32), w, z_alpha, order, depth)


def refresh_ghosts(band: NarrowBand, values: np.ndarray, closures: ClosureSet) -> np.ndarray:
    """Overwrite ghost entries of ``values`` with their closure interpolants."""
    values[closures.ghost_ids] = np.einsum("gk,gk->g", closures.weights, values[closures.stencil_ids])
    return values


def discretize_target(band: NarrowBand, targets, rho: float, g_values=None) -> tuple[np.ndarray, np.ndarray]:
    """Mark target nodes around source points and fix their boundary values.

    A band node z becomes a target when ||P z - x_s|| <= rho for some source
    x_s; its value is g(x_s) plus the Euclidean chord ||P z - x_s|| (the
    chord-vs-arc gap is O(rho^3), below scheme error for rho ~ 2h).
    Sources off the surface are projected onto it with a warning.
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if g_values is None:
        g_values = np.zeros(targets.shape[0])
    else:
        g_values = np.asarray(g_values, dtype=float)
    recs = band.provider.records(targets)
    if np.max(np.abs(recs.dist)) > 1e-9:
        warnings.warn("target point(s) off the surface; projecting onto it", stacklevel=2)
    sources = recs.cp

    in_band = band.cls != GHOST
    diff = band.recs.cp[in_band, None, :] - sources[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    vals = dist + g_values[None, :]
    best = np.argmin(vals, axis=1)
    rows = np.arange(dist.shape[0])
    hit = dist[rows, best] <= rho
    if not np.any(hit):
        raise EmptyTarget(f"no band node within rho={rho:.4g} of any source")

    ids_in_band = np.flatnonzero(in_band)
    target_ids = ids_in_band[hit]
    target_values = vals[rows[hit], best[hit]]
    band.cls[target_ids] = TARGET
    band.target_ids = target_ids
    band.target_values = target_values
    band.sources = sources
    return target_ids, target_values


def dump_band_csv(band: NarrowBand, path) -> None:
    """Diagnostic dump: i,j,k,class,d,sigma1,sigma2 per band node."""
    with open(path, "w") as f:
        f.write("i,j,k,class,d,sigma1,sigma2\n")
        for m in range(len(band)):
            i, j, k = band.ijk[m]
            f.write(
                f"{i},{j},{k},{CLASS_NAMES[int(band.cls[m])]},"
                f"{band.recs.dist[m]:.17g},{band.recs.sigma1[m]:.17g},{band.recs.sigma2[m]:.17g}\n"
            )
