"""Closest-point estimation from surface point samples.

Pipeline per query point z: (1) fit a biquadratic height patch over the k
nearest samples (frame from the neighborhood covariance), (2) find the
closest point on the patch with a damped Newton iteration, (3) on lattice
node sets, approximate the closest-point Jacobian by fourth-order central
differences of the node-aligned closest points and take its (symmetrized)
eigendecomposition for the frame and singular values.

Distance signs come from patch normals oriented away from the cloud
centroid (override with an interior point).  All downstream consumers use
only |d| and the ray cp -> z, so an imperfect global orientation affects
reporting, not solves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, DegenerateNeighborhood, NewtonDiverged, PointOutsideBand
from .geometry import CPRecords

NEWTON_GRAD_TOL = 1e-10
_DEGENERATE_RATIO = 1e-8


def read_xyz(path) -> np.ndarray:
    """Read an XYZ file: one 'x y z [extras]' line per point; extras ignored."""
    pts = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 3:
                raise ConfigError(f"bad XYZ line: {line!r}")
            pts.append([float(parts[0]), float(parts[1]), float(parts[2])])
    if not pts:
        raise ConfigError(f"no points in {path}")
    return np.asarray(pts, dtype=float)


def read_ply(path) -> np.ndarray:
    """Read vertex positions from an ASCII PLY file; other properties ignored."""
    with open(path) as f:
        if f.readline().strip() != "ply":
            raise ConfigError(f"{path} is not a PLY file")
        n_vertex = None
        props: list[str] = []
        in_vertex = False
        for line in f:
            tok = line.split()
            if not tok:
                continue
            if tok[0] == "format" and tok[1] != "ascii":
                raise ConfigError("only ASCII PLY is supported")
            elif tok[0] == "element":
                in_vertex = tok[1] == "vertex"
                if in_vertex:
                    n_vertex = int(tok[2])
            elif tok[0] == "property" and in_vertex:
                props.append(tok[-1])
            elif tok[0] == "end_header":
                break
        if n_vertex is None:
            raise ConfigError("PLY file has no vertex element")
        try:
            ix, iy, iz = props.index("x"), props.index("y"), props.index("z")
        except ValueError as exc:
            raise ConfigError("PLY vertex element lacks x/y/z properties") from exc
        pts = np.empty((n_vertex, 3))
        for m in range(n_vertex):
            vals = f.readline().split()
            pts[m] = (float(vals[ix]), float(vals[iy]), float(vals[iz]))
    return pts


class PointCloud:
    """Surface samples with a nearest-neighbor index."""

    def __init__(self, points: np.ndarray):
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != 3:
            raise ConfigError("point cloud must be an (N, 3) array")
        if points.shape[0] < 16:
            raise ConfigError(f"point cloud too small ({points.shape[0]} < 16 points)")
        self.points = points
        self.tree = cKDTree(points)
        d2, _ = self.tree.query(points, k=2, workers=-1)
        if np.min(d2[:, 1]) < 1e-12:
            raise ConfigError("point cloud contains duplicate points")
        self._nn_spacing = d2[:, 1]
        self.centroid = points.mean(axis=0)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def mean_spacing(self) -> float:
        return float(np.mean(self._nn_spacing))

    @classmethod
    def from_file(cls, path) -> "PointCloud":
        path = str(path)
        if path.endswith(".ply"):
            return cls(read_ply(path))
        return cls(read_xyz(path))


@dataclass
class LocalPatch:
    """Biquadratic height patch s(u,v) = c0 + c1 u + c2 v + c3 u^2 + c4 uv + c5 v^2."""

    origin: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    e3: np.ndarray
    coeffs: np.ndarray
    rms: float

    def surface_point(self, u: float, v: float) -> np.ndarray:
        c = self.coeffs
        s = c[0] + c[1] * u + c[2] * v + c[3] * u * u + c[4] * u * v + c[5] * v * v
        return self.origin + u * self.e1 + v * self.e2 + s * self.e3


def _fit_patches(cloud: PointCloud, pts: np.ndarray, k: int):
    """Vectorized biquadratic fits; returns frames, coefficients, fit RMS."""
    pts = np.atleast_2d(pts)
    m = pts.shape[0]
    _, idx = cloud.tree.query(pts, k=k, workers=-1)
    nb = cloud.points[idx]                      # (m, k, 3)
    origin = nb.mean(axis=1)
    q = nb - origin[:, None, :]
    cov = np.einsum("mki,mkj->mij", q, q) / k
    evals, evecs = np.linalg.eigh(cov)
    degenerate = evals[:, 1] <= _DEGENERATE_RATIO * np.maximum(evals[:, 2], 1e-300)
    e3 = evecs[:, :, 0]
    e1 = evecs[:, :, 2]
    e2 = np.cross(e3, e1)

    u = np.einsum("mki,mi->mk", q, e1)
    v = np.einsum("mki,mi->mk", q, e2)
    w = np.einsum("mki,mi->mk", q, e3)
    s = cloud.mean_spacing
    a = np.stack([np.ones_like(u), u / s, v / s, (u / s) ** 2, (u / s) * (v / s), (v / s) ** 2], axis=2)
    ata = np.einsum("mkp,mkq->mpq", a, a)
    atw = np.einsum("mkp,mk->mp", a, w)
    if np.any(degenerate):
        ata[degenerate] = np.eye(6)  # placeholder; flagged rows are discarded
    coeffs = np.linalg.solve(ata, atw[:, :, None])[:, :, 0]
    res = np.einsum("mkp,mp->mk", a, coeffs) - w
    rms = np.sqrt(np.mean(res * res, axis=1))
    scale = np.array([1.0, 1 / s, 1 / s, 1 / s**2, 1 / s**2, 1 / s**2])
    coeffs = coeffs * scale[None, :]
    return origin, e1, e2, e3, coeffs, rms, degenerate


def fit_local_patch(cloud: PointCloud, z, k: int = 12) -> LocalPatch:
    """Fit the biquadratic patch of the k nearest samples around ``z``.

    Raises
    ------
    DegenerateNeighborhood
        If the neighborhood covariance has two near-zero eigenvalues
        (collinear samples: the cloud is too sparse near ``z``).
    """
    if k < 6:
        raise ConfigError("biquadratic fit needs k >= 6 neighbors")
    if len(cloud) < k:
        raise ConfigError(f"cloud has {len(cloud)} < k={k} points")
    origin, e1, e2, e3, coeffs, rms, degen = _fit_patches(cloud, np.asarray(z, dtype=float)[None, :], k)
    if degen[0]:
        raise DegenerateNeighborhood("neighborhood covariance is rank deficient")
    return LocalPatch(origin[0], e1[0], e2[0], e3[0], coeffs[0], float(rms[0]))


def _newton_batch(origin, e1, e2, e3, coeffs, pts, max_iter: int = 30):
    """Damped Newton minimization of |z - S(u,v)|^2/2 over patch coordinates."""
    m = pts.shape[0]
    rel = pts - origin
    za = np.einsum("mi,mi->m", rel, e1)
    zb = np.einsum("mi,mi->m", rel, e2)
    zc = np.einsum("mi,mi->m", rel, e3)
    u = za.copy()
    v = zb.copy()
    c0, c1, c2, c3, c4, c5 = (coeffs[:, j] for j in range(6))

    def objective(u, v):
        s = c0 + c1 * u + c2 * v + c3 * u * u + c4 * u * v + c5 * v * v
        return 0.5 * ((u - za) ** 2 + (v - zb) ** 2 + (s - zc) ** 2), s

    def grad_hess(u, v, s):
        su = c1 + 2 * c3 * u + c4 * v
        sv = c2 + c4 * u + 2 * c5 * v
        w = s - zc
        gu = (u - za) + w * su
        gv = (v - zb) + w * sv
        huu = 1 + su * su + w * 2 * c3
        hvv = 1 + sv * sv + w * 2 * c5
        huv = su * sv + w * c4
        return gu, gv, huu, huv, hvv

    f_val, s = objective(u, v)
    active = np.ones(m, dtype=bool)
    for _ in range(max_iter):
        gu, gv, huu, huv, hvv = grad_hess(u, v, s)
        gnorm = np.hypot(gu, gv)
        active = gnorm > NEWTON_GRAD_TOL
        if not np.any(active):
            break
        det = huu * hvv - huv * huv
        safe = np.abs(det) > 1e-300
        du = np.where(safe, (-gu * hvv + gv * huv) / np.where(safe, det, 1.0), -gu)
        dv = np.where(safe, (-gv * huu + gu * huv) / np.where(safe, det, 1.0), -gv)
        step = np.where(active, 1.0, 0.0)
        for _ in range(5):
            u_try = u + step * du
            v_try = v + step * dv
            f_try, s_try = objective(u_try, v_try)
            worse = active & (f_try > f_val)
            if not np.any(worse):
                break
            step = np.where(worse, step * 0.5, step)
        u = np.where(active, u + step * du, u)
        v = np.where(active, v + step * dv, v)
        f_val, s = objective(u, v)

    gu, gv, huu, huv, hvv = grad_hess(u, v, s)
    ok = np.hypot(gu, gv) <= NEWTON_GRAD_TOL
    ok &= (huu > 0) & (huu * hvv - huv * huv > 0)  # local-minimum check
    cp = origin + u[:, None] * e1 + v[:, None] * e2 + s[:, None] * e3
    return cp, u, v, ok


def newton_closest_point(patch: LocalPatch, z, max_iter: int = 30) -> np.ndarray:
    """Closest point of ``z`` on the patch surface.

    Raises
    ------
    NewtonDiverged
        If the iteration fails to reach first-order stationarity (callers
        typically fall back to the nearest cloud sample).
    """
    cp, _, _, ok = _newton_batch(patch.origin[None], patch.e1[None], patch.e2[None],
                                 patch.e3[None], patch.coeffs[None],
                                 np.asarray(z, dtype=float)[None, :], max_iter)
    if not ok[0]:
        raise NewtonDiverged("closest-point Newton did not converge")
    return cp[0]


def _orient_out(e3: np.ndarray, origin: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Flip patch normals to point away from the reference (centroid) point."""
    s = np.sign(np.einsum("mi,mi->m", e3, origin - reference))
    s[s == 0] = 1.0
    return e3 * s[:, None]


def _patch_curvatures(coeffs, u, v, e1, e2, orient, t_dirs):
    """Normal curvature of the patch at (u,v) along each 3-D direction in t_dirs.

    ``orient`` is +1 where the fitted e3 already points outward, -1 where it
    was flipped.  Sign convention: positive where the surface curves away
    from the outward normal (sphere seen from outside).
    """
    c0, c1, c2, c3, c4, c5 = (coeffs[:, j] for j in range(6))
    su = c1 + 2 * c3 * u + c4 * v
    sv = c2 + c4 * u + 2 * c5 * v
    wgt = np.sqrt(1.0 + su * su + sv * sv)
    h11, h12, h22 = 2 * c3 / wgt, c4 / wgt, 2 * c5 / wgt
    g11, g12, g22 = 1 + su * su, su * sv, 1 + sv * sv
    out = []
    for t in t_dirs:
        a = np.einsum("mi,mi->m", t, e1)
        b = np.einsum("mi,mi->m", t, e2)
        num = h11 * a * a + 2 * h12 * a * b + h22 * b * b
        den = g11 * a * a + 2 * g12 * a * b + g22 * b * b
        out.append(-orient * num / np.maximum(den, 1e-300))
    return out


class _Quantizer:
    """Map lattice-aligned points to integer keys for shared FD evaluations."""

    def __init__(self, pts: np.ndarray, h: float):
        self.h = h
        self.origin = pts.min(axis=0)
        keys = (pts - self.origin) / h
        ikeys = np.round(keys).astype(np.int64)
        if np.max(np.abs(keys - ikeys)) > 1e-6:
            raise ConfigError("cp_field_from_cloud expects lattice-aligned nodes")
        self.keys = ikeys

    def position(self, keys: np.ndarray) -> np.ndarray:
        return self.origin + keys * self.h


def cp_field_from_cloud(cloud: PointCloud, nodes: np.ndarray, h: float, k: int = 12,
                        interior_point=None, max_dist: float | None = None) -> CPRecords:
    """Closest-point records on a set of lattice nodes.

    Closest points come from the patch/Newton pipeline; frames and singular
    values from the symmetrized fourth-order finite-difference Jacobian of
    the node-aligned closest points (step = h, 5-point central stencil).
    Nodes whose estimation fails are tagged unusable (NaN record rows).
    """
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    if max_dist is not None:
        d_nn, _ = cloud.tree.query(nodes, k=1, workers=-1)
        if np.any(d_nn > max_dist):
            raise PointOutsideBand(
                f"{np.count_nonzero(d_nn > max_dist)} node(s) farther than {max_dist:.4g} from the cloud"
            )
    quant = _Quantizer(nodes, h)

    # evaluation set: the nodes plus their +-1, +-2 axis offsets, deduplicated
    offsets = [np.zeros(3, dtype=np.int64)]
    for ax in range(3):
        for s in (-2, -1, 1, 2):
            o = np.zeros(3, dtype=np.int64)
            o[ax] = s
            offsets.append(o)
    all_keys = np.concatenate([quant.keys + o[None, :] for o in offsets], axis=0)
    eval_keys, inv = np.unique(all_keys, axis=0, return_inverse=True)
    eval_pts = quant.position(eval_keys)

    origin, e1, e2, e3, coeffs, rms, degen = _fit_patches(cloud, eval_pts, k)
    # refit low-quality patches with a wider neighborhood
    poor = (rms > cloud.mean_spacing) | degen
    if np.any(poor) and len(cloud) >= 2 * k:
        o2, a2, b2, c2, co2, r2, dg2 = _fit_patches(cloud, eval_pts[poor], 2 * k)
        origin[poor], e1[poor], e2[poor], e3[poor], coeffs[poor], rms[poor] = o2, a2, b2, c2, co2, r2
        degen[poor] = dg2
    usable = ~degen & (rms <= cloud.mean_spacing)

    cp, u_ft, v_ft, newton_ok = _newton_batch(origin, e1, e2, e3, coeffs, eval_pts)
    if np.any(~newton_ok):
        # diverged Newton falls back to the nearest cloud sample
        bad = ~newton_ok
        _, nn = cloud.tree.query(eval_pts[bad], k=1, workers=-1)
        cp[bad] = cloud.points[nn]

    reference = np.asarray(interior_point, dtype=float) if interior_point is not None else cloud.centroid
    e3_out = _orient_out(e3, origin, reference)
    orient = np.sign(np.einsum("mi,mi->m", e3, e3_out))
    ray = eval_pts - cp
    ray_len = np.linalg.norm(ray, axis=1)
    side = np.sign(np.einsum("mi,mi->m", ray, e3_out))
    side[side == 0] = 1.0
    d_eval = side * ray_len

    # dense index box over the evaluation keys for stencil lookups
    kmin = eval_keys.min(axis=0)
    kdim = eval_keys.max(axis=0) - kmin + 1
    box = np.full(tuple(kdim), -1, dtype=np.int64)
    box[tuple((eval_keys - kmin).T)] = np.arange(eval_keys.shape[0])

    node_rows = inv[: nodes.shape[0]]

    def rows_at(offset):
        q = quant.keys + offset[None, :] - kmin
        return box[q[:, 0], q[:, 1], q[:, 2]]

    jac = np.empty((nodes.shape[0], 3, 3))
    stencil_ok = np.ones(nodes.shape[0], dtype=bool)
    for ax in range(3):
        rows = []
        for s in (-2, -1, 1, 2):
            o = np.zeros(3, dtype=np.int64)
            o[ax] = s
            r = rows_at(o)
            stencil_ok &= r >= 0
            rows.append(np.clip(r, 0, None))
        m2, m1, p1, p2 = rows
        jac[:, :, ax] = (-cp[p2] + 8.0 * cp[p1] - 8.0 * cp[m1] + cp[m2]) / (12.0 * h)
        stencil_ok &= usable[m2] & usable[m1] & usable[p1] & usable[p2]

    jac_sym = 0.5 * (jac + np.transpose(jac, (0, 2, 1)))
    evals, evecs = np.linalg.eigh(jac_sym)  # ascending; smallest ~ 0 along the normal
    sigma1 = evals[:, 2]
    sigma2 = evals[:, 1]
    t1 = evecs[:, :, 2]
    t2 = evecs[:, :, 1]
    n_fd = evecs[:, :, 0]

    # align the near-null eigenvector with the cp -> z ray
    ray_n = ray[node_rows]
    d_node = d_eval[node_rows]
    flip = np.einsum("mi,mi->m", n_fd, ray_n) * np.sign(d_node) < 0
    n_fd[flip] *= -1.0

    k_t1, k_t2 = _patch_curvatures(coeffs[node_rows], u_ft[node_rows], v_ft[node_rows],
                                   e1[node_rows], e2[node_rows], orient[node_rows], [t1, t2])
    kappa1 = k_t1 / (1.0 + d_node * k_t1)
    kappa2 = k_t2 / (1.0 + d_node * k_t2)

    good = stencil_ok & usable[node_rows]
    recs = CPRecords(
        cp=np.where(good[:, None], cp[node_rows], np.nan),
        dist=np.where(good, d_node, np.nan),
        t1=t1, t2=t2, n=n_fd,
        sigma1=np.where(good, sigma1, np.nan),
        sigma2=np.where(good, sigma2, np.nan),
        kappa1=kappa1, kappa2=kappa2,
    )
    return recs


class CloudProvider:
    """Closest-point provider backed by a point cloud."""

    def __init__(self, cloud: PointCloud, k: int = 12, interior_point=None):
        self.cloud = cloud
        self.k = k
        self.interior_point = interior_point
        self._lattice = None  # (quantizer keys hash -> precomputed records)

    def coarse_distance(self, pts: np.ndarray) -> np.ndarray:
        d, _ = self.cloud.tree.query(np.atleast_2d(pts), k=1, workers=-1)
        return d

    def distance_grid(self, grid) -> np.ndarray:
        """True |d| inside the working slab (via the patch pipeline), +inf outside.

        Also caches per-node records for the subsequent `records` call on
        band/ghost lattice nodes.
        """
        nx, ny, nz = grid.dims
        ii, jj, kk = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
        pts = grid.origin + np.stack([ii, jj, kk], axis=-1).reshape(-1, 3) * grid.h
        d_nn = self.coarse_distance(pts)
        pad = 6.0 * grid.h
        slab = d_nn < (self._eps_hint + pad if self._eps_hint else np.inf)
        slab_pts = pts[slab]
        recs = cp_field_from_cloud(self.cloud, slab_pts, grid.h, k=self.k,
                                   interior_point=self.interior_point)
        d = np.full(pts.shape[0], np.inf)
        d[slab] = np.where(np.isfinite(recs.dist), recs.dist, np.inf)
        keys = np.round((slab_pts - grid.origin) / grid.h).astype(np.int64)
        self._lattice = {"origin": grid.origin, "h": grid.h, "keys": keys, "recs": recs}
        lut = np.full(grid.dims, -1, dtype=np.int64)
        lut[keys[:, 0], keys[:, 1], keys[:, 2]] = np.arange(keys.shape[0])
        self._lattice["lut"] = lut
        return d.reshape(grid.dims)

    _eps_hint: float | None = None

    def set_band_thickness(self, eps: float) -> None:
        """Hint the slab half-thickness before band construction."""
        self._eps_hint = eps

    def records(self, pts: np.ndarray) -> CPRecords:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self._lattice is not None:
            t = (pts - self._lattice["origin"]) / self._lattice["h"]
            ikeys = np.round(t).astype(np.int64)
            if np.max(np.abs(t - ikeys)) < 1e-9:
                lut = self._lattice["lut"]
                inside = np.all((ikeys >= 0) & (ikeys < np.array(lut.shape)[None, :]), axis=1)
                if np.all(inside):
                    rows = lut[ikeys[:, 0], ikeys[:, 1], ikeys[:, 2]]
                    if np.all(rows >= 0):
                        r = self._lattice["recs"]
                        return CPRecords(r.cp[rows], r.dist[rows], r.t1[rows], r.t2[rows],
                                         r.n[rows], r.sigma1[rows], r.sigma2[rows],
                                         r.kappa1[rows], r.kappa2[rows])
        return self._generic_records(pts)

    def record(self, z):
        return self.records(np.asarray(z, dtype=float)[None, :]).record(0)

    def _generic_records(self, pts: np.ndarray) -> CPRecords:
        """Patch-based records at arbitrary (non-lattice) points.

        Frames and curvatures come from the fitted quadric; singular values
        from sigma_i = 1 - d kappa_i.  Used for source projection and path
        reprojection, not for band construction.
        """
        origin, e1, e2, e3, coeffs, rms, degen = _fit_patches(self.cloud, pts, self.k)
        if np.any(degen):
            raise DegenerateNeighborhood("degenerate neighborhood at query point")
        cp, u, v, ok = _newton_batch(origin, e1, e2, e3, coeffs, pts)
        if np.any(~ok):
            bad = ~ok
            _, nn = self.cloud.tree.query(pts[bad], k=1, workers=-1)
            cp[bad] = self.cloud.points[nn]
        reference = (np.asarray(self.interior_point, dtype=float)
                     if self.interior_point is not None else self.cloud.centroid)
        e3_out = _orient_out(e3, origin, reference)
        orient = np.sign(np.einsum("mi,mi->m", e3, e3_out))
        ray = pts - cp
        ray_len = np.linalg.norm(ray, axis=1)
        side = np.sign(np.einsum("mi,mi->m", ray, e3_out))
        side[side == 0] = 1.0
        d = side * ray_len

        c0, c1, c2, c3, c4, c5 = (coeffs[:, j] for j in range(6))
        su = c1 + 2 * c3 * u + c4 * v
        sv = c2 + c4 * u + 2 * c5 * v
        xu = e1 + su[:, None] * e3
        xv = e2 + sv[:, None] * e3
        n = np.cross(xu, xv)
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        flip = np.einsum("mi,mi->m", n, e3_out) < 0
        n[flip] *= -1.0
        t1 = xu / np.linalg.norm(xu, axis=1, keepdims=True)
        t2 = np.cross(n, t1)
        k1, k2 = _patch_curvatures(coeffs, u, v, e1, e2, orient, [t1, t2])
        kap1 = k1 / (1.0 + d * k1)
        kap2 = k2 / (1.0 + d * k2)
        return CPRecords(cp, d, t1, t2, n, 1.0 - d * kap1, 1.0 - d * kap2, kap1, kap2)
