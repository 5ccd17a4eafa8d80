"""Command-line interface: solve / trace / belts / convergence / make-cloud.

Configuration comes from an optional key=value file plus flags; flags win.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .band import NarrowBand, build_band, covering_grid, discretize_target, dump_band_csv, unit_cube_grid
from .errors import BandHJBError, ConfigError
from .geometry import AnalyticProvider, Sphere, Torus
from .hamiltonian import ControlDisc, CostModel, CurvatureAniso, HamiltonianModel, Isotropic, constant_field
from .metrics import ErrorReport, convergence_table, l1_band_error, linf_surface_error, \
    sphere_exact_distance, write_convergence_csv
from .paths import PathConfig, belt_sort, trace_anisotropic, trace_isotropic, write_belts_csv, \
    write_path_csv, write_path_ply
from .pointcloud import CloudProvider, PointCloud
from .solver_sweep import SolutionField, SweepConfig, sweep_solve
from .solver_weno import TimeMarchConfig, steady_state_solve


# ----------------------------------------------------------------------
# configuration
# ----------------------------------------------------------------------


def read_config_file(path) -> dict[str, str]:
    conf: dict[str, str] = {}
    with open(path) as f:
        for line in f:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"bad config line (expected key = value): {line!r}")
            key, val = line.split("=", 1)
            conf[key.strip()] = val.strip()
    return conf


def parse_surface(spec: str):
    """'sphere:cx,cy,cz,r' or 'torus:cx,cy,cz,R,rho'."""
    try:
        kind, rest = spec.split(":", 1)
        vals = [float(x) for x in rest.split(",")]
        if kind == "sphere":
            return Sphere(center=tuple(vals[:3]), radius=vals[3])
        if kind == "torus":
            return Torus(center=tuple(vals[:3]), major=vals[3], minor=vals[4])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"cannot parse surface spec {spec!r}") from exc
    raise ConfigError(f"unknown surface kind {kind!r} (sphere|torus)")


def parse_point(spec: str) -> tuple[np.ndarray, float]:
    """'x,y,z' or 'x,y,z:g' -> (point, exit penalty)."""
    g = 0.0
    if ":" in spec:
        spec, gtxt = spec.split(":", 1)
        g = float(gtxt)
    vals = [float(x) for x in spec.split(",")]
    if len(vals) != 3:
        raise ConfigError(f"point spec {spec!r} is not x,y,z")
    return np.array(vals), g


class Run:
    """Resolved configuration for one solve."""

    def __init__(self, opts: dict):
        self.opts = opts
        if not opts.get("surface") and not opts.get("cloud"):
            raise ConfigError("one of --surface / --cloud is required")
        self.h = float(opts.get("h", 0.01))
        if "eps" in opts and opts["eps"] is not None:
            self.eps = float(opts["eps"])
        else:
            self.eps = float(opts.get("eps_cells", 4.0)) * self.h
        self.solver = opts.get("solver", "sweep")
        if self.solver not in ("sweep", "weno"):
            raise ConfigError(f"unknown solver {self.solver!r}")
        self.mu = float(opts.get("mu", 1.0))
        self.rho = float(opts["rho"]) if opts.get("rho") is not None else 2.0 * self.h
        self.out = Path(opts.get("out", "out"))
        self.formats = [s.strip() for s in str(opts.get("format", "csv")).split(",") if s.strip()]
        for fmt in self.formats:
            if fmt not in ("csv", "vtk", "ply"):
                raise ConfigError(f"unknown output format {fmt!r}")
        self.seed = int(opts.get("seed", 0))

        sources = opts.get("source") or []
        if isinstance(sources, str):
            sources = [sources]
        parsed = [parse_point(s) for s in sources]
        self.sources = np.array([p for p, _ in parsed]) if parsed else np.empty((0, 3))
        self.g_values = np.array([g for _, g in parsed]) if parsed else np.empty(0)

    def provider(self):
        if self.opts.get("cloud"):
            cloud = PointCloud.from_file(self.opts["cloud"])
            interior = None
            if self.opts.get("interior_point"):
                interior, _ = parse_point(self.opts["interior_point"])
            return CloudProvider(cloud, k=int(self.opts.get("k", 12)), interior_point=interior)
        return AnalyticProvider(parse_surface(self.opts["surface"]))

    def grid(self, provider):
        mode = self.opts.get("grid", "auto")
        pad = 3 * (2 if self.solver == "weno" else 1) + 2
        if mode == "unit-cube":
            return unit_cube_grid(self.h)
        if hasattr(provider, "surface"):
            srf = provider.surface
            center, rad = np.asarray(srf.center), srf.bounding_radius()
        else:
            pts = provider.cloud.points
            center = 0.5 * (pts.min(0) + pts.max(0))
            rad = float(np.max(np.linalg.norm(pts - center, axis=1)))
        lo = center - rad - self.eps - pad * self.h
        hi = center + rad + self.eps + pad * self.h
        if mode == "auto" and np.all(lo >= -1e-12) and np.all(hi <= 1.0 + 1e-12) \
                and abs(round(1.0 / self.h) - 1.0 / self.h) < 1e-9:
            return unit_cube_grid(self.h)
        return covering_grid(center, rad, self.eps, self.h, pad_cells=pad)

    def model(self) -> HamiltonianModel:
        kind = self.opts.get("speed.model", self.opts.get("speed", "isotropic"))
        if kind in ("isotropic", "iso"):
            spd = Isotropic(constant_field(float(self.opts.get("speed.f", 1.0))),
                            f1=float(self.opts.get("speed.f", 1.0)),
                            f2=float(self.opts.get("speed.f", 1.0)))
        elif kind in ("curvature", "aniso"):
            spd = CurvatureAniso(b=float(self.opts.get("b", self.opts.get("speed.b", 0.0))))
        else:
            raise ConfigError(f"unknown speed model {kind!r}")
        r_const = float(self.opts.get("cost.r", 1.0))
        cost = CostModel(r=constant_field(r_const), r1=r_const, r2=r_const)
        disc = ControlDisc(n_theta=int(self.opts.get("ntheta", self.opts.get("controls.n_theta", 32))))
        return HamiltonianModel(speed=spd, cost=cost, disc=disc, mu=self.mu)

    def sweep_config(self) -> SweepConfig:
        return SweepConfig(
            tol=float(self.opts["solver.tol"]) if self.opts.get("solver.tol") else None,
            max_sweeps=int(self.opts.get("solver.max_sweeps", 500)),
            sigma_scale=float(self.opts.get("solver.sigma_scale", 1.0)),
            ghost_depth=float(self.opts["ghost_depth"]) if self.opts.get("ghost_depth") else None,
        )

    def weno_config(self) -> TimeMarchConfig:
        return TimeMarchConfig(
            cfl=float(self.opts.get("weno.cfl", 0.5)),
            steady_tol=float(self.opts.get("weno.steady_tol", 1e-6)),
            max_steps=int(self.opts.get("weno.max_steps", 20000)),
            mu=self.mu,
        )


def run_solve(run: Run) -> tuple[NarrowBand, SolutionField, HamiltonianModel]:
    if run.sources.shape[0] == 0:
        raise ConfigError("at least one --source is required")
    provider = run.provider()
    grid = run.grid(provider)
    radius = 2 if run.solver == "weno" else 1
    band = build_band(grid, provider, run.eps, stencil_radius=radius)
    discretize_target(band, run.sources, run.rho, g_values=run.g_values)
    model = run.model()
    field = sweep_solve(band, model, run.sweep_config())
    if run.solver == "weno":
        field = steady_state_solve(band, field, run.weno_config(), model)
    return band, field, model


# ----------------------------------------------------------------------
# exports
# ----------------------------------------------------------------------


def write_field_csv(band: NarrowBand, field: SolutionField, path) -> None:
    with open(path, "w") as f:
        f.write("i,j,k,d,v\n")
        for m in range(len(band)):
            i, j, k = band.ijk[m]
            f.write(f"{i},{j},{k},{band.recs.dist[m]:.17g},{field.v[m]:.17g}\n")


def write_field_vtk(band: NarrowBand, field: SolutionField, path) -> None:
    nx, ny, nz = band.grid.dims
    full = np.full(band.grid.dims, np.nan)
    full[band.ijk[:, 0], band.ijk[:, 1], band.ijk[:, 2]] = field.v
    ox, oy, oz = band.grid.origin
    with open(path, "w") as f:
        f.write("# vtk DataFile Version 3.0\nband field\nASCII\n")
        f.write("DATASET STRUCTURED_POINTS\n")
        f.write(f"DIMENSIONS {nx} {ny} {nz}\n")
        f.write(f"ORIGIN {ox:.17g} {oy:.17g} {oz:.17g}\n")
        f.write(f"SPACING {band.grid.h:.17g} {band.grid.h:.17g} {band.grid.h:.17g}\n")
        f.write(f"POINT_DATA {nx * ny * nz}\n")
        f.write("SCALARS v double\nLOOKUP_TABLE default\n")
        # VTK structured points iterate x fastest
        for k in range(nz):
            for j in range(ny):
                for i in range(nx):
                    f.write(f"{full[i, j, k]:.17g}\n")


def write_solver_log(field: SolutionField, path) -> None:
    info = field.info
    with open(path, "w") as f:
        f.write(f"sweeps={info.get('sweeps', info.get('steps', 0))}\n")
        f.write(f"tol={info.get('tol', '')}\n")
        for m, r in enumerate(info.get("history", [])):
            f.write(f"sweep {m + 1}: max_update {r:.17g}\n")
        if "residual" in info:
            f.write(f"final_residual={info['residual']:.17g}\n")


def maybe_error_report(run: Run, band: NarrowBand, field: SolutionField,
                       model: HamiltonianModel) -> ErrorReport | None:
    """Great-circle oracle applies to a single-source unit-speed sphere solve."""
    if run.opts.get("cloud") or run.sources.shape[0] != 1:
        return None
    if not isinstance(model.speed, Isotropic):
        return None
    srf = parse_surface(run.opts["surface"])
    if not isinstance(srf, Sphere):
        return None
    exact = sphere_exact_distance(srf.center, srf.radius, band.sources[0])
    l1 = l1_band_error(field, exact)
    rng = np.random.default_rng(run.seed)
    dirs = rng.normal(size=(2000, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    samples = np.asarray(srf.center) + srf.radius * dirs
    linf = linf_surface_error(field, exact, samples)
    return ErrorReport(l1=l1, linf=linf, h=run.h, eps=run.eps,
                       node_count=band.node_count_in_band())


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------


def cmd_solve(run: Run) -> int:
    band, field, model = run_solve(run)
    run.out.mkdir(parents=True, exist_ok=True)
    if "csv" in run.formats:
        write_field_csv(band, field, run.out / "field.csv")
        dump_band_csv(band, run.out / "band.csv")
    if "vtk" in run.formats:
        write_field_vtk(band, field, run.out / "field.vtk")
    write_solver_log(field, run.out / "solver.log")
    report = maybe_error_report(run, band, field, model)
    if report is not None:
        report.to_json(run.out / "error.json")
        print(f"L1 error {report.l1:.6f}, Linf error {report.linf:.6f} "
              f"({report.node_count} band nodes)")
    print(f"solved {band.node_count_in_band()} band nodes in "
          f"{field.info.get('sweeps', field.info.get('steps'))} sweeps/steps -> {run.out}")
    return 0


def cmd_trace(run: Run, starts: list[str]) -> int:
    if not starts:
        raise ConfigError("at least one --start is required")
    band, field, model = run_solve(run)
    run.out.mkdir(parents=True, exist_ok=True)
    aniso = field.argmin_control is not None
    for m, s in enumerate(starts):
        start, _ = parse_point(s)
        if aniso:
            path = trace_anisotropic(field, start, model)
        else:
            path = trace_isotropic(field, start)
        stem = run.out / f"path_{m:03d}"
        if "csv" in run.formats:
            write_path_csv(path, stem.with_suffix(".csv"))
        if "ply" in run.formats:
            write_path_ply(path, stem.with_suffix(".ply"))
        print(f"path {m}: {len(path)} vertices, terminated {path.terminated}, "
              f"total cost {path.total_cost:.6f}, field value at start {path.values[0]:.6f}")
    return 0


def cmd_belts(run: Run, intervals_spec: str) -> int:
    if not run.opts.get("cloud"):
        raise ConfigError("belts requires --cloud")
    intervals = []
    for chunk in intervals_spec.split(","):
        lo, hi = chunk.split(":")
        intervals.append((float(lo), float(hi)))
    band, field, _ = run_solve(run)
    pts = band.provider.cloud.points
    labels = belt_sort(pts, field, intervals)
    run.out.mkdir(parents=True, exist_ok=True)
    write_belts_csv(pts, labels, run.out / "belts.csv")
    counts = {m: int(np.count_nonzero(labels == m)) for m in range(len(intervals))}
    print(f"belt counts: {counts} (unassigned {int(np.count_nonzero(labels < 0))})")
    return 0


def cmd_convergence(run: Run, h_list: list[float]) -> int:
    if sorted(h_list, reverse=True) != h_list:
        raise ConfigError("--h-list must be descending")
    reports: list[ErrorReport] = []
    for h in h_list:
        sub = Run({**run.opts, "h": h})
        try:
            band, field, model = run_solve(sub)
        except BandHJBError as exc:
            print(f"h={h}: solve failed: {exc}", file=sys.stderr)
            continue
        report = maybe_error_report(sub, band, field, model)
        if report is None:
            raise ConfigError("convergence study needs an exact oracle (single-source sphere)")
        reports.append(report)
        print(f"h={h}: L1 {report.l1:.6f}")
    rows = convergence_table(reports)
    run.out.mkdir(parents=True, exist_ok=True)
    write_convergence_csv(rows, run.out / "convergence.csv")
    return 0


def fibonacci_sphere(center, radius: float, n: int) -> np.ndarray:
    i = np.arange(n)
    z = 1.0 - 2.0 * (i + 0.5) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    ga = np.pi * (3.0 - np.sqrt(5.0))
    th = ga * i
    pts = np.stack([r * np.cos(th), r * np.sin(th), z], axis=1)
    return np.asarray(center) + radius * pts


def torus_cloud(center, big_r: float, rho: float, n: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    phi = rng.uniform(0.0, 2.0 * np.pi, size=2 * n)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=2 * n)
    accept = rng.uniform(size=2 * n) < (big_r + rho * np.cos(theta)) / (big_r + rho)
    while np.count_nonzero(accept) < n:
        phi2 = rng.uniform(0.0, 2.0 * np.pi, size=n)
        theta2 = rng.uniform(0.0, 2.0 * np.pi, size=n)
        acc2 = rng.uniform(size=n) < (big_r + rho * np.cos(theta2)) / (big_r + rho)
        phi = np.concatenate([phi[accept], phi2])
        theta = np.concatenate([theta[accept], theta2])
        accept = np.concatenate([np.ones(np.count_nonzero(accept), dtype=bool), acc2])
    phi, theta = phi[accept][:n], theta[accept][:n]
    x = (big_r + rho * np.cos(theta)) * np.cos(phi)
    y = (big_r + rho * np.cos(theta)) * np.sin(phi)
    z = rho * np.sin(theta)
    return np.asarray(center) + np.stack([x, y, z], axis=1)


def cmd_make_cloud(surface_spec: str, n: int, out: Path, seed: int) -> int:
    if n < 16:
        raise ConfigError("need n >= 16 points")
    srf = parse_surface(surface_spec)
    if isinstance(srf, Sphere):
        pts = fibonacci_sphere(srf.center, srf.radius, n)
    else:
        pts = torus_cloud(srf.center, srf.major, srf.minor, n, seed)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as f:
        for x, y, z in pts:
            f.write(f"{x:.17g} {y:.17g} {z:.17g}\n")
    print(f"wrote {n} points to {out}")
    return 0


# ----------------------------------------------------------------------
# argument parsing
# ----------------------------------------------------------------------


def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file (flags override)")
    p.add_argument("--surface", help="sphere:cx,cy,cz,r or torus:cx,cy,cz,R,rho")
    p.add_argument("--cloud", help="point cloud file (.xyz or .ply)")
    p.add_argument("--h", type=float, help="grid spacing")
    p.add_argument("--eps-cells", dest="eps_cells", type=float, help="band half-width in units of h")
    p.add_argument("--eps", type=float, help="band half-width (absolute, overrides --eps-cells)")
    p.add_argument("--source", action="append", help="target point x,y,z[:g] (repeatable)")
    p.add_argument("--speed", dest="speed.model", choices=["isotropic", "curvature"])
    p.add_argument("--b", type=float, help="curvature-speed exponent")
    p.add_argument("--solver", choices=["sweep", "weno"])
    p.add_argument("--ntheta", type=int, help="control-circle samples")
    p.add_argument("--mu", type=float, help="normal weight of the projection tensor")
    p.add_argument("--rho", type=float, help="target capture radius (default 2h)")
    p.add_argument("--tol", dest="solver.tol", type=float, help="sweeping tolerance")
    p.add_argument("--sigma-scale", dest="solver.sigma_scale", type=float)
    p.add_argument("--ghost-depth", dest="ghost_depth", type=float)
    p.add_argument("--interior-point", dest="interior_point", help="x,y,z inside the body (cloud sign)")
    p.add_argument("--grid", choices=["auto", "unit-cube", "covering"])
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", help="comma list of csv,vtk,ply")
    p.add_argument("--seed", type=int)


def _collect_opts(args: argparse.Namespace) -> dict:
    opts: dict = {}
    if getattr(args, "config", None):
        opts.update(read_config_file(args.config))
    for key, val in vars(args).items():
        if key in ("command", "config", "func", "start", "intervals", "h_list", "n"):
            continue
        if val is not None:
            opts[key] = val
    return opts


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bandhjb",
                                 description="HJB equations on closed surfaces via narrow-band extension")
    ap.add_argument("--version", action="version", version=f"bandhjb {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one configuration and export the field")
    _add_run_args(p)

    p = sub.add_parser("trace", help="solve and extract characteristic paths")
    _add_run_args(p)
    p.add_argument("--start", action="append", help="path start x,y,z (repeatable)")

    p = sub.add_parser("belts", help="sort cloud points into distance belts")
    _add_run_args(p)
    p.add_argument("--intervals", required=True, help="lo:hi,lo:hi,...")

    p = sub.add_parser("convergence", help="error table over a list of grid spacings")
    _add_run_args(p)
    p.add_argument("--h-list", dest="h_list", required=True, help="comma list, descending")

    p = sub.add_parser("make-cloud", help="sample a surface into an XYZ cloud")
    p.add_argument("--surface", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.command == "make-cloud":
            return cmd_make_cloud(args.surface, args.n, Path(args.out), args.seed)
        opts = _collect_opts(args)
        run = Run(opts)
        if args.command == "solve":
            return cmd_solve(run)
        if args.command == "trace":
            return cmd_trace(run, args.start or [])
        if args.command == "belts":
            return cmd_belts(run, args.intervals)
        if args.command == "convergence":
            h_list = [float(x) for x in args.h_list.split(",")]
            return cmd_convergence(run, h_list)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BandHJBError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
