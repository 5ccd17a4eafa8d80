import sys
import time

import numpy as np

from bandhjb import (AnalyticProvider, HamiltonianModel, Sphere, SweepConfig, build_band,
                     discretize_target, l1_band_error, sphere_exact_distance, sweep_solve,
                     unit_cube_grid)
from bandhjb.metrics import band_kernel

inv_h = int(sys.argv[1]) if len(sys.argv) > 1 else 100
scale = float(sys.argv[2]) if len(sys.argv) > 2 else 1.0
h = 1.0 / inv_h
srf = Sphere(center=(0.5, 0.5, 0.5), radius=0.4)
prov = AnalyticProvider(srf)

grid = unit_cube_grid(h)
band = build_band(grid, prov, eps=4 * h, stencil_radius=1)
src = np.array([[0.5, 0.5, 0.9]])
discretize_target(band, src, rho=2 * h)
model = HamiltonianModel()
t0 = time.time()
field = sweep_solve(band, model, SweepConfig(sigma_scale=scale))
print(f"sweeps {field.info['sweeps']}  time {time.time()-t0:.1f}s  sigma {field.info['lf_sigma']}")

exact = sphere_exact_distance(srf.center, srf.radius, band.sources[0])
ids = band.in_band_ids
u = exact(band.recs.cp[ids])
err = field.v[ids] - u
w = band_kernel(band, ids)
print(f"L1 {np.sum(np.abs(err) * w):.6f}")
print(f"signed L1 {np.sum(err * w):.6f} (positive=overestimate)")
print(f"Linf {np.max(np.abs(err)):.5f}, mean err {np.mean(err):+.5f}")

# split by geodesic distance from source (u value): near source, mid, near antipode
for lo, hi in [(0, 0.1), (0.1, 0.6), (0.6, 1.1), (1.1, 1.3)]:
    m = (u >= lo) & (u < hi)
    if np.any(m):
        contrib = np.sum(np.abs(err[m]) * w[m])
        print(f"  u in [{lo:.1f},{hi:.1f}): L1 contribution {contrib:.6f}, "
              f"mean signed {np.mean(err[m]):+.5f}, max|err| {np.max(np.abs(err[m])):.5f}")
