import time

import numpy as np

from bandhjb import (AnalyticProvider, HamiltonianModel, Sphere, SweepConfig, build_band,
                     covering_grid, discretize_target, l1_band_error, sphere_exact_distance,
                     sweep_solve, residual)

t0 = time.time()
h = 1.0 / 32
srf = Sphere(center=(0.5, 0.5, 0.5), radius=0.4)
prov = AnalyticProvider(srf)
grid = covering_grid(srf.center, srf.radius, 4 * h, h)
band = build_band(grid, prov, eps=4 * h, stencil_radius=1)
print(f"band: {len(band)} nodes ({band.node_count_in_band()} in band), "
      f"{np.count_nonzero(band.cls == 2)} ghosts, {time.time()-t0:.2f}s")

src = np.array([[0.5, 0.5, 0.9]])
discretize_target(band, src, rho=2 * h)
print("targets:", band.target_ids.size)

model = HamiltonianModel()
t0 = time.time()
field = sweep_solve(band, model, SweepConfig())
print(f"solve: {field.info['sweeps']} sweep sets, {time.time()-t0:.2f}s")

exact = sphere_exact_distance(srf.center, srf.radius, band.sources[0])
err = l1_band_error(field, exact)
print(f"L1 error: {err:.6f}")
print(f"residual: {residual(field, model):.4f}")

# shell volume check
area = 4 * np.pi * 0.4**2
expect = area * 2 * band.eps / h**3
print(f"in-band nodes {band.node_count_in_band()} vs shell estimate {expect:.0f}")
