import numpy as np
import pytest

from bandhjb import Sphere, Torus, b_tensor, closest_point, projection_jacobian
from bandhjb.errors import DegenerateBand, MedialAxisPoint
from bandhjb.geometry import ClosestPointRecord, surface_records

SPHERE = Sphere(center=(0.5, 0.5, 0.5), radius=0.4)
TORUS = Torus(center=(0.5, 0.5, 0.5), major=0.25, minor=0.10)


def random_band_points(surface, n, eps, seed):
    rng = np.random.default_rng(seed)
    if isinstance(surface, Sphere):
        d = rng.normal(size=(n, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        off = rng.uniform(-eps, eps, size=n)
        return np.asarray(surface.center) + (surface.radius + off[:, None]) * d
    phi = rng.uniform(0, 2 * np.pi, size=n)
    th = rng.uniform(0, 2 * np.pi, size=n)
    off = rng.uniform(-eps, eps, size=n)
    s = surface.minor + off
    x = (surface.major + s * np.cos(th)) * np.cos(phi)
    y = (surface.major + s * np.cos(th)) * np.sin(phi)
    z = s * np.sin(th)
    return np.asarray(surface.center) + np.stack([x, y, z], axis=1)


class TestSphereClosestPoint:
    def test_outside_point_on_axis(self):
        rec = closest_point(SPHERE, (0.95, 0.5, 0.5))
        assert np.allclose(rec.cp, (0.9, 0.5, 0.5), atol=1e-12)
        assert rec.dist == pytest.approx(0.05, abs=1e-12)
        assert rec.sigma1 == pytest.approx(0.4 / 0.45, abs=1e-12)
        assert rec.sigma2 == pytest.approx(0.4 / 0.45, abs=1e-12)

    def test_point_on_surface(self):
        z = np.array([0.5 + 0.4, 0.5, 0.5])
        rec = closest_point(SPHERE, z)
        assert rec.dist == pytest.approx(0.0, abs=1e-14)
        assert np.allclose(rec.cp, z, atol=1e-14)
        assert rec.sigma1 == pytest.approx(1.0)
        assert rec.sigma2 == pytest.approx(1.0)

    def test_medial_axis_raises(self):
        with pytest.raises(MedialAxisPoint):
            closest_point(SPHERE, (0.5, 0.5, 0.5))

    def test_inside_negative_distance(self):
        rec = closest_point(SPHERE, (0.5, 0.5, 0.8))
        assert rec.dist == pytest.approx(-0.1, abs=1e-12)


class TestTorusClosestPoint:
    def test_derived_brute_force_point(self):
        # brute-force oracle over the torus parameter grid, golden refined
        z = np.array([0.75, 0.5, 0.63])
        rec = closest_point(TORUS, z)
        phi = np.linspace(0, 2 * np.pi, 2048, endpoint=False)
        th = np.linspace(0, 2 * np.pi, 2048, endpoint=False)
        pp, tt = np.meshgrid(phi, th, indexing="ij")
        pts = np.stack([
            0.5 + (0.25 + 0.10 * np.cos(tt)) * np.cos(pp),
            0.5 + (0.25 + 0.10 * np.cos(tt)) * np.sin(pp),
            0.5 + 0.10 * np.sin(tt),
        ], axis=-1)
        dist2 = np.sum((pts - z) ** 2, axis=-1)
        best = np.unravel_index(np.argmin(dist2), dist2.shape)
        assert np.linalg.norm(rec.cp - pts[best]) < 1e-2
        assert rec.dist == pytest.approx(0.03, abs=1e-12)
        assert np.allclose(rec.cp, (0.75, 0.5, 0.6), atol=1e-12)

    def test_axis_raises(self):
        with pytest.raises(MedialAxisPoint):
            closest_point(TORUS, (0.5, 0.5, 0.7))

    def test_center_circle_raises(self):
        with pytest.raises(MedialAxisPoint):
            closest_point(TORUS, (0.75, 0.5, 0.5))


@pytest.mark.parametrize("surface,eps", [(SPHERE, 0.08), (TORUS, 0.04)])
class TestRecordInvariants:
    def test_invariants_random_points(self, surface, eps):
        pts = random_band_points(surface, 10_000, eps, seed=7)
        recs = surface_records(surface, pts)
        # |z - cp| = |dist|
        gap = np.linalg.norm(pts - recs.cp, axis=1) - np.abs(recs.dist)
        assert np.max(np.abs(gap)) < 1e-10
        # orthonormal frame
        for a, b in [(recs.t1, recs.t1), (recs.t2, recs.t2), (recs.n, recs.n)]:
            assert np.max(np.abs(np.einsum("mi,mi->m", a, b) - 1)) < 1e-10
        for a, b in [(recs.t1, recs.t2), (recs.t1, recs.n), (recs.t2, recs.n)]:
            assert np.max(np.abs(np.einsum("mi,mi->m", a, b))) < 1e-10
        # sigma_i = 1 - d kappa_i, positive in a valid band
        assert np.max(np.abs(recs.sigma1 - (1 - recs.dist * recs.kappa1))) < 1e-10
        assert np.max(np.abs(recs.sigma2 - (1 - recs.dist * recs.kappa2))) < 1e-10
        assert recs.sigma1.min() > 0 and recs.sigma2.min() > 0

    def test_gradient_identity(self, surface, eps):
        pts = random_band_points(surface, 2_000, eps, seed=3)
        recs = surface_records(surface, pts)
        away = np.abs(recs.dist) > 1e-3
        ray = (pts[away] - recs.cp[away]) / recs.dist[away, None]
        assert np.max(np.linalg.norm(ray - recs.n[away], axis=1)) < 1e-8

    def test_idempotence(self, surface, eps):
        pts = random_band_points(surface, 500, eps, seed=11)
        recs = surface_records(surface, pts)
        recs2 = surface_records(surface, recs.cp)
        assert np.max(np.abs(recs2.dist)) < 1e-10
        assert np.max(np.linalg.norm(recs2.cp - recs.cp, axis=1)) < 1e-10

    def test_fd_jacobian_matches(self, surface, eps):
        pts = random_band_points(surface, 200, eps, seed=5)
        recs = surface_records(surface, pts)
        step = 1e-5
        for m in range(pts.shape[0]):
            jac = np.empty((3, 3))
            for ax in range(3):
                e = np.zeros(3)
                e[ax] = step
                jac[:, ax] = (surface_records(surface, (pts[m] + e)[None]).cp[0]
                              - surface_records(surface, (pts[m] - e)[None]).cp[0]) / (2 * step)
            assert np.max(np.abs(jac - projection_jacobian(recs.record(m)))) < 1e-6


class TestBTensor:
    def test_identity_on_surface(self):
        rec = closest_point(SPHERE, (0.9, 0.5, 0.5))
        assert np.allclose(b_tensor(rec, 1.0), np.eye(3), atol=1e-12)

    def test_tangent_scaling_off_surface(self):
        rec = closest_point(SPHERE, (0.95, 0.5, 0.5))
        bt = b_tensor(rec, 1.0)
        assert np.allclose(bt @ rec.t1, (0.45 / 0.4) * rec.t1, atol=1e-12)

    def test_normal_eigenvector(self):
        rec = closest_point(TORUS, (0.75, 0.5, 0.63))
        bt = b_tensor(rec, 7.0)
        assert np.allclose(bt @ rec.n, 7.0 * rec.n, atol=1e-12)

    def test_symmetry_and_eigenpairs(self):
        rec = closest_point(TORUS, (0.78, 0.52, 0.55))
        bt = b_tensor(rec, 1.3)
        assert np.allclose(bt, bt.T, atol=1e-14)
        assert np.allclose(bt @ rec.t1, rec.t1 / rec.sigma1, atol=1e-12)
        assert np.allclose(bt @ rec.t2, rec.t2 / rec.sigma2, atol=1e-12)

    def test_tangent_invariance_on_surface(self):
        rng = np.random.default_rng(0)
        rec = closest_point(SPHERE, np.asarray(SPHERE.center) + np.array([0.4, 0, 0]))
        bt = b_tensor(rec, 1.0)
        for _ in range(16):
            c = rng.normal(size=2)
            a = c[0] * rec.t1 + c[1] * rec.t2
            assert np.allclose(bt @ a, a, atol=1e-12)

    def test_degenerate_band_raises(self):
        rec = ClosestPointRecord(cp=np.zeros(3), dist=0.5, t1=np.array([1.0, 0, 0]),
                                 t2=np.array([0, 1.0, 0]), n=np.array([0, 0, 1.0]),
                                 sigma1=-0.1, sigma2=1.0, kappa1=2.2, kappa2=0.0)
        with pytest.raises(DegenerateBand):
            b_tensor(rec, 1.0)


class TestProjectionJacobian:
    def test_tangent_projector_on_surface(self):
        rec = closest_point(SPHERE, (0.1, 0.5, 0.5))
        pj = projection_jacobian(rec)
        expect = np.outer(rec.t1, rec.t1) + np.outer(rec.t2, rec.t2)
        assert np.allclose(pj, expect, atol=1e-12)

    def test_singular_values_off_surface(self):
        rec = closest_point(SPHERE, (0.95, 0.5, 0.5))
        sv = np.linalg.svd(projection_jacobian(rec), compute_uv=False)
        assert np.allclose(sv, [0.4 / 0.45, 0.4 / 0.45, 0.0], atol=1e-12)

    def test_normal_nullspace(self):
        rec = closest_point(TORUS, (0.76, 0.48, 0.58))
        assert np.allclose(projection_jacobian(rec) @ rec.n, 0.0, atol=1e-12)
