import numpy as np
import pytest

from bandhjb import PointCloud, Sphere, cp_field_from_cloud, fit_local_patch, newton_closest_point
from bandhjb.cli import fibonacci_sphere
from bandhjb.errors import ConfigError, DegenerateNeighborhood, PointOutsideBand
from bandhjb.geometry import surface_records
from bandhjb.pointcloud import CloudProvider, read_ply, read_xyz

SPHERE = Sphere(center=(0.5, 0.5, 0.5), radius=0.4)


@pytest.fixture(scope="module")
def plane_cloud():
    rng = np.random.default_rng(0)
    xy = rng.uniform(0.0, 1.0, size=(4000, 2))
    pts = np.column_stack([xy, np.full(4000, 0.5)])
    return PointCloud(pts)


@pytest.fixture(scope="module")
def sphere_cloud():
    return PointCloud(fibonacci_sphere(SPHERE.center, SPHERE.radius, 60_000))


class TestPointCloud:
    def test_too_small(self):
        with pytest.raises(ConfigError):
            PointCloud(np.random.default_rng(0).uniform(size=(8, 3)))

    def test_duplicates_rejected(self):
        pts = np.random.default_rng(0).uniform(size=(32, 3))
        pts[5] = pts[17]
        with pytest.raises(ConfigError):
            PointCloud(pts)

    def test_mean_spacing(self, sphere_cloud):
        area = 4 * np.pi * SPHERE.radius**2
        approx = np.sqrt(area / len(sphere_cloud))
        assert 0.3 * approx < sphere_cloud.mean_spacing < 2.0 * approx


class TestFitLocalPatch:
    def test_plane_fits_exactly(self, plane_cloud):
        patch = fit_local_patch(plane_cloud, (0.5, 0.5, 0.52), k=12)
        assert np.max(np.abs(patch.coeffs[tuple([slice(3, 6)])])) < 1e-9
        assert abs(abs(patch.e3[2]) - 1.0) < 1e-12
        assert patch.rms < 1e-12

    def test_sphere_curvature_coefficients(self, sphere_cloud):
        z = np.asarray(SPHERE.center) + np.array([0.41, 0.0, 0.0])
        patch = fit_local_patch(sphere_cloud, z, k=12)
        # |c3|, |c5| ~ kappa/2 = 1/(2 r0)
        expect = 1.0 / (2 * SPHERE.radius)
        assert abs(patch.coeffs[3]) == pytest.approx(expect, rel=0.02)
        assert abs(patch.coeffs[5]) == pytest.approx(expect, rel=0.02)

    def test_k_too_small(self, sphere_cloud):
        with pytest.raises(ConfigError):
            fit_local_patch(sphere_cloud, (0.9, 0.5, 0.5), k=5)

    def test_collinear_degenerate(self):
        t = np.linspace(0.0, 1.0, 64)
        pts = np.column_stack([t, np.zeros(64), np.zeros(64)])
        cloud = PointCloud(pts)
        with pytest.raises(DegenerateNeighborhood):
            fit_local_patch(cloud, (0.5, 0.0, 0.0), k=12)


class TestNewtonClosestPoint:
    def test_plane_orthogonal_projection(self, plane_cloud):
        patch = fit_local_patch(plane_cloud, (0.4, 0.6, 0.55), k=16)
        cp = newton_closest_point(patch, (0.4, 0.6, 0.55))
        assert np.allclose(cp, (0.4, 0.6, 0.5), atol=1e-9)

    def test_sphere_accuracy(self, sphere_cloud):
        z = np.asarray(SPHERE.center) + np.array([0.45, 0.0, 0.0])
        patch = fit_local_patch(sphere_cloud, z, k=12)
        cp = newton_closest_point(patch, z)
        exact = surface_records(SPHERE, z[None, :]).cp[0]
        s = sphere_cloud.mean_spacing
        assert np.linalg.norm(cp - exact) <= 10 * s * s

    def test_on_surface_fixed_point(self, plane_cloud):
        patch = fit_local_patch(plane_cloud, (0.3, 0.3, 0.5), k=16)
        cp = newton_closest_point(patch, (0.3, 0.3, 0.5))
        assert np.allclose(cp, (0.3, 0.3, 0.5), atol=1e-10)


class TestCpField:
    def test_plane_sigmas_unity(self, plane_cloud):
        h = 1.0 / 40
        xs = np.arange(12, 28) * h
        nodes = np.stack(np.meshgrid(xs, xs, np.array([0.45, 0.5, 0.55]), indexing="ij"),
                         axis=-1).reshape(-1, 3)
        recs = cp_field_from_cloud(plane_cloud, nodes, h, k=16)
        assert np.nanmax(np.abs(recs.sigma1 - 1)) < 1e-6
        assert np.nanmax(np.abs(recs.sigma2 - 1)) < 1e-6

    def test_sphere_sigmas_match_analytic(self, sphere_cloud):
        h = 1.0 / 40
        rng = np.random.default_rng(3)
        d = rng.normal(size=(400, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        raw = np.asarray(SPHERE.center) + (0.4 + rng.uniform(-2 * h, 2 * h, 400))[:, None] * d
        nodes = np.round(raw / h) * h
        recs = cp_field_from_cloud(sphere_cloud, nodes, h, k=12)
        exact = surface_records(SPHERE, nodes)
        assert np.nanmax(np.abs(recs.sigma1 - exact.sigma1)) < 5e-3
        assert np.nanmax(np.abs(recs.sigma2 - exact.sigma2)) < 5e-3

    def test_cp_consistency_second_order(self, sphere_cloud):
        h = 1.0 / 40
        rng = np.random.default_rng(9)
        d = rng.normal(size=(300, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        raw = np.asarray(SPHERE.center) + (0.4 + rng.uniform(-2 * h, 2 * h, 300))[:, None] * d
        nodes = np.round(raw / h) * h
        recs = cp_field_from_cloud(sphere_cloud, nodes, h, k=12)
        exact = surface_records(SPHERE, nodes)
        gap = np.linalg.norm(recs.cp - exact.cp, axis=1)
        s = sphere_cloud.mean_spacing
        assert np.quantile(gap[np.isfinite(gap)], 0.99) <= 10 * s * s

    def test_normal_alignment(self, sphere_cloud):
        h = 1.0 / 40
        rng = np.random.default_rng(5)
        d = rng.normal(size=(200, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        raw = np.asarray(SPHERE.center) + (0.4 + rng.uniform(1.2 * h, 3 * h, 200))[:, None] * d
        nodes = np.round(raw / h) * h
        recs = cp_field_from_cloud(sphere_cloud, nodes, h, k=12)
        ray = (nodes - recs.cp) / recs.dist[:, None]
        dots = np.abs(np.einsum("mi,mi->m", ray, recs.n))
        assert np.min(dots) > np.cos(1e-2)

    def test_far_node_rejected(self, sphere_cloud):
        h = 1.0 / 40
        nodes = np.array([[0.5, 0.5, 0.5]])  # sphere center, far from the cloud
        with pytest.raises(PointOutsideBand):
            cp_field_from_cloud(sphere_cloud, nodes, h, max_dist=4 * h)


class TestProviderAndIO:
    def test_generic_records_on_sphere(self, sphere_cloud):
        prov = CloudProvider(sphere_cloud)
        pts = np.asarray(SPHERE.center) + np.array([[0.43, 0.01, -0.02], [0.0, -0.42, 0.03]])
        recs = prov.records(pts)
        exact = surface_records(SPHERE, pts)
        s = sphere_cloud.mean_spacing
        assert np.max(np.linalg.norm(recs.cp - exact.cp, axis=1)) < 20 * s * s
        assert np.max(np.abs(recs.dist - exact.dist)) < 20 * s * s

    def test_xyz_roundtrip(self, tmp_path):
        pts = np.random.default_rng(1).uniform(size=(64, 3))
        p = tmp_path / "c.xyz"
        with open(p, "w") as f:
            for x, y, z in pts:
                f.write(f"{x:.17g} {y:.17g} {z:.17g} 0 0 1\n")  # trailing normals ignored
        got = read_xyz(p)
        assert np.allclose(got, pts, atol=1e-15)

    def test_ply_roundtrip(self, tmp_path):
        pts = np.random.default_rng(2).uniform(size=(32, 3))
        p = tmp_path / "c.ply"
        with open(p, "w") as f:
            f.write("ply\nformat ascii 1.0\ncomment test\n")
            f.write(f"element vertex {len(pts)}\n")
            f.write("property float x\nproperty float y\nproperty float z\n")
            f.write("property uchar red\nend_header\n")
            for x, y, z in pts:
                f.write(f"{x:.17g} {y:.17g} {z:.17g} 255\n")
        got = read_ply(p)
        assert np.allclose(got, pts, atol=1e-15)

    def test_cloud_from_file(self, tmp_path):
        pts = fibonacci_sphere((0, 0, 0), 1.0, 64)
        p = tmp_path / "s.xyz"
        with open(p, "w") as f:
            for x, y, z in pts:
                f.write(f"{x} {y} {z}\n")
        cloud = PointCloud.from_file(p)
        assert len(cloud) == 64
