import numpy as np
import pytest

from bandhjb import (ControlDisc, CostModel, CurvatureAniso, HamiltonianModel, Isotropic,
                     Sphere, Torus, closest_point, hamiltonian_value, normal_curvature, speed)
from bandhjb.errors import NotTangent
from bandhjb.geometry import ClosestPointRecord

SPHERE = Sphere(center=(0.5, 0.5, 0.5), radius=0.4)
TORUS = Torus(center=(0.5, 0.5, 0.5), major=0.25, minor=0.10)


def flat_record(k1=2.0, k2=0.0):
    return ClosestPointRecord(cp=np.zeros(3), dist=0.0,
                              t1=np.array([1.0, 0, 0]), t2=np.array([0, 1.0, 0]),
                              n=np.array([0, 0, 1.0]), sigma1=1.0, sigma2=1.0,
                              kappa1=k1, kappa2=k2)


class TestNormalCurvature:
    def test_principal_direction(self):
        rec = flat_record(k1=2.0, k2=0.5)
        assert normal_curvature(rec, rec.t1) == pytest.approx(2.0)
        assert normal_curvature(rec, rec.t2) == pytest.approx(0.5)

    def test_sphere_umbilic(self):
        rec = closest_point(SPHERE, (0.9, 0.5, 0.5))
        rng = np.random.default_rng(2)
        for _ in range(8):
            c = rng.normal(size=2)
            c /= np.hypot(*c)
            a = c[0] * rec.t1 + c[1] * rec.t2
            assert normal_curvature(rec, a) == pytest.approx(2.5, abs=1e-10)

    def test_diagonal_direction(self):
        rec = flat_record(k1=2.0, k2=0.0)
        a = (rec.t1 + rec.t2) / np.sqrt(2)
        assert normal_curvature(rec, a) == pytest.approx(1.0)

    def test_not_tangent_raises(self):
        rec = flat_record()
        with pytest.raises(NotTangent):
            normal_curvature(rec, np.array([0.0, 0.1, 0.995]))


class TestSpeed:
    def test_b_zero_is_unit(self):
        rec = closest_point(TORUS, (0.76, 0.5, 0.55))
        model = CurvatureAniso(b=0.0)
        assert speed(model, rec, rec.t1) == pytest.approx(1.0)

    def test_sphere_curvature_speed(self):
        rec = closest_point(SPHERE, (0.9, 0.5, 0.5))
        model = CurvatureAniso(b=0.5)
        assert speed(model, rec, rec.t1) == pytest.approx(np.exp(-1.25), abs=1e-12)

    def test_isotropic_ignores_direction(self):
        rec = closest_point(SPHERE, (0.9, 0.5, 0.5))
        assert speed(Isotropic(), rec, rec.t2) == pytest.approx(1.0)


class TestHamiltonianValue:
    def test_solved_eikonal_state(self):
        rec = closest_point(SPHERE, (0.9, 0.5, 0.5))
        model = HamiltonianModel()
        val, a = hamiltonian_value(rec, 1.0, rec.t1, model)
        assert val == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(a, -rec.t1, atol=1e-12)

    def test_normal_gradient_formula(self):
        # p = n probes the full-sphere closed form: value r - f mu
        rec = closest_point(SPHERE, (0.9, 0.5, 0.5))
        model = HamiltonianModel()
        val, _ = hamiltonian_value(rec, 1.0, rec.n, model)
        assert val == pytest.approx(1.0 - 1.0 * 1.0, abs=1e-12)
        val7, _ = hamiltonian_value(rec, 7.0, rec.n, model)
        assert val7 == pytest.approx(1.0 - 7.0, abs=1e-12)

    def test_aniso_b0_matches_isotropic_tangent_form(self):
        rec = closest_point(TORUS, (0.77, 0.51, 0.56))
        rng = np.random.default_rng(4)
        model = HamiltonianModel(speed=CurvatureAniso(b=0.0), disc=ControlDisc(64))
        for _ in range(10):
            p = rng.normal(size=3)
            val, _ = hamiltonian_value(rec, 1.0, p, model)
            q1 = (p @ rec.t1) / rec.sigma1
            q2 = (p @ rec.t2) / rec.sigma2
            expect = 1.0 - np.hypot(q1, q2)
            assert val == pytest.approx(expect, rel=1e-6, abs=1e-9)

    def test_sampled_controls_are_tangent(self):
        rec = closest_point(TORUS, (0.77, 0.51, 0.56))
        model = HamiltonianModel(speed=CurvatureAniso(b=0.5))
        rng = np.random.default_rng(5)
        for _ in range(10):
            p = rng.normal(size=3)
            _, a = hamiltonian_value(rec, 1.0, p, model)
            assert abs(a @ rec.n) < 1e-12
            assert np.linalg.norm(a) == pytest.approx(1.0, abs=1e-12)

    def test_argmin_stability_under_refinement(self):
        rec = closest_point(TORUS, (0.78, 0.49, 0.57))
        rng = np.random.default_rng(6)
        for _ in range(6):
            p = rng.normal(size=3)
            model32 = HamiltonianModel(speed=CurvatureAniso(b=0.5), disc=ControlDisc(32))
            model64 = HamiltonianModel(speed=CurvatureAniso(b=0.5), disc=ControlDisc(64))
            _, a32 = hamiltonian_value(rec, 1.0, p, model32)
            _, a64 = hamiltonian_value(rec, 1.0, p, model64)
            angle = np.arccos(np.clip(a32 @ a64, -1, 1))
            assert angle <= 2 * np.pi / 32 + 1e-9

    def test_zero_tangent_gradient_argmin_fallback(self):
        rec = closest_point(SPHERE, (0.9, 0.5, 0.5))
        model = HamiltonianModel()
        _, a = hamiltonian_value(rec, 1.0, np.zeros(3), model)
        assert np.linalg.norm(a) == pytest.approx(1.0)


class TestModels:
    def test_bounds_validation(self):
        with pytest.raises(ValueError):
            Isotropic(f1=0.0, f2=1.0)
        with pytest.raises(ValueError):
            CostModel(r1=2.0, r2=1.0)
        with pytest.raises(ValueError):
            CurvatureAniso(b=-0.1)
        with pytest.raises(ValueError):
            ControlDisc(n_theta=4)

    def test_speed_bounds_curvature(self):
        from bandhjb.geometry import surface_records
        pts = np.asarray(SPHERE.center) + np.array([[0.45, 0, 0], [0.0, 0.41, 0]])
        recs = surface_records(SPHERE, pts)
        model = HamiltonianModel(speed=CurvatureAniso(b=0.5))
        f1, f2 = model.speed_bounds(recs)
        assert f2 == 1.0
        assert f1 == pytest.approx(np.exp(-0.5 * np.max(np.abs(recs.kappa1))))
