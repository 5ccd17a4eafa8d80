import numpy as np
import pytest

from bandhjb import AnalyticProvider, Sphere, Torus, build_band, build_ghost_closures, \
    covering_grid, discretize_target, refresh_ghosts, sphere_exact_distance, unit_cube_grid
from bandhjb.band import GHOST, SQRT3, default_ghost_depth, dump_band_csv
from bandhjb.errors import BandTooThick, BandTooThin, EmptyTarget
from bandhjb.geometry import surface_distance

SPHERE = Sphere(center=(0.5, 0.5, 0.5), radius=0.4)


def sphere_band(h, eps_cells=4, radius=1):
    grid = covering_grid(SPHERE.center, SPHERE.radius, eps_cells * h, h)
    return build_band(grid, AnalyticProvider(SPHERE), eps=eps_cells * h, stencil_radius=radius)


class TestBuildBand:
    def test_node_count_matches_shell_volume(self):
        h = 1.0 / 100
        grid = unit_cube_grid(h)
        band = build_band(grid, AnalyticProvider(SPHERE), eps=4 * h)
        expect = 4 * np.pi * 0.4**2 * (2 * 4 * h) / h**3
        assert abs(band.node_count_in_band() - expect) / expect < 0.05

    def test_too_thin(self):
        h = 1.0 / 100
        with pytest.raises(BandTooThin):
            build_band(unit_cube_grid(h), AnalyticProvider(SPHERE), eps=2 * h)

    def test_too_thick(self):
        h = 1.0 / 20
        grid = covering_grid(SPHERE.center, SPHERE.radius, 0.5, h)
        with pytest.raises(BandTooThick):
            build_band(grid, AnalyticProvider(SPHERE), eps=0.5)

    def test_interior_nodes_fully_classified(self):
        band = sphere_band(1.0 / 24)
        interior = band.cls == 0
        assert np.all(band.nbr1[interior] >= 0)

    def test_ghosts_are_out_of_band(self):
        band = sphere_band(1.0 / 24)
        g = band.cls == GHOST
        assert np.all(np.abs(band.recs.dist[g]) >= band.eps - 1e-12)
        assert np.all(np.abs(band.recs.dist[~g]) < band.eps)

    def test_radius_two_layers(self):
        band = sphere_band(1.0 / 24, radius=2)
        interior = band.cls == 0
        assert band.nbr2 is not None
        assert np.all(band.nbr2[interior] >= 0)


class TestGhostClosures:
    def test_depth_invariant(self):
        band = sphere_band(1.0 / 24)
        closures = build_ghost_closures(band)
        d_alpha = surface_distance(SPHERE, closures.z_alpha)
        bound = band.eps - 2 * SQRT3 * band.h
        assert np.max(np.abs(d_alpha)) <= bound + 1e-12

    def test_projection_stays_on_ghost_side(self):
        band = sphere_band(1.0 / 24)
        closures = build_ghost_closures(band)
        d_ghost = band.recs.dist[closures.ghost_ids]
        d_alpha = surface_distance(SPHERE, closures.z_alpha)
        assert np.all(np.sign(d_alpha) == np.sign(d_ghost))

    def test_alternate_depths(self):
        band = sphere_band(1.0 / 64, eps_cells=10)
        for depth in (default_ghost_depth(band), 3 * band.h, 0.0, -3 * band.h):
            closures = build_ghost_closures(band, depth=depth)
            d_alpha = surface_distance(SPHERE, closures.z_alpha)
            side = np.where(band.recs.dist[closures.ghost_ids] >= 0, 1.0, -1.0)
            assert np.allclose(d_alpha, side * depth, atol=1e-10)

    def test_weights_sum_to_one(self):
        band = sphere_band(1.0 / 24)
        closures = build_ghost_closures(band)
        assert np.allclose(closures.weights.sum(axis=1), 1.0, atol=1e-12)

    def test_nodal_coincidence_gives_unit_weight(self):
        # a crafted point exactly on a grid node reproduces that node's value
        band = sphere_band(1.0 / 24)
        closures = build_ghost_closures(band)
        record = closures[0]
        assert record.stencil.shape == (64,)
        assert record.weights.shape == (64,)


class TestRefreshGhosts:
    def test_constant_field(self):
        band = sphere_band(1.0 / 24)
        closures = build_ghost_closures(band)
        v = np.full(len(band), 3.25)
        refresh_ghosts(band, v, closures)
        assert np.allclose(v, 3.25, atol=1e-12)

    def test_distance_field_negative_control(self):
        # interpolating d itself lands at +-(eps - 2 sqrt3 h), not d(ghost):
        # the closure enforces normal constancy only for normal-constant fields
        band = sphere_band(1.0 / 24)
        closures = build_ghost_closures(band)
        v = band.recs.dist.copy()
        refresh_ghosts(band, v, closures)
        depth = default_ghost_depth(band)
        g = closures.ghost_ids
        assert np.allclose(np.abs(v[g]), depth, atol=1e-4)
        assert np.all(np.abs(band.recs.dist[g]) > np.abs(v[g]))

    def test_normal_constant_field_fourth_order(self):
        # ghost error of a smooth constant-normal field decays ~ h^4
        errs = []
        for h in (1.0 / 24, 1.0 / 48):
            band = sphere_band(h)
            closures = build_ghost_closures(band)
            u = np.sin(3 * band.recs.cp[:, 0]) * np.cos(2 * band.recs.cp[:, 1]) + band.recs.cp[:, 2]
            v = u.copy()
            refresh_ghosts(band, v, closures)
            errs.append(np.max(np.abs(v[closures.ghost_ids] - u[closures.ghost_ids])))
        order = np.log2(errs[0] / errs[1])
        assert order > 3.4

    def test_great_circle_closure_consistency(self):
        h = 1.0 / 32
        band = sphere_band(h)
        closures = build_ghost_closures(band)
        src = np.asarray(SPHERE.center) + np.array([0.0, 0.0, 0.4])
        u = sphere_exact_distance(SPHERE.center, 0.4, src)
        vals = u(band.recs.cp)
        v = vals.copy()
        refresh_ghosts(band, v, closures)
        g = closures.ghost_ids
        antipode = np.asarray(SPHERE.center) - np.array([0.0, 0.0, 0.4])
        mask = np.linalg.norm(band.recs.cp[g] - antipode, axis=1) > 4 * h
        err = np.abs(v[g] - vals[g])[mask]
        assert np.max(err) <= 10 * h * h


class TestDiscretizeTarget:
    def test_point_source_marks_fiber(self):
        band = sphere_band(1.0 / 24)
        src = np.array([[0.5, 0.5, 0.9]])
        ids, vals = discretize_target(band, src, rho=2 * band.h)
        assert ids.size >= 2 * band.eps / band.h * 0.5  # at least part of the normal fiber
        assert np.all(vals <= 2 * band.h + 1e-12)

    def test_rho_zero_empty(self):
        band = sphere_band(1.0 / 24)
        with pytest.raises(EmptyTarget):
            discretize_target(band, np.array([[0.5113, 0.4871, 0.8954]]), rho=0.0)

    def test_chord_values_close_to_arc(self):
        band = sphere_band(1.0 / 24)
        src = np.array([[0.5, 0.5, 0.9]])
        ids, vals = discretize_target(band, src, rho=2 * band.h)
        u = sphere_exact_distance(SPHERE.center, 0.4, src[0])
        arc = u(band.recs.cp[ids])
        assert np.max(np.abs(vals - arc)) < band.h ** 2

    def test_off_surface_source_projected_with_warning(self):
        band = sphere_band(1.0 / 24)
        with pytest.warns(UserWarning):
            discretize_target(band, np.array([[0.5, 0.5, 0.93]]), rho=2 * band.h)
        assert np.allclose(band.sources[0], [0.5, 0.5, 0.9], atol=1e-12)

    def test_exit_penalty_added(self):
        band = sphere_band(1.0 / 24)
        ids, vals = discretize_target(band, np.array([[0.5, 0.5, 0.9]]), rho=2 * band.h,
                                      g_values=np.array([1.5]))
        assert np.all(vals >= 1.5)


def test_dump_band_csv(tmp_path):
    band = sphere_band(1.0 / 24)
    out = tmp_path / "band.csv"
    dump_band_csv(band, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "i,j,k,class,d,sigma1,sigma2"
    assert len(lines) == len(band) + 1
