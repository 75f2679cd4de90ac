"""Sample-space constructions, guard geometry, and measure calibration."""

from __future__ import annotations

import json

import numpy as np
import pytest

import fracpot as fp
from fracpot.errors import DegenerateScaleError
from fracpot.space import MAX_DENSE_POINTS


# ---------------------------------------------------------------------------
# constructions
# ---------------------------------------------------------------------------


def test_line_geometry(line_small):
    sp = line_small
    assert sp.n_points == 401
    assert sp.dim_N == 1.0
    assert sp.resolution == pytest.approx(0.05)
    assert sp.domain_radius == 10.0
    assert sp.diameter == pytest.approx(20.0)
    # uniform cell weights: each point carries one resolution cell
    assert np.allclose(sp.weight, sp.resolution)
    assert sp.mass == pytest.approx(sp.resolution * sp.n_points)
    # boundary distance vanishes at endpoints and peaks in the middle
    assert sp.boundary_distance[0] == 0.0
    assert sp.boundary_distance[200] == pytest.approx(10.0)


def test_plane_geometry(plane_small):
    sp = plane_small
    assert sp.n_points == 41 * 41
    assert sp.dim_N == 2.0
    assert sp.resolution == pytest.approx(8.0 / 40.0)
    assert sp.domain_radius == 4.0
    assert sp.diameter == pytest.approx(8.0 * np.sqrt(2.0))
    assert np.allclose(sp.weight, sp.resolution**2)


def test_gasket_geometry():
    sp = fp.build_gasket_space(4, 2)
    # 3^l corner-sample vertices plus (K - 1) dilation layers
    assert sp.n_points == 3**4 + (2 - 1) * 2 * 3**3
    assert sp.dim_N == pytest.approx(np.log(3.0) / np.log(2.0))
    assert sp.resolution == pytest.approx(2.0 ** (1 - 4))
    assert sp.domain_radius == pytest.approx(2.0 ** (2 - 1))


def test_cantor_geometry():
    sp = fp.build_cantor_space(4, 2)
    assert sp.n_points == 2**4 + (2 - 1) * 2**3
    assert sp.dim_N == pytest.approx(np.log(2.0) / np.log(3.0))
    assert sp.resolution == pytest.approx(3.0 ** (1 - 4))
    assert sp.domain_radius == pytest.approx(3.0**2 / 2.0)


def test_distance_matrix_is_metric(line_small):
    d = line_small.dist
    assert np.allclose(d, d.T)
    assert np.all(np.diag(d) == 0.0)
    assert d.min() >= 0.0
    assert line_small.min_offdiag_distance == pytest.approx(0.05)


def test_construction_validation():
    with pytest.raises(ValueError):
        fp.build_line_space(-1.0, 100)
    with pytest.raises(ValueError):
        fp.build_line_space(10.0, 1)
    with pytest.raises(ValueError):
        fp.build_plane_space(4.0, MAX_DENSE_POINTS)  # n_side**2 over the cap
    with pytest.raises(ValueError):
        fp.build_gasket_space(0, 2)
    with pytest.raises(ValueError):
        fp.build_cantor_space(3, 0)


# ---------------------------------------------------------------------------
# guard region
# ---------------------------------------------------------------------------


def test_guard_validity_law(line_small):
    sp = line_small
    g = fp.GuardRegion(sp)
    assert g.margin_factor == 1.25
    t = 0.1
    assert g.radius(t) == pytest.approx(1.25 * 4.0 * t)
    mask = g.valid(t)
    assert np.array_equal(mask, sp.boundary_distance >= g.radius(t))
    assert np.array_equal(g.valid_indices(t), np.flatnonzero(mask))
    # monotone: valid at t implies valid at smaller t
    assert np.all(~mask | g.valid(t / 3.0))


def test_guard_pair_validity(line_small):
    sp = line_small
    g = fp.GuardRegion(sp)
    pv = g.pair_valid()
    sep = np.maximum(sp.dist, sp.resolution)
    need = g.margin_factor * sep
    law = (sp.boundary_distance[:, None] >= need) & (
        sp.boundary_distance[None, :] >= need
    )
    assert np.array_equal(pv, law)
    assert np.array_equal(pv, pv.T)


def test_guard_margin_validation(line_small):
    with pytest.raises(ValueError):
        fp.GuardRegion(line_small, margin_factor=0.5)


# ---------------------------------------------------------------------------
# measure calibration
# ---------------------------------------------------------------------------


def test_ball_and_integrate(line_small):
    sp = line_small
    idx = fp.ball(sp, 200, 0.5)
    # open ball on the uniform line: points strictly within the radius
    assert np.array_equal(np.sort(idx), np.flatnonzero(sp.dist[200] < 0.5))
    assert fp.integrate(sp, np.ones(sp.n_points)) == pytest.approx(sp.mass)
    f = sp.points[:, 0]
    assert fp.integrate(sp, f) == pytest.approx(0.0, abs=1e-12)


def test_ball_mass_matches_length(line_small):
    sp = line_small
    w = sp.weight
    for r in (0.3, 1.0, 3.0):
        idx = fp.ball(sp, 200, r)
        mass = float(w[idx].sum())
        # one-dimensional ball mass is 2r up to a single cell of a deep
        # interior sample
        assert abs(mass - 2.0 * r) <= 1.5 * sp.resolution


def test_lp_norm(line_small):
    sp = line_small
    f = np.ones(sp.n_points)
    assert fp.lp_norm(sp, f, 1.0) == pytest.approx(sp.mass)
    assert fp.lp_norm(sp, f, 2.0) == pytest.approx(np.sqrt(sp.mass))
    assert fp.lp_norm(sp, 3.0 * f, np.inf) == pytest.approx(3.0)
    sel = sp.boundary_distance > 5.0
    assert fp.lp_norm(sp, f, 1.0, where=sel) == pytest.approx(sp.weight[sel].sum())


def test_ahlfors_fit_line(line_small):
    rep = fp.ahlfors_fit(line_small, 2 * line_small.resolution, 5.0)
    expo = rep.check_named("ball-mass-exponent")
    assert expo.passed
    assert abs(expo.constant - 1.0) <= 0.1
    ratio = rep.check_named("ball-mass-constant-ratio")
    assert ratio.passed
    assert ratio.constant < 4.0


def test_ahlfors_fit_gasket(gasket_space):
    sp = gasket_space
    rep = fp.ahlfors_fit(sp, 2 * sp.resolution, sp.domain_radius / 2.0)
    expo = rep.check_named("ball-mass-exponent")
    assert abs(expo.constant - sp.dim_N) <= 0.15


def test_ahlfors_fit_window_validation(line_small):
    with pytest.raises(ValueError):
        fp.ahlfors_fit(line_small, 5.0, 1.0)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def test_descriptor_round_trip(tmp_path, line_small):
    path = tmp_path / "space.json"
    fp.write_descriptor(line_small, path)
    doc = json.loads(path.read_text())
    assert doc["kind"] == "line"
    sp2 = fp.load_space(path)
    assert sp2.n_points == line_small.n_points
    assert np.allclose(sp2.points, line_small.points)
    assert np.allclose(sp2.weight, line_small.weight)


def test_space_from_descriptor():
    sp = fp.space_from_descriptor(
        {"kind": "cantor", "parameters": {"subdivision_level": 3, "dilation_count": 2}}
    )
    assert sp.n_points == 2**3 + 2**2
    with pytest.raises(ValueError):
        fp.space_from_descriptor({"kind": "torus", "parameters": {}})


def test_write_points_csv(tmp_path, line_small):
    path = tmp_path / "points.csv"
    fp.write_points_csv(line_small, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "id,x0,weight"
    assert len(lines) == line_small.n_points + 1
    first = lines[1].split(",")
    assert float(first[1]) == pytest.approx(-10.0)
