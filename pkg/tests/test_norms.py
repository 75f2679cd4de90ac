"""Oscillation moduli, seminorms, smoothing experiments, stability."""

from __future__ import annotations

import math

import numpy as np
import pytest

import fracpot as fp
from fracpot.errors import (
    DegenerateRadiusError,
    HypothesisViolationError,
    InsufficientGeometryError,
    InvalidRegimeError,
)
from fracpot.norms import _besov_double_integral
from fracpot.reports import PropertyReport


# ---------------------------------------------------------------------------
# maximal function and modulus of continuity
# ---------------------------------------------------------------------------


def test_maximal_function_dominates(line_small):
    f = np.sin(line_small.points[:, 0])
    mf = fp.maximal_function(line_small, f)
    assert np.all(mf >= np.abs(f) - 1e-12)
    c = fp.maximal_function(line_small, np.full(line_small.n_points, 2.5))
    assert np.allclose(c, 2.5)


def test_modulus_matches_direct_sum(line_small):
    sp = line_small
    f = np.cos(sp.points[:, 0])
    t, p = 0.5, 2.0
    got = fp.modulus_of_continuity(sp, f, p, t)
    base = np.flatnonzero(sp.boundary_distance >= 1.25 * t)
    total = 0.0
    for i in base:
        ball = np.flatnonzero(sp.dist[i] < t)
        inner = ((f[i] - f[ball]) ** 2 * sp.weight[ball]).sum() / sp.weight[ball].sum()
        total += inner * sp.weight[i]
    assert got == pytest.approx(math.sqrt(total), rel=1e-12)


def test_modulus_monotone_scaling(line_small):
    f = line_small.points[:, 0].copy()
    e_small = fp.modulus_of_continuity(line_small, f, 2.0, 0.2)
    e_big = fp.modulus_of_continuity(line_small, f, 2.0, 1.6)
    # a Lipschitz function's oscillation grows with the ball radius
    assert e_big > e_small > 0


def test_modulus_sup_variant(line_small):
    f = line_small.points[:, 0].copy()
    t = 0.5
    e_inf = fp.modulus_of_continuity(line_small, f, math.inf, t)
    assert e_inf <= t + 1e-12
    assert e_inf >= 0.8 * t


def test_modulus_validation(line_small):
    f = np.zeros(line_small.n_points)
    with pytest.raises(DegenerateRadiusError):
        fp.modulus_of_continuity(line_small, f, 2.0, line_small.resolution / 2.0)
    with pytest.raises(ValueError):
        fp.modulus_of_continuity(line_small, f, 0.5, 1.0)
    with pytest.raises(InsufficientGeometryError):
        fp.modulus_of_continuity(line_small, f, 2.0, line_small.domain_radius)


# ---------------------------------------------------------------------------
# besov norm
# ---------------------------------------------------------------------------


def test_besov_quadrature_white_box(line_small):
    sp = line_small
    f = np.sin(2.0 * sp.points[:, 0])
    alpha, p, per = 0.3, 2.0, 6
    lo, hi = 0.3, 3.0
    got = fp.besov_norm(sp, f, alpha, p, 2.0, t_range=(lo, hi), per_decade=per)
    count = max(int(math.ceil(math.log10(hi / lo) * per)) + 1, 2)
    ts = np.geomspace(lo, hi, count)
    ep = np.array([fp.modulus_of_continuity(sp, f, p, t) for t in ts])
    semi = np.sqrt(np.trapezoid((ts**-alpha * ep) ** 2, x=np.log(ts)))
    assert got == pytest.approx(fp.lp_norm(sp, f, p) + semi, rel=1e-12)


def test_besov_sup_and_seminorm_flags(line_small):
    f = np.sin(line_small.points[:, 0])
    full = fp.besov_norm(line_small, f, 0.3, 2.0, math.inf)
    semi = fp.besov_norm(line_small, f, 0.3, 2.0, math.inf, seminorm_only=True)
    assert full == pytest.approx(semi + fp.lp_norm(line_small, f, 2.0), rel=1e-12)
    assert semi > 0


def test_besov_validation(line_small):
    f = np.zeros(line_small.n_points)
    with pytest.raises(ValueError):
        fp.besov_norm(line_small, f, 0.0, 2.0, 2.0)
    with pytest.raises(ValueError):
        fp.besov_norm(line_small, f, 0.3, 0.5, 2.0)
    with pytest.raises(ValueError):
        fp.besov_norm(line_small, f, 0.3, 2.0, 0.5)
    with pytest.raises(ValueError):
        fp.besov_norm(line_small, f, 0.3, 2.0, 2.0, t_range=(2.0, 1.0))


# ---------------------------------------------------------------------------
# pairwise seminorms
# ---------------------------------------------------------------------------


def test_holder_of_power_bump(line_small):
    beta = 0.4
    f = fp.power_bump(line_small, beta)
    c = fp.holder_seminorm(line_small, f, beta)
    # |d(x,c)^b - d(y,c)^b| <= d(x,y)^b with equality toward the center
    assert c <= 1.0 + 1e-12
    assert c >= 0.5
    assert fp.holder_seminorm(line_small, np.ones(line_small.n_points), beta) == 0.0


def test_hajlasz_degenerate_cases(line_small):
    n = line_small.n_points
    f = line_small.points[:, 0].copy()
    zeros = np.zeros(n)
    assert fp.hajlasz_constant(line_small, f, zeros, 0.5) == math.inf
    assert fp.hajlasz_constant(line_small, zeros, zeros, 0.5) == 0.0
    with pytest.raises(ValueError):
        fp.hajlasz_constant(line_small, f, -np.ones(n), 0.5)
    with pytest.raises(ValueError):
        fp.hajlasz_constant(line_small, f, np.ones(n), 0.0)


def test_hajlasz_lipschitz_bound(line_small):
    f = line_small.points[:, 0].copy()
    g = np.ones(line_small.n_points)
    c = fp.hajlasz_constant(line_small, f, g, 1.0)
    # |x - y| <= C |x - y| (1 + 1) forces C = 1/2 on a line
    assert c == pytest.approx(0.5, rel=1e-12)


def test_besov_double_integral_positive(line_small):
    f = np.sin(line_small.points[:, 0])
    v = _besov_double_integral(line_small, f, 0.3, 2.0)
    assert v > 0
    assert _besov_double_integral(line_small, np.ones_like(f), 0.3, 2.0) == 0.0


# ---------------------------------------------------------------------------
# batteries
# ---------------------------------------------------------------------------


def test_bump_battery_seeded(line_small):
    a = fp.bump_battery(line_small, 4, seed=7)
    b = fp.bump_battery(line_small, 4, seed=7)
    c = fp.bump_battery(line_small, 4, seed=8)
    assert a.shape == (4, line_small.n_points)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert np.isfinite(a).all()


def test_centered_bump_support(line_small):
    f = fp.centered_bump(line_small, width=1.0, cutoff=3.0)
    assert f.max() == pytest.approx(1.0)
    center = int(np.argmax(line_small.boundary_distance))
    assert np.all(f[line_small.dist[center] > 3.0] == 0.0)


# ---------------------------------------------------------------------------
# improvement experiments
# ---------------------------------------------------------------------------


def test_improvement_lipschitz(bessel_small):
    rep = fp.improvement_experiment(bessel_small, "lipschitz", 0.3, 0.2)
    assert rep.passed
    chk = rep.check_named("bounded-improvement-ratio")
    assert math.isfinite(chk.constant) and chk.constant > 0
    assert len(rep.details["per_function"]) == 8


def test_improvement_hajlasz(bessel_small):
    rep = fp.improvement_experiment(bessel_small, "hajlasz", 0.3, 0.2, n_functions=4)
    assert rep.passed
    assert rep.details["family"] == "hajlasz"


def test_improvement_validation(bessel_small):
    with pytest.raises(ValueError):
        fp.improvement_experiment(bessel_small, "fourier", 0.3, 0.2)
    with pytest.raises(ValueError):
        fp.improvement_experiment(bessel_small, "lipschitz", 0.4, 0.2)
    with pytest.raises(ValueError):
        fp.improvement_experiment(bessel_small, "lipschitz", 0.3, -0.1)
    with pytest.raises(HypothesisViolationError):
        fp.improvement_experiment(bessel_small, "lipschitz", 0.3, 0.8)


# ---------------------------------------------------------------------------
# embedding experiments
# ---------------------------------------------------------------------------


def test_embedding_subcritical(ai_small):
    kj = fp.bessel_kernel(ai_small, 0.4)
    rep = fp.sobolev_embedding_experiment(kj, 2.0, n_functions=6)
    assert rep.details["regime"] == "subcritical"
    assert rep.details["p_star"] == pytest.approx(10.0)
    names = {c.property for c in rep.checks}
    assert names == {"embedding-ratio_q=6", "embedding-ratio_q=10"}
    assert rep.passed


def test_embedding_critical(ai_small):
    kj = fp.bessel_kernel(ai_small, 0.5)
    rep = fp.sobolev_embedding_experiment(kj, 2.0, n_functions=6)
    assert rep.details["regime"] == "critical"
    names = {c.property for c in rep.checks}
    assert names == {"embedding-ratio_q=4", "embedding-ratio_q=8"}


def test_embedding_supercritical(bessel_small_06, ai_small):
    rep = fp.sobolev_embedding_experiment(bessel_small_06, 2.0, n_functions=6)
    assert rep.details["regime"] == "supercritical"
    names = {c.property for c in rep.checks}
    assert names == {"embedding-ratio_sup", "embedding-holder"}
    assert rep.passed


def test_embedding_regime_contradiction(bessel_small_06, ai_small):
    with pytest.raises(InvalidRegimeError):
        fp.sobolev_embedding_experiment(bessel_small_06, 2.0, regime="subcritical")
    with pytest.raises(ValueError):
        fp.sobolev_embedding_experiment(bessel_small_06, 1.0)


@pytest.fixture(scope="module")
def bessel_small_06(ai_small):
    return fp.bessel_kernel(ai_small, 0.6)


# ---------------------------------------------------------------------------
# poincare inequality
# ---------------------------------------------------------------------------


def test_poincare_lipschitz(line_small):
    f = line_small.points[:, 0].copy()
    g = np.ones(line_small.n_points)
    rep = fp.poincare_check(line_small, f, g, 1.0)
    chk = rep.check_named("oscillation-vs-gradient-constant")
    assert chk.passed
    assert 0 < chk.constant < 2.0


def test_poincare_degenerate_gradient(line_small):
    f = line_small.points[:, 0].copy()
    rep = fp.poincare_check(line_small, f, np.zeros(line_small.n_points), 1.0)
    assert not rep.passed
    with pytest.raises(ValueError):
        fp.poincare_check(line_small, f, f, 0.0)


# ---------------------------------------------------------------------------
# bundles and stability
# ---------------------------------------------------------------------------


def test_norm_bundle_fields(line_small):
    f = np.sin(line_small.points[:, 0])
    b = fp.norm_bundle(
        line_small, f, alpha=0.3, beta=0.4, gradient=np.ones(line_small.n_points)
    )
    assert set(b.lp) == {"1.0", "2.0", "inf"}
    assert b.ep_t.shape == b.ep_values.shape
    assert b.besov is not None and b.besov_params == (0.3, 2.0, math.inf)
    assert b.holder is not None and b.hajlasz is not None
    d = b.to_dict()
    assert d["besov"] == b.besov


def test_stability_check_matching():
    a = PropertyReport(name="demo")
    a.add("constant-x", 1.0, math.inf, True)
    a.add("constant-y", 2.0, math.inf, True)
    a.add("only-a", 5.0, math.inf, True)
    b = PropertyReport(name="demo")
    b.add("constant-x", 1.1, math.inf, True)
    b.add("constant-y", 2.0, math.inf, True)
    out = fp.stability_check(a, b, tolerance=0.25)
    assert out.passed
    names = {c.property for c in out.checks}
    assert names == {"stable-constant-x", "stable-constant-y"}
    cx = out.check_named("stable-constant-x")
    assert cx.constant == pytest.approx(0.1 / 1.1)
    tight = fp.stability_check(a, b, tolerance=0.01)
    assert not tight.passed


def test_stability_check_no_overlap():
    a = PropertyReport(name="demo")
    a.add("left", 1.0, math.inf, True)
    b = PropertyReport(name="demo")
    b.add("right", 1.0, math.inf, True)
    with pytest.raises(ValueError):
        fp.stability_check(a, b)
