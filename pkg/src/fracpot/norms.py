"""Smoothness functionals and regularity-improvement experiments.

Implements:
  - maximal_function: centered Hardy-Littlewood maximal function over
    dyadic ball radii.
  - modulus_of_continuity: the L^p ball-averaged modulus E_p(f, t) over
    guarded base points.
  - besov_norm: ||f||_p plus the log-scale quadrature of (t^-alpha E_p)^q.
  - holder_seminorm / hajlasz_constant: pairwise smoothness functionals on
    boundary-cleared, separation-floored pairs.
  - improvement_experiment: potentials gain alpha orders of smoothness in
    the Lipschitz, Besov double-integral, and pointwise-gradient senses.
  - sobolev_embedding_experiment: potential-target norm ratios in the
    subcritical / critical / supercritical integrability regimes.
  - poincare_check: ball mean-oscillation against diameter^alpha times the
    ball average of the maximal gradient.
  - stability_check: compares the named constants of two reports (e.g.
    across two sample densities) at a relative tolerance.

Guard discipline: ball-based quantities (modulus, maximal function,
ball oscillation) require the ball inside the sample with a 25% margin;
pairwise quantities additionally drop separations under four sample
resolutions, where discretization noise would masquerade as roughness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateRadiusError,
    HypothesisViolationError,
    InsufficientGeometryError,
    InvalidRegimeError,
)
from .kernels import PotentialKernel
from .operators import apply_bessel
from .reports import PropertyReport
from .space import GuardRegion, MetricMeasureSpace, lp_norm

__all__ = [
    "maximal_function",
    "modulus_of_continuity",
    "besov_norm",
    "holder_seminorm",
    "hajlasz_constant",
    "bump_battery",
    "power_bump",
    "centered_bump",
    "improvement_experiment",
    "sobolev_embedding_experiment",
    "poincare_check",
    "NormBundle",
    "norm_bundle",
    "stability_check",
]


# ---------------------------------------------------------------------------
# pointwise functionals
# ---------------------------------------------------------------------------


def maximal_function(space: MetricMeasureSpace, f: np.ndarray) -> np.ndarray:
    """Centered maximal function over dyadic radii {2^k resolution}.

    The minimal separation is included as an extra smallest radius so that
    the singleton ball is always among the candidates and Mf >= |f| holds
    pointwise on every space.
    """
    f = np.asarray(f, dtype=float)
    af = np.abs(f)
    radii = [space.min_offdiag_distance]
    r = space.resolution
    while r <= space.domain_radius:
        radii.append(r)
        r *= 2.0
    out = np.zeros(space.n_points)
    w = space.weight
    for r in sorted(set(radii)):
        mask = space.dist < r
        num = mask @ (af * w)
        den = mask @ w
        out = np.maximum(out, num / den)
    return out


def modulus_of_continuity(
    space: MetricMeasureSpace,
    f: np.ndarray,
    p: float,
    t: float,
    guard: GuardRegion | None = None,
) -> float:
    """E_p(f, t): L^p-averaged oscillation over radius-t balls.

    Base points must clear the boundary by margin * t (the ball itself,
    with margin; this is a ball statistic, not a kernel one, so the window
    factor 4 does not apply). Raises DegenerateRadiusError below the sample
    resolution and InsufficientGeometryError when no base point qualifies.
    """
    if t < space.resolution:
        raise DegenerateRadiusError(
            f"radius {t} is below the sample resolution {space.resolution}"
        )
    if not (p >= 1):
        raise ValueError("p must be at least 1")
    guard = guard or GuardRegion(space)
    f = np.asarray(f, dtype=float)
    base = space.boundary_distance >= guard.margin_factor * t
    if not base.any():
        raise InsufficientGeometryError(
            f"no base points clear the boundary by {guard.margin_factor} * {t}"
        )
    w = space.weight
    ball = space.dist[base] < t
    diffs = np.abs(f[base][:, None] - f[None, :])
    if math.isinf(p):
        return float(np.where(ball, diffs, 0.0).max())
    num = (diffs**p * w[None, :] * ball).sum(axis=1)
    den = ball @ w
    inner = num / den
    wb = w[base]
    return float((inner @ wb) ** (1.0 / p))


def besov_norm(
    space: MetricMeasureSpace,
    f: np.ndarray,
    alpha: float,
    p: float,
    q: float,
    t_range: tuple[float, float] | None = None,
    per_decade: int = 12,
    guard: GuardRegion | None = None,
    seminorm_only: bool = False,
) -> float:
    """||f||_p + the (alpha, p, q) modulus seminorm over a log scale range.

    The seminorm integrates (t^-alpha E_p(f, t))^q dt/t by trapezoid in
    log t (supremum for q = inf). Default range [2 resolution, radius/4].
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if not (p >= 1):
        raise ValueError("p must be at least 1")
    if not (q >= 1):
        raise ValueError("q must be at least 1")
    if t_range is None:
        t_range = (2.0 * space.resolution, space.domain_radius / 4.0)
    lo, hi = t_range
    if not (0 < lo < hi):
        raise ValueError("t_range must be increasing and positive")
    count = max(int(math.ceil(math.log10(hi / lo) * per_decade)) + 1, 2)
    ts = np.geomspace(lo, hi, count)
    ep = np.array([modulus_of_continuity(space, f, p, t, guard) for t in ts])
    integrand = ts ** (-alpha) * ep
    if math.isinf(q):
        semi = float(integrand.max())
    else:
        semi = float(np.trapezoid(integrand**q, x=np.log(ts)) ** (1.0 / q))
    if seminorm_only:
        return semi
    return float(lp_norm(space, f, p) + semi)


# ---------------------------------------------------------------------------
# pairwise functionals
# ---------------------------------------------------------------------------


def _eligible_pairs(
    space: MetricMeasureSpace,
    guard: GuardRegion | None,
    min_separation: float | None,
):
    """Upper-triangle masks and separations for pairwise functionals."""
    guard = guard or GuardRegion(space)
    if min_separation is None:
        min_separation = 4.0 * space.resolution
    iu = np.triu_indices(space.n_points, 1)
    d = space.dist[iu]
    ok = guard.pair_valid()[iu] & (d >= min_separation)
    return iu, d, ok


def holder_seminorm(
    space: MetricMeasureSpace,
    f: np.ndarray,
    beta: float,
    guard: GuardRegion | None = None,
    min_separation: float | None = None,
) -> float:
    """sup |f(x) - f(y)| / d(x,y)^beta over eligible pairs."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    f = np.asarray(f, dtype=float)
    iu, d, ok = _eligible_pairs(space, guard, min_separation)
    if not ok.any():
        raise InsufficientGeometryError("no eligible pairs for the seminorm")
    diffs = np.abs(f[iu[0]] - f[iu[1]])[ok]
    return float((diffs / d[ok] ** beta).max())


def hajlasz_constant(
    space: MetricMeasureSpace,
    f: np.ndarray,
    g: np.ndarray,
    beta: float,
    guard: GuardRegion | None = None,
    min_separation: float | None = None,
) -> float:
    """Smallest C with |f(x)-f(y)| <= C d^beta (g(x)+g(y)) on eligible pairs.

    Returns inf when some pair has zero gradient sum but nonzero
    oscillation; 0/0 pairs are skipped.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if np.any(g < 0):
        raise ValueError("gradient candidate must be nonnegative")
    iu, d, ok = _eligible_pairs(space, guard, min_separation)
    if not ok.any():
        raise InsufficientGeometryError("no eligible pairs for the constant")
    num = np.abs(f[iu[0]] - f[iu[1]])[ok]
    den = (d[ok] ** beta) * (g[iu[0]] + g[iu[1]])[ok]
    zero = den == 0.0
    if np.any(zero & (num > 0)):
        return math.inf
    keep = ~zero
    if not keep.any():
        return 0.0
    return float((num[keep] / den[keep]).max())


def _besov_double_integral(
    space: MetricMeasureSpace,
    f: np.ndarray,
    gamma: float,
    p: float,
    guard: GuardRegion | None = None,
    min_separation: float | None = None,
) -> float:
    """Double-integral Besov-type seminorm (|df|^p / d^(N + gamma p))^(1/p)."""
    f = np.asarray(f, dtype=float)
    iu, d, ok = _eligible_pairs(space, guard, min_separation)
    w = space.weight
    num = np.abs(f[iu[0]] - f[iu[1]])[ok] ** p
    wpair = (w[iu[0]] * w[iu[1]])[ok]
    dpow = d[ok] ** (space.dim_N + gamma * p)
    return float((2.0 * (num * wpair / dpow).sum()) ** (1.0 / p))


# ---------------------------------------------------------------------------
# test function batteries
# ---------------------------------------------------------------------------


def bump_battery(
    space: MetricMeasureSpace,
    count: int,
    seed: int = 0,
    n_bumps: int = 5,
    width_range: tuple[float, float] = (0.03, 0.12),
    center_clearance: float = 0.6,
) -> np.ndarray:
    """Seeded sums of Gaussian bumps, shape (count, n_points).

    Centers are sample points clearing the boundary by center_clearance *
    domain_radius; widths are uniform fractions of the domain radius.
    """
    rng = np.random.default_rng(seed)
    R = space.domain_radius
    cand = np.flatnonzero(space.boundary_distance >= center_clearance * R)
    if cand.size == 0:
        raise InsufficientGeometryError("no interior points for bump centers")
    out = np.zeros((count, space.n_points))
    for i in range(count):
        amps = rng.uniform(-1.0, 1.0, n_bumps)
        centers = rng.choice(cand, n_bumps)
        sigmas = rng.uniform(width_range[0] * R, width_range[1] * R, n_bumps)
        for a, c, s in zip(amps, centers, sigmas):
            out[i] += a * np.exp(-((space.dist[c] / s) ** 2))
    return out


def power_bump(
    space: MetricMeasureSpace, beta: float, center: int | None = None, amplitude: float = 1.0
) -> np.ndarray:
    """amplitude * d(x, center)^beta; the sharp Hoelder-beta test function."""
    if center is None:
        center = int(np.argmax(space.boundary_distance))
    return amplitude * space.dist[int(center)] ** beta


def centered_bump(
    space: MetricMeasureSpace, width: float | None = None, cutoff: float = 4.0
) -> np.ndarray:
    """Smooth unit-sup bump at the sample's most central point.

    Gaussian of the given metric ``width`` (default domain_radius / 64),
    zeroed beyond ``cutoff * width`` so the support stays deep inside the
    guard; with the default cutoff the truncation jump is exp(-16). The
    narrow default keeps mean/sup small, which is what bounds the floor of
    reproducing-identity residuals on a compactly truncated sample.
    """
    center = int(np.argmax(space.boundary_distance))
    r = space.dist[center]
    if width is None:
        width = space.domain_radius / 64.0
    f = np.exp(-((r / width) ** 2))
    f[r > cutoff * width] = 0.0
    return f


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

_FAMILIES = ("lipschitz", "besov", "hajlasz")


def improvement_experiment(
    kernel_J: PotentialKernel,
    family: str,
    alpha: float,
    beta: float,
    p: float = 2.0,
    n_functions: int = 8,
    seed: int = 0,
) -> PropertyReport:
    """Measure the smoothness gained by the potential in one scale family.

    family 'lipschitz': Hoelder-beta sources, Hoelder-(alpha+beta) targets.
    family 'besov': double-integral seminorms of matching orders.
    family 'hajlasz': power-bump sources with explicit constant gradients;
    targets are tested against the maximal function of the source gradient.

    Requires alpha + beta < 1 (HypothesisViolationError otherwise: the
    improved exponent must stay below the trivial smoothness ceiling).
    """
    if family not in _FAMILIES:
        raise ValueError(f"family must be one of {_FAMILIES}")
    if abs(kernel_J.alpha - alpha) > 1e-12:
        raise ValueError("alpha does not match the kernel's order")
    if beta <= 0:
        raise ValueError("beta must be positive")
    if alpha + beta >= 1.0:
        raise HypothesisViolationError(
            f"improvement requires alpha + beta < 1, got {alpha + beta}"
        )
    sp = kernel_J.space
    guard = kernel_J.guard
    report = PropertyReport(name=f"improvement_{family}")
    report.details.update({"alpha": alpha, "beta": beta, "p": p, "family": family})

    sources: list[np.ndarray] = []
    gradients: list[np.ndarray] = []
    if family == "hajlasz":
        rng = np.random.default_rng(seed)
        cand = np.flatnonzero(sp.boundary_distance >= 0.6 * sp.domain_radius)
        centers = rng.choice(cand, min(n_functions, cand.size), replace=False)
        for c in centers:
            amp = float(rng.uniform(0.5, 2.0))
            sources.append(power_bump(sp, beta, center=int(c), amplitude=amp))
            gradients.append(np.full(sp.n_points, amp / 2.0))
    else:
        battery = bump_battery(sp, n_functions - 1, seed=seed)
        sources = [battery[i] for i in range(battery.shape[0])]
        sources.append(power_bump(sp, beta))

    ratios = []
    per_function = []
    for i, f in enumerate(sources):
        jf = apply_bessel(kernel_J, f)
        if family == "lipschitz":
            src = holder_seminorm(sp, f, beta, guard)
            tgt = _trusted_holder(kernel_J, jf, alpha + beta)
        elif family == "besov":
            src = _besov_double_integral(sp, f, beta, p, guard)
            tgt = _besov_double_integral(sp, np.where(np.isfinite(jf), jf, 0.0), alpha + beta, p, guard)
        else:
            src = 1.0  # constant-gradient normalization is in the target constant
            mg = maximal_function(sp, gradients[i])
            tgt = hajlasz_constant(sp, np.where(np.isfinite(jf), jf, 0.0), mg, alpha + beta, guard)
        r = tgt / src if src > 0 else math.inf
        ratios.append(r)
        per_function.append({"source": src, "target": tgt, "ratio": r})
    worst = float(max(ratios))
    report.add(
        "bounded-improvement-ratio",
        worst,
        math.inf,
        bool(math.isfinite(worst)),
        n_functions=len(sources),
    )
    report.details["per_function"] = per_function
    return report


def _trusted_holder(kernel: PotentialKernel, jf: np.ndarray, gamma: float) -> float:
    """Hoelder seminorm of a potential, on rows the kernel trusts."""
    sp = kernel.space
    f = np.where(np.isfinite(jf), jf, 0.0)
    # untrusted rows never enter: pair validity already requires boundary
    # clearance at least margin * resolution at both endpoints
    return holder_seminorm(sp, f, gamma, kernel.guard)


def sobolev_embedding_experiment(
    kernel_J: PotentialKernel,
    p: float,
    alpha: float | None = None,
    regime: str | None = None,
    n_functions: int = 16,
    seed: int = 0,
) -> PropertyReport:
    """Norm ratios ||J g||_q / ||g||_p across the integrability regimes.

    subcritical (p < N/alpha): q up to p* = (1/p - alpha/N)^-1;
    critical (p = N/alpha): q in {2p, 4p} as finite representatives;
    supercritical (p > N/alpha): sup norm plus the Hoelder seminorm at
    exponent alpha - N/p.

    An explicitly requested regime that contradicts (p, alpha, N) raises
    InvalidRegimeError.
    """
    if alpha is None:
        alpha = kernel_J.alpha
    if abs(kernel_J.alpha - alpha) > 1e-12:
        raise ValueError("alpha does not match the kernel's order")
    if not (1.0 < p < math.inf):
        raise ValueError("p must lie in (1, inf)")
    sp = kernel_J.space
    crit = sp.dim_N / alpha
    if abs(p - crit) <= 1e-12:
        auto = "critical"
    elif p < crit:
        auto = "subcritical"
    else:
        auto = "supercritical"
    if regime is None:
        regime = auto
    elif regime != auto:
        raise InvalidRegimeError(
            f"regime {regime!r} contradicts p={p}, alpha={alpha}, N={sp.dim_N} "
            f"(which give {auto!r})"
        )

    guard = kernel_J.guard
    t_eval = min(1.0, sp.domain_radius / 8.0)
    ev = guard.valid(t_eval)
    if not ev.any():
        raise InsufficientGeometryError("no guarded evaluation points")

    battery = bump_battery(sp, n_functions, seed=seed)
    report = PropertyReport(name="sobolev_embedding")
    report.details.update({"p": p, "alpha": alpha, "regime": regime, "N": sp.dim_N})

    if regime == "subcritical":
        p_star = 1.0 / (1.0 / p - alpha / sp.dim_N)
        qs = [0.5 * (p + p_star), p_star]
        report.details["p_star"] = p_star
    elif regime == "critical":
        qs = [2.0 * p, 4.0 * p]
    else:
        qs = []

    per_function: list[dict] = []
    for i in range(battery.shape[0]):
        g = battery[i]
        gn = lp_norm(sp, g, p)
        if gn == 0.0:
            continue
        g = g / gn
        jg = apply_bessel(kernel_J, g)
        row = {"index": i}
        for q in qs:
            row[f"ratio_q={q:.6g}"] = lp_norm(sp, jg, q, where=ev)
        if regime == "supercritical":
            row["ratio_sup"] = float(np.abs(jg[ev]).max())
            row["holder"] = _trusted_holder(kernel_J, jg, alpha - sp.dim_N / p)
        per_function.append(row)
    report.details["per_function"] = per_function

    for key in sorted({k for row in per_function for k in row if k != "index"}):
        vals = [row[key] for row in per_function if key in row]
        worst = float(max(vals))
        report.add(
            f"embedding-{key}",
            worst,
            math.inf,
            bool(math.isfinite(worst)),
            n_functions=len(vals),
        )
    return report


def poincare_check(
    space: MetricMeasureSpace,
    f: np.ndarray,
    g_candidate: np.ndarray,
    alpha: float,
    guard: GuardRegion | None = None,
    radii: tuple[float, ...] | None = None,
    stride: int = 40,
) -> PropertyReport:
    """Ball mean oscillation against diam(B)^alpha times the Mg ball average."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    guard = guard or GuardRegion(space)
    f = np.asarray(f, dtype=float)
    if radii is None:
        R = space.domain_radius
        radii = (R / 40.0, R / 20.0, R / 10.0, R / 5.0)
    mg = maximal_function(space, g_candidate)
    w = space.weight
    r_max = max(radii)
    cand = np.flatnonzero(space.boundary_distance >= guard.margin_factor * r_max)
    if cand.size == 0:
        raise InsufficientGeometryError("no centers clear the largest radius")
    centers = cand[::stride] if cand.size > stride else cand

    worst = 0.0
    n_balls = 0
    rows = []
    for c in centers:
        for r in radii:
            ball = space.dist[c] < r
            if ball.sum() < 2:
                continue
            wb = w[ball]
            favg = float(f[ball] @ wb / wb.sum())
            lhs = float(np.abs(f[ball] - favg) @ wb / wb.sum())
            diam = 2.0 * float(space.dist[c][ball].max())
            rhs = diam**alpha * float(mg[ball] @ wb / wb.sum())
            if rhs == 0.0:
                if lhs > 0:
                    worst = math.inf
                continue
            ratio = lhs / rhs
            worst = max(worst, ratio)
            rows.append({"center": int(c), "radius": r, "ratio": ratio})
            n_balls += 1
    report = PropertyReport(name="poincare")
    report.add(
        "oscillation-vs-gradient-constant",
        worst,
        math.inf,
        bool(math.isfinite(worst)),
        n_balls=n_balls,
        alpha=alpha,
    )
    report.details["balls"] = rows
    return report


# ---------------------------------------------------------------------------
# bundles and stability
# ---------------------------------------------------------------------------


@dataclass
class NormBundle:
    lp: dict
    ep_t: np.ndarray
    ep_values: np.ndarray
    besov: float | None = None
    besov_params: tuple | None = None
    holder: float | None = None
    hajlasz: float | None = None

    def to_dict(self) -> dict:
        out = {
            "lp": self.lp,
            "ep_t": self.ep_t.tolist(),
            "ep_values": self.ep_values.tolist(),
        }
        if self.besov is not None:
            out["besov"] = self.besov
            out["besov_params"] = list(self.besov_params)
        if self.holder is not None:
            out["holder"] = self.holder
        if self.hajlasz is not None:
            out["hajlasz"] = self.hajlasz
        return out


def norm_bundle(
    space: MetricMeasureSpace,
    f: np.ndarray,
    alpha: float | None = None,
    p: float = 2.0,
    q: float = math.inf,
    beta: float | None = None,
    gradient: np.ndarray | None = None,
    per_decade: int = 12,
) -> NormBundle:
    """All standard functionals of one function in one pass."""
    f = np.asarray(f, dtype=float)
    lp = {str(pp): lp_norm(space, f, pp) for pp in (1.0, 2.0, p, math.inf)}
    lo, hi = 2.0 * space.resolution, space.domain_radius / 4.0
    count = max(int(math.ceil(math.log10(hi / lo) * per_decade)) + 1, 2)
    ts = np.geomspace(lo, hi, count)
    ep = np.array([modulus_of_continuity(space, f, p, t) for t in ts])
    bundle = NormBundle(lp=lp, ep_t=ts, ep_values=ep)
    if alpha is not None:
        bundle.besov = besov_norm(space, f, alpha, p, q)
        bundle.besov_params = (alpha, p, q)
    if beta is not None:
        bundle.holder = holder_seminorm(space, f, beta)
        if gradient is not None:
            bundle.hajlasz = hajlasz_constant(space, f, gradient, beta)
    return bundle


def stability_check(
    report_a: PropertyReport, report_b: PropertyReport, tolerance: float = 0.25
) -> PropertyReport:
    """Relative agreement of matching named constants in two reports.

    Intended for the same experiment at two sample densities: bounded
    constants must be stable under refinement, not merely finite.
    """
    out = PropertyReport(name=f"stability_{report_a.name}")
    names_a = {c.property: c for c in report_a.checks}
    for cb in report_b.checks:
        ca = names_a.get(cb.property)
        if ca is None:
            continue
        va, vb = ca.constant, cb.constant
        if not (math.isfinite(va) and math.isfinite(vb)):
            continue
        scale = max(abs(va), abs(vb))
        if scale == 0.0:
            out.add(f"stable-{cb.property}", 0.0, tolerance, True)
            continue
        rel = abs(va - vb) / scale
        out.add(
            f"stable-{cb.property}",
            rel,
            tolerance,
            rel <= tolerance,
            value_a=va,
            value_b=vb,
        )
    if not out.checks:
        raise ValueError("reports share no finite named constants")
    return out
