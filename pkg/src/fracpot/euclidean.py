"""Classical Fourier references for the line and the consistency bridge.

Implements:
  - profile_autocorrelation: the normalized autocorrelation of the radial
    averaging profile; the effective radial weight of the smoothing kernel
    on the line.
  - riesz_weight_constant: the profile-dependent factor
    alpha * integral of u^alpha phi(u) du.
  - multiplier_conversion: the exact ratio between the distance-power
    integral and the Fourier symbol |2 pi xi|^alpha,
    2 cos(pi alpha / 2) Gamma(2 - alpha) / (alpha (1 - alpha)).
  - PeriodicGrid with spectral fractional derivative and potential
    (multipliers (2 pi |xi|)^alpha and (1 + 4 pi^2 xi^2)^(-alpha/2)).
  - euclidean_consistency: the metric-space derivative on a sampled line
    against the spectral one; the proportionality constant must match the
    product of the two factors above, and the discrete multiplier must sit
    inside the two-sided symbol sandwich.

The battery for the consistency run must be supported well inside the
central third of the period: the comparison pits a periodic (spectral)
computation against a boundary-truncated (metric) one, and both sides see
the same function only when wrap-around and boundary effects are below
the comparison tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.signal import fftconvolve

from .approx_id import BumpProfile, build_ai_collection
from .kernels import PotentialKernel
from .operators import apply_frac_derivative
from .reports import PropertyReport

__all__ = [
    "profile_autocorrelation",
    "riesz_weight_constant",
    "multiplier_conversion",
    "PeriodicGrid",
    "classical_frac_derivative",
    "classical_bessel",
    "gaussian_battery",
    "euclidean_consistency",
]


# ---------------------------------------------------------------------------
# profile factors
# ---------------------------------------------------------------------------


def profile_autocorrelation(
    h: BumpProfile | None = None, du: float = 1e-4
) -> tuple[np.ndarray, np.ndarray]:
    """Normalized autocorrelation of the even profile extension.

    Returns (offsets, values) on [0, 2 * support] with values
    (H * H)(x) / (integral H)^2, H(u) = h(|u|). This is the effective
    radial kernel of one smoothing step on the line: s(x, y, t) is
    asymptotically phi((x - y)/t) / t for interior points.
    """
    h = h or BumpProfile()
    sup = h.support
    u = np.arange(-sup, sup + du / 2, du)
    H = h.evaluate(np.abs(u))
    c_h = float(H.sum() * du)
    acf = fftconvolve(H, H[::-1]) * du / c_h**2
    # fftconvolve output is on offsets from -2 sup to 2 sup; keep x >= 0
    x = np.arange(acf.size) * du - 2.0 * sup
    keep = x >= -du / 2
    x = np.maximum(x[keep], 0.0)
    return x, acf[keep]


def riesz_weight_constant(alpha: float, h: BumpProfile | None = None, du: float = 1e-4) -> float:
    """alpha * integral of u^alpha phi(u) du over the profile support."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    x, phi = profile_autocorrelation(h, du)
    return float(alpha * np.trapezoid(x**alpha * phi, x))


def multiplier_conversion(alpha: float) -> float:
    """integral of (1 - cos v) / v^(1+alpha) dv, normalized: the constant
    turning the distance-power difference integral into |2 pi xi|^alpha."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return 2.0 * math.cos(math.pi * alpha / 2.0) * math.gamma(2.0 - alpha) / (alpha * (1.0 - alpha))


# ---------------------------------------------------------------------------
# spectral reference
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic grid; x_j = j * spacing, period n * spacing."""

    n: int
    spacing: float

    def __post_init__(self):
        if self.n < 4:
            raise ValueError("need at least 4 grid points")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")

    @property
    def period(self) -> float:
        return self.n * self.spacing

    @cached_property
    def frequencies(self) -> np.ndarray:
        """Ordinary (cycles per unit length) frequencies of rfft modes."""
        return np.fft.rfftfreq(self.n, self.spacing)

    @classmethod
    def for_line_space(cls, space) -> "PeriodicGrid":
        """Periodic extension of a sampled symmetric segment."""
        if space.points.shape[1] != 1:
            raise ValueError("need a one-dimensional sample")
        x = space.points[:, 0]
        gaps = np.diff(np.sort(x))
        if gaps.size == 0 or abs(gaps.max() - gaps.min()) > 1e-9 * gaps.max():
            raise ValueError("need a uniformly spaced sample")
        return cls(n=x.size, spacing=float(gaps.mean()))


def _apply_multiplier(grid: PeriodicGrid, f: np.ndarray, mult: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.n,):
        raise ValueError("f must have one value per grid point")
    return np.fft.irfft(np.fft.rfft(f) * mult, n=grid.n)


def classical_frac_derivative(grid: PeriodicGrid, f: np.ndarray, alpha: float) -> np.ndarray:
    """Spectral derivative with symbol (2 pi |xi|)^alpha (zero mean mode)."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return _apply_multiplier(grid, f, (2.0 * math.pi * grid.frequencies) ** alpha)


def classical_bessel(grid: PeriodicGrid, f: np.ndarray, alpha: float) -> np.ndarray:
    """Spectral potential with symbol (1 + 4 pi^2 xi^2)^(-alpha/2)."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return _apply_multiplier(
        grid, f, (1.0 + (2.0 * math.pi * grid.frequencies) ** 2) ** (-alpha / 2.0)
    )


def gaussian_battery(
    grid: PeriodicGrid, count: int = 8, n_bumps: int = 4, seed: int = 7
) -> np.ndarray:
    """Seeded Gaussian-bump sums supported in the central third of the period.

    Centered coordinates run over (-period/2, period/2); centers stay within
    +-period/6 shrunk by four widths, so wrap-around amplitudes are far below
    any comparison tolerance (checked by euclidean_consistency).
    """
    rng = np.random.default_rng(seed)
    P = grid.period
    x = np.arange(grid.n) * grid.spacing - P / 2.0
    out = np.zeros((count, grid.n))
    for i in range(count):
        sigmas = rng.uniform(0.015 * P, 0.04 * P, n_bumps)
        limit = P / 6.0 - 4.0 * sigmas.max()
        centers = rng.uniform(-limit, limit, n_bumps)
        amps = rng.uniform(-1.0, 1.0, n_bumps)
        for a, c, s in zip(amps, centers, sigmas):
            out[i] += a * np.exp(-(((x - c) / s) ** 2))
    return out


# ---------------------------------------------------------------------------
# consistency bridge
# ---------------------------------------------------------------------------


def euclidean_consistency(
    kernel_D: PotentialKernel,
    grid: PeriodicGrid,
    alpha: float | None = None,
    test_battery: np.ndarray | None = None,
    spread_tolerance: float = 0.02,
    match_tolerance: float = 0.03,
) -> PropertyReport:
    """Metric derivative against the spectral one on an aligned line sample.

    Checks:
    - battery-wrap-negligible: every test function is effectively compactly
      supported in the period (< 1e-8 of its sup at the seam),
    - translation-invariance: interior kernel rows are shifts of each other,
    - constant-spread: the fitted per-function proportionality constants
      agree to ``spread_tolerance`` relative range,
    - constant-matches-quadrature: their mean matches the predicted product
      riesz_weight_constant * multiplier_conversion to ``match_tolerance``,
    - multiplier-sandwich: (1 + (2 pi xi)^alpha) / (1 + 4 pi^2 xi^2)^(alpha/2)
      lies in [2^(-alpha/2), 2] at every grid frequency.

    Raises ValueError when the kernel's sample and the grid are misaligned.
    """
    if kernel_D.kind != "frac_deriv" or kernel_D.guarded:
        raise ValueError("needs the full fractional-derivative kernel")
    sp = kernel_D.space
    if alpha is None:
        alpha = kernel_D.alpha
    if abs(alpha - kernel_D.alpha) > 1e-12:
        raise ValueError("alpha does not match the kernel's order")
    if sp.points.shape[1] != 1 or sp.n_points != grid.n:
        raise ValueError("kernel sample and grid are misaligned")
    x = sp.points[:, 0]
    dx = np.diff(np.sort(x))
    if abs(dx.mean() - grid.spacing) > 1e-9 * grid.spacing:
        raise ValueError("kernel sample spacing does not match the grid")

    report = PropertyReport(name="euclidean_consistency")
    if test_battery is None:
        test_battery = gaussian_battery(grid)
    test_battery = np.asarray(test_battery, dtype=float)
    if test_battery.ndim != 2 or test_battery.shape[1] != grid.n:
        raise ValueError("test battery must be (count, n) on the grid")

    # wrap check: each function must vanish at the period seam
    seam = max(
        float(np.abs(test_battery[:, :8]).max() / np.abs(test_battery).max()),
        float(np.abs(test_battery[:, -8:]).max() / np.abs(test_battery).max()),
    )
    report.add("battery-wrap-negligible", seam, 1e-8, seam < 1e-8)

    # translation invariance of the single-scale kernels in the deep interior:
    # s(.,.,t) vanishes beyond 4t and its normalizations reach 6t, so rows
    # with boundary distance >= 8t must be exact index shifts of each other.
    b = sp.boundary_distance
    order = np.argsort(x)
    ai = build_ai_collection(sp)
    dev = 0.0
    tested = 0
    for t in (4.0 * sp.resolution, sp.domain_radius / 16.0):
        eligible = np.flatnonzero(b[order] >= 8.0 * t)
        if eligible.size < 4:
            continue
        take = eligible[:: max(1, eligible.size // 8)][:8]
        block = ai.s_rows(float(t), order[take])
        base = block[0][order]
        sup = float(np.abs(base).max())
        for j in range(1, take.size):
            shift = int(take[j] - take[0])
            moved = block[j][order][shift:]
            dev = max(dev, float(np.abs(moved - base[: moved.size]).max() / sup))
        tested += 1
    if tested == 0:
        raise ValueError("sample too small for the translation-invariance check")
    report.add("translation-invariance", dev, 1e-6, dev <= 1e-6)

    # per-function proportionality constants on the deep interior
    ev = b >= sp.domain_radius / 2.0
    w = sp.weight
    consts = []
    for i in range(test_battery.shape[0]):
        f_grid = test_battery[i]
        # battery is indexed on the sorted grid; map to sample ordering
        f = np.empty(sp.n_points)
        f[order] = f_grid
        df = apply_frac_derivative(kernel_D, f)
        ref_grid = classical_frac_derivative(grid, f_grid, alpha)
        ref = np.empty(sp.n_points)
        ref[order] = ref_grid
        num = float((df[ev] * ref[ev]) @ w[ev])
        den = float((ref[ev] ** 2) @ w[ev])
        consts.append(num / den)
    consts = np.asarray(consts)
    spread = float((consts.max() - consts.min()) / abs(consts.mean()))
    report.add("constant-spread", spread, spread_tolerance, spread <= spread_tolerance)

    c_phi = riesz_weight_constant(alpha)
    kappa = multiplier_conversion(alpha)
    predicted = c_phi * kappa
    fitted = float(consts.mean())
    rel = abs(fitted - predicted) / predicted
    report.add(
        "constant-matches-quadrature",
        rel,
        match_tolerance,
        rel <= match_tolerance,
        fitted_constant=fitted,
        predicted_constant=predicted,
    )

    xi = grid.frequencies
    ratio = (1.0 + (2.0 * math.pi * xi) ** alpha) / (1.0 + (2.0 * math.pi * xi) ** 2) ** (
        alpha / 2.0
    )
    lo_bound, hi_bound = 2.0 ** (-alpha / 2.0), 2.0
    inside = bool((ratio >= lo_bound).all() and (ratio <= hi_bound).all())
    report.add(
        "multiplier-sandwich",
        float(ratio.max()),
        hi_bound,
        inside,
        observed_min=float(ratio.min()),
        lower_bound=lo_bound,
    )

    report.details.update(
        {
            "alpha": alpha,
            "fitted_C_per_function": consts.tolist(),
            "quadrature_C": c_phi,
            "multiplier_conversion": kappa,
            "predicted_C": predicted,
            "max_rel_dev": float(np.abs(consts - predicted).max() / predicted),
        }
    )
    return report
