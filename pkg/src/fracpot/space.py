"""Sampled Ahlfors regular metric measure spaces with quadrature.

Implements:
  - MetricMeasureSpace: immutable point sample with dense distances, positive
    quadrature weights, regularity dimension, and truncation metadata.
  - GuardRegion: which (point, scale) pairs are far enough from the sample's
    truncation boundary for scale-local operators to be unbiased.
  - builders for four geometries: uniform line segment, uniform plane square,
    dilated Sierpinski gasket, dilated middle-thirds Cantor set. The fractal
    builders sample the unbounded self-similar blowup of the base set; the
    annuli between consecutive dilates are sampled once each, so cell weights
    sum to the exact self-similar mass of the largest dilate.
  - ball / integrate / lp_norm quadrature queries.
  - ahlfors_fit: empirical ball-mass regularity exponent and constants.
  - descriptor JSON round trip and CSV point export.

All samples model an infinite-measure space; the sample is a truncation and
every scale-sensitive computation downstream is expected to consult the
GuardRegion rather than trust boundary rows.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product

import numpy as np

from .errors import InsufficientGeometryError, InsufficientScalesError
from .fitting import loglog_slope
from .reports import PropertyReport, format_float

__all__ = [
    "MAX_DENSE_POINTS",
    "MetricMeasureSpace",
    "GuardRegion",
    "build_line_space",
    "build_plane_space",
    "build_gasket_space",
    "build_cantor_space",
    "space_from_descriptor",
    "load_space",
    "write_descriptor",
    "write_points_csv",
    "ball",
    "integrate",
    "lp_norm",
    "ahlfors_fit",
]

# Dense n x n distance storage bound; every algorithm here is a dense matrix
# computation, so larger samples are rejected rather than silently degraded.
MAX_DENSE_POINTS = 8192


# ---------------------------------------------------------------------------
# core types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MetricMeasureSpace:
    """Finite sample of an Ahlfors N-regular metric measure space.

    Attributes
    ----------
    points : ndarray, shape (n, d)
        Embedding coordinates (d = 1 or 2 for the built-in geometries).
    dist : ndarray, shape (n, n)
        Dense pairwise metric, exactly symmetric with zero diagonal.
    weight : ndarray, shape (n,)
        Strictly positive quadrature masses; integrate(f) = sum(f * weight).
    dim_N : float
        Regularity dimension: ball masses scale like r**dim_N.
    domain_radius : float
        Extent of the sampled region (half the reachable diameter scale).
    resolution : float
        Finest inter-point scale the sample resolves.
    boundary_distance : ndarray, shape (n,)
        Metric distance from each point to the truncation frontier of the
        (infinite) modeled space. Genuine boundaries of the modeled space
        (e.g. the apex corner of the gasket blowup) do not count.
    descriptor : dict
        JSON-serializable build recipe {kind, parameters, seed}.
    """

    points: np.ndarray
    dist: np.ndarray
    weight: np.ndarray
    dim_N: float
    domain_radius: float
    resolution: float
    boundary_distance: np.ndarray
    descriptor: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        n = pts.shape[0]
        if n > MAX_DENSE_POINTS:
            raise ValueError(
                f"sample has {n} points; dense distance storage is capped at "
                f"{MAX_DENSE_POINTS}"
            )
        d = np.asarray(self.dist, dtype=float)
        w = np.asarray(self.weight, dtype=float)
        b = np.asarray(self.boundary_distance, dtype=float)
        if d.shape != (n, n):
            raise ValueError("dist must be (n, n)")
        if w.shape != (n,) or b.shape != (n,):
            raise ValueError("weight and boundary_distance must be (n,)")
        if not np.all(w > 0):
            raise ValueError("all quadrature weights must be strictly positive")
        if self.dim_N <= 0 or self.domain_radius <= 0 or self.resolution <= 0:
            raise ValueError("dim_N, domain_radius, resolution must be positive")
        for arr in (pts, d, w, b):
            arr.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "dist", d)
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "boundary_distance", b)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @cached_property
    def mass(self) -> float:
        return float(self.weight.sum())

    @cached_property
    def diameter(self) -> float:
        return float(self.dist.max())

    @cached_property
    def min_offdiag_distance(self) -> float:
        d = self.dist + np.diag(np.full(self.n_points, np.inf))
        return float(d.min())

    def __repr__(self) -> str:  # arrays make the default repr unusable
        kind = self.descriptor.get("kind", "custom")
        return (
            f"MetricMeasureSpace(kind={kind!r}, n={self.n_points}, "
            f"N={self.dim_N:.4g}, radius={self.domain_radius:.4g}, "
            f"resolution={self.resolution:.4g})"
        )


@dataclass(frozen=True)
class GuardRegion:
    """Scale-dependent interior of a truncated sample.

    A point is valid at scale t when the ball of radius margin_factor * 4t
    around it stays inside the sampled region (4t is the support radius of
    the scale-t averaging kernel). Validity is monotone: valid at t implies
    valid at every t' < t.
    """

    space: MetricMeasureSpace
    margin_factor: float = 1.25

    def __post_init__(self):
        if self.margin_factor < 1:
            raise ValueError("margin_factor must be >= 1")

    def radius(self, t: float) -> float:
        return self.margin_factor * 4.0 * float(t)

    def valid(self, t: float) -> np.ndarray:
        """Boolean mask over points: guard-valid at scale t."""
        return self.space.boundary_distance >= self.radius(t)

    def valid_indices(self, t: float) -> np.ndarray:
        return np.flatnonzero(self.valid(t))

    def pair_valid(self) -> np.ndarray:
        """(n, n) mask: both endpoints clear the boundary by their separation.

        Entry (i, j) is valid when boundary_distance >= margin_factor * d(i,j)
        at both endpoints, i.e. both points are guard-valid at the smallest
        scale (d/4) that can couple them. Diagonal entries use the sample
        resolution as the separation.
        """
        s = self.space
        sep = np.maximum(s.dist, s.resolution)
        need = self.margin_factor * sep
        ok = s.boundary_distance[:, None] >= need
        return ok & (s.boundary_distance[None, :] >= need)


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def _check_count(n: int) -> None:
    # reject before the O(n^2) distance matrix is allocated
    if n > MAX_DENSE_POINTS:
        raise ValueError(
            f"sample of {n} points exceeds the dense-matrix cap {MAX_DENSE_POINTS}"
        )


def _pairwise(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    if points.shape[1] == 1:
        return np.abs(diff[:, :, 0])
    return np.sqrt((diff**2).sum(axis=2))


def build_line_space(half_length: float, n_points: int) -> MetricMeasureSpace:
    """Uniform sample of the real line truncated to [-L, L], N = 1."""
    if n_points < 3:
        raise ValueError("n_points must be >= 3")
    if half_length <= 0:
        raise ValueError("half_length must be positive")
    _check_count(n_points)
    x = np.linspace(-half_length, half_length, n_points)
    spacing = 2.0 * half_length / (n_points - 1)
    pts = x[:, None]
    return MetricMeasureSpace(
        points=pts,
        dist=_pairwise(pts),
        weight=np.full(n_points, spacing),
        dim_N=1.0,
        domain_radius=float(half_length),
        resolution=spacing,
        boundary_distance=half_length - np.abs(x),
        descriptor={
            "kind": "line",
            "parameters": {"half_length": float(half_length), "n_points": int(n_points)},
            "seed": None,
        },
    )


def build_plane_space(half_length: float, n_side: int) -> MetricMeasureSpace:
    """Uniform sample of the plane truncated to [-L, L]^2, N = 2."""
    if n_side < 3:
        raise ValueError("n_side must be >= 3")
    if half_length <= 0:
        raise ValueError("half_length must be positive")
    _check_count(n_side * n_side)
    x = np.linspace(-half_length, half_length, n_side)
    spacing = 2.0 * half_length / (n_side - 1)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    bdist = half_length - np.abs(pts).max(axis=1)
    return MetricMeasureSpace(
        points=pts,
        dist=_pairwise(pts),
        weight=np.full(pts.shape[0], spacing**2),
        dim_N=2.0,
        domain_radius=float(half_length),
        resolution=spacing,
        boundary_distance=bdist,
        descriptor={
            "kind": "plane",
            "parameters": {"half_length": float(half_length), "n_side": int(n_side)},
            "seed": None,
        },
    )


# Sierpinski gasket: unit triangle with vertices at the origin, e1, and the
# upward unit vertex; the blowup dilates by powers of 2.
_GASKET_VERTS = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3.0) / 2.0]])
_GASKET_CENTROID = _GASKET_VERTS.mean(axis=0)


def _segment_distance(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    tt = np.clip(((pts - a) @ ab) / (ab @ ab), 0.0, 1.0)
    proj = a[None, :] + tt[:, None] * ab[None, :]
    return np.sqrt(((pts - proj) ** 2).sum(axis=1))


def _triangle_distance(pts: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Euclidean distance from points to a filled triangle (0 inside)."""
    a, b, c = verts
    v0, v1 = b - a, c - a
    v2 = pts - a
    d00, d01, d11 = v0 @ v0, v0 @ v1, v1 @ v1
    d20, d21 = v2 @ v0, v2 @ v1
    denom = d00 * d11 - d01 * d01
    u = (d11 * d20 - d01 * d21) / denom
    v = (d00 * d21 - d01 * d20) / denom
    inside = (u >= 0) & (v >= 0) & (u + v <= 1)
    out = np.minimum.reduce(
        [
            _segment_distance(pts, a, b),
            _segment_distance(pts, b, c),
            _segment_distance(pts, a, c),
        ]
    )
    out[inside] = 0.0
    return out


def build_gasket_space(subdivision_level: int, dilation_count: int) -> MetricMeasureSpace:
    """Sample of the dilated-gasket blowup, N = log 3 / log 2.

    Dilate k (k = 1..K) of the unit gasket T is subdivided into level-l
    cells of diameter 2**(k-l), each represented by its centroid and
    carrying the self-similar mass (2**(k-l))**N = 3**(k-l). Dilate 1
    contributes all of 2T; each later dilate contributes only the annulus
    2**k T minus 2**(k-1) T (the cells whose leading subdivision digit is
    nonzero), so the total mass is exactly 3**K.
    """
    level, K = int(subdivision_level), int(dilation_count)
    if level < 2:
        raise ValueError("subdivision_level must be >= 2")
    if K < 1:
        raise ValueError("dilation_count must be >= 1")
    _check_count(3**level + (K - 1) * 2 * 3 ** (level - 1))
    N = math.log(3.0) / math.log(2.0)
    centers, weights = [], []
    for k in range(1, K + 1):
        first = (0, 1, 2) if k == 1 else (1, 2)
        scale = 2.0 ** (k - level)
        for d1 in first:
            for rest in product((0, 1, 2), repeat=level - 1):
                digits = (d1,) + rest
                off = sum(
                    (2.0 ** (k - j)) * _GASKET_VERTS[dj]
                    for j, dj in enumerate(digits, start=1)
                )
                centers.append(scale * _GASKET_CENTROID + off)
                weights.append(3.0 ** (k - level))
    pts = np.asarray(centers)
    n_expected = 3**level + (K - 1) * 2 * 3 ** (level - 1)
    if pts.shape[0] != n_expected:
        raise AssertionError("gasket cell enumeration is inconsistent")
    # Truncation frontier: the two blocks of the next dilate 2^(K+1) T that
    # are not sampled, conservatively replaced by their convex hulls.
    big = (2.0**K) * _GASKET_VERTS
    hull1 = big + (2.0**K) * _GASKET_VERTS[1]
    hull2 = big + (2.0**K) * _GASKET_VERTS[2]
    bdist = np.minimum(_triangle_distance(pts, hull1), _triangle_distance(pts, hull2))
    return MetricMeasureSpace(
        points=pts,
        dist=_pairwise(pts),
        weight=np.asarray(weights),
        dim_N=N,
        domain_radius=2.0 ** (K - 1),
        resolution=2.0 ** (1 - level),
        boundary_distance=bdist,
        descriptor={
            "kind": "gasket",
            "parameters": {
                "subdivision_level": level,
                "dilation_count": K,
            },
            "seed": None,
        },
    )


def build_cantor_space(subdivision_level: int, dilation_count: int) -> MetricMeasureSpace:
    """Sample of the dilated middle-thirds Cantor blowup, N = log 2 / log 3.

    Same annulus convention as the gasket: dilate 3**k C at subdivision
    level l has cells of diameter 3**(k-l) and mass 2**(k-l); dilates
    k >= 2 contribute only cells with nonzero leading digit. Total mass is
    exactly 2**K.
    """
    level, K = int(subdivision_level), int(dilation_count)
    if level < 2:
        raise ValueError("subdivision_level must be >= 2")
    if K < 1:
        raise ValueError("dilation_count must be >= 1")
    _check_count(2**level + (K - 1) * 2 ** (level - 1))
    N = math.log(2.0) / math.log(3.0)
    centers, weights = [], []
    for k in range(1, K + 1):
        first = (0, 2) if k == 1 else (2,)
        for a1 in first:
            for rest in product((0, 2), repeat=level - 1):
                digits = (a1,) + rest
                off = sum(aj * 3.0 ** (k - j) for j, aj in enumerate(digits, start=1))
                centers.append(off + 0.5 * 3.0 ** (k - level))
                weights.append(2.0 ** (k - level))
    pts = np.asarray(centers)[:, None]
    # Next annulus is the translate 3^K C + 2*3^K; only the right end is a
    # truncation frontier (the blowup genuinely starts at the origin).
    bdist = 2.0 * 3.0**K - pts[:, 0]
    return MetricMeasureSpace(
        points=pts,
        dist=_pairwise(pts),
        weight=np.asarray(weights),
        dim_N=N,
        domain_radius=0.5 * 3.0**K,
        resolution=3.0 ** (1 - level),
        boundary_distance=bdist,
        descriptor={
            "kind": "cantor",
            "parameters": {
                "subdivision_level": level,
                "dilation_count": K,
            },
            "seed": None,
        },
    )


_BUILDERS = {
    "line": (build_line_space, ("half_length", "n_points")),
    "plane": (build_plane_space, ("half_length", "n_side")),
    "gasket": (build_gasket_space, ("subdivision_level", "dilation_count")),
    "cantor": (build_cantor_space, ("subdivision_level", "dilation_count")),
}


def space_from_descriptor(descriptor: dict) -> MetricMeasureSpace:
    """Rebuild a space from its JSON descriptor {kind, parameters, seed}."""
    kind = descriptor.get("kind")
    if kind not in _BUILDERS:
        raise ValueError(f"unknown space kind {kind!r}")
    builder, names = _BUILDERS[kind]
    params = descriptor.get("parameters", {})
    missing = [nm for nm in names if nm not in params]
    if missing:
        raise ValueError(f"descriptor for kind {kind!r} missing parameters {missing}")
    return builder(*(params[nm] for nm in names))


def write_descriptor(space: MetricMeasureSpace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(space.descriptor, fh, indent=2)
        fh.write("\n")


def load_space(path) -> MetricMeasureSpace:
    with open(path, "r", encoding="utf-8") as fh:
        return space_from_descriptor(json.load(fh))


def write_points_csv(space: MetricMeasureSpace, path) -> None:
    dim = space.points.shape[1]
    header = ["id"] + [f"x{i}" for i in range(dim)] + ["weight"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(space.n_points):
            coords = [format_float(c) for c in space.points[i]]
            fh.write(",".join([str(i)] + coords + [format_float(space.weight[i])]) + "\n")


# ---------------------------------------------------------------------------
# quadrature queries
# ---------------------------------------------------------------------------


def ball(space: MetricMeasureSpace, center_index: int, radius: float) -> np.ndarray:
    """Indices of the open ball B(center, radius); the center is always in."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    if radius == 0:
        return np.array([center_index], dtype=np.intp)
    return np.flatnonzero(space.dist[center_index] < radius)


def integrate(space: MetricMeasureSpace, f: np.ndarray) -> float:
    f = np.asarray(f, dtype=float)
    if f.shape != (space.n_points,):
        raise ValueError("f must have one value per point")
    return float(f @ space.weight)


def lp_norm(space: MetricMeasureSpace, f: np.ndarray, p: float, where=None) -> float:
    """Quadrature L^p norm; p = inf gives the (unweighted) sup norm.

    ``where`` restricts to a boolean mask or index array, e.g. a guard-valid
    set. Entries that are NaN inside the selection propagate to the result.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    f = np.asarray(f, dtype=float)
    if f.shape != (space.n_points,):
        raise ValueError("f must have one value per point")
    w = space.weight
    if where is not None:
        f = f[where]
        w = w[where]
    if f.size == 0:
        return 0.0
    if np.isinf(p):
        return float(np.abs(f).max())
    return float((np.abs(f) ** p @ w) ** (1.0 / p))


# ---------------------------------------------------------------------------
# empirical regularity
# ---------------------------------------------------------------------------


def ahlfors_fit(
    space: MetricMeasureSpace, scale_lo: float, scale_hi: float
) -> PropertyReport:
    """Fit the ball-mass exponent m(B(x, r)) ~ r**N over [scale_lo, scale_hi].

    Per guarded center, least-squares slope of log ball mass against log r
    (8 radii per decade); the reported exponent is the mean of the per-center
    slopes. Constants c_lo and c_hi bracket ball mass / r**N over all
    (center, radius) samples; their ratio is reported, not asserted.
    """
    if not (0 < scale_lo < scale_hi):
        raise ValueError("need 0 < scale_lo < scale_hi")
    decades = math.log10(scale_hi / scale_lo)
    n_radii = int(math.ceil(decades * 8.0)) + 1
    if n_radii < 4:
        raise InsufficientScalesError(
            f"only {n_radii} radii in [{scale_lo}, {scale_hi}]; need at least 4"
        )
    radii = np.geomspace(scale_lo, scale_hi, n_radii)
    centers = np.flatnonzero(space.boundary_distance >= scale_hi)
    if centers.size == 0:
        raise InsufficientGeometryError(
            "no center clears the truncation boundary at scale_hi"
        )
    masses = np.empty((centers.size, n_radii))
    dc = space.dist[centers]
    for j, r in enumerate(radii):
        masses[:, j] = (dc < r) @ space.weight
    lx = np.log10(radii)
    ly = np.log10(masses)
    lxc = lx - lx.mean()
    slopes = (ly @ lxc) / (lxc @ lxc)
    n_hat = float(slopes.mean())
    const = masses / radii[None, :] ** space.dim_N
    c_lo, c_hi = float(const.min()), float(const.max())

    report = PropertyReport(name="ahlfors_fit")
    report.add(
        "ball-mass-exponent",
        n_hat,
        0.1,
        abs(n_hat - space.dim_N) <= 0.1,
        predicted_exponent=space.dim_N,
        fitted_exponent=n_hat,
        slope_spread=float(slopes.max() - slopes.min()),
    )
    report.add(
        "ball-mass-constant-ratio",
        c_hi / c_lo,
        10.0,
        c_hi / c_lo < 10.0,
        c_lo=c_lo,
        c_hi=c_hi,
    )
    report.details.update(
        {
            "radii": radii,
            "mean_mass": masses.mean(axis=0),
            "n_centers": int(centers.size),
            "mean_curve_slope": loglog_slope(radii, masses.mean(axis=0)).slope,
        }
    )
    return report
