"""Log-log slope estimation for decay-exponent measurements.

Implements:
  - loglog_slope: plain least squares on (log x, log y).
  - binned_loglog_slope: median-per-bin regression, robust to the uneven pair
    density of distance scatters (pair counts grow with distance, so a plain
    fit overweights the far end).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["FitResult", "loglog_slope", "binned_loglog_slope"]


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    # bin midpoints and values actually used by the regression (log10)
    log_x: np.ndarray
    log_y: np.ndarray

    @property
    def n_bins(self) -> int:
        return int(self.log_x.size)


def loglog_slope(x: np.ndarray, y: np.ndarray) -> FitResult:
    """Least-squares slope of log10 y against log10 x on positive entries."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    keep = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    if keep.sum() < 2:
        raise ValueError("need at least 2 positive finite points for a slope fit")
    lx = np.log10(x[keep])
    ly = np.log10(y[keep])
    slope, intercept = np.polyfit(lx, ly, 1)
    return FitResult(float(slope), float(intercept), lx, ly)


def binned_loglog_slope(
    x: np.ndarray,
    y: np.ndarray,
    lo: float | None = None,
    hi: float | None = None,
    n_bins: int = 10,
    min_count: int = 5,
) -> FitResult:
    """Slope of log(median y per bin) vs median(log x) over log-spaced bins.

    Bins with fewer than ``min_count`` samples are dropped; at least two
    surviving bins are required.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    keep = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    if lo is not None:
        keep &= x >= lo
    if hi is not None:
        keep &= x <= hi
    x = x[keep]
    y = y[keep]
    if x.size < 2 * min_count:
        raise ValueError("too few samples in the fit window")
    edges = np.geomspace(x.min(), x.max() * (1 + 1e-12), n_bins + 1)
    which = np.digitize(x, edges) - 1
    bx, by = [], []
    for b in range(n_bins):
        sel = which == b
        if sel.sum() >= min_count:
            bx.append(np.median(np.log10(x[sel])))
            by.append(np.log10(np.median(y[sel])))
    if len(bx) < 2:
        raise ValueError("fewer than 2 usable bins in the fit window")
    bx_arr = np.asarray(bx)
    by_arr = np.asarray(by)
    slope, intercept = np.polyfit(bx_arr, by_arr, 1)
    return FitResult(float(slope), float(intercept), bx_arr, by_arr)
