"""Time-series statistics used for noise modelling.

All functions take a single series (1D) or a stack of series (2D, one series
per row) and operate along the last axis. Stacked input is what the volume
code uses; the scalar functions in the test-suite exercise the 1D path.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, InvalidInputError

IQR_TO_SD = 1.349


def as_series(values, *, min_length: int = 1, name: str = "series") -> np.ndarray:
    """Validate and convert to a float64 array of one or more series.

    Raises `InvalidInputError` for non-finite values, or when the series are
    shorter than `min_length`.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 0 or arr.ndim > 2:
        raise InvalidInputError(f"{name} must be 1D or 2D, got {arr.ndim}D")
    if arr.shape[-1] < min_length:
        if arr.shape[-1] == 0:
            raise InvalidInputError(f"{name} is empty")
        raise InvalidInputError(
            f"{name} needs at least {min_length} samples, got {arr.shape[-1]}"
        )
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains NaN or infinite values")
    return arr


def _interp_sorted(sorted_vals: np.ndarray, p: float) -> np.ndarray:
    n = sorted_vals.shape[-1]
    h = (n - 1) * p
    lo = int(np.floor(h))
    hi = min(lo + 1, n - 1)
    frac = h - lo
    lower = sorted_vals[..., lo]
    return lower + frac * (sorted_vals[..., hi] - lower)


def _check_prob(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise InvalidInputError(f"probability must lie in [0, 1], got {p}")
    return p


def quantile(s, p: float):
    """Linearly interpolated quantile at rank ``(n - 1) * p``.

    This is the common "type 7" definition (``numpy.quantile`` default).

    >>> quantile([0, 1, 2, 3], 0.25)
    0.75
    """
    p = _check_prob(p)
    arr = as_series(s)
    out = _interp_sorted(np.sort(arr, axis=-1), p)
    return float(out) if arr.ndim == 1 else out


def robust_sd_iqr(s):
    """Standard deviation estimated as IQR / 1.349 (consistent for normal data)."""
    arr = as_series(s, min_length=2)
    srt = np.sort(arr, axis=-1)
    iqr = _interp_sorted(srt, 0.75) - _interp_sorted(srt, 0.25)
    out = iqr / IQR_TO_SD
    return float(out) if arr.ndim == 1 else out


def sample_sd(s):
    """Square root of the unbiased (n - 1 divisor) sample variance."""
    arr = as_series(s, min_length=2)
    out = np.std(arr, axis=-1, ddof=1)
    return float(out) if arr.ndim == 1 else out


def _degenerate(centered: np.ndarray, reference: np.ndarray) -> np.ndarray:
    # Constant to within floating-point resolution of the original values.
    n = centered.shape[-1]
    ss = np.sum(centered * centered, axis=-1)
    scale = np.max(np.abs(reference), axis=-1)
    return ss <= n * (1e-12 * scale) ** 2


def ar1_coeff_rows(arr: np.ndarray, reference: np.ndarray | None = None):
    centered = arr - arr.mean(axis=-1, keepdims=True)
    num = np.sum(centered[..., 1:] * centered[..., :-1], axis=-1)
    den = np.sum(centered * centered, axis=-1)
    bad = _degenerate(centered, arr if reference is None else reference)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(bad, np.nan, num / np.where(bad, 1.0, den))
    return np.clip(rho, -1.0, 1.0), bad


def ar1_coeff(s):
    """Lag-1 autocorrelation, normalised by the full centred sum of squares.

    Always in [-1, 1]. A constant series has no defined coefficient and
    raises `DegenerateInputError`. For 2D input, degenerate rows come back
    as NaN instead of raising.
    """
    arr = as_series(s, min_length=3)
    rho, bad = ar1_coeff_rows(arr)
    if arr.ndim == 1:
        if bad:
            raise DegenerateInputError("lag-1 autocorrelation is undefined for a constant series")
        return float(rho)
    return rho


def detrend_linear(s) -> np.ndarray:
    """Residuals of an ordinary least-squares fit on (intercept, time index)."""
    arr = as_series(s, min_length=2)
    n = arr.shape[-1]
    t = np.arange(n, dtype=np.float64)
    tc = t - t.mean()
    yc = arr - arr.mean(axis=-1, keepdims=True)
    slope = (yc @ tc) / (tc @ tc)
    return yc - np.multiply.outer(slope, tc)


def diff_variance_predicted(sigma, rho):
    """Variance of a first difference of a stationary AR(1) process, ``2 (1 - rho) sigma**2``."""
    sigma_a = np.asarray(sigma, dtype=np.float64)
    rho_a = np.asarray(rho, dtype=np.float64)
    if not (np.all(np.isfinite(sigma_a)) and np.all(sigma_a >= 0)):
        raise InvalidInputError("sigma must be finite and nonnegative")
    if not (np.all(np.isfinite(rho_a)) and np.all(np.abs(rho_a) <= 1)):
        raise InvalidInputError("rho must lie in [-1, 1]")
    out = 2.0 * (1.0 - rho_a) * sigma_a**2
    return float(out) if out.ndim == 0 else out
