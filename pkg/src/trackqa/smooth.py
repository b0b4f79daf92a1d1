"""Trajectory smoothers: moving average, Gaussian kernel, Savitzky-Golay
and lowess, plus evaluation at arbitrary (missing) timestamps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class TooFewPointsError(ValueError):
    pass


class ExtrapolationRangeError(ValueError):
    pass


METHODS = ("movmean", "gaussian", "savitzky_golay", "lowess")


@dataclass(frozen=True)
class SmootherSpec:
    method: str = "savitzky_golay"
    window: int = 11
    sigma: float = 2.0
    poly_order: int = 2
    fraction: float = 0.1
    robust_iters: int = 2

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError("window must be odd and >= 3")
        if self.poly_order >= self.window:
            raise ValueError("poly_order must be < window")
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError("fraction must be in (0, 1]")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class Series:
    """Values over strictly increasing integer frame indices. Absent frames
    are simply not listed."""

    t: list[int]
    v: list[float]

    def __post_init__(self):
        if len(self.t) != len(self.v):
            raise ValueError("t and v must have equal length")
        if any(b <= a for a, b in zip(self.t, self.t[1:])):
            raise ValueError("t must be strictly increasing")

    def __len__(self) -> int:
        return len(self.t)


def _check_min_points(n: int, spec: SmootherSpec) -> None:
    need = spec.window if spec.method in ("movmean", "savitzky_golay") else 5
    if n < need:
        raise TooFewPointsError(f"{spec.method} needs >= {need} present points, got {n}")


def _movmean(v: np.ndarray, window: int) -> np.ndarray:
    half = window // 2
    n = len(v)
    out = np.empty(n)
    for i in range(n):
        r = min(half, i, n - 1 - i)  # symmetric shrink at the boundaries
        out[i] = v[i - r : i + r + 1].mean()
    return out


def _gaussian(t: np.ndarray, v: np.ndarray, sigma: float, query: np.ndarray) -> np.ndarray:
    radius = math.ceil(3.0 * sigma)
    out = np.empty(len(query))
    for i, q in enumerate(query):
        d = np.abs(t - q)
        sel = d <= radius
        if not sel.any():  # fall back to the nearest point
            sel = d == d.min()
        w = np.exp(-0.5 * ((t[sel] - q) / sigma) ** 2)
        out[i] = float(w @ v[sel] / w.sum())
    return out


def _polyfit_eval(tw: np.ndarray, vw: np.ndarray, order: int, q: float, weights=None) -> float:
    # Center on the query point for conditioning.
    coeffs = np.polyfit(tw - q, vw, deg=order, w=weights)
    return float(coeffs[-1])


def _savgol(t: np.ndarray, v: np.ndarray, window: int, order: int, query: np.ndarray) -> np.ndarray:
    n = len(t)
    out = np.empty(len(query))
    for i, q in enumerate(query):
        # window nearest present points; at boundaries this becomes the
        # asymmetric first/last `window` points.
        order_idx = np.argsort(np.abs(t - q), kind="stable")[:window]
        sel = np.sort(order_idx)
        out[i] = _polyfit_eval(t[sel], v[sel], order, q)
    return out


def _lowess(
    t: np.ndarray, v: np.ndarray, fraction: float, robust_iters: int, query: np.ndarray
) -> np.ndarray:
    n = len(t)
    k = max(5, math.ceil(fraction * n))
    k = min(k, n)

    delta = np.ones(n)
    # Robustness weights come from residuals at the data points themselves.
    for it in range(robust_iters + 1):
        fitted = np.array([_lowess_point(t, v, delta, k, q) for q in t])
        if it == robust_iters:
            break
        resid = v - fitted
        s = np.median(np.abs(resid))
        if s < 1e-12:
            delta = np.ones(n)
            continue
        u = np.clip(resid / (6.0 * s), -1.0, 1.0)
        delta = (1.0 - u ** 2) ** 2
    return np.array([_lowess_point(t, v, delta, k, q) for q in query])


def _lowess_point(t: np.ndarray, v: np.ndarray, delta: np.ndarray, k: int, q: float) -> float:
    d = np.abs(t - q)
    idx = np.argsort(d, kind="stable")[:k]
    h = d[idx].max()
    if h < 1e-12:
        return float(v[idx][d[idx] == 0].mean())
    w = (1.0 - np.clip(d[idx] / h, 0.0, 1.0) ** 3) ** 3
    w = w * delta[idx]
    if w.sum() < 1e-12:
        w = np.ones_like(w)
    tw, vw = t[idx].astype(float), v[idx]
    # Weighted degree-1 fit, centered at the query.
    x = tw - q
    sw, sx, sxx = w.sum(), w @ x, w @ (x * x)
    sy, sxy = w @ vw, w @ (x * vw)
    det = sw * sxx - sx * sx
    if abs(det) < 1e-12 * max(sw * sxx, 1e-30):
        return float(sy / sw)
    return float((sy * sxx - sx * sxy) / det)


def _evaluate(s: Series, spec: SmootherSpec, query: np.ndarray) -> np.ndarray:
    t = np.asarray(s.t, dtype=np.float64)
    v = np.asarray(s.v, dtype=np.float64)
    _check_min_points(len(t), spec)
    if spec.method == "movmean":
        half = spec.window // 2
        out = np.empty(len(query))
        for i, q in enumerate(query):
            sel = np.abs(t - q) <= half
            if not sel.any():
                sel = np.abs(t - q) == np.abs(t - q).min()
            out[i] = v[sel].mean()
        return out
    if spec.method == "gaussian":
        return _gaussian(t, v, spec.sigma, query)
    if spec.method == "savitzky_golay":
        return _savgol(t, v, spec.window, spec.poly_order, query)
    return _lowess(t, v, spec.fraction, spec.robust_iters, query)


def smooth_series(s: Series, spec: SmootherSpec = SmootherSpec()) -> Series:
    """Smooth a series in place of its own timestamps. Absent frames stay
    absent and never enter a local fit."""
    t = np.asarray(s.t, dtype=np.float64)
    v = np.asarray(s.v, dtype=np.float64)
    _check_min_points(len(t), spec)
    if spec.method == "movmean":
        # Index-based window with symmetric shrink at the boundaries.
        out = _movmean(v, spec.window)
    else:
        out = _evaluate(s, spec, t)
    return Series(list(s.t), [float(x) for x in out])


def evaluate_at(s: Series, query_t, spec: SmootherSpec = SmootherSpec()) -> list[float]:
    """Evaluate the smoother at arbitrary timestamps (used to fill missing
    frames). Queries further than `window` outside the data range are
    rejected."""
    query = np.asarray(query_t, dtype=np.float64)
    if len(s) == 0:
        raise TooFewPointsError("empty series")
    lo, hi = s.t[0] - spec.window, s.t[-1] + spec.window
    if np.any(query < lo) or np.any(query > hi):
        raise ExtrapolationRangeError(f"queries must lie within [{lo}, {hi}]")
    return [float(x) for x in _evaluate(s, spec, query)]


def smooth_canonical(traj, spec: SmootherSpec = SmootherSpec()):
    """Smooth a canonical trajectory's x and y independently with the same
    spec; absent frames are preserved absent."""
    from .annotate import CanonicalTrajectory

    sx, sy = traj.to_series()
    rx = smooth_series(sx, spec)
    ry = smooth_series(sy, spec)
    points: list[tuple[float, float] | None] = [None] * len(traj)
    for t, x, y in zip(rx.t, rx.v, ry.v):
        points[t] = (x, y)
    return CanonicalTrajectory(points)
