"""3x3 projective transforms: application, composition, DLT and RANSAC estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class SingularTransformError(ValueError):
    pass


class PointAtInfinityError(ValueError):
    pass


class DegenerateConfigurationError(ValueError):
    pass


class InsufficientPairsError(ValueError):
    pass


class NoConsensusError(RuntimeError):
    pass


def _normalize_matrix(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if abs(m[2, 2]) > 1e-9:
        m = m / m[2, 2]
    else:
        n = np.linalg.norm(m)
        m = m / n
        if np.trace(m) < 0:
            m = -m
    return m


@dataclass(frozen=True)
class Homography:
    """Invertible 3x3 projective transform, normalized so m[2,2] == 1
    (unit Frobenius norm with positive trace if that entry vanishes)."""

    m: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = _normalize_matrix(self.m)
        if m.shape != (3, 3):
            raise ValueError("expected a 3x3 matrix")
        if not np.all(np.isfinite(m)):
            raise ValueError("entries must be finite")
        if abs(np.linalg.det(m)) <= 1e-12:
            raise SingularTransformError("matrix is not invertible")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    @classmethod
    def translation(cls, tx: float, ty: float) -> "Homography":
        m = np.eye(3)
        m[0, 2], m[1, 2] = tx, ty
        return cls(m)

    @classmethod
    def from_flat(cls, vals) -> "Homography":
        return cls(np.asarray(vals, dtype=np.float64).reshape(3, 3))

    def to_flat(self) -> list[float]:
        return [float(v) for v in self.m.ravel()]


def apply(h: Homography, pts):
    """Map a point (x, y) or an (n, 2) array through the homography."""
    p = np.asarray(pts, dtype=np.float64)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    q = p @ h.m[:2, :2].T + h.m[:2, 2]
    w = p @ h.m[2, :2] + h.m[2, 2]
    if np.any(np.abs(w) < 1e-12):
        raise PointAtInfinityError("point maps to infinity")
    out = q / w[:, None]
    return (float(out[0, 0]), float(out[0, 1])) if single else out


def compose(a: Homography, b: Homography) -> Homography:
    """compose(a, b) applies b first, then a."""
    return Homography(a.m @ b.m)


def invert(h: Homography) -> Homography:
    return Homography(np.linalg.inv(h.m))


def _hartley_normalization(pts: np.ndarray) -> np.ndarray:
    """Similarity transform moving the centroid to the origin and the mean
    distance to sqrt(2)."""
    c = pts.mean(axis=0)
    d = np.sqrt(((pts - c) ** 2).sum(axis=1)).mean()
    if d < 1e-12:
        raise DegenerateConfigurationError("coincident points")
    s = math.sqrt(2.0) / d
    return np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])


def estimate_dlt(src, dst) -> Homography:
    """Least-squares homography mapping src points onto dst points.

    Both point sets are Hartley-normalized before building the linear
    system; the solution is denormalized afterwards.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 2:
        raise ValueError("src and dst must be (n, 2) arrays of equal length")
    n = src.shape[0]
    if n < 4:
        raise InsufficientPairsError("need at least 4 point pairs")
    ts = _hartley_normalization(src)
    td = _hartley_normalization(dst)
    sn = src @ ts[:2, :2].T + ts[:2, 2]
    dn = dst @ td[:2, :2].T + td[:2, 2]

    x, y = sn[:, 0], sn[:, 1]
    u, v = dn[:, 0], dn[:, 1]
    zero = np.zeros(n)
    one = np.ones(n)
    a = np.empty((2 * n, 9))
    a[0::2] = np.c_[x, y, one, zero, zero, zero, -u * x, -u * y, -u]
    a[1::2] = np.c_[zero, zero, zero, x, y, one, -v * x, -v * y, -v]
    _, s, vt = np.linalg.svd(a)
    if s[-2] < 1e-9 * s[0]:
        raise DegenerateConfigurationError("rank-deficient correspondence system")
    hn = vt[-1].reshape(3, 3)
    m = np.linalg.inv(td) @ hn @ ts
    try:
        return Homography(m)
    except SingularTransformError as e:
        raise DegenerateConfigurationError(str(e)) from e


def reprojection_errors(h: Homography, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    return np.linalg.norm(apply(h, src) - dst, axis=1)


@dataclass(frozen=True)
class RansacConfig:
    max_iterations: int = 2000
    inlier_threshold: float = 3.0
    confidence: float = 0.995
    seed: int = 0

    def __post_init__(self):
        if self.inlier_threshold <= 0:
            raise ValueError("inlier_threshold must be positive")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must be in (0, 1)")


def estimate_ransac(src, dst, cfg: RansacConfig = RansacConfig()):
    """Robust homography from point pairs.

    Hypothesize-and-verify on minimal 4-point samples; ties on consensus
    size are broken by lower total squared reprojection error. The final
    model is re-estimated by DLT on the full consensus set. Deterministic
    given cfg.seed.

    Returns (Homography, inlier_mask).
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    n = src.shape[0]
    if n < 4:
        raise InsufficientPairsError("need at least 4 point pairs")
    rng = np.random.default_rng(cfg.seed)

    best_count = 0
    best_sse = math.inf
    best_mask = None
    needed = cfg.max_iterations
    it = 0
    while it < min(cfg.max_iterations, needed):
        it += 1
        idx = rng.choice(n, size=4, replace=False)
        try:
            h = estimate_dlt(src[idx], dst[idx])
            err = reprojection_errors(h, src, dst)
        except (DegenerateConfigurationError, PointAtInfinityError):
            continue
        mask = err < cfg.inlier_threshold
        count = int(mask.sum())
        if count < 4:
            continue
        sse = float((err[mask] ** 2).sum())
        if count > best_count or (count == best_count and sse < best_sse):
            best_count, best_sse, best_mask = count, sse, mask
            w = count / n
            if w >= 1.0:
                break
            denom = math.log1p(-(w ** 4))
            if denom < 0:
                needed = min(needed, math.ceil(math.log(1.0 - cfg.confidence) / denom))

    if best_mask is None:
        raise NoConsensusError("no 4-point sample produced a consensus set")
    try:
        h = estimate_dlt(src[best_mask], dst[best_mask])
        err = reprojection_errors(h, src, dst)
        mask = err < cfg.inlier_threshold
        if int(mask.sum()) < 4:
            raise NoConsensusError("refit lost the consensus set")
    except (DegenerateConfigurationError, PointAtInfinityError) as e:
        raise NoConsensusError(f"refit failed: {e}") from e
    return h, mask
