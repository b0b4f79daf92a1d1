"""Corner detection, binary patch description and Hamming matching.

Segment-test corners (contiguous arc of >=9 of the 16 Bresenham-circle
pixels brighter/darker than the center) with a 256-bit binary descriptor
built from seeded pairwise intensity comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .raster import GrayImage, ImageTooSmallError, gaussian_blur, sample_bilinear

# Bresenham circle of radius 3, clockwise from 12 o'clock: (dx, dy).
CIRCLE = np.array(
    [(0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
     (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3)],
    dtype=np.intp,
)
ARC_LENGTH = 9
DESCRIPTOR_BITS = 256
BORDER_MARGIN = 16


@dataclass(frozen=True)
class Keypoint:
    x: float
    y: float
    score: float


@dataclass(frozen=True)
class Match:
    idx_a: int
    idx_b: int
    distance: int


@dataclass(frozen=True)
class FeatureConfig:
    detector_threshold: float = 0.06
    max_keypoints: int = 1000
    nms_radius: float = 5.0
    ratio_test: float = 0.8
    cross_check: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.detector_threshold <= 0 or self.nms_radius <= 0:
            raise ValueError("thresholds must be positive")
        if not 0.0 < self.ratio_test <= 1.0:
            raise ValueError("ratio_test must be in (0, 1]")


def _arc_test(flags: np.ndarray) -> np.ndarray:
    """True where some contiguous circular arc of ARC_LENGTH flags holds."""
    out = np.zeros(flags.shape[:2], dtype=bool)
    for start in range(16):
        run = flags[:, :, start % 16]
        for k in range(1, ARC_LENGTH):
            run = run & flags[:, :, (start + k) % 16]
        out |= run
    return out


def detect(img: GrayImage, cfg: FeatureConfig = FeatureConfig()) -> list[Keypoint]:
    """Segment-test corners, non-maximum suppressed, strongest first."""
    if img.width < 32 or img.height < 32:
        raise ImageTooSmallError("detection needs at least a 32x32 image")
    a = img.data
    h, w = a.shape
    center = a[3:h - 3, 3:w - 3]
    diffs = np.empty((h - 6, w - 6, 16))
    for k, (dx, dy) in enumerate(CIRCLE):
        diffs[:, :, k] = a[3 + dy:h - 3 + dy, 3 + dx:w - 3 + dx] - center

    t = cfg.detector_threshold
    corner = _arc_test(diffs > t) | _arc_test(diffs < -t)
    excess = np.abs(diffs) - t
    score = np.where(excess > 0, excess, 0.0).sum(axis=2)
    ys, xs = np.nonzero(corner)
    if ys.size == 0:
        return []
    scores = score[ys, xs]
    order = np.argsort(-scores, kind="stable")
    xs, ys, scores = xs[order], ys[order], scores[order]

    # Sub-pixel refinement: 1-D parabola fits on the score map.
    fx = xs.astype(np.float64)
    fy = ys.astype(np.float64)
    inner = (xs > 0) & (xs < score.shape[1] - 1) & (ys > 0) & (ys < score.shape[0] - 1)
    sl = score[ys[inner], xs[inner] - 1]
    sr = score[ys[inner], xs[inner] + 1]
    su = score[ys[inner] - 1, xs[inner]]
    sd = score[ys[inner] + 1, xs[inner]]
    sc = score[ys[inner], xs[inner]]
    with np.errstate(divide="ignore", invalid="ignore"):
        dx = 0.5 * (sl - sr) / (sl - 2 * sc + sr)
        dy = 0.5 * (su - sd) / (su - 2 * sc + sd)
    dx = np.clip(np.nan_to_num(dx), -0.5, 0.5)
    dy = np.clip(np.nan_to_num(dy), -0.5, 0.5)
    fx[inner] += dx
    fy[inner] += dy
    xs, ys = fx + 3, fy + 3

    # Greedy NMS in score order.
    pts = np.c_[xs, ys].astype(np.float64)
    tree = cKDTree(pts)
    suppressed = np.zeros(len(pts), dtype=bool)
    kept = []
    for i in range(len(pts)):
        if suppressed[i]:
            continue
        kept.append(i)
        if len(kept) >= cfg.max_keypoints:
            break
        for j in tree.query_ball_point(pts[i], cfg.nms_radius):
            if j > i:
                suppressed[j] = True
    return [Keypoint(float(xs[i]), float(ys[i]), float(scores[i])) for i in kept]


def sampling_pattern(seed: int) -> np.ndarray:
    """(DESCRIPTOR_BITS, 4) array of (x1, y1, x2, y2) comparison offsets,
    drawn once from an isotropic Gaussian (sigma = 4 px) and clipped so
    keypoints >= BORDER_MARGIN px from the border stay in bounds."""
    rng = np.random.default_rng(seed)
    pat = rng.normal(0.0, 4.0, size=(DESCRIPTOR_BITS, 4))
    return np.clip(pat, -(BORDER_MARGIN - 1), BORDER_MARGIN - 1)


def describe(
    img: GrayImage, kps: list[Keypoint], cfg: FeatureConfig = FeatureConfig()
) -> tuple[np.ndarray, list[int]]:
    """Binary descriptors for the keypoints at least BORDER_MARGIN px from
    the border; closer ones are dropped.

    Returns (bits, index_map): bits is a (m, 32) packed uint8 array, and
    index_map[i] gives the position in kps that row i describes.
    """
    index_map = [
        i for i, kp in enumerate(kps)
        if BORDER_MARGIN <= kp.x <= img.width - 1 - BORDER_MARGIN
        and BORDER_MARGIN <= kp.y <= img.height - 1 - BORDER_MARGIN
    ]
    if not index_map:
        return np.empty((0, DESCRIPTOR_BITS // 8), dtype=np.uint8), []
    smooth = gaussian_blur(img, 1.0)
    pat = sampling_pattern(cfg.seed)
    xs = np.array([kps[i].x for i in index_map])
    ys = np.array([kps[i].y for i in index_map])
    i1 = sample_bilinear(smooth, xs[:, None] + pat[None, :, 0], ys[:, None] + pat[None, :, 1])
    i2 = sample_bilinear(smooth, xs[:, None] + pat[None, :, 2], ys[:, None] + pat[None, :, 3])
    bits = (i1 < i2)
    return np.packbits(bits, axis=1), index_map


_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint16)


def hamming_matrix(da: np.ndarray, db: np.ndarray) -> np.ndarray:
    """(len(da), len(db)) Hamming distances between packed descriptor rows."""
    return _POPCOUNT[da[:, None, :] ^ db[None, :, :]].sum(axis=2)


def match(da: np.ndarray, db: np.ndarray, cfg: FeatureConfig = FeatureConfig()) -> list[Match]:
    """Nearest-neighbor Hamming matches with ratio test and optional
    mutual-nearest cross check."""
    if len(da) == 0 or len(db) == 0:
        return []
    d = hamming_matrix(da, db)
    nearest = d.argmin(axis=1)
    best = d[np.arange(len(da)), nearest]
    out = []
    for i in range(len(da)):
        j = int(nearest[i])
        row = d[i]
        second = np.partition(row, 1)[1] if len(row) > 1 else None
        if second is not None and best[i] >= cfg.ratio_test * second:
            continue
        if cfg.cross_check and int(d[:, j].argmin()) != i:
            continue
        out.append(Match(i, j, int(best[i])))
    return out
