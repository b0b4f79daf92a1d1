"""Bounding-box trajectories: file I/O, reprojection, outlier detection,
success-rate curves, correction and extrapolation of missing frames."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import homography as hg
from .smooth import Series, SmootherSpec, evaluate_at


class LengthMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class BBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.w, self.h)):
            raise ValueError("coordinates must be finite")
        if self.w <= 0 or self.h <= 0:
            raise ValueError("box size must be positive")

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "BBox":
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)


@dataclass
class Trajectory:
    """Per-frame optional bounding box with absence/occlusion flags."""

    boxes: list[BBox | None]
    occluded: list[bool] = field(default_factory=list)

    def __post_init__(self):
        if not self.occluded:
            self.occluded = [False] * len(self.boxes)
        if len(self.occluded) != len(self.boxes):
            raise LengthMismatchError("occlusion flags must match frame count")

    def __len__(self) -> int:
        return len(self.boxes)

    def centers(self) -> list[tuple[float, float] | None]:
        return [b.center if b is not None else None for b in self.boxes]


@dataclass
class CanonicalTrajectory:
    """Per-frame optional center point in frame-0 coordinates."""

    points: list[tuple[float, float] | None]

    def __len__(self) -> int:
        return len(self.points)

    def to_series(self) -> tuple[Series, Series]:
        t = [i for i, p in enumerate(self.points) if p is not None]
        xs = [self.points[i][0] for i in t]
        ys = [self.points[i][1] for i in t]
        return Series(t, xs), Series(t, ys)


# ---------------------------------------------------------------------------
# Annotation files: one `x,y,w,h` line per frame (comma or whitespace
# separated on read, comma on write; LaSOT/OTB compatible). Optional
# absence file of 0/1 lines marks frames without a valid box.

def read_annotations(path, absence_path=None) -> Trajectory:
    boxes: list[BBox | None] = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 4:
                raise ValueError(f"expected 4 values per line, got: {line!r}")
            x, y, w, h = (float(p) for p in parts)
            boxes.append(BBox(x, y, w, h) if w > 0 and h > 0 else None)
    occluded = [False] * len(boxes)
    if absence_path is not None:
        with open(absence_path) as f:
            flags = [int(line.strip()) for line in f if line.strip()]
        if len(flags) != len(boxes):
            raise LengthMismatchError("absence file length differs from annotation file")
        for i, a in enumerate(flags):
            if a:
                boxes[i] = None
                occluded[i] = True
    return Trajectory(boxes, occluded)


def write_annotations(traj: Trajectory, path) -> None:
    with open(path, "w") as f:
        for b in traj.boxes:
            if b is None:
                f.write("0,0,0,0\n")
            else:
                f.write(f"{b.x:.4f},{b.y:.4f},{b.w:.4f},{b.h:.4f}\n")


# ---------------------------------------------------------------------------
# QA operations


def reproject(smoothed: CanonicalTrajectory, alignment) -> list[tuple[float, float] | None]:
    """Map canonical centers back into each frame's own coordinates through
    the inverse cumulative homographies."""
    if len(smoothed) != len(alignment.frames):
        raise LengthMismatchError("trajectory and alignment lengths differ")
    out: list[tuple[float, float] | None] = []
    for p, fa in zip(smoothed.points, alignment.frames):
        if p is None or fa.method == "failed" or fa.cumulative is None:
            out.append(None)
        else:
            out.append(hg.apply(hg.invert(fa.cumulative), p))
    return out


def distances(traj: Trajectory, centers) -> list[float | None]:
    """Per-frame Euclidean distance between annotation center and the
    reprojected smoothed center; None where either side is absent."""
    if len(traj) != len(centers):
        raise LengthMismatchError("trajectory and center lengths differ")
    out: list[float | None] = []
    for b, c in zip(traj.boxes, centers):
        if b is None or c is None:
            out.append(None)
        else:
            bc = b.center
            out.append(math.hypot(bc[0] - c[0], bc[1] - c[1]))
    return out


@dataclass(frozen=True)
class OutlierReport:
    distances: list[float | None]
    flagged: list[bool]
    threshold: float
    evaluated: int
    outliers: int


def flag_outliers(d: list[float | None], threshold: float = 100.0) -> OutlierReport:
    """Flag frames whose distance strictly exceeds the threshold."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    flagged = [v is not None and v > threshold for v in d]
    evaluated = sum(v is not None for v in d)
    return OutlierReport(list(d), flagged, threshold, evaluated, sum(flagged))


def success_rate_curve(d: list[float | None], thresholds) -> list[tuple[float, float]]:
    """Fraction of evaluable frames with distance strictly below each
    threshold. Non-decreasing in the threshold."""
    taus = [float(t) for t in thresholds]
    if not taus:
        raise ValueError("threshold grid is empty")
    if any(t <= 0 for t in taus):
        raise ValueError("thresholds must be positive")
    present = [v for v in d if v is not None]
    if not present:
        raise ValueError("no evaluable frames")
    n = len(present)
    return [(t, sum(v < t for v in present) / n) for t in taus]


@dataclass(frozen=True)
class CorrectionResult:
    corrected: Trajectory
    replaced_mask: list[bool]
    replaced_fraction: float


def correct(traj: Trajectory, centers, threshold: float) -> CorrectionResult:
    """Re-center boxes whose annotation-to-smoothed distance strictly
    exceeds the threshold; sizes are never changed. Re-centered boxes may
    leave the frame (clipping is a visualization concern, not a data one).
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    d = distances(traj, centers)
    boxes: list[BBox | None] = []
    replaced = []
    evaluable = 0
    for b, c, dist in zip(traj.boxes, centers, d):
        if dist is None:
            boxes.append(b)
            replaced.append(False)
            continue
        evaluable += 1
        if dist > threshold:
            boxes.append(BBox.from_center(c[0], c[1], b.w, b.h))
            replaced.append(True)
        else:
            boxes.append(b)
            replaced.append(False)
    frac = sum(replaced) / evaluable if evaluable else 0.0
    return CorrectionResult(Trajectory(boxes, list(traj.occluded)), replaced, frac)


def replaced_stats(traj: Trajectory, centers, thresholds) -> list[tuple[float, float]]:
    """(threshold, replaced_fraction) per threshold; non-increasing in the
    threshold."""
    return [(float(t), correct(traj, centers, float(t)).replaced_fraction) for t in thresholds]


def extrapolate_missing(traj: Trajectory, alignment, spec: SmootherSpec) -> Trajectory:
    """Fill absent, non-occluded frames with boxes centered at the smoothed
    canonical trajectory evaluated at the missing timestamps, reprojected
    into each frame; sizes interpolate linearly between annotated neighbors.
    Frames whose alignment failed stay absent."""
    from .align import to_canonical  # local import to avoid a cycle

    canon = to_canonical(alignment, traj)
    sx, sy = canon.to_series()
    present_t = np.array(sx.t)
    ws = np.array([traj.boxes[i].w for i in present_t])
    hs = np.array([traj.boxes[i].h for i in present_t])

    boxes = list(traj.boxes)
    for i, b in enumerate(traj.boxes):
        if b is not None or traj.occluded[i]:
            continue
        fa = alignment.frames[i]
        if fa.method == "failed" or fa.cumulative is None:
            continue
        cx = evaluate_at(sx, [i], spec)[0]
        cy = evaluate_at(sy, [i], spec)[0]
        px, py = hg.apply(hg.invert(fa.cumulative), (cx, cy))
        w = float(np.interp(i, present_t, ws))
        h = float(np.interp(i, present_t, hs))
        boxes[i] = BBox.from_center(px, py, w, h)
    return Trajectory(boxes, list(traj.occluded))
