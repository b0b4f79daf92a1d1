"""Per-sequence alignment: staged-RANSAC keypoint tracking with an ECC
fallback for blurry transitions, producing pairwise homographies and
cumulative chains back to the first frame."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import features as ft
from . import homography as hg
from .annotate import BBox, CanonicalTrajectory, LengthMismatchError, Trajectory
from .ecc import (
    DegenerateTemplateError,
    EccConfig,
    EccDidNotConvergeError,
    RegionTooSmallError,
    WarpModel,
    ecc_align,
)
from .raster import GrayImage


class InsufficientMatchesError(RuntimeError):
    pass


@dataclass(frozen=True)
class AlignConfig:
    keypoint_threshold: int = 20
    min_inliers: int = 8
    max_pairwise_reproj: float = 4.0
    ecc_region_inflation: float = 0.25
    # Which frame's fresh keypoints are validated against the estimated
    # homography to form the next inlier set.
    test_frame: str = "current"
    feature: ft.FeatureConfig = field(default_factory=ft.FeatureConfig)
    ransac: hg.RansacConfig = field(default_factory=hg.RansacConfig)
    # Translation warp by default: richer models fit the small annotation
    # template well locally but extrapolate poorly to the rest of the frame.
    ecc: EccConfig = field(default_factory=lambda: EccConfig(model=WarpModel.TRANSLATION))

    def __post_init__(self):
        if self.keypoint_threshold < 4:
            raise ValueError("keypoint_threshold must be >= 4")
        if self.min_inliers < 4:
            raise ValueError("min_inliers must be >= 4")
        if self.test_frame not in ("current", "previous"):
            raise ValueError("test_frame must be 'current' or 'previous'")


@dataclass
class FrameAlignment:
    frame_index: int
    method: str  # first | keypoint | ecc | failed
    pairwise: hg.Homography | None = None  # frame i -> frame i-1
    cumulative: hg.Homography | None = None  # frame i -> frame 0
    inlier_count: int = 0
    rho: float | None = None
    # hex digest of the carried keypoint state after this frame (diagnostic;
    # not serialized). Constant across an ECC span by construction.
    state_digest: str | None = None

    def to_dict(self) -> dict:
        return {
            "index": self.frame_index,
            "method": self.method,
            "pairwise": self.pairwise.to_flat() if self.pairwise else None,
            "cumulative": self.cumulative.to_flat() if self.cumulative else None,
            "inliers": self.inlier_count,
            "rho": self.rho,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FrameAlignment":
        return cls(
            frame_index=d["index"],
            method=d["method"],
            pairwise=hg.Homography.from_flat(d["pairwise"]) if d["pairwise"] else None,
            cumulative=hg.Homography.from_flat(d["cumulative"]) if d["cumulative"] else None,
            inlier_count=d.get("inliers", 0),
            rho=d.get("rho"),
        )


@dataclass
class AlignmentResult:
    frames: list[FrameAlignment]
    failed_at: int | None = None

    def to_dict(self) -> dict:
        return {"frames": [f.to_dict() for f in self.frames], "failed_at": self.failed_at}

    @classmethod
    def from_dict(cls, d: dict) -> "AlignmentResult":
        return cls([FrameAlignment.from_dict(f) for f in d["frames"]], d.get("failed_at"))


@dataclass
class TrackState:
    """Inlier keypoints carried frame to frame; positions live in the most
    recent keypoint-aligned frame."""

    inliers: np.ndarray  # (n, 2) positions
    fresh: bool = True  # True right after a full detection

    def digest(self) -> str:
        return hashlib.sha1(np.ascontiguousarray(self.inliers).tobytes()).hexdigest()


def _detect_points(img: GrayImage, cfg: AlignConfig) -> np.ndarray:
    kps = ft.detect(img, cfg.feature)
    return np.array([(k.x, k.y) for k in kps], dtype=np.float64).reshape(-1, 2)


def _describe_points(img: GrayImage, pts: np.ndarray, cfg: AlignConfig):
    kps = [ft.Keypoint(float(x), float(y), 0.0) for x, y in pts]
    desc, idx_map = ft.describe(img, kps, cfg.feature)
    return desc, pts[idx_map] if len(idx_map) else pts[:0]


def align_pair_rsrt(
    state: TrackState, prev_img: GrayImage, cur_img: GrayImage, cfg: AlignConfig
) -> tuple[hg.Homography, TrackState, int]:
    """One staged-RANSAC step: match the carried inlier set of the previous
    frame against a fresh detection on the current frame, estimate the
    pairwise homography (current -> previous), then keep the fresh keypoints
    whose matched counterpart reprojects within tolerance as the inlier set
    for the next step.

    Raises InsufficientMatchesError / NoConsensusError to signal the caller
    to fall back to ECC.
    """
    desc_prev, pts_prev = _describe_points(prev_img, state.inliers, cfg)
    cur_pts = _detect_points(cur_img, cfg)
    desc_cur, pts_cur = _describe_points(cur_img, cur_pts, cfg)
    matches = ft.match(desc_prev, desc_cur, cfg.feature)
    if len(matches) < cfg.keypoint_threshold:
        raise InsufficientMatchesError(f"{len(matches)} matches < {cfg.keypoint_threshold}")

    src = np.array([pts_cur[m.idx_b] for m in matches])  # current frame
    dst = np.array([pts_prev[m.idx_a] for m in matches])  # previous frame
    h, mask = hg.estimate_ransac(src, dst, cfg.ransac)
    n_inliers = int(mask.sum())
    err = hg.reprojection_errors(h, src[mask], dst[mask])
    if n_inliers < cfg.min_inliers or err.mean() > cfg.max_pairwise_reproj:
        raise hg.NoConsensusError(
            f"consensus too weak: {n_inliers} inliers, mean reproj {err.mean():.2f}"
        )

    # Staged update: validate freshly extracted keypoints against H.
    all_err = hg.reprojection_errors(h, src, dst)
    passing = all_err < cfg.max_pairwise_reproj
    if cfg.test_frame == "current":
        new_inliers = src[passing]
    else:
        new_inliers = dst[passing]
    return h, TrackState(new_inliers, fresh=False), n_inliers


def _ecc_region(box: BBox, img: GrayImage, inflation: float):
    w = box.w * (1.0 + inflation)
    h = box.h * (1.0 + inflation)
    cx, cy = box.center
    x0 = max(0.0, cx - w / 2.0)
    y0 = max(0.0, cy - h / 2.0)
    x1 = min(float(img.width), cx + w / 2.0)
    y1 = min(float(img.height), cy + h / 2.0)
    return (x0, y0, x1 - x0, y1 - y0)


def align_sequence(
    frames: list[GrayImage], boxes: Trajectory, cfg: AlignConfig = AlignConfig()
) -> AlignmentResult:
    """Align a sequence to its first frame.

    Keypoint tracking is the primary route; when a transition yields too few
    matches or no consensus, ECC aligns the previous frame's annotated
    region (inflated) to the current frame without touching the carried
    keypoint state. If both routes fail, the remainder of the sequence is
    marked failed.
    """
    if len(frames) < 2:
        raise ValueError("need at least 2 frames")
    if len(boxes) != len(frames):
        raise LengthMismatchError("annotation count differs from frame count")

    result = AlignmentResult(frames=[
        FrameAlignment(0, "first", hg.Homography.identity(), hg.Homography.identity())
    ])
    state = TrackState(_detect_points(frames[0], cfg))
    result.frames[0].state_digest = state.digest()
    last_pairwise = hg.Homography.identity()
    in_ecc_span = False

    for i in range(1, len(frames)):
        prev_img, cur_img = frames[i - 1], frames[i]
        cumulative_prev = result.frames[-1].cumulative
        if result.failed_at is not None:
            result.frames.append(FrameAlignment(i, "failed"))
            continue

        rsrt_state = state
        if in_ecc_span:
            # Resume from a fresh full detection on the previous frame;
            # the stored inlier state is stale and must stay untouched.
            rsrt_state = TrackState(_detect_points(prev_img, cfg))
        try:
            pairwise, new_state, n_inliers = align_pair_rsrt(rsrt_state, prev_img, cur_img, cfg)
            state = new_state
            in_ecc_span = False
            fa = FrameAlignment(i, "keypoint", pairwise, inlier_count=n_inliers)
        except (InsufficientMatchesError, hg.NoConsensusError, ft.ImageTooSmallError):
            fa = _ecc_fallback(prev_img, cur_img, boxes.boxes[i - 1], last_pairwise, cfg, i)
            if fa.method == "ecc":
                in_ecc_span = True
            else:
                result.failed_at = i
                result.frames.append(fa)
                continue
            pairwise = fa.pairwise

        fa.cumulative = hg.compose(cumulative_prev, pairwise)
        fa.state_digest = state.digest()
        last_pairwise = pairwise
        result.frames.append(fa)

    return result


def _ecc_fallback(prev_img, cur_img, prev_box, last_pairwise, cfg, index) -> FrameAlignment:
    if prev_box is None:
        return FrameAlignment(index, "failed")
    region = _ecc_region(prev_box, prev_img, cfg.ecc_region_inflation)
    # ECC warps previous-frame coordinates into the current frame; the
    # pairwise transform we store runs the other way. The init carries the
    # previous pairwise motion (constant-velocity prior), projected onto the
    # warp model class so stale higher-order terms cannot persist through
    # restricted updates.
    init = hg.invert(last_pairwise)
    if cfg.ecc.model is WarpModel.TRANSLATION:
        cx, cy = prev_box.center
        px, py = hg.apply(init, (cx, cy))
        init = hg.Homography.translation(px - cx, py - cy)
    inits = [init, hg.Homography.identity()]
    for init in inits:
        try:
            res = ecc_align(prev_img, cur_img, region, init, cfg.ecc)
        except (EccDidNotConvergeError, DegenerateTemplateError, RegionTooSmallError, ValueError):
            continue
        if res.rho < cfg.ecc.min_rho:
            continue
        return FrameAlignment(index, "ecc", hg.invert(res.warp), rho=res.rho)
    return FrameAlignment(index, "failed")


def to_canonical(alignment: AlignmentResult, traj: Trajectory) -> CanonicalTrajectory:
    """Map each present annotation center through its cumulative homography
    into frame-0 coordinates."""
    if len(traj) != len(alignment.frames):
        raise LengthMismatchError("trajectory and alignment lengths differ")
    points: list[tuple[float, float] | None] = []
    for b, fa in zip(traj.boxes, alignment.frames):
        if b is None or fa.method == "failed" or fa.cumulative is None:
            points.append(None)
        else:
            points.append(hg.apply(fa.cumulative, b.center))
    return CanonicalTrajectory(points)
