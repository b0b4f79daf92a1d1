"""Synthetic scene generator with a known camera homography path, a known
object trajectory and a configurable annotation-noise model. Serves as the
ground-truth oracle for the whole pipeline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import homography as hg
from .annotate import BBox, Trajectory
from .raster import GrayImage, gaussian_blur


@dataclass(frozen=True)
class ObjectPath:
    kind: str = "line"  # line | sinusoid | spline
    start: tuple[float, float] = (60.0, 60.0)
    velocity: tuple[float, float] = (2.0, 1.0)
    amplitude: float = 20.0
    period: float = 60.0
    knots: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in ("line", "sinusoid", "spline"):
            raise ValueError(f"unknown path kind {self.kind!r}")
        if self.kind == "spline" and len(self.knots) < 4:
            raise ValueError("spline path needs >= 4 knots")


@dataclass(frozen=True)
class ScenarioConfig:
    frames: int = 60
    width: int = 320
    height: int = 240
    camera_translation_sigma: float = 2.0
    camera_rotation_sigma_deg: float = 0.2
    camera_scale_sigma: float = 0.0
    object_path: ObjectPath = field(default_factory=ObjectPath)
    object_size: tuple[float, float] = (36.0, 28.0)
    jitter_sigma: float = 0.0
    outlier_prob: float = 0.0
    outlier_range: tuple[float, float] = (50.0, 150.0)
    blur_frames: dict[int, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.frames < 2:
            raise ValueError("need >= 2 frames")
        if not 0.0 <= self.outlier_prob <= 1.0:
            raise ValueError("outlier_prob must be in [0, 1]")
        for s in (self.camera_translation_sigma, self.camera_rotation_sigma_deg,
                  self.camera_scale_sigma, self.jitter_sigma):
            if s < 0:
                raise ValueError("sigmas must be non-negative")


@dataclass
class GroundTruthScenario:
    frames: list[GrayImage]
    true_camera: list[hg.Homography]  # frame i -> frame 0 (world)
    true_centers: list[tuple[float, float]]  # image coordinates, per frame
    true_boxes: list[BBox]
    noisy: Trajectory
    injected_outliers: list[int]
    config: ScenarioConfig


class ValueNoise:
    """Deterministic 2-octave-style value-noise texture over world
    coordinates; smooth at coarse scale, with enough fine structure for
    corner detection."""

    def __init__(self, rng: np.random.Generator, octaves=((32.0, 0.45), (8.0, 0.3), (3.0, 0.25))):
        self.octaves = [
            (spacing, amp, rng.random((257, 257))) for spacing, amp in octaves
        ]

    def sample(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        out = np.zeros_like(x, dtype=np.float64)
        for spacing, amp, grid in self.octaves:
            gx = np.mod(x / spacing, 256.0)
            gy = np.mod(y / spacing, 256.0)
            x0 = np.floor(gx).astype(np.intp)
            y0 = np.floor(gy).astype(np.intp)
            fx = gx - x0
            fy = gy - y0
            # smoothstep for C1 continuity across cells
            fx = fx * fx * (3.0 - 2.0 * fx)
            fy = fy * fy * (3.0 - 2.0 * fy)
            v00 = grid[y0, x0]
            v01 = grid[y0, x0 + 1]
            v10 = grid[y0 + 1, x0]
            v11 = grid[y0 + 1, x0 + 1]
            top = v00 * (1 - fx) + v01 * fx
            bot = v10 * (1 - fx) + v11 * fx
            out += amp * (top * (1 - fy) + bot * fy)
        return out


def _object_center_world(path: ObjectPath, i: int, n: int) -> tuple[float, float]:
    if path.kind == "line":
        return (path.start[0] + path.velocity[0] * i, path.start[1] + path.velocity[1] * i)
    if path.kind == "sinusoid":
        x = path.start[0] + path.velocity[0] * i
        y = path.start[1] + path.amplitude * math.sin(2.0 * math.pi * i / path.period)
        return (x, y)
    # Catmull-Rom through the recorded knots, parameterized over the sequence.
    knots = np.asarray(path.knots, dtype=np.float64)
    s = (i / max(n - 1, 1)) * (len(knots) - 3) + 1.0
    k = min(int(s), len(knots) - 3)
    u = s - k
    p0, p1, p2, p3 = knots[k - 1], knots[k], knots[k + 1], knots[k + 2]
    c = 0.5 * (
        2 * p1 + (p2 - p0) * u + (2 * p0 - 5 * p1 + 4 * p2 - p3) * u ** 2
        + (3 * p1 - p0 - 3 * p2 + p3) * u ** 3
    )
    return (float(c[0]), float(c[1]))


def _camera_step(rng: np.random.Generator, cfg: ScenarioConfig) -> np.ndarray:
    """Incremental similarity transform, frame i -> frame i-1 coordinates."""
    tx = rng.normal(0.0, cfg.camera_translation_sigma)
    ty = rng.normal(0.0, cfg.camera_translation_sigma)
    theta = math.radians(rng.normal(0.0, cfg.camera_rotation_sigma_deg))
    s = math.exp(rng.normal(0.0, cfg.camera_scale_sigma))
    c, sn = math.cos(theta), math.sin(theta)
    cx, cy = cfg.width / 2.0, cfg.height / 2.0
    # rotate/scale about the frame center, then translate
    m = np.array([
        [s * c, -s * sn, cx - s * (c * cx - sn * cy) + tx],
        [s * sn, s * c, cy - s * (sn * cx + c * cy) + ty],
        [0.0, 0.0, 1.0],
    ])
    return m


def _render_frame(noise, obj_noise, cam: hg.Homography, center_w, size, cfg) -> GrayImage:
    xs, ys = np.meshgrid(
        np.arange(cfg.width, dtype=np.float64), np.arange(cfg.height, dtype=np.float64)
    )
    pts = np.c_[xs.ravel(), ys.ravel()]
    world = hg.apply(cam, pts)
    wx = world[:, 0].reshape(cfg.height, cfg.width)
    wy = world[:, 1].reshape(cfg.height, cfg.width)
    img = noise.sample(wx, wy)

    # Composite the textured object rectangle (axis-aligned in world coords).
    w2, h2 = size[0] / 2.0, size[1] / 2.0
    dx = wx - center_w[0]
    dy = wy - center_w[1]
    inside = (np.abs(dx) <= w2) & (np.abs(dy) <= h2)
    tex = obj_noise.sample(dx + 500.0, dy + 500.0)
    border = (np.abs(np.abs(dx) - w2) < 1.5) | (np.abs(np.abs(dy) - h2) < 1.5)
    obj = np.clip(0.15 + 0.85 * tex, 0.0, 1.0)
    obj = np.where(border & inside, 0.95, obj)
    img = np.where(inside, obj, img)
    return GrayImage(np.clip(img, 0.0, 1.0))


def generate(cfg: ScenarioConfig) -> GroundTruthScenario:
    """Render the scenario. Fully deterministic given cfg (incl. seed).

    The object path is re-sampled (by shifting its start toward the frame
    center) if the true box would fall below 70% inside the frame in any
    frame."""
    rng = np.random.default_rng(cfg.seed)
    noise = ValueNoise(rng)
    obj_rng = np.random.default_rng(cfg.seed + 1)
    obj_noise = ValueNoise(obj_rng, octaves=((9.0, 0.55), (3.0, 0.45)))

    # Camera path: cumulative maps frame i -> frame 0 (world).
    cams = [hg.Homography.identity()]
    for _ in range(1, cfg.frames):
        step = hg.Homography(_camera_step(rng, cfg))
        cams.append(hg.compose(cams[-1], step))

    centers_world = _admissible_path(cfg, cams)

    frames: list[GrayImage] = []
    true_centers: list[tuple[float, float]] = []
    true_boxes: list[BBox] = []
    for i in range(cfg.frames):
        img = _render_frame(noise, obj_noise, cams[i], centers_world[i], cfg.object_size, cfg)
        sigma = cfg.blur_frames.get(i, 0.0)
        if sigma > 0:
            img = gaussian_blur(img, sigma)
        frames.append(img)
        cx, cy = hg.apply(hg.invert(cams[i]), centers_world[i])
        true_centers.append((cx, cy))
        true_boxes.append(BBox.from_center(cx, cy, cfg.object_size[0], cfg.object_size[1]))

    noise_rng = np.random.default_rng(cfg.seed + 2)
    noisy_boxes: list[BBox | None] = []
    injected: list[int] = []
    for i, (cx, cy) in enumerate(true_centers):
        nx = cx + noise_rng.normal(0.0, cfg.jitter_sigma)
        ny = cy + noise_rng.normal(0.0, cfg.jitter_sigma)
        if noise_rng.random() < cfg.outlier_prob:
            mag = noise_rng.uniform(*cfg.outlier_range)
            ang = noise_rng.uniform(0.0, 2.0 * math.pi)
            nx += mag * math.cos(ang)
            ny += mag * math.sin(ang)
            injected.append(i)
        noisy_boxes.append(BBox.from_center(nx, ny, cfg.object_size[0], cfg.object_size[1]))

    return GroundTruthScenario(
        frames=frames,
        true_camera=cams,
        true_centers=true_centers,
        true_boxes=true_boxes,
        noisy=Trajectory(noisy_boxes),
        injected_outliers=injected,
        config=cfg,
    )


def _admissible_path(cfg: ScenarioConfig, cams) -> list[tuple[float, float]]:
    """Object centers in world coordinates, with the path start nudged toward
    the view center until the box stays >= 70% visible in every frame."""
    path = cfg.object_path
    for _ in range(50):
        centers = [_object_center_world(path, i, cfg.frames) for i in range(cfg.frames)]
        if all(
            _visible_fraction(hg.apply(hg.invert(cams[i]), centers[i]), cfg) >= 0.7
            for i in range(cfg.frames)
        ):
            return centers
        # nudge the whole path toward the frame center
        mean = np.mean(centers, axis=0)
        target = (cfg.width / 2.0, cfg.height / 2.0)
        path = ObjectPath(
            kind=path.kind,
            start=(path.start[0] + 0.2 * (target[0] - mean[0]),
                   path.start[1] + 0.2 * (target[1] - mean[1])),
            velocity=path.velocity,
            amplitude=path.amplitude,
            period=path.period,
            knots=path.knots,
        )
    raise ValueError("could not place the object >= 70% inside the frame")


def _visible_fraction(center: tuple[float, float], cfg: ScenarioConfig) -> float:
    w, h = cfg.object_size
    x0, y0 = center[0] - w / 2.0, center[1] - h / 2.0
    ix = max(0.0, min(x0 + w, cfg.width) - max(x0, 0.0))
    iy = max(0.0, min(y0 + h, cfg.height) - max(y0, 0.0))
    return (ix * iy) / (w * h)


def evaluate(scenario: GroundTruthScenario, alignment=None, corrected=None, flagged=None) -> dict:
    """Compare pipeline outputs against the scenario's ground truth."""
    n = len(scenario.frames)
    metrics: dict = {}

    if alignment is not None:
        if len(alignment.frames) != n:
            raise ValueError("alignment length mismatch")
        corners = np.array([
            (0.0, 0.0), (scenario.config.width - 1.0, 0.0),
            (0.0, scenario.config.height - 1.0),
            (scenario.config.width - 1.0, scenario.config.height - 1.0),
        ])
        errs = []
        for fa, cam in zip(alignment.frames, scenario.true_camera):
            if fa.cumulative is None:
                errs.append(None)
                continue
            est = hg.apply(fa.cumulative, corners)
            true = hg.apply(cam, corners)
            errs.append(float(np.linalg.norm(est - true, axis=1).mean()))
        metrics["corner_error"] = errs

    true_c = np.array(scenario.true_centers)
    noisy_c = np.array([b.center for b in scenario.noisy.boxes])
    metrics["noisy_rmse"] = float(np.sqrt(((noisy_c - true_c) ** 2).sum(axis=1).mean()))

    if corrected is not None:
        if len(corrected) != n:
            raise ValueError("corrected trajectory length mismatch")
        pairs = [(b.center, t) for b, t in zip(corrected.boxes, scenario.true_centers) if b is not None]
        cc = np.array([p[0] for p in pairs])
        tc = np.array([p[1] for p in pairs])
        metrics["corrected_rmse"] = float(np.sqrt(((cc - tc) ** 2).sum(axis=1).mean()))
        metrics["improvement_ratio"] = metrics["corrected_rmse"] / metrics["noisy_rmse"]

    if flagged is not None:
        inj = set(scenario.injected_outliers)
        got = {i for i, f in enumerate(flagged) if f}
        tp = len(inj & got)
        metrics["outlier_precision"] = tp / len(got) if got else 1.0
        metrics["outlier_recall"] = tp / len(inj) if inj else 1.0

    return metrics
