"""Enhanced-correlation-coefficient template alignment.

Iteratively maximizes the zero-mean normalized correlation between a
template region and the warped target, with forward-additive parameter
updates and a coarse-to-fine pyramid. Invariant to gain/bias changes of
the target.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .homography import Homography
from .raster import GrayImage, downsample2, gaussian_blur, gradients, sample_bilinear


class WarpModel(enum.Enum):
    TRANSLATION = "translation"
    AFFINE = "affine"
    HOMOGRAPHY = "homography"


class RegionTooSmallError(ValueError):
    pass


class DegenerateTemplateError(ValueError):
    pass


class EccDidNotConvergeError(RuntimeError):
    pass


@dataclass(frozen=True)
class EccConfig:
    max_iterations: int = 50
    epsilon: float = 1e-4
    pyramid_levels: int = 3
    model: WarpModel = WarpModel.AFFINE
    min_rho: float = 0.6
    # Gaussian pre-smoothing of both images widens the basin of attraction
    # on hard-edged content; 0 disables it.
    presmooth_sigma: float = 1.0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")
        if self.presmooth_sigma < 0:
            raise ValueError("presmooth_sigma must be non-negative")


@dataclass(frozen=True)
class EccResult:
    warp: Homography
    rho: float
    # one correlation trace per pyramid level, coarsest first
    rho_trace: list[list[float]] = field(default_factory=list)
    converged: bool = True


# Free entries of the 3x3 warp per model, as (row, col) pairs.
_PARAMS = {
    WarpModel.TRANSLATION: [(0, 2), (1, 2)],
    WarpModel.AFFINE: [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)],
    WarpModel.HOMOGRAPHY: [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2), (2, 0), (2, 1)],
}


def _warp_points(m: np.ndarray, x: np.ndarray, y: np.ndarray):
    w = m[2, 0] * x + m[2, 1] * y + m[2, 2]
    xw = (m[0, 0] * x + m[0, 1] * y + m[0, 2]) / w
    yw = (m[1, 0] * x + m[1, 1] * y + m[1, 2]) / w
    return xw, yw, w


def _jacobian(model: WarpModel, m, x, y, xw, yw, w):
    """d(warped coords)/d(free matrix entries) at the current warp."""
    n = x.size
    params = _PARAMS[model]
    jx = np.zeros((n, len(params)))
    jy = np.zeros((n, len(params)))
    basis = {(0, 0): x / w, (0, 1): y / w, (0, 2): 1.0 / w}
    for k, (r, c) in enumerate(params):
        if r == 0:
            jx[:, k] = basis[(0, c)]
        elif r == 1:
            jy[:, k] = basis[(0, c)]
        else:  # perspective entries move both coordinates
            base = x / w if c == 0 else y / w
            jx[:, k] = -xw * base
            jy[:, k] = -yw * base
    return jx, jy


def correlation(a: np.ndarray, b: np.ndarray) -> float:
    """Zero-mean normalized correlation of two equal-size samples."""
    az = a - a.mean()
    bz = b - b.mean()
    na = np.linalg.norm(az)
    nb = np.linalg.norm(bz)
    if na < 1e-12 or nb < 1e-12:
        raise DegenerateTemplateError("near-zero intensity variance")
    return float(az @ bz / (na * nb))


def _scale_warp(m: np.ndarray, s: float) -> np.ndarray:
    sm = np.diag([s, s, 1.0])
    return sm @ m @ np.linalg.inv(sm)


def _align_level(template, target, xs, ys, model, m, cfg, trace):
    """One pyramid level of forward-additive updates. Returns (m, rho, converged)."""
    tvals = sample_bilinear(template, xs, ys)
    tz = tvals - tvals.mean()
    tnorm = np.linalg.norm(tz)
    if tnorm < 1e-12:
        raise DegenerateTemplateError("template region has near-zero variance")
    gx, gy = gradients(target)
    params = _PARAMS[model]
    converged = False
    for _ in range(cfg.max_iterations):
        xw, yw, w = _warp_points(m, xs, ys)
        ivals = sample_bilinear(target, xw, yw)
        iz = ivals - ivals.mean()
        inorm = np.linalg.norm(iz)
        if inorm < 1e-12:
            raise DegenerateTemplateError("warped target has near-zero variance")
        rho = float(tz @ iz / (tnorm * inorm))
        trace.append(rho)

        gxv = _bilinear_raw(gx, xw, yw)
        gyv = _bilinear_raw(gy, xw, yw)
        jx, jy = _jacobian(model, m, xs, ys, xw, yw, w)
        g = gxv[:, None] * jx + gyv[:, None] * jy
        g = g - g.mean(axis=0)

        try:
            hinv = np.linalg.inv(g.T @ g)
        except np.linalg.LinAlgError:
            break
        gt_i = g.T @ iz
        gt_t = g.T @ tz
        num = inorm ** 2 - gt_i @ hinv @ gt_i
        den = tz @ iz - gt_t @ hinv @ gt_i
        if den > 0:
            lam = num / den
        else:
            lam = math.sqrt(max(gt_i @ hinv @ gt_i, 1e-30)) / inorm  # fallback branch
        err = lam * tz - iz
        dp = hinv @ (g.T @ err)

        # Step rejection: never let rho decrease beyond tolerance.
        accepted = False
        step = dp
        for _retry in range(6):
            m_try = m.copy()
            for k, (r, c) in enumerate(params):
                m_try[r, c] += step[k]
            xw2, yw2, _ = _warp_points(m_try, xs, ys)
            iv2 = sample_bilinear(target, xw2, yw2)
            iz2 = iv2 - iv2.mean()
            n2 = np.linalg.norm(iz2)
            if n2 < 1e-12:
                step = step * 0.5
                continue
            rho2 = float(tz @ iz2 / (tnorm * n2))
            if rho2 >= rho - 1e-6:
                m = m_try
                accepted = True
                break
            step = step * 0.5
        if not accepted:
            break
        if float(np.linalg.norm(step)) < cfg.epsilon:
            converged = True
            break

    xw, yw, _ = _warp_points(m, xs, ys)
    ivals = sample_bilinear(target, xw, yw)
    rho = correlation(tvals, ivals)
    trace.append(rho)
    return m, rho, converged


def _bilinear_raw(a: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Bilinear sampling of an unconstrained float array (gradients)."""
    h, w = a.shape
    x = np.clip(x, 0.0, w - 1.0)
    y = np.clip(y, 0.0, h - 1.0)
    x0 = np.floor(x).astype(np.intp)
    y0 = np.floor(y).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    top = a[y0, x0] * (1 - fx) + a[y0, x1] * fx
    bot = a[y1, x0] * (1 - fx) + a[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def _level_model(cfg: EccConfig, finest: bool) -> WarpModel:
    if cfg.model is WarpModel.TRANSLATION:
        return WarpModel.TRANSLATION
    if finest and cfg.model is WarpModel.HOMOGRAPHY:
        return WarpModel.HOMOGRAPHY
    if finest and cfg.model is WarpModel.AFFINE:
        return WarpModel.HOMOGRAPHY  # promotion at the finest level
    return WarpModel.AFFINE


def ecc_align(
    template: GrayImage,
    target: GrayImage,
    template_region: tuple[float, float, float, float],
    init: Homography,
    cfg: EccConfig = EccConfig(),
) -> EccResult:
    """Align template_region (x, y, w, h in template coordinates) to the
    target, returning the warp (template -> target coordinates) and the
    final correlation coefficient.

    Coarse-to-fine over a box-downsampled pyramid; the warp model is
    affine on coarse levels and promoted to a homography at the finest
    level (translation stays translation throughout).
    """
    x0, y0, rw, rh = template_region
    if rw * rh < 64:
        raise RegionTooSmallError("template region area must be >= 64 px^2")
    if x0 < 0 or y0 < 0 or x0 + rw > template.width or y0 + rh > template.height:
        raise ValueError("template_region must lie inside the template")

    if cfg.presmooth_sigma > 0:
        template = gaussian_blur(template, cfg.presmooth_sigma)
        target = gaussian_blur(target, cfg.presmooth_sigma)

    # Pyramids, coarsest last.
    tpl_pyr = [template]
    tgt_pyr = [target]
    for _ in range(cfg.pyramid_levels - 1):
        if min(tpl_pyr[-1].width, tpl_pyr[-1].height, tgt_pyr[-1].width, tgt_pyr[-1].height) < 32:
            break
        tpl_pyr.append(downsample2(tpl_pyr[-1]))
        tgt_pyr.append(downsample2(tgt_pyr[-1]))

    m = np.array(init.m, dtype=np.float64)
    m = _scale_warp(m, 0.5 ** (len(tpl_pyr) - 1))
    trace: list[list[float]] = []
    rho = -1.0
    converged = False
    for level in range(len(tpl_pyr) - 1, -1, -1):
        s = 0.5 ** level
        gx0, gy0 = x0 * s, y0 * s
        gw, gh = max(rw * s, 2.0), max(rh * s, 2.0)
        nx = max(int(round(gw)), 2)
        ny = max(int(round(gh)), 2)
        xs, ys = np.meshgrid(
            np.linspace(gx0, gx0 + gw - 1, nx), np.linspace(gy0, gy0 + gh - 1, ny)
        )
        xs = xs.ravel()
        ys = ys.ravel()
        model = _level_model(cfg, finest=level == 0)
        level_trace: list[float] = []
        m, rho, converged = _align_level(
            tpl_pyr[level], tgt_pyr[level], xs, ys, model, m, cfg, level_trace
        )
        trace.append(level_trace)
        if level > 0:
            m = _scale_warp(m, 2.0)

    if not converged and rho < cfg.min_rho:
        raise EccDidNotConvergeError(
            f"no convergence within {cfg.max_iterations} iterations and rho={rho:.3f} < {cfg.min_rho}"
        )
    return EccResult(warp=Homography(m), rho=rho, rho_trace=trace, converged=converged)
