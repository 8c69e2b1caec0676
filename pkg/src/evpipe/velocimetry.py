"""Sparse event-based smoke velocimetry.

Pipeline per frame ``k``:

1. stack the last ``n`` event frames and blur with a normalized Gaussian,
2. for each patch of a ``P x P`` grid, evaluate a normalized SSD cost over all
   integer displacements within ``[-u_max, u_max] x [-v_max, v_max]``,
3. take the integer argmin and refine it with a least-squares quadratic fit on
   its 3x3 neighborhood.

Displacement convention: ``J(u, v)`` compares the current patch at ``(x, y)``
with the previous blurred frame at ``(x - u, y - v)``. The argmin is therefore
the motion of the image content from frame ``k-1`` to frame ``k``, in binned
pixels per frame, with ``u`` along columns and ``v`` along rows.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from numba import njit
from scipy import ndimage

from .errors import ConfigError, InsufficientDataError

ENERGY_EPS = 1e-12


@dataclass(frozen=True)
class FlowGridConfig:
    """Patch grid and matching parameters."""

    P: int = 11
    w: int = 32
    delta: int = 24
    u_max: int = 8
    v_max: int = 8
    n: int = 3
    sigma_blur: float = 1.75
    blur_kernel: int = 7
    dt: int = 2000  # microseconds
    i0: int = 8
    j0: int = 8
    px_per_mm: float = 0.8
    bin: int = 2

    def check(self, shape=None) -> None:
        """Raise ConfigError if the config (and optional image shape) is invalid."""
        if self.w <= 0 or self.P <= 0 or self.n < 1:
            raise ConfigError("w and P must be positive and n >= 1")
        if self.u_max < 1 or self.v_max < 1:
            raise ConfigError("u_max and v_max must be >= 1")
        if self.delta <= 0:
            raise ConfigError("grid step must be positive")
        if not self.sigma_blur > 0:
            raise ConfigError("sigma_blur must be positive")
        if self.blur_kernel < 1 or self.blur_kernel % 2 == 0:
            raise ConfigError("blur_kernel must be a positive odd integer")
        if self.dt <= 0 or not self.px_per_mm > 0 or self.bin < 1:
            raise ConfigError("dt, px_per_mm and bin must be positive")
        if self.i0 < self.u_max or self.j0 < self.v_max:
            raise ConfigError(
                f"grid origin ({self.i0}, {self.j0}) lets the search leave the image "
                f"(needs i0 >= u_max={self.u_max}, j0 >= v_max={self.v_max})"
            )
        if shape is not None:
            rows, cols = shape
            need_w, need_h = self.min_image_size()
            if need_w > cols or need_h > rows:
                raise ConfigError(
                    f"grid needs an image of at least {need_w}x{need_h}, got {cols}x{rows}"
                )

    def min_image_size(self) -> tuple[int, int]:
        span = (self.P - 1) * self.delta + self.w
        return self.i0 + span + self.u_max, self.j0 + span + self.v_max

    @property
    def dt_s(self) -> float:
        return self.dt * 1e-6

    def patch_origins(self) -> tuple[np.ndarray, np.ndarray]:
        """Top-left corners ``x0[i]``, ``y0[j]`` of the patch grid."""
        idx = np.arange(self.P)
        return self.i0 + idx * self.delta, self.j0 + idx * self.delta

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "FlowGridConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown grid config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


@dataclass
class SparseFlowField:
    """Per-patch flow, ``grid[j, i] = (u, v, conf)``; discarded patches are zero."""

    grid: np.ndarray
    k: int = 0

    @property
    def u(self):
        return self.grid[..., 0]

    @property
    def v(self):
        return self.grid[..., 1]

    @property
    def conf(self):
        return self.grid[..., 2]

    @property
    def valid(self) -> np.ndarray:
        return self.grid[..., 2] > 0

    @property
    def discard_fraction(self) -> float:
        return 1.0 - float(self.valid.mean())


# -------------------------------------------------------------------- blurring


def gaussian_kernel(size=7, sigma=1.75) -> np.ndarray:
    """Normalized 2D Gaussian kernel (weights sum to 1)."""
    r = np.arange(size) - size // 2
    g = np.exp(-(r**2) / (2.0 * sigma**2))
    k = np.outer(g, g)
    return k / k.sum()


def stack_and_blur(frames, cfg: FlowGridConfig = FlowGridConfig()) -> np.ndarray:
    """Sum the last ``cfg.n`` frames and blur once (blur is linear).

    ``frames`` may hold EventFrame objects or plain 2D arrays.
    """
    frames = list(frames)
    if len(frames) < cfg.n:
        raise InsufficientDataError(f"need {cfg.n} frames, have {len(frames)}")
    acc = None
    for f in frames[-cfg.n:]:
        data = getattr(f, "data", f)
        acc = np.array(data, dtype=np.float64) if acc is None else acc + data
    return ndimage.correlate(acc, gaussian_kernel(cfg.blur_kernel, cfg.sigma_blur), mode="reflect")


# ---------------------------------------------------------------- cost surfaces


@njit(cache=True, fastmath={"reassoc", "contract"}, inline="always")
def _ssd(curr, prev, x0, y0, xs, ys, w, acc):
    # per-column accumulators keep the inner loop vectorizable
    acc[:] = 0.0
    for yy in range(w):
        for xx in range(w):
            d = curr[y0 + yy, x0 + xx] - prev[ys + yy, xs + xx]
            acc[xx] += d * d
    return acc.sum()


@njit(cache=True, fastmath={"reassoc", "contract"})
def _box_energy(img, x0, y0, w):
    acc = 0.0
    for yy in range(y0, y0 + w):
        for xx in range(x0, x0 + w):
            acc += img[yy, xx] * img[yy, xx]
    return acc


@njit(cache=True, fastmath={"reassoc", "contract"})
def _patch_cost(curr, prev, x0, y0, w, umax, vmax, eps, out):
    e_cur = _box_energy(curr, x0, y0, w)
    if e_cur < eps:
        return False
    # energies of every displaced previous patch from one summed-area table
    nu, nv = 2 * umax + 1, 2 * vmax + 1
    acc = np.empty(w)
    sat = np.zeros((w + nv, w + nu))
    for r in range(w + nv - 1):
        run = 0.0
        for c in range(w + nu - 1):
            b = prev[y0 - vmax + r, x0 - umax + c]
            run += b * b
            sat[r + 1, c + 1] = sat[r, c + 1] + run
    for iu in range(nu):
        u = iu - umax
        for iv in range(nv):
            v = iv - vmax
            # previous patch top-left corner is (x0 - u, y0 - v)
            c0 = umax - u
            r0 = vmax - v
            e_prev = sat[r0 + w, c0 + w] - sat[r0, c0 + w] - sat[r0 + w, c0] + sat[r0, c0]
            if e_prev < eps:
                return False
            ssd = _ssd(curr, prev, x0, y0, x0 - u, y0 - v, w, acc)
            out[iu, iv] = ssd / math.sqrt(e_cur * e_prev)
    return True


@njit(cache=True)
def _grid_costs(curr, prev, x0s, y0s, w, umax, vmax, eps, out, defined):
    for j in range(y0s.shape[0]):
        for i in range(x0s.shape[0]):
            defined[j, i] = _patch_cost(curr, prev, x0s[i], y0s[j], w, umax, vmax, eps, out[j, i])


def _as_float(img):
    return np.ascontiguousarray(img, dtype=np.float64)


def cost_surface(curr, prev, patch_origin, cfg: FlowGridConfig = FlowGridConfig()):
    """Normalized SSD cost for one patch.

    Returns
    -------
    ndarray or None
        ``J[u + u_max, v + v_max]`` of shape ``(2*u_max+1, 2*v_max+1)``, or
        ``None`` when the current patch or any displaced previous patch has
        (near) zero energy.
    """
    x0, y0 = (int(c) for c in patch_origin)
    curr, prev = _as_float(curr), _as_float(prev)
    rows, cols = curr.shape
    if (
        x0 - cfg.u_max < 0
        or y0 - cfg.v_max < 0
        or x0 + cfg.w + cfg.u_max > cols
        or y0 + cfg.w + cfg.v_max > rows
        or prev.shape != curr.shape
    ):
        raise ConfigError(f"patch at {patch_origin} with its search range leaves the image")
    out = np.empty((2 * cfg.u_max + 1, 2 * cfg.v_max + 1))
    ok = _patch_cost(curr, prev, x0, y0, cfg.w, cfg.u_max, cfg.v_max, ENERGY_EPS, out)
    return out if ok else None


def cost_volume(curr, prev, cfg: FlowGridConfig = FlowGridConfig()):
    """Cost surfaces for every patch: ``(J[j, i, :, :], defined[j, i])``."""
    curr, prev = _as_float(curr), _as_float(prev)
    cfg.check(curr.shape)
    x0s, y0s = cfg.patch_origins()
    out = np.zeros((cfg.P, cfg.P, 2 * cfg.u_max + 1, 2 * cfg.v_max + 1))
    defined = np.zeros((cfg.P, cfg.P), dtype=np.bool_)
    _grid_costs(curr, prev, x0s.astype(np.int64), y0s.astype(np.int64), cfg.w,
                cfg.u_max, cfg.v_max, ENERGY_EPS, out, defined)
    return out, defined


# -------------------------------------------------------- argmin and refinement


def match_patch(J) -> tuple[int, int]:
    """Integer argmin ``(u*, v*)`` of a cost grid.

    Ties go to the smallest ``|u| + |v|``, then the smallest ``u``, then ``v``.
    """
    J = np.asarray(J)
    umax, vmax = (J.shape[0] - 1) // 2, (J.shape[1] - 1) // 2
    iu, iv = np.nonzero(J == J.min())
    if iu.size == 1:
        return int(iu[0] - umax), int(iv[0] - vmax)
    u, v = iu - umax, iv - vmax
    best = np.lexsort((v, u, np.abs(u) + np.abs(v)))[0]
    return int(u[best]), int(v[best])


@dataclass(frozen=True)
class Refinement:
    du: float
    dv: float
    conf: float
    det: float


_OFFSETS = np.array([(du, dv) for du in (-1, 0, 1) for dv in (-1, 0, 1)], dtype=float)
_DESIGN = np.column_stack([
    np.ones(9), _OFFSETS[:, 0], _OFFSETS[:, 1],
    _OFFSETS[:, 0] * _OFFSETS[:, 1], _OFFSETS[:, 0] ** 2, _OFFSETS[:, 1] ** 2,
])
_FIT = np.linalg.pinv(_DESIGN)


def fit_quadratic(samples3x3) -> np.ndarray:
    """Least-squares ``a0..a5`` of ``a0 + a1 u + a2 v + a3 uv + a4 u^2 + a5 v^2``.

    ``samples3x3[du + 1, dv + 1]`` holds the cost at offset ``(du, dv)``.
    """
    return _FIT @ np.asarray(samples3x3, dtype=float).reshape(9)


def quadratic_refine(J, argmin) -> Refinement | None:
    """Subpixel offset of the minimum, or None if the estimate is discarded.

    Discards when the argmin lies on the border of the cost grid, when the
    fitted surface has no minimum (``det A <= 0``, or a maximum) or when the fitted minimum
    is more than one pixel away in either axis.
    """
    J = np.asarray(J)
    umax, vmax = (J.shape[0] - 1) // 2, (J.shape[1] - 1) // 2
    iu, iv = argmin[0] + umax, argmin[1] + vmax
    if not (1 <= iu < J.shape[0] - 1 and 1 <= iv < J.shape[1] - 1):
        return None
    a = fit_quadratic(J[iu - 1:iu + 2, iv - 1:iv + 2])
    A = np.array([[2 * a[4], a[3]], [a[3], 2 * a[5]]])
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    # det > 0 alone also admits a maximum; a minimum needs A positive definite
    if not (det > 0 and A[0, 0] > 0):
        return None
    du = (-a[1] * A[1, 1] + a[2] * A[0, 1]) / det
    dv = (-a[2] * A[0, 0] + a[1] * A[1, 0]) / det
    if max(abs(du), abs(dv)) > 1:
        return None
    return Refinement(float(du), float(dv), math.sqrt(det), float(det))


# ---------------------------------------------------------------- full estimate


def estimate_flow(curr, prev, cfg: FlowGridConfig = FlowGridConfig(), k=0) -> SparseFlowField:
    """Flow for every patch of the grid between two blurred frames."""
    J, defined = cost_volume(curr, prev, cfg)
    grid = np.zeros((cfg.P, cfg.P, 3))
    for j in range(cfg.P):
        for i in range(cfg.P):
            if not defined[j, i]:
                continue
            us, vs = match_patch(J[j, i])
            ref = quadratic_refine(J[j, i], (us, vs))
            if ref is not None:
                grid[j, i] = (us + ref.du, vs + ref.dv, ref.conf)
    return SparseFlowField(grid, k)


class VelocimetryPipeline:
    """Stateful frame-by-frame driver: push event frames, get flow fields.

    The first flow field is produced once ``n + 1`` frames have been pushed
    (two stacked images are needed).
    """

    def __init__(self, cfg: FlowGridConfig = FlowGridConfig()):
        cfg.check()
        self.cfg = cfg
        self._frames = []
        self._prev_blurred = None

    def push(self, frame) -> SparseFlowField | None:
        self._frames.append(frame)
        if len(self._frames) > self.cfg.n:
            self._frames.pop(0)
        if len(self._frames) < self.cfg.n:
            return None
        blurred = stack_and_blur(self._frames, self.cfg)
        prev, self._prev_blurred = self._prev_blurred, blurred
        if prev is None:
            return None
        return estimate_flow(blurred, prev, self.cfg, k=getattr(frame, "k", 0))


# ----------------------------------------------------------- physical units


def px_to_mps(px_per_frame, px_per_mm, dt_s):
    """Convert binned pixels per frame to metres per second."""
    out = np.asarray(px_per_frame, dtype=float) / px_per_mm / dt_s / 1000.0
    return float(out) if out.ndim == 0 else out


def flow_to_velocity(field: SparseFlowField, cfg: FlowGridConfig = FlowGridConfig()) -> np.ndarray:
    """Velocity ``(vy, vz)`` in m/s per patch, shape ``(P, P, 2)``.

    ``vy`` follows image columns and ``vz`` image rows.
    """
    return px_to_mps(field.grid[..., :2], cfg.px_per_mm, cfg.dt_s)


def tracking_timescale(sheet_thickness, out_of_plane_speed) -> float:
    """Time (s) a structure stays trackable: half the sheet thickness over the speed.

    Returns ``inf`` for zero out-of-plane speed.
    """
    if sheet_thickness <= 0 or out_of_plane_speed < 0:
        raise ValueError("sheet thickness must be positive and speed non-negative")
    if out_of_plane_speed == 0:
        return math.inf
    return 0.5 * sheet_thickness / out_of_plane_speed


# --------------------------------------------------------------------- output

FLOW_COLUMNS = ["k", "i", "j", "u_px", "v_px", "conf", "vy_mps", "vz_mps"]


def flow_records(field: SparseFlowField, cfg: FlowGridConfig = FlowGridConfig()) -> list[dict]:
    vel = flow_to_velocity(field, cfg)
    rows = []
    for j in range(field.grid.shape[0]):
        for i in range(field.grid.shape[1]):
            u, v, c = field.grid[j, i]
            rows.append({
                "k": int(field.k), "i": i, "j": j,
                "u_px": float(u), "v_px": float(v), "conf": float(c),
                "vy_mps": float(vel[j, i, 0]), "vz_mps": float(vel[j, i, 1]),
            })
    return rows


def _fmt(value):
    return value if isinstance(value, int) else f"{value:.9e}"


def write_flow(records, path, format="csv") -> None:
    """Write flow records as CSV (floats as ``%.9e``) or JSON."""
    path = Path(path)
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(FLOW_COLUMNS)
        for r in records:
            writer.writerow([_fmt(r[c]) for c in FLOW_COLUMNS])
        payload = buf.getvalue()
    elif format == "json":
        # json floats use the shortest round-trip repr
        payload = json.dumps({"columns": FLOW_COLUMNS, "rows": [dict(r) for r in records]})
    else:
        raise ValueError(f"unknown flow format {format!r}")
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(payload)
    os.replace(tmp, path)


def read_flow_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        out.append({c: (int(r[c]) if c in ("k", "i", "j") else float(r[c])) for c in FLOW_COLUMNS})
    return out
