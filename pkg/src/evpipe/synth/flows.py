"""Kinematic flow presets over the pipe cross-section.

Coordinates ``(y, z)`` are metres in the light-sheet plane with the pipe axis
at the origin. Velocities are ``(vy, vz)`` in m/s. Image columns follow ``y``
and image rows follow ``z``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError

PIPE_RADIUS = 0.19  # m
MAX_SPEED = 6.0  # m/s

# Lamb-Oseen constants: peak tangential speed sits at r = core radius
_LO_A = 1.25643
_LO_PEAK = 1.0 / (1.0 - np.exp(-_LO_A))


def _lamb_oseen(dy, dz, core, peak_speed, sense):
    r2 = dy * dy + dz * dz
    r = np.sqrt(r2)
    with np.errstate(invalid="ignore", divide="ignore"):
        vt = peak_speed * _LO_PEAK * (core / r) * (1.0 - np.exp(-_LO_A * r2 / core**2))
        vt = np.where(r > 0, vt, 0.0)
        ux = np.where(r > 0, -dz / r, 0.0)
        uz = np.where(r > 0, dy / r, 0.0)
    return sense * vt * ux, sense * vt * uz


@dataclass(frozen=True)
class FlowFieldSpec:
    """One of three kinematic presets.

    ``uniform``
        constant ``(vy, vz)``.
    ``vortex``
        solid-body rotation at ``omega`` rad/s about ``center``;
        ``sense`` is ``"ccw"`` (counter-clockwise in the ``(y, z)`` plane) or
        ``"cw"``.
    ``dual_vortex``
        a mirror pair of Lamb-Oseen vortices centered at ``y = -R/2`` (ccw)
        and ``y = +R/2`` (cw) with core radii ``left_size`` / ``right_size``
        (m); both reach the peak tangential speed ``speed``.
    """

    kind: str = "uniform"
    vy: float = 0.0
    vz: float = 0.0
    center: tuple = (0.0, 0.0)
    omega: float = 0.0
    sense: str = "ccw"
    left_size: float = 0.06
    right_size: float = 0.06
    speed: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.kind not in ("uniform", "vortex", "dual_vortex"):
            raise ConfigError(f"unknown flow kind {self.kind!r}")
        if self.sense not in ("cw", "ccw"):
            raise ConfigError("sense must be 'cw' or 'ccw'")
        if self.kind == "dual_vortex" and not (self.left_size > 0 and self.right_size > 0):
            raise ConfigError("vortex sizes must be positive")
        if self.speed < 0 or self.omega < 0:
            raise ConfigError("speed and omega must be non-negative (use sense for direction)")
        top = self.max_speed()
        if not np.isfinite(top) or top > MAX_SPEED + 1e-9:
            raise ConfigError(f"flow reaches {top:.2f} m/s inside the pipe, above the {MAX_SPEED} m/s limit")

    def velocity(self, y, z):
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        if self.kind == "uniform":
            return np.full(np.broadcast(y, z).shape, self.vy), np.full(np.broadcast(y, z).shape, self.vz)
        if self.kind == "vortex":
            s = 1.0 if self.sense == "ccw" else -1.0
            dy, dz = y - self.center[0], z - self.center[1]
            return -s * self.omega * dz, s * self.omega * dy
        ly, lz = _lamb_oseen(y + PIPE_RADIUS / 2, z, self.left_size, self.speed, 1.0)
        ry, rz = _lamb_oseen(y - PIPE_RADIUS / 2, z, self.right_size, self.speed, -1.0)
        return ly + ry, lz + rz

    def max_speed(self, n=81) -> float:
        g = np.linspace(-PIPE_RADIUS, PIPE_RADIUS, n)
        yy, zz = np.meshgrid(g, g)
        inside = yy**2 + zz**2 <= PIPE_RADIUS**2
        vy, vz = self.velocity(yy[inside], zz[inside])
        return float(np.max(np.hypot(vy, vz)))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["center"] = list(self.center)
        return d

    @classmethod
    def from_dict(cls, d) -> "FlowFieldSpec":
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(f"malformed flow spec: {exc}") from None


class FlowSampler:
    """Ground-truth velocity ``v(y, z, t)`` of a simulated smoke scene.

    The presets are steady, so ``t`` is accepted and ignored.
    """

    def __init__(self, flow: FlowFieldSpec, px_per_mm=0.8, bin=2, width=576, height=576):
        self.flow = flow
        self.px_per_mm = float(px_per_mm)  # binned resolution
        self.bin = int(bin)
        self.width = int(width)  # sensor (full resolution) size
        self.height = int(height)

    def __call__(self, y, z, t=0.0):
        return self.flow.velocity(y, z)

    def pixel_to_world(self, col, row, binned=True):
        """Metres for (possibly fractional) pixel coordinates."""
        s = self.bin if binned else 1
        ppm_full = self.px_per_mm * self.bin * 1000.0
        y = (np.asarray(col, dtype=float) * s + 0.5 * (s - 1) + 0.5 - self.width / 2) / ppm_full
        z = (np.asarray(row, dtype=float) * s + 0.5 * (s - 1) + 0.5 - self.height / 2) / ppm_full
        return y, z

    def px_per_frame(self, y, z, dt_us=2000, t=0.0):
        """Displacement in binned pixels per frame at world points."""
        vy, vz = self(y, z, t)
        k = self.px_per_mm * 1000.0 * dt_us * 1e-6
        return vy * k, vz * k

    def patch_truth(self, cfg):
        """Ground-truth ``(u, v)`` px/frame at every patch center of a flow grid, shape (P, P, 2)."""
        x0, y0 = cfg.patch_origins()
        cols = x0 + (cfg.w - 1) / 2
        rows = y0 + (cfg.w - 1) / 2
        cc, rr = np.meshgrid(cols, rows)  # [j, i]
        y, z = self.pixel_to_world(cc, rr)
        u, v = self.px_per_frame(y, z, cfg.dt)
        return np.stack([u, v], axis=-1)

    def to_dict(self) -> dict:
        return {
            "flow": self.flow.to_dict(),
            "px_per_mm": self.px_per_mm,
            "bin": self.bin,
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, d) -> "FlowSampler":
        return cls(FlowFieldSpec.from_dict(d["flow"]), d["px_per_mm"], d["bin"], d["width"], d["height"])


def load_sampler(path) -> FlowSampler:
    return FlowSampler.from_dict(json.loads(Path(path).read_text()))
