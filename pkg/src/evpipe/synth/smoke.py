"""Advected-smoke event scenes.

Smoke is a set of soft Gaussian blobs on a uniform background, carried by a
kinematic flow preset. Blobs fade in and out with an exponentially
distributed lifetime whose mean is the tracking timescale of the light sheet,
which mimics structures leaving the sheet out of plane. Blobs that drift out
of view are re-seeded elsewhere, again fading in.

The sensor is stepped on a fixed tick grid. Every pixel compares its log
intensity against a reference level; each crossing of a (per-pixel jittered)
ON/OFF threshold emits one event whose timestamp is linearly interpolated
between the ticks. Events inside the refractory period are dropped while the
reference still follows the signal.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from numba import njit

from ..errors import ConfigError, GenerationError
from ..velocimetry import tracking_timescale
from .camera import SimCamera
from .flows import FlowFieldSpec, FlowSampler
from .led import assemble, noise_events

TICK_US = 100


@dataclass(frozen=True)
class SmokeSceneSpec:
    """Blob population and timing.

    Radii are in full-resolution sensor pixels. ``seeding_rate`` (1/s) is the
    per-blob replacement rate; when None it is the inverse tracking timescale
    of a sheet of ``sheet_thickness`` m crossed at ``out_of_plane_speed`` m/s.
    """

    n_blobs: int = 1200
    radius_mean: float = 3.0
    radius_sd: float = 1.0
    intensity: float = 2.0  # peak brightness over the unit background
    seeding_rate: float | None = None
    sheet_thickness: float = 0.02
    out_of_plane_speed: float = 1.0
    duration: float = 0.012  # s
    frame_dt_us: int = 2000
    fade_us: float | None = None  # ramp length; defaults to the mean lifetime
    px_per_mm: float = 0.8  # binned resolution
    bin: int = 2

    def __post_init__(self):
        if self.n_blobs < 1 or self.radius_mean <= 0 or self.radius_sd < 0 or self.intensity <= 0:
            raise ConfigError("blob count, radius and intensity must be positive")
        if self.duration <= 0 or self.frame_dt_us <= 0:
            raise ConfigError("duration and frame cadence must be positive")
        if self.fade_us is not None and self.fade_us < 0:
            raise ConfigError("fade time must be non-negative")
        if self.seeding_rate is not None and self.seeding_rate < 0:
            raise ConfigError("seeding rate must be non-negative")
        if self.sheet_thickness <= 0 or self.out_of_plane_speed < 0:
            raise ConfigError("sheet thickness must be positive and out-of-plane speed non-negative")
        if self.px_per_mm <= 0 or self.bin < 1:
            raise ConfigError("px_per_mm must be positive and bin >= 1")

    @property
    def mean_lifetime_s(self) -> float:
        if self.seeding_rate is not None:
            return np.inf if self.seeding_rate == 0 else 1.0 / self.seeding_rate
        return tracking_timescale(self.sheet_thickness, self.out_of_plane_speed)

    @property
    def fade_time_us(self) -> float:
        if self.fade_us is not None:
            return float(self.fade_us)
        return self.mean_lifetime_s * 1e6

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "SmokeSceneSpec":
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(f"malformed smoke spec: {exc}") from None


class _Blobs:
    def __init__(self, n, spec: SmokeSceneSpec, width, height, rng):
        self.spec = spec
        self.w, self.h = width, height
        self.rng = rng
        self.margin = 3.5 * (spec.radius_mean + 3 * spec.radius_sd)
        self.fade = spec.fade_time_us
        self.x = np.empty(n); self.y = np.empty(n)
        self.r = np.empty(n); self.life = np.empty(n); self.age = np.empty(n)
        self.respawn(np.arange(n))
        # start in steady state: random ages within each existence
        self.age[:] = self.rng.random(n) * np.minimum(self.life + 2 * self.fade, 1e6)

    def respawn(self, idx):
        n = len(idx)
        if n == 0:
            return
        m = self.margin
        self.x[idx] = self.rng.uniform(-m, self.w + m, n)
        self.y[idx] = self.rng.uniform(-m, self.h + m, n)
        self.r[idx] = np.maximum(self.spec.radius_mean + self.spec.radius_sd * self.rng.standard_normal(n),
                                 0.3 * self.spec.radius_mean)
        mean_life_us = self.spec.mean_lifetime_s * 1e6
        self.life[idx] = np.inf if np.isinf(mean_life_us) else self.rng.exponential(mean_life_us, n)
        self.age[idx] = 0.0

    def amplitude(self):
        # trapezoid: fade in, plateau for the lifetime, fade out
        if self.fade <= 0 or np.isinf(self.fade):
            env = np.ones_like(self.age)
        else:
            up = self.age / self.fade
            down = (self.life + 2 * self.fade - self.age) / self.fade
            env = np.clip(np.minimum(np.minimum(up, down), 1.0), 0.0, 1.0)
        return self.spec.intensity * env

    def step(self, flow: FlowFieldSpec, sampler: FlowSampler, dt_us):
        ppm_full = sampler.px_per_mm * sampler.bin * 1000.0
        k = ppm_full * dt_us * 1e-6
        # midpoint rule in world coordinates
        y, z = sampler.pixel_to_world(self.x - 0.5, self.y - 0.5, binned=False)
        vy, vz = flow.velocity(y, z)
        ym, zm = y + 0.5 * vy * dt_us * 1e-6, z + 0.5 * vz * dt_us * 1e-6
        vy, vz = flow.velocity(ym, zm)
        self.x += vy * k
        self.y += vz * k
        self.age += dt_us
        m = self.margin
        gone = (self.age >= self.life + 2 * self.fade) | (self.x < -m) | (self.x > self.w + m) | (self.y < -m) | (self.y > self.h + m)
        self.respawn(np.flatnonzero(gone))


@njit(cache=True)
def _render(x, y, r, a, width, height, out, stamp, tick, touched, n_touched):
    for b in range(x.shape[0]):
        if a[b] <= 0.0:
            continue
        rad = int(np.ceil(3.5 * r[b]))
        cx = x[b]; cy = y[b]
        inv = 0.5 / (r[b] * r[b])
        x0 = max(int(np.floor(cx)) - rad, 0)
        x1 = min(int(np.floor(cx)) + rad + 1, width)
        y0 = max(int(np.floor(cy)) - rad, 0)
        y1 = min(int(np.floor(cy)) + rad + 1, height)
        for yy in range(y0, y1):
            dy = yy + 0.5 - cy
            for xx in range(x0, x1):
                dx = xx + 0.5 - cx
                i = yy * width + xx
                if stamp[i] != tick:
                    stamp[i] = tick
                    out[i] = 0.0
                    touched[n_touched] = i
                    n_touched += 1
                out[i] += a[b] * np.exp(-(dx * dx + dy * dy) * inv)
    return n_touched


@njit(cache=True)
def _cross(idx, n_idx, level, stamp, tick, L_prev, ref, thr_on, thr_off, last_t, t0, dt, refr,
           width, ex, ey, et, ep, n_ev):
    cap = ex.shape[0]
    for q in range(n_idx):
        i = idx[q]
        new = np.log1p(level[i]) if stamp[i] == tick else 0.0
        old = L_prev[i]
        if new == old:
            continue
        d = new - old
        while True:
            if new - ref[i] >= thr_on[i]:
                target = ref[i] + thr_on[i]
                pol = 1
            elif ref[i] - new >= thr_off[i]:
                target = ref[i] - thr_off[i]
                pol = -1
            else:
                break
            frac = (target - old) / d
            if frac < 0.0:
                frac = 0.0
            elif frac > 1.0:
                frac = 1.0
            t = t0 + frac * dt
            ref[i] = target
            if t - last_t[i] >= refr:
                if n_ev >= cap:
                    return -1
                ex[n_ev] = i % width
                ey[n_ev] = i // width
                et[n_ev] = t
                ep[n_ev] = pol
                n_ev += 1
                last_t[i] = t
        L_prev[i] = new
    return n_ev


def simulate_smoke_events(flow: FlowFieldSpec, scene: SmokeSceneSpec, camera: SimCamera, seed=0):
    """Events of an advected-smoke scene plus its ground-truth flow sampler.

    ``camera`` gives the full-resolution sensor size; the velocimetry side
    bins by ``scene.bin``.

    Returns
    -------
    stream : EventStream
    sampler : FlowSampler
    """
    W, H = camera.width, camera.height
    beh = camera.behavior
    rng = np.random.default_rng(seed)
    sampler = FlowSampler(flow, scene.px_per_mm, scene.bin, W, H)
    blobs = _Blobs(scene.n_blobs, scene, W, H, rng)

    npx = W * H
    thr_on = beh.threshold_on * np.maximum(1.0 + beh.threshold_sigma * rng.standard_normal(npx), 0.2)
    thr_off = beh.threshold_off * np.maximum(1.0 + beh.threshold_sigma * rng.standard_normal(npx), 0.2)
    level = np.zeros(npx)
    stamp = np.full(npx, -1, dtype=np.int64)
    L_prev = np.zeros(npx)
    last_t = np.full(npx, -np.inf)
    touched = np.empty(npx, dtype=np.int64)

    # initial brightness sets the references without emitting events
    n_t = _render(blobs.x, blobs.y, blobs.r, blobs.amplitude(), W, H, level, stamp, 0, touched, 0)
    prev_idx = touched[:n_t].copy()
    L_prev[prev_idx] = np.log1p(level[prev_idx])
    ref = L_prev.copy()

    T = scene.duration * 1e6
    n_ticks = int(np.ceil(T / TICK_US))
    cap = 1 << 20
    ex = np.empty(cap, np.int64); ey = np.empty(cap, np.int64)
    et = np.empty(cap); ep = np.empty(cap, np.int8)
    n_ev = 0
    for k in range(1, n_ticks + 1):
        blobs.step(flow, sampler, TICK_US)
        n_t = _render(blobs.x, blobs.y, blobs.r, blobs.amplitude(), W, H, level, stamp, k, touched, 0)
        cur_idx = touched[:n_t].copy()
        idx = np.union1d(cur_idx, prev_idx)
        t0 = (k - 1) * TICK_US
        if n_ev + 8 * len(idx) > cap:
            cap = 2 * max(cap, n_ev + 8 * len(idx))
            ex, ey, et, ep = (np.resize(a, cap) for a in (ex, ey, et, ep))
        n_ev = _cross(idx, len(idx), level, stamp, k, L_prev, ref, thr_on, thr_off, last_t,
                      float(t0), float(TICK_US), beh.refractory_us, W, ex, ey, et, ep, n_ev)
        if n_ev < 0:
            raise GenerationError(f"event buffer overflow at t={t0} us")
        prev_idx = cur_idx

    parts = [(ex[:n_ev], ey[:n_ev], et[:n_ev], ep[:n_ev])]
    if beh.noise_rate_hz > 0:
        yy, xx = np.divmod(np.arange(npx), W)
        parts.append(noise_events(xx, yy, 0.0, T, beh.noise_rate_hz, rng))
    return assemble(parts, W, H, T), sampler


def smoke_default_camera(threshold=0.1) -> SimCamera:
    """Noise-free 576x576 sensor whose binned frame fits the default flow grid."""
    from .camera import Behavior

    beh = Behavior(threshold, threshold, 0.0, 0.0, 0.0, 0.0, 0.03)
    return SimCamera.with_behavior(576, 576, beh)


def save_sampler(sampler: FlowSampler, path) -> None:
    Path(path).write_text(json.dumps(sampler.to_dict(), indent=2))
