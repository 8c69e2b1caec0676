"""Per-marker particle filters over image-plane centroids.

Each marker carries particles ``(u, v, du, dv)`` (px, px/s) under a
constant-velocity model with white acceleration noise. Detections weight the
particles with an isotropic Gaussian likelihood; systematic resampling runs
when the effective sample size drops below a fraction of the particle count.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class TrackEstimate:
    marker_id: int
    centroid: np.ndarray  # (u, v)
    velocity: np.ndarray  # (du, dv) px/s
    variance: np.ndarray  # (var_u, var_v)
    observed: bool


@dataclass
class _Track:
    particles: np.ndarray
    weights: np.ndarray
    age: int = 0


def systematic_resample(weights, rng) -> np.ndarray:
    n = len(weights)
    positions = (rng.random() + np.arange(n)) / n
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    return np.searchsorted(cum, positions)


class CentroidTracker:
    """Bank of particle filters keyed by marker id.

    Parameters
    ----------
    n_particles : int
    accel_std : float
        Process noise, px/s^2.
    meas_std : float
        Detection noise, px.
    init_velocity_std : float
        Velocity spread (px/s) of particles spawned on a first detection.
    resample_fraction : float
        Resample when ESS < ``resample_fraction * n_particles``.
    roughening : float
        Scale on the post-resampling kernel jitter (0 disables).
    recentre : bool
        Shift the weighted cloud onto the Gaussian-update mean after each
        correction (variance reduction; off gives the plain bootstrap filter).
    seed : int
    """

    def __init__(self, n_particles=200, accel_std=50.0, meas_std=1.0,
                 init_velocity_std=200.0, resample_fraction=0.5, roughening=1.0, recentre=True, seed=0):
        self.n = int(n_particles)
        self.accel_std = float(accel_std)
        self.meas_std = float(meas_std)
        self.init_velocity_std = float(init_velocity_std)
        self.resample_fraction = float(resample_fraction)
        self.roughening = float(roughening)
        self.recentre = bool(recentre)
        self.rng = np.random.default_rng(seed)
        self.tracks: dict[int, _Track] = {}

    def _spawn(self, uv) -> _Track:
        p = np.zeros((self.n, 4))
        p[:, :2] = uv
        p[:, 2:] = self.rng.normal(0.0, self.init_velocity_std, (self.n, 2))
        return _Track(p, np.full(self.n, 1.0 / self.n))

    def _predict(self, tr: _Track, dt):
        a = self.rng.normal(0.0, self.accel_std, (self.n, 2))
        tr.particles[:, :2] += tr.particles[:, 2:] * dt + 0.5 * a * dt * dt
        tr.particles[:, 2:] += a * dt

    def _correct(self, tr: _Track, uv):
        # Gaussian update of the first moment from the prior cloud's own
        # covariance; the weighted cloud is recentred on it afterwards, which
        # strips importance-sampling noise from the mean (linear model, so the
        # exact posterior mean coincides)
        m = tr.weights @ tr.particles
        dev = tr.particles - m
        P = (tr.weights[:, None] * dev).T @ dev
        S = P[:2, :2] + np.eye(2) * self.meas_std**2
        target = m + P[:, :2] @ np.linalg.solve(S, uv - m[:2])

        d2 = np.sum((tr.particles[:, :2] - uv) ** 2, axis=1)
        logw = np.log(tr.weights + 1e-300) - 0.5 * d2 / self.meas_std**2
        logw -= logw.max()
        w = np.exp(logw)
        tr.weights = w / w.sum()
        if self.recentre:
            tr.particles += target - tr.weights @ tr.particles

    def _resample(self, tr: _Track):
        ess = 1.0 / np.sum(tr.weights**2)
        if ess >= self.resample_fraction * self.n:
            return
        mean = tr.weights @ tr.particles
        std = np.sqrt(tr.weights @ (tr.particles - mean) ** 2)
        idx = systematic_resample(tr.weights, self.rng)
        tr.particles = tr.particles[idx]
        tr.weights = np.full(self.n, 1.0 / self.n)
        # regularized resampling: Gaussian kernel jitter with the usual
        # bandwidth for n samples in d dims keeps the cloud from collapsing
        d = tr.particles.shape[1]
        h = (4.0 / (self.n * (d + 2))) ** (1.0 / (d + 4))
        h *= self.roughening
        a = np.sqrt(max(1.0 - h * h, 0.0))
        # shrink toward the mean so the jitter does not inflate the spread
        tr.particles = a * tr.particles + (1 - a) * mean
        tr.particles += self.rng.normal(0.0, 1.0, tr.particles.shape) * (h * std)
        # keep the first moment of the weighted set; resampling noise in the
        # mean would otherwise random-walk the estimate
        tr.particles += mean - tr.particles.mean(axis=0)

    def _estimate(self, mid, tr: _Track, observed) -> TrackEstimate:
        w = tr.weights
        mean = w @ tr.particles
        var = w @ (tr.particles[:, :2] - mean[:2]) ** 2
        return TrackEstimate(mid, mean[:2].copy(), mean[2:].copy(), var, observed)

    def step(self, detections, dt) -> dict[int, TrackEstimate]:
        """Advance all tracks by ``dt`` seconds and fuse ``detections``.

        A marker seen for the first time starts at its detection exactly.
        Known markers without a detection this step only get the prediction.
        """
        if dt <= 0:
            raise ValueError("dt must be positive")
        seen = {d.marker_id: np.asarray(d.centroid, dtype=float) for d in detections}
        out = {}
        for mid, tr in self.tracks.items():
            self._predict(tr, dt)
            if mid in seen:
                self._correct(tr, seen[mid])
            tr.age += 1
            out[mid] = self._estimate(mid, tr, mid in seen)
            self._resample(tr)
        for mid, uv in seen.items():
            if mid not in self.tracks:
                tr = self._spawn(uv)
                self.tracks[mid] = tr
                out[mid] = self._estimate(mid, tr, True)
                out[mid].centroid[:] = uv
        return out


def track_centroids(tracker: CentroidTracker, detections, dt) -> dict[int, TrackEstimate]:
    return tracker.step(detections, dt)
