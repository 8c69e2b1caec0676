"""Blinking markers on a moving rigid body.

Each LED pulse is placed at the marker's projection at the pulse's ON edge;
the pulse itself lasts a few microseconds, so motion within a pulse is
ignored. Spurious events are generated only on pixels near the projected
trajectories, which keeps long captures cheap.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from ..errors import ConfigError, GenerationError
from ..mocap.camera import CameraModel, project_points
from ..mocap.markers import MarkerConfig
from ..mocap.pose import Pose
from .camera import SimCamera
from .led import NOISE_MARGIN, PEAK_CONTRAST, _window, assemble, edge_times, noise_events, pulse_events

TRAJ_SPOT_SIGMA = 2.0  # px; defocused LED spot on the mocap camera


class PoseTrajectory:
    """Time-stamped body-to-camera poses with slerp/linear interpolation.

    Outside the sampled interval the first/last pose is held.
    """

    def __init__(self, times_us, poses):
        times = np.asarray(times_us, dtype=float).ravel()
        poses = list(poses)
        if len(times) == 0 or len(times) != len(poses):
            raise ConfigError("need one timestamp per pose and at least one pose")
        if np.any(np.diff(times) <= 0):
            raise ConfigError("pose timestamps must be strictly increasing")
        self.times_us = times
        self.poses = poses
        self._t = np.array([p.t for p in poses])
        rots = Rotation.from_matrix(np.array([p.R for p in poses]))
        self._slerp = Slerp(times, rots) if len(times) > 1 else None
        self._r0 = rots

    @classmethod
    def static(cls, pose: Pose) -> "PoseTrajectory":
        return cls([0.0], [pose])

    @classmethod
    def constant_velocity(cls, pose: Pose, velocity, duration_s) -> "PoseTrajectory":
        """Pure translation at ``velocity`` m/s (camera frame) starting from ``pose``."""
        v = np.asarray(velocity, dtype=float)
        T = float(duration_s) * 1e6
        return cls([0.0, T], [pose, Pose(pose.R, pose.t + v * duration_s)])

    def at(self, t_us) -> list[Pose]:
        """Poses at an array of times."""
        R, t = self._interp(np.atleast_1d(np.asarray(t_us, dtype=float)))
        return [Pose(r, tt) for r, tt in zip(R, t)]

    def pose(self, t_us) -> Pose:
        return self.at([t_us])[0]

    def _interp(self, t):
        if self._slerp is None:
            return np.repeat(self._r0.as_matrix(), len(t), axis=0), np.repeat(self._t, len(t), axis=0)
        tc = np.clip(t, self.times_us[0], self.times_us[-1])
        R = self._slerp(tc).as_matrix()
        tr = np.column_stack([np.interp(tc, self.times_us, self._t[:, k]) for k in range(3)])
        return R, tr

    def to_dict(self) -> dict:
        return {
            "times_us": self.times_us.tolist(),
            "poses": [
                {"rotvec": Rotation.from_matrix(p.R).as_rotvec().tolist(), "t": p.t.tolist()} for p in self.poses
            ],
        }

    @classmethod
    def from_dict(cls, d) -> "PoseTrajectory":
        try:
            poses = [Pose.from_rotvec(p.get("rotvec", [0, 0, 0]), p["t"]) for p in d["poses"]]
            return cls(d["times_us"], poses)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed trajectory: {exc}") from None


def load_trajectory(path) -> PoseTrajectory:
    try:
        return PoseTrajectory.from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def marker_pixels(markers: MarkerConfig, cam: CameraModel, traj: PoseTrajectory, t_us) -> np.ndarray:
    """Projected marker centers at the given times, shape (T, K, 2); NaN where behind."""
    t_us = np.atleast_1d(np.asarray(t_us, dtype=float))
    R, tr = traj._interp(t_us)
    pts = np.einsum("tij,kj->tki", R, markers.points) + tr[:, None, :]
    uv, _ = project_points(cam, pts.reshape(-1, 3))
    return uv.reshape(len(t_us), len(markers.markers), 2)


def simulate_trajectory(markers: MarkerConfig, cam: CameraModel, traj: PoseTrajectory, duration,
                        sim_camera: SimCamera | None = None, seed=0, *, spot_sigma=TRAJ_SPOT_SIGMA,
                        peak=PEAK_CONTRAST, noise_margin=NOISE_MARGIN):
    """Event stream of the blinking marker board following ``traj``.

    Parameters
    ----------
    cam : CameraModel
        Projection; its width/height are the sensor size unless
        ``sim_camera`` is given.
    duration : float
        Seconds.
    sim_camera : SimCamera, optional
        Event behavior; defaults to the default bias on the camera's sensor.

    Returns
    -------
    stream : EventStream
    truth : PoseTrajectory
        The generating trajectory (ground truth for any time).

    Raises
    ------
    GenerationError
        If a marker projects behind the camera or outside the frame at a
        pulse time; the message names the timestamp.
    """
    if duration <= 0:
        raise ConfigError("duration must be positive")
    markers.check()
    sim = sim_camera if sim_camera is not None else SimCamera(cam.width, cam.height)
    W, H = sim.width, sim.height
    beh = sim.behavior
    rng = np.random.default_rng(seed)
    T = duration * 1e6

    edges, t_on, ks = [], [], []
    for k, m in enumerate(markers.markers):
        e, ton = edge_times(m.freq_hz, m.duty, T, rng)
        edges.append(e)
        t_on.append(np.full(len(e), ton))
        ks.append(np.full(len(e), k))
    edges = np.concatenate(edges)
    t_on = np.concatenate(t_on)
    ks = np.concatenate(ks)
    uv_all = marker_pixels(markers, cam, traj, edges)
    uv = uv_all[np.arange(len(edges)), ks]
    bad = ~np.isfinite(uv).all(axis=1) | (uv[:, 0] < 0) | (uv[:, 0] > W - 1) | (uv[:, 1] < 0) | (uv[:, 1] > H - 1)
    if bad.any():
        i = np.flatnonzero(bad)
        i = i[np.argmin(edges[i])]
        raise GenerationError(f"marker {markers.markers[ks[i]].id} leaves the frame at t={edges[i]:.0f} us")

    radius = int(np.ceil(4 * spot_sigma))
    parts = [pulse_events(edges, uv[:, 0], uv[:, 1], t_on, beh, rng, spot_sigma=spot_sigma, peak=peak,
                          pixels=_window(radius), width=W, height=H)]
    if beh.noise_rate_hz > 0:
        mask = np.zeros((H, W), dtype=bool)
        r = radius + noise_margin
        for cx, cy in np.unique(np.rint(uv).astype(np.int64), axis=0):
            mask[max(cy - r, 0):cy + r + 1, max(cx - r, 0):cx + r + 1] = True
        ny, nx = np.nonzero(mask)
        parts.append(noise_events(nx, ny, 0.0, T, beh.noise_rate_hz, rng))
    return assemble(parts, W, H, T), traj

