"""End-to-end motion capture: events in, poses out.

Every processing tick (500 Hz by default) the SDTV absorbs the tick's events,
pixels are labeled by blink frequency, labels are clustered into one
detection per marker, the particle filters smooth the centroids and PnP turns
the tracked centroids into a pose.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from ..errors import ConfigError, EstimationError, InsufficientDataError
from ..events import EventStream, atomic_write
from .camera import CameraModel
from .identify import DEFAULT_REL_TOL, cluster_detections, detect_markers
from .markers import MarkerConfig
from .pnp import solve_pnp
from .pose import Pose
from .sdtv import SDTV
from .tracking import CentroidTracker

POSE_FIELDS = ("t_us", "x", "y", "z", "qw", "qx", "qy", "qz", "rmse_px", "n_markers")
MIN_NOISE_SAMPLES = 100


def default_mocap_camera() -> CameraModel:
    """VGA event camera behind a 25 mm lens (15 um pixels), no distortion."""
    text = resources.files("evpipe.data").joinpath("gen3_mocap_camera.json").read_text()
    return CameraModel.from_dict(json.loads(text))


@dataclass
class PoseSample:
    t_us: int
    pose: Pose
    rmse: float
    n_markers: int

    def row(self) -> list:
        q = self.pose.quaternion()
        return [int(self.t_us), *map(float, self.pose.t), *map(float, q), float(self.rmse), int(self.n_markers)]


class MocapPipeline:
    """Stateful SDTV -> detect -> cluster -> track -> PnP chain.

    Parameters
    ----------
    rate_hz : float
        Processing cadence.
    depth : int
        SDTV stack depth.
    rel_tol : float
        Frequency tolerance for labeling.
    max_age : float, optional
        Pixels silent for longer than this (us) are not labeled. Defaults to
        two periods of the slowest marker.
    max_missing : int
        A track feeds PnP only if its marker was detected within this many
        ticks.
    """

    def __init__(self, markers: MarkerConfig, cam: CameraModel, *, rate_hz=500.0, depth=32, rel_tol=DEFAULT_REL_TOL,
                 max_age=None, tracker: CentroidTracker | None = None, max_missing=5, width=None, height=None):
        markers.check()
        if rate_hz <= 0:
            raise ConfigError("rate_hz must be positive")
        self.markers = markers
        self.cam = cam
        self.dt_us = 1e6 / rate_hz
        self.rel_tol = rel_tol
        self.max_age = 2e6 / markers.frequencies.min() if max_age is None else float(max_age)
        self.tracker = tracker if tracker is not None else CentroidTracker()
        self.max_missing = int(max_missing)
        self.sdtv = SDTV(width or cam.width, height or cam.height, depth)
        self._last_seen: dict[int, int] = {}
        self.detection_counts = {m.id: 0 for m in markers.markers}
        self._tick = 0
        self._prior: Pose | None = None
        self._points = {m.id: np.asarray(m.xyz, dtype=float) for m in markers.markers}
        self.tracks = {}  # latest TrackEstimate per marker id

    def step(self, events, t_now) -> PoseSample | None:
        """Absorb one tick's time-ordered events and estimate the pose at ``t_now``."""
        self.sdtv.update(events)
        labels = detect_markers(self.sdtv, self.markers, self.rel_tol, t_now=t_now, max_age=self.max_age)
        dets = cluster_detections(labels, int(t_now))
        self._tick += 1
        for d in dets:
            self._last_seen[d.marker_id] = self._tick
            self.detection_counts[d.marker_id] += 1
        est = self.tracker.step(dets, self.dt_us * 1e-6) if (dets or self.tracker.tracks) else {}
        self.tracks = est
        ids = sorted(m for m in est if self._tick - self._last_seen.get(m, -10**9) <= self.max_missing)
        if len(ids) < 4:
            return None
        obj = np.array([self._points[m] for m in ids])
        img = np.array([est[m].centroid for m in ids])
        try:
            res = solve_pnp(obj, img, self.cam, prior=self._prior)
        except EstimationError:
            if self._prior is None:
                return None
            try:
                res = solve_pnp(obj, img, self.cam)
            except EstimationError:
                return None
        self._prior = res.pose
        return PoseSample(int(t_now), res.pose, res.rmse, len(ids))

    @property
    def ticks(self) -> int:
        return self._tick

    def detection_rates(self) -> dict[int, float]:
        """Fraction of processed ticks in which each marker was detected."""
        n = max(self._tick, 1)
        return {mid: c / n for mid, c in self.detection_counts.items()}

    def process(self, stream: EventStream, t_end=None) -> list[PoseSample]:
        """Run over a whole stream; one sample per tick that yields a pose."""
        t = stream.t
        t_end = (int(t[-1]) + 1 if len(t) else 0) if t_end is None else int(t_end)
        n_ticks = int(np.ceil(t_end / self.dt_us))
        bounds = np.searchsorted(t, np.arange(1, n_ticks + 1) * self.dt_us, side="left")
        out = []
        lo = 0
        for k, hi in enumerate(bounds):
            s = self.step(stream.events[lo:hi], (k + 1) * self.dt_us)
            lo = hi
            if s is not None:
                out.append(s)
        return out


def write_poses(samples, path) -> None:
    """Pose CSV: ``t_us, x, y, z, qw, qx, qy, qz, rmse_px, n_markers``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(POSE_FIELDS)
    for s in samples:
        w.writerow([repr(v) if isinstance(v, float) else v for v in s.row()])
    atomic_write(Path(path), buf.getvalue().encode())


def read_poses(path) -> list[PoseSample]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            q = [float(row[k]) for k in ("qx", "qy", "qz", "qw")]
            R = Rotation.from_quat(q).as_matrix()
            t = [float(row[k]) for k in ("x", "y", "z")]
            out.append(PoseSample(int(row["t_us"]), Pose(R, t), float(row["rmse_px"]), int(row["n_markers"])))
    return out


@dataclass(frozen=True)
class PoseNoise:
    std_x: float
    std_y: float
    std_z: float
    std_rot: float  # rad, angle relative to the mean rotation
    n: int

    def to_dict(self) -> dict:
        return {"std_x": self.std_x, "std_y": self.std_y, "std_z": self.std_z, "std_rot": self.std_rot, "n": self.n}


def pose_noise_analysis(poses) -> PoseNoise:
    """Per-axis sample standard deviations of a static capture.

    Accepts Pose or PoseSample items; needs at least 100 of them.
    """
    poses = [getattr(p, "pose", p) for p in poses]
    if len(poses) < MIN_NOISE_SAMPLES:
        raise InsufficientDataError(f"pose noise analysis needs >= {MIN_NOISE_SAMPLES} samples, got {len(poses)}")
    t = np.array([p.t for p in poses])
    rots = Rotation.from_matrix(np.array([p.R for p in poses]))
    mean = rots.mean()
    ang = (mean.inv() * rots).magnitude()
    sd = t.std(axis=0, ddof=1)
    # angles are magnitudes, so the spread is their RMS about zero
    rot = float(np.sqrt(np.sum(ang**2) / (len(ang) - 1)))
    return PoseNoise(float(sd[0]), float(sd[1]), float(sd[2]), rot, len(poses))
