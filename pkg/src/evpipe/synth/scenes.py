"""JSON scene specs for the three generators.

A spec is a dict with ``"kind"`` set to ``"led"``, ``"smoke"`` or
``"trajectory"``; the remaining keys are the generator's inputs. Running a
spec yields the event stream and a ground-truth sidecar dict.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from ..autotune.scene import TuningScene, default_tuning_scene
from ..errors import ConfigError
from ..mocap.camera import CameraModel
from ..mocap.markers import MarkerConfig, default_markers
from .camera import SimCamera
from .flows import FlowFieldSpec
from .led import simulate_led_events
from .smoke import SmokeSceneSpec, simulate_smoke_events, smoke_default_camera
from .trajectory import PoseTrajectory, simulate_trajectory

SIDECAR_VERSION = 1


def load_scene_spec(path) -> dict:
    try:
        spec = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("scene spec must be an object with a 'kind' field")
    return spec


def _sim_camera(d, width, height) -> SimCamera:
    if d is None:
        return SimCamera(width, height)
    d = dict(d)
    d.setdefault("width", width)
    d.setdefault("height", height)
    return SimCamera.from_dict(d)


def run_scene(spec: dict, seed=0):
    """Generate the events of a scene spec.

    Returns
    -------
    stream : EventStream
    sidecar : dict
        Ground truth: flow-sampler parameters, LED placement or sampled poses.
    """
    kind = spec.get("kind")
    if kind == "led":
        scene = TuningScene.from_dict(spec["scene"]) if "scene" in spec else default_tuning_scene()
        cam = _sim_camera(spec.get("camera"), 640, 480)
        duration = float(spec.get("duration", scene.duration))
        stream = simulate_led_events(scene, cam, duration, seed)
        truth = {"scene": scene.to_dict(), "camera": cam.to_dict(), "duration": duration}
    elif kind == "smoke":
        flow = FlowFieldSpec.from_dict(spec.get("flow", {}))
        scene = SmokeSceneSpec.from_dict(spec.get("scene", {}))
        cam = SimCamera.from_dict(spec["camera"]) if "camera" in spec else smoke_default_camera()
        stream, sampler = simulate_smoke_events(flow, scene, cam, seed)
        truth = {"sampler": sampler.to_dict(), "scene": scene.to_dict()}
    elif kind == "trajectory":
        markers = MarkerConfig.from_list(spec["markers"]) if "markers" in spec else default_markers()
        if "camera" in spec:
            cam = CameraModel.from_dict(spec["camera"])
        else:
            from ..mocap.pipeline import default_mocap_camera

            cam = default_mocap_camera()
        sim = _sim_camera(spec.get("sim_camera"), cam.width, cam.height)
        traj = PoseTrajectory.from_dict(spec["trajectory"]) if "trajectory" in spec else None
        if traj is None:
            raise ConfigError("trajectory scene needs a 'trajectory' entry")
        duration = float(spec.get("duration", 0.1))
        stream, _ = simulate_trajectory(markers, cam, traj, duration, sim, seed)
        rate = float(spec.get("truth_rate_hz", 500.0))
        ts = np.arange(1, int(duration * rate) + 1) * (1e6 / rate)
        poses = traj.at(ts) if len(ts) else []
        truth = {
            "trajectory": traj.to_dict(),
            "samples": [
                {"t_us": float(t), "t": p.t.tolist(), "quat_xyzw": Rotation.from_matrix(p.R).as_quat().tolist()}
                for t, p in zip(ts, poses)
            ],
        }
    else:
        raise ConfigError(f"unknown scene kind {kind!r} (expected led, smoke or trajectory)")
    truth = {"schema_version": SIDECAR_VERSION, "kind": kind, "seed": int(seed), **truth}
    return stream, truth
