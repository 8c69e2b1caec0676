"""Wall-clock benchmarks of the hot paths.

Each suite returns rows ``{suite, stage, size, reps, median_s, p95_s,
throughput}``; ``throughput`` is events/s for the SDTV suite and calls/s
elsewhere. Medians rather than means keep scheduler noise out.
"""
from __future__ import annotations

import time

import numpy as np

from .errors import ConfigError

SUITES = ("velocimetry", "sdtv", "pnp")
MIN_REPS = 100


def _time(fn, reps):
    fn()  # warm-up (numba compilation, caches)
    out = np.empty(reps)
    for i in range(reps):
        t0 = time.perf_counter()
        fn()
        out[i] = time.perf_counter() - t0
    return out


def _row(suite, stage, size, times, work=1.0):
    med = float(np.median(times))
    return {
        "suite": suite, "stage": stage, "size": int(size), "reps": len(times),
        "median_s": med, "p95_s": float(np.percentile(times, 95)),
        "throughput": float(work / med) if med > 0 else float("inf"),
    }


def bench_velocimetry(reps=MIN_REPS, seed=0):
    from .velocimetry import FlowGridConfig, cost_volume, estimate_flow, match_patch, quadratic_refine, stack_and_blur

    cfg = FlowGridConfig()
    rng = np.random.default_rng(seed)
    W, H = cfg.min_image_size()
    frames = [rng.integers(-2, 3, (H, W)).astype(np.float64) for _ in range(cfg.n + 1)]
    curr = stack_and_blur(frames[1:], cfg)
    prev = stack_and_blur(frames[:-1], cfg)
    J, defined = cost_volume(curr, prev, cfg)

    def refine():
        for j in range(cfg.P):
            for i in range(cfg.P):
                if defined[j, i]:
                    quadratic_refine(J[j, i], match_patch(J[j, i]))

    size = cfg.P * cfg.P
    return [
        _row("velocimetry", "stack+blur", size, _time(lambda: stack_and_blur(frames[1:], cfg), reps)),
        _row("velocimetry", "cost grid", size, _time(lambda: cost_volume(curr, prev, cfg), reps)),
        _row("velocimetry", "refine", size, _time(refine, reps)),
        _row("velocimetry", "total", size, _time(lambda: (stack_and_blur(frames[1:], cfg),
                                                          estimate_flow(curr, prev, cfg)), reps)),
    ]


def _sdtv_batch(n, width, height, rng):
    from .events import EVENT_DTYPE

    ev = np.zeros(n, dtype=EVENT_DTYPE)
    ev["x"] = rng.integers(0, width, n)
    ev["y"] = rng.integers(0, height, n)
    ev["t"] = np.sort(rng.integers(0, 10 * n, n))
    ev["p"] = np.where(rng.random(n) < 0.5, 1, -1)
    return ev


def bench_sdtv(reps=MIN_REPS, seed=0, sizes=(200_000, 400_000)):
    from .mocap.sdtv import SDTV

    rng = np.random.default_rng(seed)
    rows = []
    for n in sizes:
        ev = _sdtv_batch(n, 640, 480, rng)
        s = SDTV(640, 480)
        rows.append(_row("sdtv", "update", n, _time(lambda: s.update(ev), reps), work=n))
    return rows


def bench_pnp(reps=MIN_REPS, seed=0):
    from .mocap.camera import CameraModel, project_points
    from .mocap.markers import default_markers
    from .mocap.pnp import solve_pnp
    from .mocap.pose import Pose

    rng = np.random.default_rng(seed)
    cam = CameraModel(fx=1666.6667, fy=1666.6667, cx=319.5, cy=239.5)
    obj = default_markers().points
    pose = Pose.from_rotvec(rng.normal(0, 0.2, 3), [0.05, -0.03, 1.0])
    img, _ = project_points(cam, pose.apply(obj))
    img = img + rng.normal(0, 0.5, img.shape)
    return [
        _row("pnp", "solve (5 markers, no prior)", len(obj), _time(lambda: solve_pnp(obj, img, cam), reps)),
        _row("pnp", "solve (5 markers, prior)", len(obj), _time(lambda: solve_pnp(obj, img, cam, prior=pose), reps)),
    ]


def run_suite(name, reps=MIN_REPS, seed=0):
    if name not in SUITES:
        raise ConfigError(f"unknown bench suite {name!r} (expected one of {', '.join(SUITES)})")
    if reps < MIN_REPS:
        raise ConfigError(f"benchmarks need >= {MIN_REPS} repetitions")
    return {"velocimetry": bench_velocimetry, "sdtv": bench_sdtv, "pnp": bench_pnp}[name](reps, seed)
