"""``evpipe`` command line.

Exit codes: 0 success, 1 runtime failure (e.g. singular data), 2 invalid
configuration or arguments, 3 unreadable or malformed input file.
Every subcommand writes only into its ``--output`` directory, each file
atomically.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, EvpipeError, ParseError

SCHEMA_VERSION = 1
EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_PARSE = 0, 1, 2, 3


class InputError(Exception):
    """Input file missing or unreadable (exit 3)."""


def _read_json(path, what):
    if path is None:
        return None
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{what} file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} file {p} is not valid JSON: {exc}") from None


def _out_dir(args) -> Path:
    if args.output is None:
        raise ConfigError("--output directory is required")
    out = Path(args.output)
    if out.exists() and not out.is_dir():
        raise ConfigError(f"--output must be a directory: {out}")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_text(path: Path, text: str) -> None:
    from .events import atomic_write

    atomic_write(path, text.encode())


def _write_json(path: Path, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_table(path: Path, rows, columns, fmt) -> Path:
    if fmt == "json":
        path = path.with_suffix(".json")
        _write_json(path, {"schema_version": SCHEMA_VERSION, "columns": list(columns), "rows": rows})
    else:
        path = path.with_suffix(".csv")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([r[c] for c in columns])
        _write_text(path, buf.getvalue())
    return path


def _load_events(path):
    from .events import read_events

    if path is None:
        raise ConfigError("--input event file is required")
    p = Path(path)
    if not p.exists():
        raise InputError(f"input file not found: {p}")
    return read_events(p)


def _need_input(path, what):
    if path is None:
        raise ConfigError(f"--input {what} is required")
    p = Path(path)
    if not p.exists():
        raise InputError(f"input file not found: {p}")
    return p


# ------------------------------------------------------------------ commands


def cmd_velocimetry(args) -> int:
    from .events import frame_shape, iter_frames
    from .velocimetry import FlowGridConfig, VelocimetryPipeline, flow_records, write_flow

    cfg = FlowGridConfig.from_dict(_read_json(args.config, "grid config") or {})
    cfg.check()
    out = _out_dir(args)
    stream = _load_events(args.input)
    cfg.check(frame_shape(stream.width, stream.height, cfg.bin))
    pipe = VelocimetryPipeline(cfg)
    records, per_frame, speeds, us, vs = [], [], [], [], []
    n_frames = 0
    for f in iter_frames(stream, cfg.dt, cfg.bin):
        n_frames += 1
        field = pipe.push(f)
        if field is None:
            continue
        records.extend(flow_records(field, cfg))
        per_frame.append({"k": int(field.k), "discard_fraction": field.discard_fraction})
        ok = field.valid
        speeds.extend(np.hypot(field.u[ok], field.v[ok]).tolist())
        us.extend(field.u[ok].tolist())
        vs.extend(field.v[ok].tolist())
    ext = "json" if args.format == "json" else "csv"
    write_flow(records, out / f"flow.{ext}", ext)
    med = float(np.median(speeds)) if speeds else None
    summary = {
        "schema_version": SCHEMA_VERSION,
        "n_events": len(stream),
        "n_frames": n_frames,
        "n_fields": len(per_frame),
        "n_records": len(records),
        "frames": per_frame,
        "median_speed_px_per_frame": med,
        "median_speed_mps": None if med is None else med / cfg.px_per_mm / cfg.dt_s / 1000.0,
        "median_u_px_per_frame": float(np.median(us)) if us else None,
        "median_v_px_per_frame": float(np.median(vs)) if vs else None,
        "config": cfg.to_dict(),
    }
    _write_json(out / "summary.json", summary)
    print(json.dumps({k: summary[k] for k in ("n_frames", "n_records", "median_speed_px_per_frame")}))
    return EXIT_OK


def cmd_mocap(args) -> int:
    from .mocap.camera import CameraModel
    from .mocap.markers import MarkerConfig, default_markers
    from .mocap.pipeline import MocapPipeline, default_mocap_camera, pose_noise_analysis, write_poses

    conf = _read_json(args.config, "mocap config") or {}
    mk = _read_json(args.markers, "marker map")
    if mk is None:
        mk = conf.get("markers")
    if isinstance(mk, dict):
        mk = mk.get("markers", [])
    markers = default_markers() if mk is None else MarkerConfig.from_list(mk)
    markers.check()
    cam_d = _read_json(args.camera, "camera") or conf.get("camera")
    cam = default_mocap_camera() if cam_d is None else CameraModel.from_dict(cam_d)
    opts = {k: conf[k] for k in ("rate_hz", "depth", "rel_tol", "max_age", "max_missing") if k in conf}
    out = _out_dir(args)
    stream = _load_events(args.input)
    pipe = MocapPipeline(markers, cam, width=stream.width, height=stream.height, **opts)
    samples = pipe.process(stream)
    write_poses(samples, out / "poses.csv")
    noise = None
    if len(samples) >= 100:
        noise = pose_noise_analysis(samples).to_dict()
    summary = {
        "schema_version": SCHEMA_VERSION,
        "n_ticks": pipe.ticks,
        "n_poses": len(samples),
        "mean_rmse_px": float(np.mean([s.rmse for s in samples])) if samples else None,
        "detection_rate": {str(k): v for k, v in pipe.detection_rates().items()},
        "pose_std": noise,
    }
    _write_json(out / "summary.json", summary)
    print(json.dumps({"n_poses": len(samples), "mean_rmse_px": summary["mean_rmse_px"]}))
    return EXIT_OK


def cmd_synth(args) -> int:
    from .events import validate_stream, write_events
    from .synth.scenes import load_scene_spec, run_scene

    if args.config is None:
        raise ConfigError("--config scene spec is required")
    if not Path(args.config).exists():
        raise ConfigError(f"scene spec not found: {args.config}")
    spec = load_scene_spec(args.config)
    out = _out_dir(args)
    stream, truth = run_scene(spec, args.seed)
    fmt = "csv" if args.format == "csv" and spec.get("events_format") == "csv" else "binary"
    name = "events.csv" if fmt == "csv" else "events.bin"
    write_events(stream, out / name, fmt)
    _write_json(out / "truth.json", truth)
    rep = validate_stream(stream)
    print(json.dumps({"events": len(stream), "valid": rep.valid, "file": name}))
    return EXIT_OK


def cmd_autotune(args) -> int:
    from .autotune.bias import load_bounds
    from .autotune.objective import SimulatedCameraObjective
    from .autotune.pso import pso_optimize
    from .autotune.scene import TuningScene, default_tuning_scene

    conf = _read_json(args.config, "tuning scene") or {}
    if "scene" in conf:
        scene = TuningScene.from_dict(conf["scene"])
    elif "centers" in conf:
        scene = TuningScene.from_dict(conf)
    else:
        scene = default_tuning_scene()
    if args.bounds is not None and not Path(args.bounds).exists():
        raise ConfigError(f"bounds file not found: {args.bounds}")
    bounds = load_bounds(args.bounds)
    iters = args.iters if args.iters is not None else int(conf.get("max_iters", 60))
    particles = args.particles if args.particles is not None else int(conf.get("particles", 100))
    width, height = int(conf.get("width", 640)), int(conf.get("height", 480))
    out = _out_dir(args)
    obj = SimulatedCameraObjective(scene, width, height, eval_seed=args.seed)
    res = pso_optimize(obj, bounds, particles=particles, max_iters=iters, seed=args.seed, target=0.0,
                       x0=bounds.default)
    report = {
        "schema_version": SCHEMA_VERSION,
        **res.report(),
        "converged": res.converged,
        "evaluations": res.evaluations,
        "particles": particles,
        "max_iters": iters,
        "default_cost": float(obj(bounds.default)),
        "bounds": bounds.to_dict(),
        "scene": scene.to_dict(),
    }
    _write_json(out / "report.json", report)
    print(json.dumps({"j_star": report["j_star"], "iterations": report["iterations"]}))
    return EXIT_OK


def cmd_disturbance(args) -> int:
    from .disturbance.ar import DEFAULT_ORDER, fit_channels
    from .disturbance.spectral import SEGMENT, welch_psd
    from .disturbance.wrench_map import CHANNELS, Basis, fit_disturbance_map, read_samples, save_map

    conf = _read_json(args.config, "disturbance config") or {}
    basis = Basis.from_dict(conf.get("basis", {}))
    lam = float(conf.get("lambda", 1e-6))
    order = int(conf.get("ar_order", DEFAULT_ORDER))
    segment = int(conf.get("segment", SEGMENT))
    fs = float(conf.get("fs_hz", 1.0))
    out = _out_dir(args)
    P, F = read_samples(_need_input(args.input, "sample CSV"))
    m = fit_disturbance_map(P, F, basis, lam)
    save_map(m, out / "map.json")
    resid = F - m(P[:, 0], P[:, 1])
    models, psd = None, None
    if len(resid) >= max(10 * order, 2 * segment):
        fitted = fit_channels(resid, order)
        models = {ch: mod.to_dict() for ch, mod in zip(CHANNELS, fitted)}
        psd_rows = []
        for k, ch in enumerate(CHANNELS):
            est = welch_psd(resid[:, k], fs, segment)
            psd_rows += [{"channel": ch, "freq_hz": float(f), "psd": float(p)} for f, p in zip(est.freqs, est.power)]
        psd = _write_table(out / "psd", psd_rows, ("channel", "freq_hz", "psd"), args.format).name
    summary = {
        "schema_version": SCHEMA_VERSION,
        "n_samples": len(P),
        "map_rmse": dict(zip(CHANNELS, map(float, m.rmse))),
        "noise_models": models,
        "psd_file": psd,
    }
    _write_json(out / "summary.json", summary)
    print(json.dumps({"n_samples": len(P), "map_rmse": summary["map_rmse"]}))
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import run_suite

    out = _out_dir(args)
    rows = run_suite(args.suite, args.reps, args.seed)
    cols = ("suite", "stage", "size", "reps", "median_s", "p95_s", "throughput")
    path = _write_table(out / f"bench_{args.suite}", rows, cols, args.format)
    for r in rows:
        print(f"{r['stage']:<32} n={r['size']:<8} median {r['median_s'] * 1e3:9.3f} ms  "
              f"p95 {r['p95_s'] * 1e3:9.3f} ms  {r['throughput']:.3g}/s")
    print(f"wrote {path}")
    return EXIT_OK


# ------------------------------------------------------------------ parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config / scene spec")
    common.add_argument("--input", help="input file (events or samples)")
    common.add_argument("--output", help="output directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="report/table format")

    p = argparse.ArgumentParser(prog="evpipe", description="Event-camera velocimetry and motion capture tools")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("velocimetry", parents=[common], help="flow fields from a smoke event file")
    m = sub.add_parser("mocap", parents=[common], help="poses from a blinking-marker event file")
    m.add_argument("--markers", help="marker map JSON")
    m.add_argument("--camera", help="camera JSON")
    sub.add_parser("synth", parents=[common], help="generate a synthetic scene (LED, smoke or trajectory)")
    a = sub.add_parser("autotune", parents=[common], help="tune camera biases on the simulated camera")
    a.add_argument("--bounds", help="bias bounds JSON")
    a.add_argument("--iters", type=int)
    a.add_argument("--particles", type=int)
    sub.add_parser("disturbance", parents=[common], help="fit the mean-disturbance map and residual noise")
    b = sub.add_parser("bench", parents=[common], help="timing benchmarks")
    b.add_argument("suite", choices=("velocimetry", "sdtv", "pnp"))
    b.add_argument("--reps", type=int, default=100)
    return p


COMMANDS = {
    "velocimetry": cmd_velocimetry,
    "mocap": cmd_mocap,
    "synth": cmd_synth,
    "autotune": cmd_autotune,
    "disturbance": cmd_disturbance,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"evpipe {args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, InputError, OSError) as exc:
        print(f"evpipe {args.command}: input error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except EvpipeError as exc:
        print(f"evpipe {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
