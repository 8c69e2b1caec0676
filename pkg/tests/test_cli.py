import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from evpipe.cli import main
from evpipe.events import EventStream, read_events, validate_stream, write_events
from evpipe.mocap.markers import default_markers
from evpipe.mocap.pipeline import default_mocap_camera, read_poses
from evpipe.mocap.pose import Pose
from evpipe.synth.camera import SimCamera
from evpipe.synth.trajectory import PoseTrajectory, marker_pixels, simulate_trajectory

STATIC = {"times_us": [0], "poses": [{"t": [0.0, 0.0, 1.0]}]}


def run(*argv):
    return main([str(a) for a in argv])


def spec(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


def files(d):
    return {p.name: p.read_bytes() for p in sorted(Path(d).iterdir())}


# ---------------------------------------------------------------- exit codes


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


def test_bad_config_json_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("velocimetry", "--config", bad, "--input", bad, "--output", tmp_path / "o") == 2
    assert run("synth", "--config", tmp_path / "missing.json", "--output", tmp_path / "o") == 2


def test_missing_input_exits_3(tmp_path):
    assert run("velocimetry", "--input", tmp_path / "nope.bin", "--output", tmp_path / "o") == 3
    assert run("disturbance", "--input", tmp_path / "nope.csv", "--output", tmp_path / "o") == 3


def test_malformed_event_file_exits_3(tmp_path, capsys):
    p = tmp_path / "e.bin"
    p.write_bytes(b"XXXX" + bytes(16))
    assert run("mocap", "--input", p, "--output", tmp_path / "o") == 3
    assert "input error" in capsys.readouterr().err


def test_output_must_be_directory(tmp_path):
    f = tmp_path / "file"
    f.write_text("x")
    assert run("autotune", "--iters", 1, "--particles", 2, "--output", f) == 2


def test_i0_below_search_range_exits_2(tmp_path):
    cfg = spec(tmp_path, "grid.json", {"i0": 4, "j0": 8, "u_max": 8, "v_max": 8})
    ev = tmp_path / "e.bin"
    write_events(EventStream.empty(576, 576), ev)
    assert run("velocimetry", "--config", cfg, "--input", ev, "--output", tmp_path / "o") == 2


def test_three_marker_map_exits_2(tmp_path):
    mk = spec(tmp_path, "markers.json", default_markers().to_list()[:3])
    ev = tmp_path / "e.bin"
    write_events(EventStream.empty(640, 480), ev)
    assert run("mocap", "--markers", mk, "--input", ev, "--output", tmp_path / "o") == 2


def test_invalid_bounds_exits_2(tmp_path):
    b = spec(tmp_path, "b.json", {"diff_on": {"min": 1, "max": 0}})
    assert run("autotune", "--bounds", b, "--iters", 1, "--output", tmp_path / "o") == 2


def test_bench_rejects_few_reps_and_unknown_suite(tmp_path):
    assert run("bench", "pnp", "--reps", 10, "--output", tmp_path) == 2
    with pytest.raises(SystemExit) as info:
        main(["bench", "gpu", "--output", str(tmp_path)])
    assert info.value.code == 2


def test_singular_samples_exit_1(tmp_path):
    n = 60
    rows = ["y_m,z_m,fy_N,fz_N,taux_Nm"] + [f"{y},0,0,0,0" for y in np.linspace(-0.1, 0.1, n)]
    (tmp_path / "s.csv").write_text("\n".join(rows) + "\n")
    cfg = spec(tmp_path, "c.json", {"basis": {"kind": "polynomial", "degree": 2}, "lambda": 0.0})
    assert run("disturbance", "--config", cfg, "--input", tmp_path / "s.csv", "--output", tmp_path / "o") == 1


# -------------------------------------------------------------- velocimetry


def test_velocimetry_empty_file(tmp_path):
    ev = tmp_path / "e.bin"
    write_events(EventStream.empty(576, 576), ev)
    assert run("velocimetry", "--input", ev, "--output", tmp_path / "o") == 0
    s = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert s["n_records"] == 0 and s["median_speed_px_per_frame"] is None
    assert (tmp_path / "o" / "flow.csv").read_text().count("\n") == 1


def test_velocimetry_uniform_smoke(tmp_path):
    vy, vz = 1.5, 0.0  # m/s -> 2.4 px per 2 ms frame
    sc = spec(tmp_path, "smoke.json", {"kind": "smoke", "flow": {"kind": "uniform", "vy": vy, "vz": vz},
                                       "scene": {"duration": 0.01}})
    assert run("synth", "--config", sc, "--output", tmp_path / "s", "--seed", 2) == 0
    truth = json.loads((tmp_path / "s" / "truth.json").read_text())
    assert truth["sampler"]["flow"]["vy"] == vy and truth["sampler"]["flow"]["vz"] == vz
    assert run("velocimetry", "--input", tmp_path / "s" / "events.bin", "--output", tmp_path / "v",
               "--format", "json") == 0
    s = json.loads((tmp_path / "v" / "summary.json").read_text())
    assert s["n_fields"] >= 2 and s["schema_version"] == 1
    assert abs(s["median_speed_px_per_frame"] - 2.4) < 0.5
    assert abs(s["median_speed_mps"] - vy) < 0.5 / 1.6
    assert all(0 <= f["discard_fraction"] <= 1 for f in s["frames"])
    flow = json.loads((tmp_path / "v" / "flow.json").read_text())
    assert len(flow["rows"]) == s["n_records"]


# -------------------------------------------------------------------- synth


@pytest.mark.parametrize("scene", [
    {"kind": "led", "duration": 0.02},
    {"kind": "smoke", "scene": {"duration": 0.004, "n_blobs": 200}},
    {"kind": "trajectory", "duration": 0.02, "trajectory": STATIC},
])
def test_synth_is_deterministic(tmp_path, scene):
    sc = spec(tmp_path, "scene.json", scene)
    assert run("synth", "--config", sc, "--output", tmp_path / "a", "--seed", 5) == 0
    assert run("synth", "--config", sc, "--output", tmp_path / "b", "--seed", 5) == 0
    assert files(tmp_path / "a") == files(tmp_path / "b")
    assert validate_stream(read_events(tmp_path / "a" / "events.bin")).valid


def test_synth_led_reference_frequencies(tmp_path):
    sc = spec(tmp_path, "led.json", {"kind": "led", "duration": 0.05})
    assert run("synth", "--config", sc, "--output", tmp_path / "o") == 0
    truth = json.loads((tmp_path / "o" / "truth.json").read_text())
    assert truth["scene"]["frequencies"] == [1730.0, 1980.0, 2290.0, 2610.0, 2860.0]
    s = read_events(tmp_path / "o" / "events.bin")
    assert len(s) > 0 and validate_stream(s).valid


def test_synth_csv_events(tmp_path):
    sc = spec(tmp_path, "led.json", {"kind": "led", "duration": 0.01, "events_format": "csv"})
    assert run("synth", "--config", sc, "--output", tmp_path / "o", "--format", "csv") == 0
    assert (tmp_path / "o" / "events.csv").exists()


def test_synth_invalid_spec_exits_2(tmp_path):
    sc = spec(tmp_path, "s.json", {"kind": "smoke", "flow": {"kind": "uniform", "vy": 9.0}})
    assert run("synth", "--config", sc, "--output", tmp_path / "o") == 2
    sc = spec(tmp_path, "t.json", {"kind": "tornado"})
    assert run("synth", "--config", sc, "--output", tmp_path / "o") == 2


def test_only_output_dir_is_written(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    sc = spec(tmp_path, "led.json", {"kind": "led", "duration": 0.01})
    before = set(tmp_path.iterdir())
    assert run("synth", "--config", sc, "--output", tmp_path / "out") == 0
    assert set(tmp_path.iterdir()) - before == {tmp_path / "out"}
    assert sorted(p.name for p in (tmp_path / "out").iterdir()) == ["events.bin", "truth.json"]


# -------------------------------------------------------------------- mocap


def test_mocap_static_pose_noise(tmp_path):
    sc = spec(tmp_path, "traj.json", {"kind": "trajectory", "duration": 0.22, "trajectory": STATIC})
    assert run("synth", "--config", sc, "--output", tmp_path / "s", "--seed", 1) == 0
    assert run("mocap", "--input", tmp_path / "s" / "events.bin", "--output", tmp_path / "m") == 0
    s = json.loads((tmp_path / "m" / "summary.json").read_text())
    assert s["n_ticks"] == 110 and s["n_poses"] >= 100
    noise = s["pose_std"]
    assert np.isfinite(noise["std_z"]) and noise["std_z"] >= noise["std_x"]
    assert min(s["detection_rate"].values()) > 0.9
    poses = read_poses(tmp_path / "m" / "poses.csv")
    assert len(poses) == s["n_poses"]
    assert np.linalg.norm(poses[-1].pose.t - [0, 0, 1]) < 5e-3


def test_mocap_occluded_marker(tmp_path):
    markers = default_markers()
    cam = default_mocap_camera()
    traj = PoseTrajectory.static(Pose(np.eye(3), [0.0, 0.0, 1.0]))
    stream, _ = simulate_trajectory(markers, cam, traj, 0.06, SimCamera.ideal(640, 480), seed=3)
    hidden = markers.markers[2].id
    cx, cy = marker_pixels(markers, cam, traj, [0.0])[0, 2]
    keep = (np.abs(stream.x - cx) > 12) | (np.abs(stream.y - cy) > 12)
    ev = tmp_path / "occluded.bin"
    write_events(EventStream(640, 480, stream.events[keep]), ev)
    assert run("mocap", "--input", ev, "--output", tmp_path / "m") == 0
    s = json.loads((tmp_path / "m" / "summary.json").read_text())
    assert s["n_poses"] > 0
    assert s["detection_rate"][str(hidden)] == 0.0
    assert all(v > 0.5 for k, v in s["detection_rate"].items() if k != str(hidden))
    poses = read_poses(tmp_path / "m" / "poses.csv")
    assert all(p.n_markers == 4 for p in poses)


def test_mocap_custom_marker_and_camera_files(tmp_path):
    mk = spec(tmp_path, "m.json", {"markers": default_markers().to_list()})
    cam = spec(tmp_path, "c.json", default_mocap_camera().to_dict())
    ev = tmp_path / "e.bin"
    write_events(EventStream.empty(640, 480), ev)
    assert run("mocap", "--markers", mk, "--camera", cam, "--input", ev, "--output", tmp_path / "o") == 0
    s = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert s["n_poses"] == 0 and s["mean_rmse_px"] is None


# ----------------------------------------------------------------- autotune


def test_autotune_single_iteration(tmp_path):
    assert run("autotune", "--iters", 1, "--particles", 5, "--output", tmp_path / "o") == 0
    r = json.loads((tmp_path / "o" / "report.json").read_text())
    assert len(r["trace"]) == 1 and r["iterations"] == 1
    assert set(r) >= {"theta_star", "j_star", "iterations", "trace", "seed", "schema_version"}


def test_autotune_converges_and_repeats(tmp_path):
    for d in ("a", "b"):
        assert run("autotune", "--seed", 3, "--output", tmp_path / d) == 0
    assert files(tmp_path / "a") == files(tmp_path / "b")
    r = json.loads((tmp_path / "a" / "report.json").read_text())
    assert r["j_star"] == 0.0 and r["converged"] and r["iterations"] <= 60
    assert r["default_cost"] > 0


def test_autotune_nonconvergence_is_not_failure(tmp_path):
    # a blinding-fast marker makes J = 0 unreachable within the bounds
    sc = spec(tmp_path, "scene.json", {"centers": [[100, 100]], "frequencies": [1e6], "duration": 0.001,
                                       "duties": [0.5]})
    assert run("autotune", "--config", sc, "--iters", 2, "--particles", 4, "--output", tmp_path / "o") == 0
    r = json.loads((tmp_path / "o" / "report.json").read_text())
    assert r["j_star"] > 0 and not r["converged"]


# -------------------------------------------------------------- disturbance


def test_disturbance_map_and_noise(tmp_path):
    from evpipe.disturbance.wrench_map import synthetic_samples, write_samples

    P, F = synthetic_samples(4096, seed=1, noise=0.05)
    write_samples(P, F, tmp_path / "s.csv")
    cfg = spec(tmp_path, "c.json", {"ar_order": 4, "segment": 512, "fs_hz": 100.0})
    for d in ("a", "b"):
        assert run("disturbance", "--config", cfg, "--input", tmp_path / "s.csv", "--output", tmp_path / d,
                   "--format", "json") == 0
    assert files(tmp_path / "a") == files(tmp_path / "b")
    s = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert set(s["noise_models"]) == {"fy_N", "fz_N", "taux_Nm"}
    assert all(v["order"] == 4 for v in s["noise_models"].values())
    assert all(v < 0.06 for v in s["map_rmse"].values())
    m = json.loads((tmp_path / "a" / "map.json").read_text())
    assert set(m) >= {"basis", "coeffs", "lambda"}
    assert (tmp_path / "a" / "psd.json").exists()


def test_disturbance_few_samples_skips_noise(tmp_path):
    from evpipe.disturbance.wrench_map import synthetic_samples, write_samples

    P, F = synthetic_samples(100, seed=2)
    write_samples(P, F, tmp_path / "s.csv")
    assert run("disturbance", "--input", tmp_path / "s.csv", "--output", tmp_path / "o") == 0
    s = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert s["noise_models"] is None and s["psd_file"] is None


# -------------------------------------------------------------------- bench


def test_bench_pnp_schema(tmp_path):
    assert run("bench", "pnp", "--output", tmp_path) == 0
    header = (tmp_path / "bench_pnp.csv").read_text().splitlines()[0]
    assert header == "suite,stage,size,reps,median_s,p95_s,throughput"
    assert run("bench", "pnp", "--output", tmp_path, "--format", "json") == 0
    rows = json.loads((tmp_path / "bench_pnp.json").read_text())["rows"]
    assert rows and all(r["size"] == 5 and r["reps"] >= 100 and r["median_s"] > 0 for r in rows)


def test_bench_sdtv_linearity(tmp_path):
    assert run("bench", "sdtv", "--output", tmp_path, "--format", "json") == 0
    rows = json.loads((tmp_path / "bench_sdtv.json").read_text())["rows"]
    assert [r["size"] for r in rows][:2] == [rows[0]["size"], 2 * rows[0]["size"]]
    ratio = rows[0]["throughput"] / rows[1]["throughput"]
    assert 1 / 2.5 <= ratio <= 2.5
    assert all(r["p95_s"] >= r["median_s"] for r in rows)


def test_bench_velocimetry_stages(tmp_path):
    assert run("bench", "velocimetry", "--output", tmp_path, "--format", "json") == 0
    rows = json.loads((tmp_path / "bench_velocimetry.json").read_text())["rows"]
    assert {"stack+blur", "cost grid", "refine"} <= {r["stage"] for r in rows}
    assert all(r["reps"] >= 100 for r in rows)


# ---------------------------------------------------------------- entry point


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "evpipe.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "velocimetry" in out.stdout
    out = subprocess.run([sys.executable, "-m", "evpipe.cli", "mocap", "--input", str(tmp_path / "x"),
                          "--output", str(tmp_path / "o")], capture_output=True, text=True)
    assert out.returncode == 3
