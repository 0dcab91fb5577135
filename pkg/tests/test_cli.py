"""Command-line workflows, artifact layout, exit codes."""

import json
import subprocess
import sys

import pytest

SCENE = {
    "channel": 9,
    "noise_sigma": 0.01,
    "seed": 3,
    "obstacles": [{"x": 340.0, "y": 0.0, "material": "metal",
                   "label": "plate"}],
    "trajectory": {"start": [0, 0, 0], "end": [240, 0, 0], "frames": 120},
}

# synthetic captures carry no hardware offsets
PARAMS = {"bias_cm": 0.0, "bias_aoa_rad": 0.0}


def run_cli(*argv, cwd=None):
    return subprocess.run([sys.executable, "-m", "uwb_mapper.cli", *argv],
                          capture_output=True, text=True, cwd=cwd)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One simulate + run round, shared by the artifact checks."""
    root = tmp_path_factory.mktemp("cli")
    (root / "scene.json").write_text(json.dumps(SCENE))
    (root / "params.json").write_text(json.dumps(PARAMS))

    simulate = run_cli("simulate", str(root / "scene.json"),
                       "--out", str(root / "captures.jsonl"),
                       "--truth", str(root / "truth.json"))
    assert simulate.returncode == 0, simulate.stderr
    run = run_cli("run", str(root / "captures.jsonl"),
                  "--params", str(root / "params.json"),
                  "--out-dir", str(root / "out"))
    assert run.returncode == 0, run.stderr
    return {"root": root, "simulate": simulate, "run": run}


class TestSimulate:
    def test_reports_capture_count(self, workspace):
        out = workspace["simulate"].stdout
        assert "wrote 120 captures" in out
        lines = (workspace["root"] / "captures.jsonl").read_text().splitlines()
        assert len(lines) == 120

    def test_truth_sidecar(self, workspace):
        truth = json.loads((workspace["root"] / "truth.json").read_text())
        assert truth["objects"] == [{"x": 340.0, "y": 0.0, "label": "plate"}]

    def test_seed_override_is_deterministic(self, workspace, tmp_path):
        scene = workspace["root"] / "scene.json"
        for name in ("a.jsonl", "b.jsonl"):
            r = run_cli("simulate", str(scene), "--seed", "11",
                        "--out", str(tmp_path / name))
            assert r.returncode == 0
        a = (tmp_path / "a.jsonl").read_bytes()
        assert a == (tmp_path / "b.jsonl").read_bytes()
        assert a != (workspace["root"] / "captures.jsonl").read_bytes()

    def test_csv_output_by_extension(self, workspace, tmp_path):
        r = run_cli("simulate", str(workspace["root"] / "scene.json"),
                    "--out", str(tmp_path / "captures.csv"))
        assert r.returncode == 0
        header = (tmp_path / "captures.csv").read_text().splitlines()[0]
        assert header.startswith("t_ms,ch,rx,fp_idx,pose_x,pose_y,pose_yaw")

    def test_out_of_window_obstacle_warns(self, tmp_path):
        scene = dict(SCENE, obstacles=[{"x": 9000.0, "y": 0.0,
                                        "material": "metal", "label": "moon"}])
        (tmp_path / "scene.json").write_text(json.dumps(scene))
        r = run_cli("simulate", str(tmp_path / "scene.json"),
                    "--out", str(tmp_path / "captures.jsonl"))
        assert r.returncode == 0
        assert "never enters the capture window" in r.stderr
        assert "moon" in r.stderr

    def test_bad_scene_exits_4(self, tmp_path):
        (tmp_path / "scene.json").write_text('{"obstacles": []}')
        r = run_cli("simulate", str(tmp_path / "scene.json"),
                    "--out", str(tmp_path / "captures.jsonl"))
        assert r.returncode == 4
        assert "scene file" in r.stderr


class TestRun:
    def test_artifacts_and_summary_line(self, workspace):
        out_dir = workspace["root"] / "out"
        for name in ("snapshots.jsonl", "peaks.jsonl", "summary.json"):
            assert (out_dir / name).is_file()
        stdout = workspace["run"].stdout
        assert "frames=120" in stdout and "snapshots=" in stdout
        summary = json.loads((out_dir / "summary.json").read_text())
        assert summary["frames"] == 120

    def test_rerun_reproduces_artifacts_byte_for_byte(self, workspace, tmp_path):
        r = run_cli("run", str(workspace["root"] / "captures.jsonl"),
                    "--params", str(workspace["root"] / "params.json"),
                    "--out-dir", str(tmp_path / "out2"))
        assert r.returncode == 0
        for name in ("snapshots.jsonl", "peaks.jsonl"):
            assert (tmp_path / "out2" / name).read_bytes() == \
                (workspace["root"] / "out" / name).read_bytes()

    def test_missing_input_exits_2(self, tmp_path):
        r = run_cli("run", str(tmp_path / "absent.jsonl"))
        assert r.returncode == 2
        assert "missing file" in r.stderr

    def test_empty_input_exits_3(self, tmp_path):
        empty = tmp_path / "captures.jsonl"
        empty.write_text("")
        r = run_cli("run", str(empty), "--out-dir", str(tmp_path / "out"))
        assert r.returncode == 3
        assert "no capture records" in r.stderr

    def test_corrupt_input_exits_3(self, workspace, tmp_path):
        lines = (workspace["root"] / "captures.jsonl").read_text().splitlines()
        bad = tmp_path / "captures.jsonl"
        bad.write_text(lines[0] + "\n{broken\n")
        r = run_cli("run", str(bad), "--out-dir", str(tmp_path / "out"))
        assert r.returncode == 3
        assert "line 2" in r.stderr

    def test_bad_params_exits_4(self, workspace, tmp_path):
        params = tmp_path / "params.json"
        params.write_text("[1, 2]")
        r = run_cli("run", str(workspace["root"] / "captures.jsonl"),
                    "--params", str(params), "--out-dir", str(tmp_path / "out"))
        assert r.returncode == 4
        assert "parameters file" in r.stderr

    def test_usage_error_exits_2(self):
        assert run_cli().returncode == 2
        assert run_cli("run", "x.jsonl", "--channel", "7").returncode == 2


class TestEvaluate:
    def test_clusters_mode_writes_report_set(self, workspace, tmp_path):
        root = workspace["root"]
        r = run_cli("evaluate", str(root / "out" / "snapshots.jsonl"),
                    str(root / "truth.json"), "--out-dir", str(tmp_path / "ev"))
        assert r.returncode == 0, r.stderr
        assert "MAE[cm]" in r.stdout and "counts: tp=" in r.stdout
        for name in ("report.json", "report.txt", "cdf.csv", "cdf.svg"):
            assert (tmp_path / "ev" / name).is_file()
        report = json.loads((tmp_path / "ev" / "report.json").read_text())
        assert report["mode"] == "clusters"
        assert report["counts"]["tp"] >= 1 and report["counts"]["fn"] == 0

    def test_frames_mode_scores_the_peaks_log(self, workspace, tmp_path):
        root = workspace["root"]
        r = run_cli("evaluate", str(root / "out" / "peaks.jsonl"),
                    str(root / "truth.json"), "--mode", "frames",
                    "--out-dir", str(tmp_path / "ev"))
        assert r.returncode == 0, r.stderr
        report = json.loads((tmp_path / "ev" / "report.json").read_text())
        assert report["mode"] == "frames"
        assert report["counts"]["tp"] == 120
        assert report["distance"]["mae_cm"] < 3.0

    def test_empty_snapshots_exit_3(self, workspace, tmp_path):
        empty = tmp_path / "snapshots.jsonl"
        empty.write_text("")
        r = run_cli("evaluate", str(empty),
                    str(workspace["root"] / "truth.json"),
                    "--out-dir", str(tmp_path / "ev"))
        assert r.returncode == 3
        assert "no map snapshots" in r.stderr

    def test_bad_truth_exits_4(self, workspace, tmp_path):
        truth = tmp_path / "truth.json"
        truth.write_text("{nope")
        r = run_cli("evaluate", str(workspace["root"] / "out" / "snapshots.jsonl"),
                    str(truth), "--out-dir", str(tmp_path / "ev"))
        assert r.returncode == 4
        assert "truth file" in r.stderr

    def test_empty_truth_exits_4(self, workspace, tmp_path):
        truth = tmp_path / "truth.json"
        truth.write_text('{"objects": []}')
        r = run_cli("evaluate", str(workspace["root"] / "out" / "snapshots.jsonl"),
                    str(truth), "--out-dir", str(tmp_path / "ev"))
        assert r.returncode == 4


class TestPlot:
    def test_all_stages_and_map(self, workspace, tmp_path):
        root = workspace["root"]
        r = run_cli("plot", str(root / "out" / "snapshots.jsonl"),
                    "--peaks", str(root / "out" / "peaks.jsonl"),
                    "--out-dir", str(tmp_path / "figs"))
        assert r.returncode == 0, r.stderr
        names = ["stage_raw.svg", "stage_filtered.svg", "stage_pdoa.svg",
                 "stage_aoa.svg", "map.svg"]
        for name in names:
            path = tmp_path / "figs" / name
            assert path.is_file() and path.stat().st_size > 1000
        assert "wrote" in r.stdout

    def test_map_only_needs_no_peaks(self, workspace, tmp_path):
        r = run_cli("plot", str(workspace["root"] / "out" / "snapshots.jsonl"),
                    "--stage", "map", "--out-dir", str(tmp_path / "figs"))
        assert r.returncode == 0, r.stderr
        assert (tmp_path / "figs" / "map.svg").is_file()

    def test_stage_without_peaks_exits_4(self, workspace, tmp_path):
        r = run_cli("plot", str(workspace["root"] / "out" / "snapshots.jsonl"),
                    "--stage", "raw", "--out-dir", str(tmp_path / "figs"))
        assert r.returncode == 4
        assert "--peaks" in r.stderr

    def test_empty_snapshots_still_draws_a_map(self, tmp_path):
        empty = tmp_path / "snapshots.jsonl"
        empty.write_text("")
        r = run_cli("plot", str(empty), "--stage", "map",
                    "--out-dir", str(tmp_path / "figs"))
        assert r.returncode == 0, r.stderr
        assert (tmp_path / "figs" / "map.svg").is_file()

    def test_figures_are_deterministic(self, workspace, tmp_path):
        root = workspace["root"]
        blobs = []
        for sub in ("f1", "f2"):
            r = run_cli("plot", str(root / "out" / "snapshots.jsonl"),
                        "--peaks", str(root / "out" / "peaks.jsonl"),
                        "--stage", "map", "--out-dir", str(tmp_path / sub))
            assert r.returncode == 0
            blobs.append((tmp_path / sub / "map.svg").read_bytes())
        assert blobs[0] == blobs[1]
