"""
End-to-end tests of the command line, driven through ``run(argv)``.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from quadflow.cli import run
from quadflow.imgio import FlowField, Image, read_flo, read_image, read_mask, write_flo, write_image
from quadflow.synthgen import parse_scene, render_frame
from tests.helpers import textured

SCENES = Path(__file__).resolve().parent.parent / "scenes"


def _json_lines(text: str):
    return [json.loads(line) for line in text.splitlines() if line.startswith("{")]


# =============================================================================
# synth / interpolate / metrics
# =============================================================================
def test_synth_writes_frames_targets_and_flows(tmp_path):
    out = tmp_path / "synth"
    assert run(["synth", "--scene", str(SCENES / "accelerating_blob.txt"), "--targets", "3", "--out", str(out)]) == 0

    names = {p.name for p in out.iterdir()}
    assert {f"frame_{i}.pnm" for i in (-1, 0, 1, 2)} <= names
    assert {"target_t0.25.pnm", "target_t0.5.pnm", "target_t0.75.pnm"} <= names
    assert {"flow_0to1.flo", "flow_0to-1.flo", "flow_1to0.flo", "flow_1to2.flo"} <= names
    assert read_image(out / "frame_0.pnm").size == (64, 96)


def test_synth_is_deterministic(tmp_path):
    scene = str(SCENES / "textured_discs.txt")
    assert run(["synth", "--scene", scene, "--targets", "1", "--out", str(tmp_path / "a")]) == 0
    assert run(["synth", "--scene", scene, "--targets", "1", "--out", str(tmp_path / "b"), "--threads", "2"]) == 0
    for path in (tmp_path / "a").iterdir():
        assert path.read_bytes() == (tmp_path / "b" / path.name).read_bytes()


def test_interpolate_static_quartet_returns_the_frame(tmp_path):
    frame = Image(textured(32, 48, seed=3))
    inputs = []
    for name in ("fm1", "f0", "f1", "f2"):
        path = tmp_path / f"{name}.pnm"
        write_image(frame, path)
        inputs.append(str(path))

    out = tmp_path / "out"
    code = run(["interpolate", "--in", *inputs, "--t", "0.25,0.5", "--hs-iterations", "20", "--out", str(out)])
    assert code == 0
    expected = read_image(inputs[1]).data
    for tag in ("0.25", "0.5"):
        result = read_image(out / f"out_t{tag}.pnm")
        assert np.max(np.abs(result.data - expected)) <= 1 / 255 + 1e-9


def test_interpolate_reads_flow_templates(tmp_path):
    frame = Image(textured(24, 32, seed=4))
    inputs = []
    for name in ("fm1", "f0", "f1", "f2"):
        path = tmp_path / f"{name}.pnm"
        write_image(frame, path)
        inputs.append(str(path))
    for src, dst in ((0, 1), (0, -1), (1, 0), (1, 2)):
        write_flo(FlowField.zeros(24, 32), tmp_path / f"flow_{src}to{dst}.flo")

    template = str(tmp_path / "flow_{src}to{dst}.flo")
    out = tmp_path / "out"
    assert run(["interpolate", "--in", *inputs, "--flows", template, "--model", "linear", "--out", str(out)]) == 0
    assert (out / "out_t0.5.pnm").exists()


def test_metrics_prints_one_json_line(tmp_path, capsys):
    path = tmp_path / "a.pnm"
    write_image(Image(textured(32, 32, seed=1)), path)
    assert run(["metrics", "--ref", str(path), "--pred", str(path)]) == 0

    lines = _json_lines(capsys.readouterr().out)
    assert len(lines) == 1
    assert lines[0]["psnr"] == 99.0
    assert lines[0]["ie"] == 0.0
    assert "asfp" not in lines[0]


def test_metrics_asfp_needs_base(tmp_path, capsys):
    path = tmp_path / "a.pnm"
    write_image(Image(textured(32, 32, seed=1)), path)
    assert run(["metrics", "--ref", str(path), "--pred", str(path), "--asfp"]) == 2
    assert "--base" in capsys.readouterr().err


# =============================================================================
# flow subcommands
# =============================================================================
def test_flow_reverse_writes_flow_and_holes(tmp_path):
    forward = tmp_path / "f01.flo"
    write_flo(FlowField.constant(12, 16, 3.0, 0.0), forward)
    out = tmp_path / "f10.flo"
    holes = tmp_path / "holes.pgm"
    assert run(["flow", "reverse", "--in", str(forward), "--out", str(out), "--holes", str(holes)]) == 0

    reversed_flow = read_flo(out)
    assert np.all(reversed_flow.u[:, 3:] == -3.0)
    mask = read_mask(holes)
    assert mask.data[:, :3].all()
    assert not mask.data[:, 3:].any()


def test_flow_filter_removes_a_spike(tmp_path):
    data = np.zeros((9, 9, 2))
    data[:, :, 0] = 1.0
    data[4, 4] = (30.0, 0.0)
    source = tmp_path / "spiky.flo"
    write_flo(FlowField(data), source)
    out = tmp_path / "clean.flo"
    assert run(["flow", "filter", "--in", str(source), "--out", str(out), "--tau", "1.5"]) == 0
    assert tuple(read_flo(out).data[4, 4]) == (1.0, 0.0)


def test_flow_estimate_recovers_a_shift(tmp_path):
    base = textured(48, 64, seed=6)
    source = tmp_path / "a.pnm"
    target = tmp_path / "b.pnm"
    write_image(Image(base), source)
    write_image(Image(np.roll(base, 1, axis=1)), target)
    out = tmp_path / "flow.flo"
    assert run(["flow", "estimate", "--source", str(source), "--target", str(target), "--out", str(out)]) == 0

    flow = read_flo(out)
    assert flow.size == (48, 64)
    assert np.median(flow.u[8:-8, 8:-8]) == pytest.approx(1.0, abs=0.3)


# =============================================================================
# eval / upsample
# =============================================================================
def test_eval_ranks_quadratic_ahead_on_accelerating_blob(capsys):
    code = run(["eval", "--scene", str(SCENES / "accelerating_blob.txt"), "--targets", "3"])
    assert code == 0
    captured = capsys.readouterr()
    records = _json_lines(captured.out)
    assert {(r["model"], r["scope"]) for r in records} == {
        ("quadratic", "center"), ("quadratic", "whole"), ("linear", "center"), ("linear", "whole"),
    }
    whole = {r["model"]: r for r in records if r["scope"] == "whole"}
    assert whole["quadratic"]["ie"] < whole["linear"]["ie"]
    assert all(r["flows"] == "analytic" for r in records)
    assert "PSNR" in captured.err


def test_eval_scores_the_ablation_variants(capsys):
    models = "quadratic,no-reversal,no-filter"
    code = run(["eval", "--scene", str(SCENES / "accelerating_blob.txt"), "--targets", "1", "--models", models])
    assert code == 0
    records = _json_lines(capsys.readouterr().out)
    assert [r["model"] for r in records if r["scope"] == "whole"] == models.split(",")
    whole = {r["model"]: r for r in records if r["scope"] == "whole"}
    assert whole["no-reversal"]["ie"] != whole["quadratic"]["ie"]


def test_eval_rejects_an_unknown_variant():
    assert run(["eval", "--scene", str(SCENES / "accelerating_blob.txt"), "--models", "cubic"]) == 2


def test_interpolate_accepts_variant_flags(tmp_path):
    frame = Image(textured(32, 48, seed=3))
    inputs = []
    for name in ("fm1", "f0", "f1", "f2"):
        path = tmp_path / f"{name}.pnm"
        write_image(frame, path)
        inputs.append(str(path))
    out = tmp_path / "out"
    args = ["interpolate", "--in", *inputs, "--reversal", "naive", "--filtering", "off",
            "--hs-iterations", "20", "--out", str(out)]
    assert run(args) == 0
    result = read_image(out / "out_t0.5.pnm")
    assert np.max(np.abs(result.data - frame.data)) <= 1 / 255 + 1e-9
    assert run(["interpolate", "--in", *inputs, "--reversal", "forward", "--out", str(out)]) == 2


def test_upsample_writes_numbered_sequence(tmp_path):
    inputs = []
    for k, level in enumerate((0.2, 0.4, 0.6)):
        path = tmp_path / f"in{k}.pnm"
        write_image(Image(np.full((16, 16), level)), path)
        inputs.append(str(path))
    out = tmp_path / "seq"
    code = run(["upsample", "--in", *inputs, "--factor", "2", "--hs-levels", "1", "--out", str(out)])
    assert code == 0
    assert sorted(p.name for p in out.iterdir()) == [f"frame_{i:04d}.pnm" for i in range(5)]


def test_upsample_rejects_factor_one(tmp_path):
    path = tmp_path / "a.pnm"
    write_image(Image(np.zeros((8, 8))), path)
    assert run(["upsample", "--in", str(path), str(path), "--factor", "1", "--out", str(tmp_path)]) == 2


# =============================================================================
# Failure modes
# =============================================================================
def test_unknown_flag_is_a_usage_error():
    assert run(["synth", "--bogus"]) == 2


def test_time_outside_interval_is_a_usage_error(tmp_path):
    args = ["interpolate", "--in", "a", "b", "c", "d", "--t", "1.0", "--out", str(tmp_path)]
    assert run(args) == 2


def test_missing_input_reports_the_stage(tmp_path, capsys):
    missing = str(tmp_path / "missing.pnm")
    code = run(["interpolate", "--in", missing, missing, missing, missing, "--out", str(tmp_path / "out")])
    assert code == 1
    err = capsys.readouterr().err
    assert "quadflow interpolate: error:" in err
    assert "[read-input]" in err


def test_bad_scene_reports_the_line(tmp_path, capsys):
    scene = tmp_path / "bad.txt"
    scene.write_text("canvas 64 48\nsprite blob 1 2\n", encoding="utf-8")
    assert run(["synth", "--scene", str(scene), "--out", str(tmp_path / "o")]) == 1
    assert "line 2" in capsys.readouterr().err


def test_invalid_environment_setting_is_a_usage_error(monkeypatch):
    monkeypatch.setenv("QUADFLOW_SIGMA", "-1")
    assert run(["synth", "--scene", str(SCENES / "static.txt"), "--out", "o"]) == 2


def test_narrow_splat_is_a_warning_not_an_error(tmp_path, capsys):
    forward = tmp_path / "f.flo"
    write_flo(FlowField.constant(8, 8, 1.0, 0.0), forward)
    out = tmp_path / "r.flo"
    assert run(["flow", "reverse", "--in", str(forward), "--sigma", "0.1", "--out", str(out)]) == 0
    assert np.all(read_flo(out).u[:, 1:] == -1.0)
    assert "landing points as holes" in capsys.readouterr().err


def test_configured_supersample_applies_to_scenes_without_one(tmp_path, monkeypatch):
    text = "canvas 64 48\nsprite disc 32.3 24.6 0 0 0 0 6 5\n"
    scene = tmp_path / "disc.txt"
    scene.write_text(text, encoding="utf-8")
    monkeypatch.setenv("QUADFLOW_SUPERSAMPLE", "1")
    assert run(["synth", "--scene", str(scene), "--targets", "1", "--out", str(tmp_path / "o")]) == 0

    write_image(render_frame(parse_scene(text, supersample=1), 0.0), tmp_path / "s1.pnm")
    write_image(render_frame(parse_scene(text), 0.0), tmp_path / "s4.pnm")
    produced = (tmp_path / "o" / "frame_0.pnm").read_bytes()
    assert produced == (tmp_path / "s1.pnm").read_bytes()
    assert produced != (tmp_path / "s4.pnm").read_bytes()
