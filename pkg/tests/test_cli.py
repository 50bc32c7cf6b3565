"""Command-line interface tests.

Everything runs through click's CliRunner against small pre-trained
checkpoints, so each subcommand's plumbing is exercised without
desk-scale budgets: config resolution (JSON document merged under
flags, flags win), exit codes (0 ok / 1 domain error / 2 usage error),
machine-readable failure lines, artifact writing, and determinism
under a seed.
"""

import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner
from PIL import Image

from sdfsculpt import cli, geometry, mlp
from sdfsculpt.geometry import SphereSdf
from sdfsculpt.training import LossConfig, pretrain


def run(*args):
    return CliRunner().invoke(cli.main, [str(a) for a in args])


def error_line(result) -> dict:
    """The machine-readable JSON failure line (last non-empty stderr line)."""
    lines = [ln for ln in result.stderr.splitlines() if ln.strip()]
    return json.loads(lines[-1])


@pytest.fixture(scope="module")
def blob_checkpoint(tmp_path_factory) -> Path:
    """A small network with a clean roughly-spherical zero set."""
    net = mlp.init_siren([3, 32, 32, 1], seed=11)
    pretrain(net, LossConfig(), iterations=500, seed=0, batch_size=2000)
    path = tmp_path_factory.mktemp("ckpt") / "blob.json"
    mlp.save_checkpoint(net, path)
    return path


@pytest.fixture(scope="module")
def surfaceless_checkpoint(tmp_path_factory) -> Path:
    """A random network whose field never crosses zero inside the box."""
    net = mlp.init_siren([3, 32, 32, 1], seed=5)
    path = tmp_path_factory.mktemp("ckpt") / "nosurface.json"
    mlp.save_checkpoint(net, path)
    return path


# ---------------------------------------------------------------------------
# Group-level behavior


def test_help_lists_every_subcommand():
    result = run("--help")
    assert result.exit_code == 0
    for name in ("train", "edit", "eval", "pdf", "render", "sweep", "serve"):
        assert name in result.stdout


def test_version_flag():
    result = run("--version")
    assert result.exit_code == 0
    assert "sdfsculpt" in result.stdout


def test_unknown_subcommand_is_usage_error():
    assert run("frobnicate").exit_code == 2


# ---------------------------------------------------------------------------
# Config plumbing (exercised through train --print-config: no work runs)


def test_print_config_dumps_resolved_flags_without_running(tmp_path):
    result = run("train", "--print-config", "--iterations", 9,
                 "--out", tmp_path / "never.json")
    assert result.exit_code == 0
    doc = json.loads(result.stdout)
    assert doc["iterations"] == 9
    assert doc["shape"] == "sphere"
    assert not (tmp_path / "never.json").exists()


def test_config_file_fills_flags_left_at_defaults(tmp_path):
    config = tmp_path / "c.json"
    config.write_text(json.dumps({"iterations": 7, "shape": "torus"}))
    result = run("train", "--config", config, "--print-config")
    assert result.exit_code == 0
    doc = json.loads(result.stdout)
    assert doc["iterations"] == 7
    assert doc["shape"] == "torus"


def test_explicit_flags_win_over_config_file(tmp_path):
    config = tmp_path / "c.json"
    config.write_text(json.dumps({"iterations": 7, "shape": "torus"}))
    result = run("train", "--config", config, "--iterations", 9, "--print-config")
    assert result.exit_code == 0
    doc = json.loads(result.stdout)
    assert doc["iterations"] == 9
    assert doc["shape"] == "torus"


def test_config_unknown_keys_are_usage_errors(tmp_path):
    config = tmp_path / "c.json"
    config.write_text(json.dumps({"iterations": 7, "warp_factor": 9}))
    result = run("train", "--config", config, "--print-config")
    assert result.exit_code == 2
    assert "warp_factor" in result.stderr


def test_config_missing_file_is_domain_error():
    result = run("train", "--config", "/no/such/config.json", "--print-config")
    assert result.exit_code == 1
    assert error_line(result)["error"] == "config_not_found"


def test_config_invalid_json_is_domain_error(tmp_path):
    config = tmp_path / "c.json"
    config.write_text("{not json")
    result = run("train", "--config", config, "--print-config")
    assert result.exit_code == 1
    assert error_line(result)["error"] == "config_invalid"


# ---------------------------------------------------------------------------
# train


def test_train_writes_checkpoint_and_telemetry(tmp_path):
    out = tmp_path / "net.json"
    telemetry = tmp_path / "loss.jsonl"
    result = run("train", "--shape", "sphere", "--layout", "3,8,8,1",
                 "--iterations", 3, "--surface-batch", 64, "--free-batch", 64,
                 "--pretrain-iterations", 2, "--telemetry-every", 1,
                 "--out", out, "--telemetry", telemetry)
    assert result.exit_code == 0, result.output
    net = mlp.load_checkpoint(out)
    assert list(net.layout) == [3, 8, 8, 1]
    records = [json.loads(ln) for ln in telemetry.read_text().splitlines()]
    assert len(records) >= 3
    assert all("iteration" in r and "total" in r for r in records)
    assert "checkpoint written" in result.stdout


def test_train_deterministic_under_seed(tmp_path):
    args = ("train", "--layout", "3,8,8,1", "--iterations", 3,
            "--surface-batch", 64, "--free-batch", 64, "--pretrain-iterations", 2)
    for name in ("a.json", "b.json"):
        assert run(*args, "--seed", 4, "--out", tmp_path / name).exit_code == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert run(*args, "--seed", 5, "--out", tmp_path / "c.json").exit_code == 0
    assert (tmp_path / "a.json").read_bytes() != (tmp_path / "c.json").read_bytes()


def test_train_usage_errors(tmp_path):
    assert run("train").exit_code == 2  # --out required
    assert run("train", "--out", tmp_path / "x.json",
               "--layout", "3,x,1").exit_code == 2
    assert run("train", "--out", tmp_path / "x.json",
               "--iterations", -1).exit_code == 2
    assert run("train", "--out", tmp_path / "x.json",
               "--lambda1", -5).exit_code == 2


def test_train_unreadable_shape_is_domain_error(tmp_path):
    result = run("train", "--out", tmp_path / "x.json", "--shape", "/no/such.obj")
    assert result.exit_code == 1
    assert error_line(result)["error"] == "shape_not_found"


# ---------------------------------------------------------------------------
# edit


EDIT_BUDGET = ("--iterations", 2, "--sampler-count", 300)


def test_edit_single_point_stroke(blob_checkpoint, tmp_path):
    out = tmp_path / "edited.json"
    result = run("edit", "--checkpoint", blob_checkpoint, "--out", out,
                 "--point", "0.3,0,0", "--radius", 0.1, "--intensity", 0.04,
                 *EDIT_BUDGET)
    assert result.exit_code == 0, result.output
    mlp.load_checkpoint(out)
    assert out.read_bytes() != Path(blob_checkpoint).read_bytes()
    assert "stroke 0 applied" in result.stdout


def test_edit_replay_is_byte_identical(blob_checkpoint, tmp_path):
    script = tmp_path / "strokes.json"
    script.write_text(json.dumps([
        {"point": [0.3, 0.0, 0.0], "radius": 0.1, "intensity": 0.04},
        {"point": [0.0, 0.3, 0.0], "radius": 0.08, "intensity": -0.03,
         "template": "cubic"},
    ]))
    for name in ("a.json", "b.json"):
        result = run("edit", "--checkpoint", blob_checkpoint,
                     "--out", tmp_path / name, "--strokes", script,
                     "--seed", 3, *EDIT_BUDGET)
        assert result.exit_code == 0, result.output
        assert "stroke 1 applied" in result.stdout
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_edit_naive_arm_differs_from_ours(blob_checkpoint, tmp_path):
    for arm in ("ours", "naive"):
        result = run("edit", "--checkpoint", blob_checkpoint,
                     "--out", tmp_path / f"{arm}.json", "--arm", arm,
                     "--point", "0.3,0,0", *EDIT_BUDGET)
        assert result.exit_code == 0, result.output
    assert (tmp_path / "ours.json").read_bytes() != (tmp_path / "naive.json").read_bytes()


def test_edit_mesh_arm_writes_deformed_obj(tmp_path):
    source = tmp_path / "sphere.obj"
    geometry.save_obj(geometry.marching_cubes(SphereSdf(0.6), 12), source)
    out = tmp_path / "edited.obj"
    result = run("edit", "--arm", "mesh", "--mesh", source, "--out", out,
                 "--point", "0.6,0,0", "--radius", 0.2, "--intensity", 0.1)
    assert result.exit_code == 0, result.output
    edited = geometry.load_obj(out)
    original = geometry.load_and_normalize_mesh(source)
    assert edited.vertices.shape == original.vertices.shape
    assert not np.array_equal(edited.vertices, original.vertices)


@pytest.mark.parametrize("doc", [
    [],
    [{"radius": 0.1, "intensity": 0.04}],
    [{"point": [0, 0, 0], "radius": -0.1, "intensity": 0.04}],
    [{"point": [0, 0, 0], "radius": 0.1, "intensity": 0.04, "template": "spline"}],
])
def test_edit_bad_stroke_scripts_rejected(blob_checkpoint, tmp_path, doc):
    script = tmp_path / "bad.json"
    script.write_text(json.dumps(doc))
    result = run("edit", "--checkpoint", blob_checkpoint,
                 "--out", tmp_path / "x.json", "--strokes", script)
    assert result.exit_code == 1
    assert error_line(result)["error"] == "strokes_invalid"


def test_edit_usage_errors(blob_checkpoint, tmp_path):
    out = tmp_path / "x.json"
    assert run("edit", "--checkpoint", blob_checkpoint, "--out", out).exit_code == 2
    assert run("edit", "--arm", "mesh", "--out", out,
               "--point", "0,0,0").exit_code == 2
    assert run("edit", "--out", out, "--point", "0,0,0").exit_code == 2
    assert run("edit", "--checkpoint", blob_checkpoint, "--out", out,
               "--point", "0,0").exit_code == 2


def test_edit_missing_checkpoint_is_domain_error(tmp_path):
    result = run("edit", "--checkpoint", "/no/such.json",
                 "--out", tmp_path / "x.json", "--point", "0.3,0,0")
    assert result.exit_code == 1
    assert error_line(result)["error"] == "checkpoint_not_found"


def test_edit_surfaceless_checkpoint_is_domain_error(surfaceless_checkpoint, tmp_path):
    result = run("edit", "--checkpoint", surfaceless_checkpoint,
                 "--out", tmp_path / "x.json", "--point", "0.3,0,0", *EDIT_BUDGET)
    assert result.exit_code == 1
    assert error_line(result)["error"] == "surface_not_found"


# ---------------------------------------------------------------------------
# eval


def test_eval_identical_clouds_report_zero_chamfer(tmp_path):
    cloud = tmp_path / "cloud.xyz"
    points, _ = geometry.sample_sphere_surface(0.6, 500, np.random.default_rng(0))
    geometry.save_xyz(points, cloud)
    report = tmp_path / "report.jsonl"
    result = run("eval", "--subject", cloud, "--reference", cloud,
                 "--report", report)
    assert result.exit_code == 0, result.output
    assert "whole-surface Chamfer: 0.000000" in result.stdout
    records = [json.loads(ln) for ln in report.read_text().splitlines()]
    assert records[0]["kind"] == "whole_surface"
    assert records[0]["chamfer"] == 0.0


def test_eval_interaction_area_report(tmp_path):
    cloud = tmp_path / "cloud.xyz"
    points, _ = geometry.sample_sphere_surface(0.6, 800, np.random.default_rng(1))
    geometry.save_xyz(points, cloud)
    script = tmp_path / "centers.json"
    script.write_text(json.dumps([
        {"point": [0.6, 0.0, 0.0], "radius": 0.2, "intensity": 0.06},
    ]))
    report = tmp_path / "report.jsonl"
    result = run("eval", "--subject", cloud, "--reference", cloud,
                 "--interaction", script, "--report", report)
    assert result.exit_code == 0, result.output
    records = [json.loads(ln) for ln in report.read_text().splitlines()]
    kinds = {r["kind"] for r in records}
    assert {"whole_surface", "interaction_area", "interaction_mean",
            "outside_areas", "config"} <= kinds
    by_kind = {r["kind"]: r for r in records}
    assert by_kind["interaction_mean"]["chamfer"] == 0.0
    assert by_kind["outside_areas"]["chamfer"] == 0.0


def test_eval_analytic_shapes_hit_the_sampling_noise_floor():
    result = run("eval", "--subject", "sphere", "--reference", "sphere",
                 "--points", 2000)
    assert result.exit_code == 0, result.output
    value = float(result.stdout.split("Chamfer:")[1].split()[0])
    assert 0.0 < value < 0.1  # two independent 2000-point draws


def test_eval_checkpoint_subject(blob_checkpoint):
    result = run("eval", "--subject", blob_checkpoint, "--reference", "sphere",
                 "--points", 500)
    assert result.exit_code == 0, result.output
    value = float(result.stdout.split("Chamfer:")[1].split()[0])
    assert np.isfinite(value)


def test_eval_usage_and_domain_errors(tmp_path):
    assert run("eval", "--subject", "sphere").exit_code == 2
    assert run("eval", "--subject", "sphere", "--reference", "sphere",
               "--points", 0).exit_code == 2
    result = run("eval", "--subject", "/no/such.xyz", "--reference", "sphere")
    assert result.exit_code == 1
    assert error_line(result)["error"] == "cloud_not_found"


# ---------------------------------------------------------------------------
# pdf


def test_pdf_report_table_and_colored_mesh(blob_checkpoint, tmp_path):
    table = tmp_path / "pdf.txt"
    colored = tmp_path / "pdf.obj"
    report = tmp_path / "pdf.jsonl"
    result = run("pdf", "--checkpoint", blob_checkpoint,
                 "--mesh-resolution", 20, "--chains", 40, "--iterations", 30,
                 "--table", table, "--colored-mesh", colored, "--report", report)
    assert result.exit_code == 0, result.output
    record = json.loads(report.read_text().splitlines()[0])
    assert record["mode"] == "chain"
    assert abs(record["integral"] - 1.0) <= 1e-9
    columns = np.loadtxt(table)
    assert columns.ndim == 2 and columns.shape[1] == 4
    assert "v " in colored.read_text()[:2000]


def test_pdf_naive_mode(blob_checkpoint, tmp_path):
    report = tmp_path / "pdf.jsonl"
    result = run("pdf", "--checkpoint", blob_checkpoint,
                 "--mesh-resolution", 20, "--chains", 30, "--iterations", 20,
                 "--naive", "--report", report)
    assert result.exit_code == 0, result.output
    record = json.loads(report.read_text().splitlines()[0])
    assert record["mode"] == "naive"
    assert abs(record["integral"] - 1.0) <= 1e-9


def test_pdf_usage_and_domain_errors(blob_checkpoint, surfaceless_checkpoint):
    assert run("pdf").exit_code == 2
    assert run("pdf", "--checkpoint", blob_checkpoint, "--chains", 0).exit_code == 2
    result = run("pdf", "--checkpoint", surfaceless_checkpoint,
                 "--mesh-resolution", 16, "--chains", 10, "--iterations", 10)
    assert result.exit_code == 1
    assert error_line(result)["error"] == "surface_not_found"


# ---------------------------------------------------------------------------
# render


def test_render_analytic_sphere_writes_png(tmp_path):
    out = tmp_path / "frame.png"
    result = run("render", "--shape", "sphere", "--width", 40, "--height", 32,
                 "--out", out)
    assert result.exit_code == 0, result.output
    assert out.read_bytes()[:4] == b"\x89PNG"
    assert Image.open(out).size == (40, 32)


def test_render_is_deterministic(tmp_path):
    for name in ("a.png", "b.png"):
        assert run("render", "--shape", "torus", "--width", 32, "--height", 32,
                   "--out", tmp_path / name).exit_code == 0
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()


def test_render_checkpoint(blob_checkpoint, tmp_path):
    out = tmp_path / "frame.png"
    result = run("render", "--checkpoint", blob_checkpoint,
                 "--width", 32, "--height", 32, "--out", out)
    assert result.exit_code == 0, result.output
    assert out.exists()


def test_render_usage_errors(tmp_path):
    out = tmp_path / "x.png"
    assert run("render", "--shape", "sphere").exit_code == 2
    assert run("render", "--out", out).exit_code == 2
    assert run("render", "--shape", "cube", "--out", out).exit_code == 2
    assert run("render", "--shape", "sphere", "--out", out,
               "--distance", 0).exit_code == 2
    assert run("render", "--shape", "sphere", "--out", out,
               "--fov", 0).exit_code == 2


def test_render_missing_checkpoint_is_domain_error(tmp_path):
    result = run("render", "--checkpoint", "/no/such.json", "--out", tmp_path / "x.png")
    assert result.exit_code == 1
    assert error_line(result)["error"] == "checkpoint_not_found"


# ---------------------------------------------------------------------------
# sweep


def test_sweep_default_grid_renders_fifteen_images(blob_checkpoint, tmp_path):
    out_dir = tmp_path / "grid"
    result = run("sweep", "--checkpoint", blob_checkpoint, "--out-dir", out_dir,
                 "--iterations", 1, "--sampler-count", 300,
                 "--width", 48, "--height", 48)
    assert result.exit_code == 0, result.output
    names = {p.name for p in out_dir.glob("*.png")}
    expected = {f"sweep_r{r:.2f}_s{s:.2f}.png"
                for r in (0.05, 0.10, 0.15, 0.20, 0.25)
                for s in (0.03, 0.05, 0.07)}
    assert names == expected
    assert "15 images written" in result.stdout


def test_sweep_custom_grid(blob_checkpoint, tmp_path):
    out_dir = tmp_path / "grid"
    result = run("sweep", "--checkpoint", blob_checkpoint, "--out-dir", out_dir,
                 "--radii", "0.1", "--intensities", "0.03,0.05",
                 "--iterations", 1, "--sampler-count", 300,
                 "--width", 32, "--height", 32)
    assert result.exit_code == 0, result.output
    assert len(list(out_dir.glob("*.png"))) == 2


def test_sweep_usage_errors(blob_checkpoint, tmp_path):
    out_dir = tmp_path / "grid"
    assert run("sweep", "--checkpoint", blob_checkpoint).exit_code == 2
    assert run("sweep", "--out-dir", out_dir).exit_code == 2
    assert run("sweep", "--checkpoint", blob_checkpoint, "--out-dir", out_dir,
               "--radii", "a,b").exit_code == 2


def test_sweep_surfaceless_center_is_domain_error(surfaceless_checkpoint, tmp_path):
    result = run("sweep", "--checkpoint", surfaceless_checkpoint,
                 "--out-dir", tmp_path / "grid", "--width", 32, "--height", 32)
    assert result.exit_code == 1
    assert error_line(result)["error"] == "surface_not_found"


# ---------------------------------------------------------------------------
# serve


def test_serve_print_config_does_not_start_a_server():
    result = run("serve", "--checkpoint", "whatever.json", "--print-config")
    assert result.exit_code == 0
    doc = json.loads(result.stdout)
    assert doc["host"] == "127.0.0.1"
    assert doc["port"] == 8765


def test_serve_requires_checkpoint():
    assert run("serve").exit_code == 2
