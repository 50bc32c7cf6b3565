"""Batch entry points: training, scripted edits, evaluation, and rendering.

Every subcommand is deterministic under a seed flag, accepts a JSON
config document merged under explicit flags (flags win), and reports
failures as a machine-readable JSON line on stderr.  Exit codes: 0 on
success, 1 on domain errors (missing files, lost surfaces, divergence),
2 on usage errors.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import click
import numpy as np
from click.core import ParameterSource

from . import defaults, geometry, mlp, render, sampler, service, training
from .brush import InteractionFrame, TEMPLATES, make_brush, make_frame
from .sampler import SamplerState
from .training import EditJob, LossConfig, TrainingDiverged

Array = np.ndarray

ANALYTIC_SHAPES = ("sphere", "torus")
DEFAULT_SWEEP_RADII = (0.05, 0.10, 0.15, 0.20, 0.25)
DEFAULT_SWEEP_INTENSITIES = (0.03, 0.05, 0.07)


class CliError(click.ClickException):
    """Domain failure: exit code 1 with a machine-readable error line."""

    exit_code = 1

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code

    def show(self, file=None) -> None:
        line = json.dumps({"error": self.code, "message": self.format_message()})
        click.echo(line, err=True, file=file)


def _domain(code: str, message: str) -> CliError:
    return CliError(code, message)


# ---------------------------------------------------------------------------
# Config plumbing


def resolve_config(ctx: click.Context, skip: tuple[str, ...] = ()) -> dict:
    """Merge the JSON config document under explicit flags (flags win)."""
    params = {k: v for k, v in ctx.params.items() if k not in ("config", "print_config") + skip}
    path = ctx.params.get("config")
    if not path:
        return params
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise _domain("config_not_found", f"config file {path!r} does not exist") from None
    except json.JSONDecodeError as exc:
        raise _domain("config_invalid", f"config file {path!r} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise _domain("config_invalid", f"config file {path!r} must hold a JSON object")
    unknown = sorted(set(doc) - set(params))
    if unknown:
        raise click.UsageError(f"config file {path!r} has unknown keys: {', '.join(unknown)}")
    for key, value in doc.items():
        if ctx.get_parameter_source(key) != ParameterSource.COMMANDLINE:
            params[key] = value
    return params


def maybe_print_config(ctx: click.Context, params: dict) -> bool:
    if not ctx.params.get("print_config"):
        return False
    clean = {k: (list(v) if isinstance(v, tuple) else v) for k, v in params.items()}
    click.echo(json.dumps(clean, indent=2, sort_keys=True, default=str))
    return True


def config_options(fn):
    fn = click.option("--config", type=str, default=None,
                      help="JSON config document merged under explicit flags.")(fn)
    fn = click.option("--print-config", is_flag=True, default=False,
                      help="Dump the resolved config and exit without running.")(fn)
    return fn


def loss_options(fn):
    fn = click.option("--lambda1", type=float, default=1.5e3, show_default=True,
                      help="Surface value weight.")(fn)
    fn = click.option("--lambda2", type=float, default=5.0, show_default=True,
                      help="Surface normal weight.")(fn)
    fn = click.option("--lambda3", type=float, default=2.5, show_default=True,
                      help="Eikonal weight.")(fn)
    fn = click.option("--lambda4", type=float, default=5.0, show_default=True,
                      help="Empty-space weight.")(fn)
    fn = click.option("--alpha", type=float, default=100.0, show_default=True,
                      help="Empty-space sharpness.")(fn)
    return fn


def orbit_options(fn):
    fn = click.option("--azimuth", type=float, default=35.0, show_default=True,
                      help="Camera azimuth, degrees.")(fn)
    fn = click.option("--elevation", type=float, default=25.0, show_default=True,
                      help="Camera elevation, degrees (clamped to ±89).")(fn)
    fn = click.option("--distance", type=float, default=2.2, show_default=True,
                      help="Camera distance from the origin.")(fn)
    fn = click.option("--fov", type=float, default=45.0, show_default=True,
                      help="Vertical field of view, degrees.")(fn)
    fn = click.option("--width", type=int, default=384, show_default=True)(fn)
    fn = click.option("--height", type=int, default=384, show_default=True)(fn)
    return fn


def loss_config_from(params: dict) -> LossConfig:
    try:
        return LossConfig(
            lambda1=params["lambda1"], lambda2=params["lambda2"],
            lambda3=params["lambda3"], lambda4=params["lambda4"],
            alpha=params["alpha"],
        )
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None


def orbit_camera(params: dict) -> render.Camera:
    az = math.radians(params["azimuth"])
    el = math.radians(max(-89.0, min(89.0, params["elevation"])))
    d = params["distance"]
    if d <= 0:
        raise click.UsageError("camera distance must be positive")
    position = d * np.array([math.cos(el) * math.cos(az),
                             math.cos(el) * math.sin(az),
                             math.sin(el)])
    try:
        return render.Camera(
            position=position, target=np.zeros(3),
            fov_y=math.radians(params["fov"]),
            width=params["width"], height=params["height"],
        )
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None


# ---------------------------------------------------------------------------
# Data loading


def load_net(path: str) -> mlp.SirenNetwork:
    try:
        return mlp.load_checkpoint(path)
    except FileNotFoundError:
        raise _domain("checkpoint_not_found", f"checkpoint {path!r} does not exist") from None
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise _domain("checkpoint_invalid", f"cannot read checkpoint {path!r}: {exc}") from None


def surface_source_for(shape: str):
    """A ``source(count, rng) -> (positions, normals)`` draw for a shape name.

    Accepts 'sphere', 'torus', or a path to an OBJ mesh (normalized into
    the domain box on load).
    """
    if shape == "sphere":
        def source(count, rng):
            p, n = geometry.sample_sphere_surface(0.6, count, rng)
            return p.astype(np.float32), n.astype(np.float32)
        return source
    if shape == "torus":
        def source(count, rng):
            p, n = geometry.sample_torus_surface(0.45, 0.25, count, rng)
            return p.astype(np.float32), n.astype(np.float32)
        return source
    try:
        mesh = geometry.load_and_normalize_mesh(shape)
    except FileNotFoundError:
        raise _domain("shape_not_found", f"shape {shape!r} is neither analytic nor a readable OBJ") from None
    except ValueError as exc:
        raise _domain("shape_invalid", f"cannot load mesh {shape!r}: {exc}") from None

    def source(count, rng):
        p, n = geometry.sample_mesh_surface(mesh, count, rng)
        return p.astype(np.float32), n.astype(np.float32)
    return source


def load_point_cloud(spec: str, count: int, seed: int) -> Array:
    """Resolve a point-source spec into a cloud of surface points.

    'sphere'/'torus' sample the analytic shapes; '*.xyz' loads a cloud
    verbatim; '*.obj' samples a normalized mesh; anything else is read
    as a checkpoint whose zero set is sampled by seed-and-project.
    """
    rng = np.random.default_rng(seed)
    if spec == "sphere":
        return geometry.sample_sphere_surface(0.6, count, rng)[0]
    if spec == "torus":
        return geometry.sample_torus_surface(0.45, 0.25, count, rng)[0]
    path = Path(spec)
    if path.suffix == ".xyz":
        try:
            return geometry.load_xyz(path)
        except FileNotFoundError:
            raise _domain("cloud_not_found", f"point cloud {spec!r} does not exist") from None
        except ValueError as exc:
            raise _domain("cloud_invalid", f"cannot read point cloud {spec!r}: {exc}") from None
    if path.suffix == ".obj":
        try:
            mesh = geometry.load_and_normalize_mesh(path)
        except FileNotFoundError:
            raise _domain("cloud_not_found", f"mesh {spec!r} does not exist") from None
        except ValueError as exc:
            raise _domain("cloud_invalid", f"cannot load mesh {spec!r}: {exc}") from None
        return geometry.sample_mesh_surface(mesh, count, rng)[0]
    net = load_net(spec)
    try:
        return sampler.seed_samples(net, count, rng).positions.astype(np.float64)
    except ValueError as exc:
        raise _domain("surface_not_found", f"cannot sample {spec!r}: {exc}") from None


def load_strokes(path: str) -> list[dict]:
    """Read a stroke script: a list of {point, radius, intensity, template}."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise _domain("strokes_not_found", f"stroke script {path!r} does not exist") from None
    except json.JSONDecodeError as exc:
        raise _domain("strokes_invalid", f"stroke script {path!r} is not valid JSON: {exc}") from None
    if isinstance(doc, dict):
        doc = doc.get("strokes", doc)
    if not isinstance(doc, list) or not doc:
        raise _domain("strokes_invalid", "stroke script must hold a non-empty list of strokes")
    strokes = []
    for i, raw in enumerate(doc):
        try:
            point = np.asarray(raw["point"], dtype=np.float64).reshape(3)
            radius = float(raw["radius"])
            intensity = float(raw["intensity"])
            template = str(raw.get("template", "quintic"))
        except (KeyError, TypeError, ValueError) as exc:
            raise _domain("strokes_invalid", f"stroke {i}: {exc}") from None
        if radius <= 0:
            raise _domain("strokes_invalid", f"stroke {i}: radius must be positive")
        if template not in TEMPLATES:
            raise _domain("strokes_invalid", f"stroke {i}: unknown template {template!r}")
        strokes.append({"point": point, "radius": radius, "intensity": intensity,
                        "template": template})
    return strokes


def write_report(path: str | None, records: list[dict]) -> None:
    if not path:
        return
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True, default=str) + "\n")


# ---------------------------------------------------------------------------
# Group


@click.group()
@click.version_option(package_name="sdfsculpt", prog_name="sdfsculpt")
def cli() -> None:
    """Neural signed-distance sculpting pipelines."""


# ---------------------------------------------------------------------------
# train


@cli.command()
@click.option("--shape", type=str, default="sphere", show_default=True,
              help="sphere, torus, or a path to an OBJ mesh.")
@click.option("--out", "out_path", type=str, default=None, help="Checkpoint output path.")
@click.option("--iterations", type=int, default=20000, show_default=True)
@click.option("--surface-batch", type=int, default=5000, show_default=True)
@click.option("--free-batch", type=int, default=5000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--layout", type=str, default="3,128,128,1", show_default=True,
              help="Comma-separated layer widths.")
@click.option("--omega0", type=float, default=defaults.OMEGA0, show_default=True)
@click.option("--weight-norm/--no-weight-norm", default=True, show_default=True)
@click.option("--pretrain-iterations", type=int, default=100, show_default=True)
@click.option("--telemetry-every", type=int, default=500, show_default=True)
@click.option("--telemetry", "telemetry_path", type=str, default=None,
              help="Write loss telemetry as JSON lines.")
@loss_options
@config_options
@click.pass_context
def train(ctx: click.Context, **_kwargs) -> None:
    """Fit a network to a shape and write a checkpoint."""
    params = resolve_config(ctx)
    if maybe_print_config(ctx, params):
        return
    if not params["out_path"]:
        raise click.UsageError("--out is required")
    if params["iterations"] < 0:
        raise click.UsageError("--iterations must be non-negative")
    try:
        layout = [int(tok) for tok in str(params["layout"]).split(",")]
    except ValueError:
        raise click.UsageError(f"bad --layout {params['layout']!r}") from None

    source = surface_source_for(params["shape"])
    loss_config = loss_config_from(params)
    try:
        net = mlp.init_siren(layout, seed=params["seed"], omega0=params["omega0"],
                             weight_norm=params["weight_norm"])
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None

    telemetry: list[dict] = []

    def progress(it: int, breakdown) -> None:
        record = {"iteration": it, **breakdown.as_dict()}
        telemetry.append(record)
        click.echo(f"it {it:6d}  total {breakdown.total:10.4f}  "
                   f"surface {breakdown.surface_value:8.4f}/{breakdown.surface_normal:7.4f}  "
                   f"eikonal {breakdown.eikonal:7.4f}  empty {breakdown.empty_space:7.4f}")

    try:
        net, _history = training.train_initial(
            net, source, loss_config,
            iterations=params["iterations"],
            surface_batch=params["surface_batch"],
            free_batch=params["free_batch"],
            seed=params["seed"],
            pretrain_iterations=params["pretrain_iterations"],
            telemetry_every=params["telemetry_every"],
            on_progress=progress,
        )
    except TrainingDiverged as exc:
        mlp.save_checkpoint(exc.last_good, params["out_path"])
        write_report(params["telemetry_path"], telemetry)
        raise _domain("diverged", f"{exc}; last good checkpoint saved to {params['out_path']!r}")
    mlp.save_checkpoint(net, params["out_path"])
    write_report(params["telemetry_path"], telemetry)
    click.echo(f"checkpoint written to {params['out_path']}")


# ---------------------------------------------------------------------------
# edit


def _project_stroke_point(net, point: Array) -> Array:
    projected, ok = sampler.project_to_level_set(net, point[None].astype(np.float32))
    if not ok[0]:
        raise _domain("surface_not_found", f"cannot project stroke point {point.tolist()} onto the surface")
    return projected[0]


def _mesh_frame(mesh: geometry.TriangleMesh, point: Array) -> InteractionFrame:
    tri, _dist = geometry.nearest_triangle(mesh, point[None])
    a, b, c = mesh.corners
    closest = geometry.closest_point_on_triangles(
        point[None], a[tri], b[tri], c[tri])[0]
    normal = mesh.face_normals()[tri[0]]
    t1, t2 = sampler.tangent_basis(normal[None])
    return InteractionFrame(point=closest, normal=normal, t1=t1[0], t2=t2[0])


@cli.command()
@click.option("--checkpoint", type=str, default=None, help="Input checkpoint (ours/naive arms).")
@click.option("--mesh", "mesh_path", type=str, default=None,
              help="Input OBJ for the mesh baseline arm.")
@click.option("--out", "out_path", type=str, default=None,
              help="Output checkpoint (ours/naive) or OBJ (mesh).")
@click.option("--arm", type=click.Choice(["ours", "naive", "mesh"]), default="ours",
              show_default=True)
@click.option("--strokes", "strokes_path", type=str, default=None,
              help="JSON stroke script; overrides the single-stroke flags.")
@click.option("--point", "point_spec", type=str, default=None,
              help="Single stroke: interaction point 'x,y,z' (projected to the surface).")
@click.option("--radius", type=float, default=0.08, show_default=True)
@click.option("--intensity", type=float, default=0.06, show_default=True)
@click.option("--template", type=click.Choice(sorted(TEMPLATES)), default="quintic",
              show_default=True)
@click.option("--iterations", type=int, default=200, show_default=True,
              help="Fine-tune iterations per stroke.")
@click.option("--sampler-count", type=int, default=20000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@loss_options
@config_options
@click.pass_context
def edit(ctx: click.Context, **_kwargs) -> None:
    """Apply a scripted stroke list to a checkpoint or mesh baseline."""
    params = resolve_config(ctx)
    if maybe_print_config(ctx, params):
        return
    if not params["out_path"]:
        raise click.UsageError("--out is required")
    if params["strokes_path"]:
        strokes = load_strokes(params["strokes_path"])
    elif params["point_spec"]:
        try:
            point = np.asarray([float(t) for t in params["point_spec"].split(",")]).reshape(3)
        except ValueError:
            raise click.UsageError(f"bad --point {params['point_spec']!r}") from None
        strokes = [{"point": point, "radius": params["radius"],
                    "intensity": params["intensity"], "template": params["template"]}]
    else:
        raise click.UsageError("provide --strokes or --point")

    if params["arm"] == "mesh":
        if not params["mesh_path"]:
            raise click.UsageError("the mesh arm requires --mesh")
        try:
            mesh = geometry.load_and_normalize_mesh(params["mesh_path"])
        except FileNotFoundError:
            raise _domain("mesh_not_found", f"mesh {params['mesh_path']!r} does not exist") from None
        except ValueError as exc:
            raise _domain("mesh_invalid", f"cannot load mesh {params['mesh_path']!r}: {exc}") from None
        for stroke in strokes:
            frame = _mesh_frame(mesh, stroke["point"])
            brush = make_brush(stroke["template"], stroke["radius"], stroke["intensity"])
            mesh = geometry.mesh_edit_baseline(mesh, frame, brush)
        geometry.save_obj(mesh, params["out_path"])
        click.echo(f"edited mesh written to {params['out_path']}")
        return

    if not params["checkpoint"]:
        raise click.UsageError("--checkpoint is required for the ours/naive arms")
    net = load_net(params["checkpoint"])
    loss_config = loss_config_from(params)
    try:
        state = sampler.seed_samples(net, params["sampler_count"], params["seed"])
    except ValueError as exc:
        raise _domain("surface_not_found", str(exc)) from None

    for k, stroke in enumerate(strokes):
        surface_point = _project_stroke_point(net, stroke["point"])
        try:
            frame = make_frame(net, surface_point)
        except ValueError as exc:
            raise _domain("surface_not_found", f"stroke {k}: {exc}") from None
        job = EditJob(
            brush=make_brush(stroke["template"], stroke["radius"], stroke["intensity"]),
            frame=frame,
            iterations=params["iterations"],
            use_model_samples=params["arm"] == "ours",
        )
        rng = np.random.default_rng([params["seed"], k])
        try:
            net = training.finetune_edit(net, job, state, loss_config, rng)
        except (ValueError, TrainingDiverged) as exc:
            raise _domain("edit_failed", f"stroke {k}: {exc}") from None
        # Walk the persistent chain onto the edited surface before the
        # next stroke (held walkers re-seed if they were left stranded).
        for _ in range(3):
            state = sampler.resample_step(net, state)
        click.echo(f"stroke {k} applied (radius {stroke['radius']}, intensity {stroke['intensity']})")
    mlp.save_checkpoint(net, params["out_path"])
    click.echo(f"checkpoint written to {params['out_path']}")


# ---------------------------------------------------------------------------
# eval


def _interaction_chamfer(subject: Array, reference: Array, centers: list[dict],
                         outside_factor: float) -> tuple[list[float], float | None]:
    """Chamfer inside each brush sphere, plus one outside-all-spheres value."""
    per_center: list[float] = []
    outside_subject = np.ones(len(subject), dtype=bool)
    outside_reference = np.ones(len(reference), dtype=bool)
    for center in centers:
        point = center["point"]
        radius = center["radius"]
        near_s = np.linalg.norm(subject - point, axis=1) <= radius
        near_r = np.linalg.norm(reference - point, axis=1) <= radius
        outside_subject &= np.linalg.norm(subject - point, axis=1) > outside_factor * radius
        outside_reference &= np.linalg.norm(reference - point, axis=1) > outside_factor * radius
        if near_s.sum() == 0 or near_r.sum() == 0:
            per_center.append(float("nan"))
            continue
        per_center.append(geometry.chamfer_distance(subject[near_s], reference[near_r]))
    outside = None
    if outside_subject.sum() and outside_reference.sum():
        outside = geometry.chamfer_distance(subject[outside_subject], reference[outside_reference])
    return per_center, outside


@cli.command("eval")
@click.option("--subject", type=str, required=False, default=None,
              help="Checkpoint, sphere, torus, OBJ, or XYZ cloud under evaluation.")
@click.option("--reference", type=str, required=False, default=None,
              help="Reference surface in the same formats.")
@click.option("--points", type=int, default=100000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--interaction", "interaction_path", type=str, default=None,
              help="Stroke script giving interaction centers for area-restricted Chamfer.")
@click.option("--outside-factor", type=float, default=2.0, show_default=True,
              help="Outside-area radius multiplier.")
@click.option("--report", "report_path", type=str, default=None,
              help="Write the report as JSON lines.")
@config_options
@click.pass_context
def eval_cmd(ctx: click.Context, **_kwargs) -> None:
    """Chamfer report between two surfaces, whole and per interaction area."""
    params = resolve_config(ctx)
    if maybe_print_config(ctx, params):
        return
    if not params["subject"] or not params["reference"]:
        raise click.UsageError("--subject and --reference are required")
    if params["points"] <= 0:
        raise click.UsageError("--points must be positive")
    subject = load_point_cloud(params["subject"], params["points"], params["seed"])
    reference = load_point_cloud(params["reference"], params["points"], params["seed"] + 1)
    whole = geometry.chamfer_distance(subject, reference)
    records = [{"kind": "whole_surface", "chamfer": whole,
                "subject_points": len(subject), "reference_points": len(reference)}]
    click.echo(f"whole-surface Chamfer: {whole:.6f}  ({len(subject)} vs {len(reference)} points)")

    if params["interaction_path"]:
        centers = load_strokes(params["interaction_path"])
        per_center, outside = _interaction_chamfer(
            subject, reference, centers, params["outside_factor"])
        finite = [c for c in per_center if not math.isnan(c)]
        mean_inside = float(np.mean(finite)) if finite else float("nan")
        for i, value in enumerate(per_center):
            records.append({"kind": "interaction_area", "index": i, "chamfer": value})
            click.echo(f"  area {i}: Chamfer {value:.6f}")
        records.append({"kind": "interaction_mean", "chamfer": mean_inside})
        click.echo(f"interaction-area mean Chamfer: {mean_inside:.6f}")
        if outside is not None:
            records.append({"kind": "outside_areas", "chamfer": outside,
                            "factor": params["outside_factor"]})
            click.echo(f"outside-areas Chamfer (beyond {params['outside_factor']}x radius): {outside:.6f}")
    records.append({"kind": "config", **{k: str(v) for k, v in params.items()}})
    write_report(params["report_path"], records)


# ---------------------------------------------------------------------------
# pdf


@cli.command()
@click.option("--checkpoint", type=str, default=None, required=False)
@click.option("--iterations", type=int, default=2000, show_default=True,
              help="Chain steps (or total draws when --naive).")
@click.option("--chains", type=int, default=1000, show_default=True)
@click.option("--naive", is_flag=True, default=False,
              help="Independent seed-and-project draws at equal sample count.")
@click.option("--mesh-resolution", type=int, default=64, show_default=True,
              help="Marching-cubes grid resolution for the reference triangulation.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--table", "table_path", type=str, default=None,
              help="Write the per-triangle table.")
@click.option("--colored-mesh", "colored_path", type=str, default=None,
              help="Write an OBJ with per-vertex pdf colors.")
@click.option("--report", "report_path", type=str, default=None)
@config_options
@click.pass_context
def pdf(ctx: click.Context, **_kwargs) -> None:
    """Estimate the sampling density over the represented surface."""
    params = resolve_config(ctx)
    if maybe_print_config(ctx, params):
        return
    if not params["checkpoint"]:
        raise click.UsageError("--checkpoint is required")
    if params["iterations"] <= 0 or params["chains"] <= 0:
        raise click.UsageError("--iterations and --chains must be positive")
    net = load_net(params["checkpoint"])
    mesh = geometry.marching_cubes(net, params["mesh_resolution"])
    if len(mesh.triangles) == 0:
        raise _domain("surface_not_found", "the checkpoint's zero set does not cross the grid")
    try:
        if params["naive"]:
            estimate = sampler.estimate_pdf_naive(
                mesh, net, params["iterations"] * params["chains"], seed=params["seed"])
        else:
            estimate = sampler.estimate_pdf(
                mesh, net, chains=params["chains"], iterations=params["iterations"],
                seed=params["seed"])
    except ValueError as exc:
        raise _domain("surface_not_found", str(exc)) from None

    total = float((estimate.pdf * estimate.areas).sum())
    visited = estimate.counts > 0
    mean = float(estimate.pdf[visited].mean()) if visited.any() else float("nan")
    std = float(estimate.pdf[visited].std()) if visited.any() else float("nan")
    click.echo(f"triangles {len(estimate.pdf)} (visited {int(visited.sum())})  "
               f"pdf mean {mean:.6f}  std {std:.6f}  integral {total:.9f}")
    if params["table_path"]:
        estimate.export_table(params["table_path"])
        click.echo(f"table written to {params['table_path']}")
    if params["colored_path"]:
        face_values = np.zeros(len(mesh.triangles))
        face_values[estimate.triangle_indices] = estimate.pdf
        geometry.save_colored_obj(mesh, face_values, params["colored_path"])
        click.echo(f"colored mesh written to {params['colored_path']}")
    write_report(params["report_path"], [{
        "kind": "pdf_summary", "mean": mean, "std": std, "integral": total,
        "triangles": int(len(estimate.pdf)), "visited": int(visited.sum()),
        "mode": "naive" if params["naive"] else "chain",
        "iterations": params["iterations"], "chains": params["chains"],
    }])


# ---------------------------------------------------------------------------
# render


@cli.command("render")
@click.option("--checkpoint", type=str, default=None, required=False)
@click.option("--shape", type=str, default=None,
              help="Render an analytic shape (sphere/torus) instead of a checkpoint.")
@click.option("--out", "out_path", type=str, default=None)
@orbit_options
@config_options
@click.pass_context
def render_cmd(ctx: click.Context, **_kwargs) -> None:
    """Sphere-trace one frame and write a PNG."""
    params = resolve_config(ctx)
    if maybe_print_config(ctx, params):
        return
    if not params["out_path"]:
        raise click.UsageError("--out is required")
    if params["shape"]:
        if params["shape"] not in ANALYTIC_SHAPES:
            raise click.UsageError("--shape must be sphere or torus")
        field = geometry.analytic_sdf(params["shape"])
    elif params["checkpoint"]:
        field = load_net(params["checkpoint"])
    else:
        raise click.UsageError("provide --checkpoint or --shape")
    camera = orbit_camera(params)
    image = render.render_frame(field, camera)
    Path(params["out_path"]).write_bytes(render.encode_png(image))
    click.echo(f"frame written to {params['out_path']}")


# ---------------------------------------------------------------------------
# sweep


@cli.command()
@click.option("--checkpoint", type=str, default=None, required=False)
@click.option("--out-dir", type=str, default=None)
@click.option("--radii", type=str, default=",".join(f"{r:.2f}" for r in DEFAULT_SWEEP_RADII),
              show_default=True, help="Comma-separated brush radii.")
@click.option("--intensities", type=str,
              default=",".join(f"{s:.2f}" for s in DEFAULT_SWEEP_INTENSITIES),
              show_default=True, help="Comma-separated brush intensities.")
@click.option("--template", type=click.Choice(sorted(TEMPLATES)), default="quintic",
              show_default=True)
@click.option("--iterations", type=int, default=200, show_default=True)
@click.option("--sampler-count", type=int, default=20000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@orbit_options
@config_options
@click.pass_context
def sweep(ctx: click.Context, **_kwargs) -> None:
    """Render the radius-by-intensity grid of single-bump edits."""
    params = resolve_config(ctx)
    if maybe_print_config(ctx, params):
        return
    if not params["checkpoint"] or not params["out_dir"]:
        raise click.UsageError("--checkpoint and --out-dir are required")
    try:
        radii = [float(t) for t in str(params["radii"]).split(",") if t]
        intensities = [float(t) for t in str(params["intensities"]).split(",") if t]
    except ValueError:
        raise click.UsageError("bad --radii or --intensities") from None
    if not radii or not intensities:
        raise click.UsageError("--radii and --intensities must be non-empty")

    out_dir = Path(params["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    base = load_net(params["checkpoint"])
    camera = orbit_camera(params)
    picked = render.pick(base, camera, (camera.width // 2, camera.height // 2))
    if picked is None:
        raise _domain("surface_not_found", "center pixel does not hit the surface; adjust the camera")
    frame = make_frame(base, picked, tol=10 * defaults.HIT_EPS)
    loss_config = LossConfig()

    count = 0
    for radius in radii:
        for intensity in intensities:
            net = base.clone()
            try:
                state = sampler.seed_samples(net, params["sampler_count"], params["seed"])
                job = EditJob(
                    brush=make_brush(params["template"], radius, intensity),
                    frame=frame, iterations=params["iterations"],
                )
                net = training.finetune_edit(
                    net, job, state, loss_config, np.random.default_rng([params["seed"], count]))
            except (ValueError, TrainingDiverged) as exc:
                raise _domain("edit_failed", f"r={radius} s={intensity}: {exc}") from None
            image = render.render_frame(net, camera)
            name = out_dir / f"sweep_r{radius:.2f}_s{intensity:.2f}.png"
            name.write_bytes(render.encode_png(image))
            count += 1
            click.echo(f"[{count}/{len(radii) * len(intensities)}] {name}")
    click.echo(f"{count} images written to {out_dir}")


# ---------------------------------------------------------------------------
# serve


@cli.command()
@click.option("--checkpoint", type=str, default=None, required=False)
@click.option("--host", type=str, default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8765, show_default=True)
@click.option("--preview-size", type=int, default=192, show_default=True)
@click.option("--frame-every", type=int, default=25, show_default=True)
@click.option("--stroke-iterations", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@config_options
@click.pass_context
def serve(ctx: click.Context, **_kwargs) -> None:
    """Run the interactive sculpting service."""
    params = resolve_config(ctx)
    if maybe_print_config(ctx, params):
        return
    if not params["checkpoint"]:
        raise click.UsageError("--checkpoint is required")
    config = service.ServiceConfig(
        preview_size=params["preview_size"],
        frame_every=params["frame_every"],
        stroke_iterations=params["stroke_iterations"],
        seed=params["seed"],
    )
    try:
        service.serve(params["checkpoint"], host=params["host"], port=params["port"],
                      config=config)
    except service.SessionError as exc:
        raise _domain(exc.code, str(exc)) from None


main = cli

if __name__ == "__main__":
    main()
