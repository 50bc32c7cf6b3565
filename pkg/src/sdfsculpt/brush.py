"""Sculpting brushes and interaction sampling.

A brush template is a radial profile on the unit disk with maximum 1 at
the center and vanishing value (and, for ideal templates, gradient) at
the unit circle.  Scaling by radius and intensity gives the working
brush family.  Interaction sampling turns a brush stroke into surface
samples of the desired deformation: uniform tangent-disk draws projected
onto the unaltered surface, lifted along the interaction normal by the
brush height, with normals corrected for both the surface slope and the
brush slope.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import defaults
from .sampler import SurfaceBatch, project_to_level_set, tangent_basis, uniform_disk

Array = np.ndarray


# ---------------------------------------------------------------------------
# Templates


@dataclass(frozen=True)
class BrushTemplate:
    """Radial unit-disk profile b(u) = P(1 - |u|), zero outside the disk.

    ``ideal`` records whether the gradient vanishes on the unit circle,
    i.e. P'(0) = 0; non-ideal templates are allowed but flagged.
    """

    name: str
    profile: callable        # P: [0, 1] -> [0, 1], P(1) = 1
    derivative: callable     # P'
    ideal: bool = True

    def evaluate(self, u: Array) -> tuple[Array, Array]:
        return template_eval(self, u)


def _as_disk_points(u: Array) -> tuple[Array, bool]:
    pts = np.asarray(u, dtype=np.float64)
    single = pts.ndim == 1
    return pts.reshape(-1, 2), single


def template_eval(template: BrushTemplate, u: Array) -> tuple[Array, Array]:
    """Value and 2D gradient of the template, zero outside the unit disk.

    The gradient at the exact center is 0 (radial symmetry).
    """
    pts, single = _as_disk_points(u)
    rho = np.linalg.norm(pts, axis=1)
    inside = rho < 1.0
    value = np.zeros(len(pts))
    grad = np.zeros_like(pts)
    value[inside] = template.profile(1.0 - rho[inside])
    radial = inside & (rho > 0)
    scale = -template.derivative(1.0 - rho[radial]) / rho[radial]
    grad[radial] = scale[:, None] * pts[radial]
    if single:
        return value[0], grad[0]
    return value, grad


def _quintic(x: Array) -> Array:
    return x * x * x * (10.0 + x * (-15.0 + 6.0 * x))


def _quintic_d(x: Array) -> Array:
    return x * x * (30.0 + x * (-60.0 + 30.0 * x))


def _cubic(x: Array) -> Array:
    return x * x * (3.0 - 2.0 * x)


def _cubic_d(x: Array) -> Array:
    return x * (6.0 - 6.0 * x)


def _quartic(x: Array) -> Array:
    return x * x * (2.0 - x * x)


def _quartic_d(x: Array) -> Array:
    return x * (4.0 - 4.0 * x * x)


TEMPLATES: dict[str, BrushTemplate] = {
    "quintic": BrushTemplate("quintic", _quintic, _quintic_d),
    "cubic": BrushTemplate("cubic", _cubic, _cubic_d),
    "quartic": BrushTemplate("quartic", _quartic, _quartic_d),
}


def get_template(name: str) -> BrushTemplate:
    try:
        return TEMPLATES[name]
    except KeyError:
        raise ValueError(f"unknown brush template {name!r}; have {sorted(TEMPLATES)}") from None


def register_template(template: BrushTemplate) -> None:
    TEMPLATES[template.name] = template


# ---------------------------------------------------------------------------
# Scaled brushes


@dataclass(frozen=True)
class Brush:
    """B(u) = intensity * b(u / radius); positive intensity bumps, negative dents."""

    template: BrushTemplate
    radius: float
    intensity: float

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValueError("brush radius must be positive")

    def evaluate(self, u: Array) -> tuple[Array, Array]:
        return brush_eval(self, u)


def brush_eval(brush: Brush, u: Array) -> tuple[Array, Array]:
    """Value and 2D gradient of the scaled brush at tangent-plane offsets."""
    pts, single = _as_disk_points(u)
    value, grad = template_eval(brush.template, pts / brush.radius)
    value = brush.intensity * value
    grad = (brush.intensity / brush.radius) * grad
    if single:
        return value[0], grad[0]
    return value, grad


def make_brush(template_name: str, radius: float, intensity: float) -> Brush:
    return Brush(get_template(template_name), radius, intensity)


# ---------------------------------------------------------------------------
# Interaction frame


@dataclass(frozen=True)
class InteractionFrame:
    """Interaction point with its outward normal and tangent-plane basis."""

    point: Array   # (3,)
    normal: Array  # (3,) unit
    t1: Array      # (3,) unit, t1 x t2 = normal
    t2: Array      # (3,)


def make_frame(field, surface_point: Array, tol: float = defaults.HIT_EPS) -> InteractionFrame:
    """Build the frame at a point on (or within tol of) the surface."""
    point = np.asarray(surface_point, dtype=np.float32).reshape(3)
    f, g = field.value_and_gradient(point[None])
    if abs(float(f[0])) > tol:
        raise ValueError(f"point is off the surface: |f| = {abs(float(f[0])):.3g} > {tol:g}")
    g = np.asarray(g, dtype=np.float64)[0]
    gnorm = np.linalg.norm(g)
    if gnorm < defaults.GRADIENT_FLOOR:
        raise ValueError("degenerate critical point: vanishing gradient")
    n = g / gnorm
    t1, t2 = tangent_basis(n[None])
    return InteractionFrame(point=point.astype(np.float64), normal=n, t1=t1[0], t2=t2[0])


def implicit_graph_gradient(field, points: Array, frame: InteractionFrame) -> Array:
    """Slope of the surface as a height function over the tangent plane.

    Returns -(grad f . t1, grad f . t2) / (grad f . n) at each point; the
    graph representation breaks down when the normal component vanishes.
    """
    pts = np.asarray(points, dtype=np.float32)
    single = pts.ndim == 1
    pts = pts.reshape(-1, 3)
    _, g = field.value_and_gradient(pts)
    g = np.asarray(g, dtype=np.float64)
    perp = g @ frame.normal
    if np.any(np.abs(perp) < defaults.GRADIENT_FLOOR):
        raise ValueError("surface is tangent to the viewing direction: graph undefined")
    out = np.stack([-(g @ frame.t1) / perp, -(g @ frame.t2) / perp], axis=1)
    return out[0] if single else out


def deformed_normal(
    graph_gradient: Array, brush_gradient: Array, frame: InteractionFrame
) -> Array:
    """Unit normal of the displaced graph: the surface slope plus the brush slope."""
    g = np.asarray(graph_gradient, dtype=np.float64)
    h = np.asarray(brush_gradient, dtype=np.float64)
    single = g.ndim == 1
    g, h = g.reshape(-1, 2), h.reshape(-1, 2)
    total = g + h
    n = (
        -total[:, :1] * frame.t1[None]
        - total[:, 1:] * frame.t2[None]
        + frame.normal[None]
    )
    n /= np.linalg.norm(n, axis=1)[:, None]
    return n[0] if single else n


# ---------------------------------------------------------------------------
# Interaction sampling


def sample_interaction(
    field,
    frame: InteractionFrame,
    brush: Brush,
    count: int,
    seed: int | np.random.Generator = 0,
) -> SurfaceBatch:
    """Surface samples of the deformed surface around the interaction point.

    Uniform draws on the tangent disk of the brush radius are projected
    onto the unaltered surface; each projected point is lifted along the
    interaction normal by the brush height at its own tangent-plane
    coordinates, and its normal combines the surface and brush slopes.
    Failed projections are redrawn; a failure rate above one half aborts.
    """
    if count <= 0:
        raise ValueError("sample count must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    t1_32 = frame.t1.astype(np.float32)
    t2_32 = frame.t2.astype(np.float32)
    x0_32 = frame.point.astype(np.float32)

    landed: list[Array] = []
    total_attempts = 0
    total_failures = 0
    need = count
    while need > 0:
        draws = uniform_disk(rng, need, brush.radius).astype(np.float32)
        starts = x0_32 + draws[:, :1] * t1_32 + draws[:, 1:] * t2_32
        projected, ok = project_to_level_set(field, starts)
        if np.any(ok):
            # The graph representation must hold at the landing points.
            _, g = field.value_and_gradient(projected[ok])
            perp = np.asarray(g, dtype=np.float64) @ frame.normal
            ok_idx = np.nonzero(ok)[0][np.abs(perp) >= defaults.GRADIENT_FLOOR]
        else:
            ok_idx = np.array([], dtype=int)
        total_attempts += need
        total_failures += need - len(ok_idx)
        if len(ok_idx):
            landed.append(projected[ok_idx])
            need -= len(ok_idx)
        if total_attempts >= 2 * count and total_failures * 2 > total_attempts:
            raise ValueError("interaction frame unusable: projection failure rate above 50%")

    on_surface = np.concatenate(landed)[:count]
    rel = on_surface.astype(np.float64) - frame.point
    uv = np.stack([rel @ frame.t1, rel @ frame.t2], axis=1)
    height, brush_grad = brush.evaluate(uv)
    graph_grad = implicit_graph_gradient(field, on_surface, frame)
    positions = on_surface + (height[:, None] * frame.normal).astype(np.float32)
    normals = deformed_normal(graph_grad, brush_grad, frame)
    return SurfaceBatch(positions=positions, normals=normals.astype(np.float32))
