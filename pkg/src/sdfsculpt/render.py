"""Sphere tracing of the zero-level set.

Rays march by the field value (positive outside, so the value is a safe
step toward the surface, damped a little because trained fields are only
approximately unit-gradient).  Crossings are tightened by bisection so
every reported hit sits within the hit tolerance.  Frames are shaded with
a headlight Lambertian term; picking reuses the same tracer for a single
pixel ray.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from . import defaults

Array = np.ndarray


@dataclass
class Camera:
    position: Array
    target: Array
    up: Array = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    fov_y: float = 0.7853981633974483  # 45 degrees
    width: int = 384
    height: int = 384

    def __post_init__(self) -> None:
        self.position = np.asarray(self.position, dtype=np.float64).reshape(3)
        self.target = np.asarray(self.target, dtype=np.float64).reshape(3)
        self.up = np.asarray(self.up, dtype=np.float64).reshape(3)
        if np.allclose(self.position, self.target):
            raise ValueError("camera position and target coincide")
        if not 0 < self.fov_y < np.pi:
            raise ValueError("vertical field of view must be in (0, pi)")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")

    def basis(self) -> tuple[Array, Array, Array]:
        forward = self.target - self.position
        forward /= np.linalg.norm(forward)
        right = np.cross(forward, self.up)
        rn = np.linalg.norm(right)
        if rn < 1e-12:
            raise ValueError("up vector parallel to the view direction")
        right /= rn
        true_up = np.cross(right, forward)
        return forward, right, true_up

    def rays(self) -> tuple[Array, Array]:
        """Origins and unit directions through every pixel center.

        Image origin top-left, row-major: row i is y, column j is x.
        """
        forward, right, true_up = self.basis()
        tan_half = np.tan(self.fov_y / 2)
        aspect = self.width / self.height
        j = (np.arange(self.width) + 0.5) / self.width
        i = (np.arange(self.height) + 0.5) / self.height
        x = (2 * j - 1) * tan_half * aspect
        y = (1 - 2 * i) * tan_half
        dirs = (
            forward[None, None]
            + x[None, :, None] * right[None, None]
            + y[:, None, None] * true_up[None, None]
        )
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
        origins = np.broadcast_to(self.position, dirs.shape)
        return origins.reshape(-1, 3), dirs.reshape(-1, 3)

    def pixel_ray(self, x: int, y: int) -> tuple[Array, Array]:
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise ValueError(f"pixel ({x}, {y}) outside {self.width}x{self.height}")
        forward, right, true_up = self.basis()
        tan_half = np.tan(self.fov_y / 2)
        aspect = self.width / self.height
        px = (2 * (x + 0.5) / self.width - 1) * tan_half * aspect
        py = (1 - 2 * (y + 0.5) / self.height) * tan_half
        d = forward + px * right + py * true_up
        return self.position.copy(), d / np.linalg.norm(d)


@dataclass
class RayHits:
    """Per-ray trace results in batch form."""

    hit: Array       # (N,) bool
    position: Array  # (N, 3) float32
    distance: Array  # (N,) float64
    normal: Array    # (N, 3) float64, unit where hit
    steps: Array     # (N,) int32


@dataclass
class ShadingConfig:
    base_color: tuple = (0.75, 0.78, 0.85)
    background: tuple = (0.12, 0.12, 0.14)
    ambient: float = 0.15


# Rays enter the scene at this bounding sphere; everything lives in the box.
SCENE_RADIUS = float(np.sqrt(3.0))


def _enter_scene(origins: Array, dirs: Array) -> tuple[Array, Array]:
    """Distance along each ray to the scene bounding sphere (0 if inside).

    Returns (t_enter, alive); rays that miss the sphere entirely are dead.
    """
    oc = origins
    b = np.einsum("ij,ij->i", oc, dirs)
    c = np.einsum("ij,ij->i", oc, oc) - SCENE_RADIUS**2
    disc = b * b - c
    alive = disc >= 0
    t = np.where(alive, -b - np.sqrt(np.maximum(disc, 0)), np.inf)
    t = np.where(c <= 0, 0.0, t)  # already inside
    alive &= t >= 0
    return np.where(alive, t, 0.0), alive


def sphere_trace(
    field,
    origins: Array,
    directions: Array,
    max_steps: int = defaults.MAX_STEPS,
    hit_eps: float = defaults.HIT_EPS,
    max_dist: float = defaults.MAX_DIST,
    step_scale: float = defaults.STEP_SCALE,
) -> RayHits:
    """March each ray by the damped field value until it crosses the surface.

    A sign crossing is refined by bisection between the last outside
    position and the crossing, so hits satisfy |f| <= hit_eps even when a
    step overshoots slightly.
    """
    o = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    d = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
    n = len(o)
    t_enter, alive = _enter_scene(o, d)
    t = t_enter.copy()
    hit = np.zeros(n, dtype=bool)
    steps = np.zeros(n, dtype=np.int32)
    t_prev = t.copy()

    active = np.nonzero(alive & (t <= max_dist))[0]
    for _ in range(max_steps):
        if active.size == 0:
            break
        x = (o[active] + t[active, None] * d[active]).astype(np.float32)
        f = np.asarray(field.value(x), dtype=np.float64)
        steps[active] += 1

        landed = np.abs(f) <= hit_eps
        hit[active[landed]] = True

        crossed = f < -hit_eps
        if np.any(crossed):
            # Bisect [last outside, overshoot] down to the tolerance band.
            idx_c = active[crossed]
            lo_t, hi_t = t_prev[idx_c].copy(), t[idx_c].copy()
            open_c = np.ones(len(idx_c), dtype=bool)
            for _ in range(48):
                if not np.any(open_c):
                    break
                mid = 0.5 * (lo_t + hi_t)
                xm = (o[idx_c] + mid[:, None] * d[idx_c]).astype(np.float32)
                fm = np.asarray(field.value(xm[open_c]), dtype=np.float64)
                sel = np.nonzero(open_c)[0]
                inside_band = np.abs(fm) <= hit_eps
                t[idx_c[sel[inside_band]]] = mid[sel[inside_band]]
                hit[idx_c[sel[inside_band]]] = True
                open_c[sel[inside_band]] = False
                outside = sel[~inside_band][fm[~inside_band] > 0]
                inside = sel[~inside_band][fm[~inside_band] < 0]
                lo_t[outside] = mid[outside]
                hi_t[inside] = mid[inside]
            t[idx_c[open_c]] = hi_t[open_c]

        advance = ~landed & ~crossed
        idx = active[advance]
        t_prev[idx] = t[idx]
        t[idx] += step_scale * f[advance]
        active = idx[t[idx] <= max_dist]

    positions = (o + t[:, None] * d).astype(np.float32)
    normals = np.zeros((n, 3))
    if np.any(hit):
        _, g = field.value_and_gradient(positions[hit])
        g = np.asarray(g, dtype=np.float64)
        normals[hit] = g / np.maximum(np.linalg.norm(g, axis=1), 1e-12)[:, None]
    return RayHits(hit=hit, position=positions, distance=t, normal=normals, steps=steps)


def render_frame(field, camera: Camera, shading: ShadingConfig | None = None) -> Array:
    """Shaded (height, width, 3) uint8 frame; deterministic for fixed inputs."""
    shading = shading or ShadingConfig()
    origins, dirs = camera.rays()
    hits = sphere_trace(field, origins, dirs)
    lambert = np.maximum(0.0, -np.einsum("ij,ij->i", hits.normal, dirs))
    intensity = shading.ambient + (1 - shading.ambient) * lambert
    base = np.asarray(shading.base_color)
    bg = np.asarray(shading.background)
    colors = np.where(hits.hit[:, None], intensity[:, None] * base[None], bg[None])
    img = np.clip(colors * 255.0 + 0.5, 0, 255).astype(np.uint8)
    return img.reshape(camera.height, camera.width, 3)


def pick(field, camera: Camera, pixel: tuple[int, int]) -> Array | None:
    """Surface point under a pixel, or None when the ray misses."""
    origin, direction = camera.pixel_ray(*pixel)
    hits = sphere_trace(field, origin[None], direction[None])
    if not hits.hit[0]:
        return None
    return hits.position[0]


def encode_png(image: Array) -> bytes:
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(image, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> Array:
    from PIL import Image

    with Image.open(io.BytesIO(data)) as im:
        return np.asarray(im.convert("RGB"))
