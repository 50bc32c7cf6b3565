"""Shapes and ground-truth machinery.

Triangle meshes (OBJ in/out, normalization, area-weighted sampling),
closed-form signed distance fields, Marching Cubes extraction, Chamfer
distance, exact nearest-triangle queries, and the direct mesh-editing
baseline used for comparisons against sculpted networks.

Sign convention, engine-wide: signed distance is POSITIVE outside the
shape and negative inside.  Everything downstream (sampling, tracing,
training targets) assumes this orientation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import defaults

Array = np.ndarray

log = logging.getLogger(__name__)

NORMALIZE_MARGIN = 0.15


# ---------------------------------------------------------------------------
# Triangle meshes


@dataclass
class TriangleMesh:
    vertices: Array                    # (V, 3) float64
    triangles: Array                   # (T, 3) int64, indices into vertices
    normals: Array | None = None       # (V, 3) float64 unit vectors, optional

    def __post_init__(self) -> None:
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(self.vertices)):
            raise ValueError("mesh has non-finite vertices")
        if self.triangles.size and (
            self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)
        ):
            raise ValueError("triangle indices out of range")
        if self.normals is not None:
            self.normals = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
            if self.normals.shape != self.vertices.shape:
                raise ValueError("vertex normal count does not match vertex count")
            lengths = np.linalg.norm(self.normals, axis=1)
            if np.any(np.abs(lengths - 1.0) > 1e-3):
                self.normals = self.normals / np.maximum(lengths, 1e-12)[:, None]

    @property
    def corners(self) -> tuple[Array, Array, Array]:
        v, t = self.vertices, self.triangles
        return v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]

    def triangle_areas(self) -> Array:
        a, b, c = self.corners
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def face_normals(self) -> Array:
        a, b, c = self.corners
        n = np.cross(b - a, c - a)
        return n / np.maximum(np.linalg.norm(n, axis=1), 1e-300)[:, None]

    def bounds(self) -> tuple[Array, Array]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def clone(self) -> "TriangleMesh":
        return TriangleMesh(
            vertices=self.vertices.copy(),
            triangles=self.triangles.copy(),
            normals=None if self.normals is None else self.normals.copy(),
        )


def vertex_normals_from_faces(mesh: TriangleMesh) -> Array:
    """Area-weighted accumulation of face normals onto vertices."""
    a, b, c = mesh.corners
    fn = np.cross(b - a, c - a)  # area-weighted by construction
    acc = np.zeros_like(mesh.vertices)
    for k in range(3):
        np.add.at(acc, mesh.triangles[:, k], fn)
    return acc / np.maximum(np.linalg.norm(acc, axis=1), 1e-300)[:, None]


# ---------------------------------------------------------------------------
# OBJ I/O (ASCII v/vn/f records, 1-based indices, fan triangulation)


def load_obj(path) -> TriangleMesh:
    vertices: list[list[float]] = []
    normals: list[list[float]] = []
    normal_of_vertex: dict[int, int] = {}
    faces: list[tuple[int, int, int]] = []
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.readlines()
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise ValueError(f"cannot read mesh {path}: {exc}") from exc

    def resolve(token: str, count: int) -> int:
        idx = int(token)
        return idx - 1 if idx > 0 else count + idx

    for lineno, line in enumerate(lines, 1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        tag, rest = parts[0], parts[1:]
        try:
            if tag == "v":
                vertices.append([float(x) for x in rest[:3]])
            elif tag == "vn":
                normals.append([float(x) for x in rest[:3]])
            elif tag == "f":
                corner_ids = []
                for token in rest:
                    fields = token.split("/")
                    vi = resolve(fields[0], len(vertices))
                    if len(fields) >= 3 and fields[2]:
                        normal_of_vertex[vi] = resolve(fields[2], len(normals))
                    corner_ids.append(vi)
                if len(corner_ids) < 3:
                    raise ValueError("face with fewer than 3 vertices")
                for k in range(1, len(corner_ids) - 1):
                    faces.append((corner_ids[0], corner_ids[k], corner_ids[k + 1]))
        except (ValueError, IndexError) as exc:
            raise ValueError(f"{path}:{lineno}: unparseable record: {line.strip()!r}") from exc

    if not vertices or not faces:
        raise ValueError(f"{path}: no triangles found")

    vn = None
    if normals and len(normal_of_vertex) == len(vertices):
        vn = np.array([normals[normal_of_vertex[i]] for i in range(len(vertices))])
    return TriangleMesh(vertices=np.array(vertices), triangles=np.array(faces), normals=vn)


def save_obj(mesh: TriangleMesh, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for v in mesh.vertices:
            f.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        if mesh.normals is not None:
            for n in mesh.normals:
                f.write(f"vn {n[0]:.9g} {n[1]:.9g} {n[2]:.9g}\n")
        for t in mesh.triangles:
            if mesh.normals is not None:
                f.write(f"f {t[0]+1}//{t[0]+1} {t[1]+1}//{t[1]+1} {t[2]+1}//{t[2]+1}\n")
            else:
                f.write(f"f {t[0]+1} {t[1]+1} {t[2]+1}\n")


def save_colored_obj(mesh: TriangleMesh, face_values: Array, path) -> None:
    """Export with per-face scalar values as vertex colors (corners duplicated).

    Values are normalized to [0, 1] and mapped through a blue-to-red ramp,
    the usual way to eyeball a per-triangle density estimate.
    """
    vals = np.asarray(face_values, dtype=np.float64)
    if vals.shape != (len(mesh.triangles),):
        raise ValueError("one value per face required")
    lo, hi = vals.min(), vals.max()
    t = np.zeros_like(vals) if hi == lo else (vals - lo) / (hi - lo)
    colors = np.stack([t, 0.2 + 0.6 * (1 - np.abs(2 * t - 1)), 1.0 - t], axis=1)
    with open(path, "w", encoding="utf-8") as f:
        for tri, col in zip(mesh.triangles, colors):
            for vi in tri:
                v = mesh.vertices[vi]
                f.write(
                    f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g} {col[0]:.4f} {col[1]:.4f} {col[2]:.4f}\n"
                )
        for i in range(len(mesh.triangles)):
            f.write(f"f {3*i+1} {3*i+2} {3*i+3}\n")


def normalize_mesh(mesh: TriangleMesh, margin: float = NORMALIZE_MARGIN) -> TriangleMesh:
    """Uniform scale + translation into [-(1-margin), 1-margin]^3.

    The longest axis maps to exactly the full target extent; aspect ratios
    are preserved.  Idempotent.
    """
    if not 0 <= margin < 1:
        raise ValueError("margin must be in [0, 1)")
    lo, hi = mesh.bounds()
    extent = float((hi - lo).max())
    if extent == 0.0:
        raise ValueError("degenerate mesh: zero extent")
    center = (lo + hi) / 2
    scale = 2.0 * (1.0 - margin) / extent
    return TriangleMesh(
        vertices=(mesh.vertices - center) * scale,
        triangles=mesh.triangles.copy(),
        normals=None if mesh.normals is None else mesh.normals.copy(),
    )


def load_and_normalize_mesh(source, margin: float = NORMALIZE_MARGIN) -> TriangleMesh:
    return normalize_mesh(load_obj(source), margin)


# ---------------------------------------------------------------------------
# Surface sampling


def sample_mesh_surface(mesh: TriangleMesh, count: int, seed: int | np.random.Generator = 0) -> tuple[Array, Array]:
    """Uniform-by-area draws: (positions, unit normals), each (count, 3).

    Triangles are chosen proportionally to area, points uniformly inside
    via reflected barycentric coordinates.  Normals interpolate vertex
    normals when present, else use face normals.
    """
    areas = mesh.triangle_areas()
    total = areas.sum()
    if total <= 0:
        raise ValueError("mesh has zero surface area")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    tri = rng.choice(len(areas), size=count, p=areas / total)
    u, v = rng.random(count), rng.random(count)
    flip = u + v > 1
    u[flip], v[flip] = 1 - u[flip], 1 - v[flip]
    w = 1 - u - v
    a, b, c = (corner[tri] for corner in mesh.corners)
    points = w[:, None] * a + u[:, None] * b + v[:, None] * c
    if mesh.normals is not None:
        na = mesh.normals[mesh.triangles[tri, 0]]
        nb = mesh.normals[mesh.triangles[tri, 1]]
        nc = mesh.normals[mesh.triangles[tri, 2]]
        n = w[:, None] * na + u[:, None] * nb + v[:, None] * nc
    else:
        n = mesh.face_normals()[tri]
    n = n / np.maximum(np.linalg.norm(n, axis=1), 1e-300)[:, None]
    return points, n


def sample_sphere_surface(radius: float, count: int, seed: int | np.random.Generator = 0) -> tuple[Array, Array]:
    """Exact uniform draws on the sphere, with outward unit normals."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = rng.normal(size=(count, 3))
    n /= np.maximum(np.linalg.norm(n, axis=1), 1e-300)[:, None]
    return radius * n, n


def sample_torus_surface(
    major: float, minor: float, count: int, seed: int | np.random.Generator = 0
) -> tuple[Array, Array]:
    """Exact uniform-by-area draws on the torus (z-axis symmetric).

    The tube angle is drawn by rejection against the 1 + (r/R) cos(v)
    area density so samples are uniform over the surface, not just in
    parameter space.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    u = rng.uniform(0, 2 * np.pi, count)
    v = np.empty(count)
    todo = np.arange(count)
    ratio = minor / major
    while todo.size:
        cand = rng.uniform(0, 2 * np.pi, todo.size)
        accept = rng.random(todo.size) < (1 + ratio * np.cos(cand)) / (1 + ratio)
        v[todo[accept]] = cand[accept]
        todo = todo[~accept]
    ring = np.stack([np.cos(u), np.sin(u), np.zeros(count)], axis=1)
    normals = np.cos(v)[:, None] * ring
    normals[:, 2] = np.sin(v)
    points = major * ring + minor * normals
    return points, normals


# ---------------------------------------------------------------------------
# Analytic signed distance fields (positive outside)


@dataclass
class SphereSdf:
    radius: float = 0.6

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValueError("sphere radius must be positive")

    def value(self, points: Array) -> Array:
        p = np.asarray(points, dtype=np.float64)
        return np.linalg.norm(p, axis=-1) - self.radius

    def value_and_gradient(self, points: Array) -> tuple[Array, Array]:
        p = np.asarray(points, dtype=np.float64)
        r = np.linalg.norm(p, axis=-1)
        grad = p / np.maximum(r, 1e-300)[..., None]
        return r - self.radius, grad


@dataclass
class TorusSdf:
    major: float = 0.45
    minor: float = 0.25

    def __post_init__(self) -> None:
        if not self.major > self.minor > 0:
            raise ValueError("torus requires major > minor > 0")

    def value(self, points: Array) -> Array:
        p = np.asarray(points, dtype=np.float64)
        ring = np.hypot(p[..., 0], p[..., 1]) - self.major
        return np.hypot(ring, p[..., 2]) - self.minor

    def value_and_gradient(self, points: Array) -> tuple[Array, Array]:
        p = np.asarray(points, dtype=np.float64)
        rho = np.hypot(p[..., 0], p[..., 1])
        ring = rho - self.major
        q = np.hypot(ring, p[..., 2])
        grad = np.empty_like(p)
        radial = ring / (np.maximum(q, 1e-300) * np.maximum(rho, 1e-300))
        grad[..., 0] = p[..., 0] * radial
        grad[..., 1] = p[..., 1] * radial
        grad[..., 2] = p[..., 2] / np.maximum(q, 1e-300)
        return q - self.minor, grad


def analytic_sdf(kind: str, **params) -> SphereSdf | TorusSdf:
    if kind == "sphere":
        return SphereSdf(**params)
    if kind == "torus":
        return TorusSdf(**params)
    raise ValueError(f"unknown analytic shape {kind!r}")


def sample_analytic_surface(sdf, count: int, seed: int | np.random.Generator = 0) -> tuple[Array, Array]:
    if isinstance(sdf, SphereSdf):
        return sample_sphere_surface(sdf.radius, count, seed)
    if isinstance(sdf, TorusSdf):
        return sample_torus_surface(sdf.major, sdf.minor, count, seed)
    raise ValueError(f"no exact surface sampler for {type(sdf).__name__}")


# ---------------------------------------------------------------------------
# Chamfer distance


def chamfer_distance(a: Array, b: Array) -> float:
    """Symmetric mean nearest-neighbor distance between two point clouds."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 3)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("chamfer distance of an empty cloud")
    d_ab, _ = cKDTree(b).query(a, k=1)
    d_ba, _ = cKDTree(a).query(b, k=1)
    return float(d_ab.mean() + d_ba.mean())


# ---------------------------------------------------------------------------
# Marching Cubes


def marching_cubes(field, resolution: int, iso: float = 0.0) -> TriangleMesh:
    """Extract the iso-surface over the domain box as a triangle mesh.

    ``resolution`` is the number of grid samples per axis.  A field with
    no sign change yields an empty mesh (reported, not fatal).  Triangle
    winding and vertex normals are oriented along the field gradient,
    i.e. outward under the engine sign convention.
    """
    from skimage import measure

    if resolution < 8:
        raise ValueError("resolution must be at least 8")
    lo, hi = defaults.DOMAIN_MIN, defaults.DOMAIN_MAX
    axis = np.linspace(lo, hi, resolution)
    grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    values = np.empty(len(grid), dtype=np.float64)
    chunk = 262144
    for start in range(0, len(grid), chunk):
        values[start : start + chunk] = field.value(grid[start : start + chunk].astype(np.float32))
    if not np.all(np.isfinite(values)):
        raise ValueError("field is not finite on the grid")
    volume = values.reshape(resolution, resolution, resolution)
    spacing = (hi - lo) / (resolution - 1)
    try:
        verts, faces, _, _ = measure.marching_cubes(volume, level=iso, spacing=(spacing,) * 3)
    except (ValueError, RuntimeError):
        log.warning("no iso-surface at level %g: returning empty mesh", iso)
        empty = np.zeros((0, 3))
        return TriangleMesh(vertices=empty, triangles=np.zeros((0, 3), dtype=np.int64))
    verts = verts + lo

    _, grads = field.value_and_gradient(verts.astype(np.float32))
    grads = np.asarray(grads, dtype=np.float64)
    normals = grads / np.maximum(np.linalg.norm(grads, axis=1), 1e-12)[:, None]
    mesh = TriangleMesh(vertices=verts, triangles=faces.astype(np.int64), normals=normals)
    # Flip triangles whose geometric normal points against the field gradient.
    a, b, c = mesh.corners
    fn = np.cross(b - a, c - a)
    vn = (normals[mesh.triangles[:, 0]] + normals[mesh.triangles[:, 1]] + normals[mesh.triangles[:, 2]])
    wrong = np.einsum("ij,ij->i", fn, vn) < 0
    mesh.triangles[wrong] = mesh.triangles[wrong][:, [0, 2, 1]]
    return mesh


# ---------------------------------------------------------------------------
# Exact nearest-triangle queries


def closest_point_on_triangles(p: Array, a: Array, b: Array, c: Array) -> Array:
    """Closest point on each triangle (a,b,c) to each point p, elementwise.

    Vectorized region classification over the triangle's Voronoi features
    (vertices, edges, interior).  All arrays are (N, 3).
    """
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    out = np.empty_like(p)
    done = np.zeros(len(p), dtype=bool)

    def settle(mask: Array, value: Array) -> None:
        mask = mask & ~done
        out[mask] = value[mask]
        done[mask] = True

    settle((d1 <= 0) & (d2 <= 0), a)
    settle((d3 >= 0) & (d4 <= d3), b)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_ab = np.where(d1 - d3 != 0, d1 / (d1 - d3), 0.0)
        settle((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + t_ab[:, None] * ab)
        settle((d6 >= 0) & (d5 <= d6), c)
        t_ac = np.where(d2 - d6 != 0, d2 / (d2 - d6), 0.0)
        settle((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + t_ac[:, None] * ac)
        denom_bc = (d4 - d3) + (d5 - d6)
        t_bc = np.where(denom_bc != 0, (d4 - d3) / denom_bc, 0.0)
        settle((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0), b + t_bc[:, None] * (c - b))
        total = va + vb + vc
        total = np.where(total != 0, total, 1.0)
        v = vb / total
        w = vc / total
        settle(np.ones(len(p), dtype=bool), a + v[:, None] * ab + w[:, None] * ac)
    return out


def nearest_triangle(mesh: TriangleMesh, points: Array, candidates: int = 8) -> tuple[Array, Array]:
    """Index of the nearest triangle and the exact distance, per point.

    Candidate triangles come from a centroid tree; when the candidate
    bound cannot certify the winner the search falls back to a ball query
    wide enough to contain every possible minimizer, so results match an
    exhaustive scan (ties broken toward the lowest triangle index).
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    a, b, c = mesh.corners
    tcount = len(mesh.triangles)
    if tcount == 0:
        raise ValueError("mesh has no triangles")
    centroids = (a + b + c) / 3.0
    # Max distance from any centroid to its triangle's far corner.
    reach = np.sqrt(
        np.maximum(
            ((a - centroids) ** 2).sum(1),
            np.maximum(((b - centroids) ** 2).sum(1), ((c - centroids) ** 2).sum(1)),
        )
    ).max()

    tree = cKDTree(centroids)
    k = min(candidates, tcount)
    cd, ci = tree.query(pts, k=k)
    if k == 1:
        cd, ci = cd[:, None], ci[:, None]

    flat_pts = np.repeat(pts, k, axis=0)
    flat_tri = ci.ravel()
    cp = closest_point_on_triangles(flat_pts, a[flat_tri], b[flat_tri], c[flat_tri])
    dist = np.linalg.norm(cp - flat_pts, axis=1).reshape(-1, k)
    order = np.lexsort((ci, dist))  # distance first, lowest index on ties
    best_col = order[:, 0]
    rows = np.arange(len(pts))
    best_idx = ci[rows, best_col]
    best_dist = dist[rows, best_col]

    # Certified when no unexamined triangle can beat the current best:
    # anything outside the kth centroid distance is at least that far
    # minus the triangle reach.
    uncertain = best_dist > cd[:, -1] - reach
    if k == tcount:
        uncertain[:] = False
    for i in np.nonzero(uncertain)[0]:
        ball = tree.query_ball_point(pts[i], best_dist[i] + reach + 1e-12)
        ball = np.sort(np.asarray(ball, dtype=np.int64))
        p_rep = np.broadcast_to(pts[i], (len(ball), 3))
        cpi = closest_point_on_triangles(p_rep, a[ball], b[ball], c[ball])
        di = np.linalg.norm(cpi - p_rep, axis=1)
        j = int(np.argmin(di))  # first minimum = lowest index, ball is sorted
        best_idx[i] = ball[j]
        best_dist[i] = di[j]
    return best_idx, best_dist


# ---------------------------------------------------------------------------
# Direct mesh editing (comparison baseline)


def mesh_edit_baseline(mesh: TriangleMesh, frame, brush) -> TriangleMesh:
    """Displace mesh vertices inside the brush sphere, leave the rest alone.

    Each affected vertex is carried to the tangent plane along its own
    normal ray; the brush height at the in-plane coordinates displaces the
    vertex along the interaction normal.  Vertices whose normal ray runs
    parallel to the plane are skipped.
    """
    normals = mesh.normals if mesh.normals is not None else vertex_normals_from_faces(mesh)
    out = mesh.clone()
    x0, n = np.asarray(frame.point, dtype=np.float64), np.asarray(frame.normal, dtype=np.float64)
    t1, t2 = np.asarray(frame.t1, dtype=np.float64), np.asarray(frame.t2, dtype=np.float64)

    inside = np.linalg.norm(mesh.vertices - x0, axis=1) <= brush.radius
    idx = np.nonzero(inside)[0]
    if idx.size == 0:
        return out
    v = mesh.vertices[idx]
    m = normals[idx]
    m_dot_n = m @ n
    usable = np.abs(m_dot_n) > 1e-8
    if not np.all(usable):
        log.warning("skipped %d vertices with normal rays parallel to the plane", int((~usable).sum()))
    idx, v, m, m_dot_n = idx[usable], v[usable], m[usable], m_dot_n[usable]
    t = ((x0 - v) @ n) / m_dot_n
    on_plane = v + t[:, None] * m
    uv = np.stack([(on_plane - x0) @ t1, (on_plane - x0) @ t2], axis=1)
    height, _ = brush.evaluate(uv)
    out.vertices[idx] = v + np.asarray(height, dtype=np.float64)[:, None] * n
    if out.normals is not None:
        out.normals = vertex_normals_from_faces(out)
    return out


# ---------------------------------------------------------------------------
# Point cloud text I/O (one xyz triple per line)


def save_xyz(points: Array, path) -> None:
    np.savetxt(path, np.asarray(points, dtype=np.float64).reshape(-1, 3), fmt="%.9g")


def load_xyz(path) -> Array:
    pts = np.loadtxt(path, dtype=np.float64, ndmin=2)
    if pts.shape[1] != 3:
        raise ValueError(f"{path}: expected 3 columns, got {pts.shape[1]}")
    return pts
