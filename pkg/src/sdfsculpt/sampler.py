"""Zero-level-set sampling.

Newton projection onto the surface, the tangent-disk Markov chain that
keeps a population of surface samples alive across edits, discard
filtering around an interaction point, and the per-triangle pdf estimate
used to audit how uniformly the chain covers the surface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import defaults, geometry

Array = np.ndarray


@dataclass
class SurfaceBatch:
    """Surface samples in batch form: positions with unit normals."""

    positions: Array  # (N, 3) float32
    normals: Array    # (N, 3) float32

    def __post_init__(self) -> None:
        self.positions = np.asarray(self.positions, dtype=np.float32).reshape(-1, 3)
        self.normals = np.asarray(self.normals, dtype=np.float32).reshape(-1, 3)
        if self.positions.shape != self.normals.shape:
            raise ValueError("positions and normals must pair up")

    def __len__(self) -> int:
        return len(self.positions)


@dataclass
class SamplerState:
    """A population of Markov-chain walkers living on the zero-level set."""

    positions: Array          # (N, 3) float32
    normals: Array            # (N, 3) float32
    held: Array               # (N,) int32, consecutive failed reprojections
    disk_radius: float
    rng: np.random.Generator

    def __post_init__(self) -> None:
        if self.disk_radius <= 0:
            raise ValueError("disk radius must be positive")

    def __len__(self) -> int:
        return len(self.positions)

    def batch(self) -> SurfaceBatch:
        return SurfaceBatch(self.positions, self.normals)


# ---------------------------------------------------------------------------
# Newton projection


def project_to_level_set(
    field,
    points: Array,
    tol: float = defaults.PROJECTION_TOL,
    max_iter: int = defaults.PROJECTION_MAX_ITER,
) -> tuple[Array, Array]:
    """Project points onto the zero-level set of ``field``.

    Iterates x <- x - f(x) grad f(x) / |grad f(x)|^2 until |f| <= tol.
    Returns (projected points, success mask); failures keep whatever
    position the iteration reached.  A vanishing gradient marks the point
    failed immediately (singular step), and a converged iterate that
    escapes the domain box counts as a failure too: the field is only
    trained inside the box, so far-field zero crossings are extrapolation
    artifacts, not surface.
    """
    x = np.array(points, dtype=np.float32).reshape(-1, 3)
    n = len(x)
    ok = np.zeros(n, dtype=bool)
    dead = np.zeros(n, dtype=bool)
    active = np.arange(n)
    for it in range(max_iter + 1):
        f, g = field.value_and_gradient(x[active])
        f = np.asarray(f, dtype=np.float32)
        g = np.asarray(g, dtype=np.float32)
        converged = np.abs(f) <= tol
        ok[active[converged]] = True
        if it == max_iter:
            break
        gg = np.einsum("ij,ij->i", g, g)
        singular = (gg < defaults.GRADIENT_FLOOR**2) & ~converged
        dead[active[singular]] = True
        move = ~converged & ~singular
        idx = active[move]
        x[idx] -= (f[move] / gg[move])[:, None] * g[move]
        active = active[move]
        if active.size == 0:
            break
    inside = np.all((x >= defaults.DOMAIN_MIN) & (x <= defaults.DOMAIN_MAX), axis=1)
    return x, ok & ~dead & inside


def tangent_basis(normals: Array) -> tuple[Array, Array]:
    """Branch-stable orthonormal bases completing unit normals.

    Picks the coordinate axis least aligned with each normal (ties broken
    x before y before z), then t1 = normalize(axis x n), t2 = n x t1, so
    t1 x t2 = n (right-handed).
    """
    n = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
    axis_pick = np.argmin(np.abs(n), axis=1)
    e = np.zeros_like(n)
    e[np.arange(len(n)), axis_pick] = 1.0
    t1 = np.cross(e, n)
    t1 /= np.maximum(np.linalg.norm(t1, axis=1), 1e-300)[:, None]
    t2 = np.cross(n, t1)
    return t1, t2


# ---------------------------------------------------------------------------
# Chain construction and stepping


def _normals_at(field, points: Array) -> Array:
    _, g = field.value_and_gradient(points)
    g = np.asarray(g, dtype=np.float32)
    return g / np.maximum(np.linalg.norm(g, axis=1), 1e-12)[:, None]


def seed_samples(
    field,
    count: int,
    seed: int | np.random.Generator = 0,
    disk_radius: float = defaults.DISK_RADIUS,
    box: tuple[Array, Array] | None = None,
    max_rounds: int = 20,
) -> SamplerState:
    """Uniform box draws projected onto the surface until ``count`` stick."""
    if count <= 0:
        raise ValueError("sample count must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    lo, hi = box if box is not None else defaults.domain_box()
    kept: list[Array] = []
    total = 0
    for _ in range(max_rounds):
        need = count - total
        draw = rng.uniform(lo, hi, size=(max(need, 64), 3)).astype(np.float32)
        projected, ok = project_to_level_set(field, draw)
        hits = projected[ok][:need]
        if len(hits):
            kept.append(hits)
            total += len(hits)
        if total >= count:
            break
    if total < count:
        raise ValueError("surface not found: projections keep failing")
    positions = np.concatenate(kept)[:count]
    return SamplerState(
        positions=positions,
        normals=_normals_at(field, positions),
        held=np.zeros(count, dtype=np.int32),
        disk_radius=disk_radius,
        rng=rng,
    )


def uniform_disk(rng: np.random.Generator, count: int, radius: float) -> Array:
    """Exact uniform draws in a disk: radius by sqrt, angle uniform. (count, 2)."""
    rho = radius * np.sqrt(rng.random(count))
    phi = rng.uniform(0, 2 * np.pi, count)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi)], axis=1)


def resample_step(field, state: SamplerState) -> SamplerState:
    """Advance every walker: tangent-disk perturbation, then reprojection.

    Failed reprojections hold their previous sample; walkers held for
    several consecutive steps are re-seeded from fresh box draws so no
    chain stays dead.
    """
    n = len(state)
    if n == 0:
        raise ValueError("empty sampler state")
    d = uniform_disk(state.rng, n, state.disk_radius).astype(np.float32)
    t1, t2 = tangent_basis(state.normals)
    moved = state.positions + d[:, :1] * t1.astype(np.float32) + d[:, 1:] * t2.astype(np.float32)
    projected, ok = project_to_level_set(field, moved)
    state.positions[ok] = projected[ok]
    state.normals[ok] = _normals_at(field, projected[ok])
    state.held[ok] = 0
    state.held[~ok] += 1

    stuck = state.held >= defaults.HELD_RESEED_STEPS
    if np.any(stuck):
        lo, hi = defaults.domain_box()
        draw = state.rng.uniform(lo, hi, size=(int(stuck.sum()), 3)).astype(np.float32)
        reseeded, rok = project_to_level_set(field, draw)
        land = np.nonzero(stuck)[0][rok]
        state.positions[land] = reseeded[rok]
        state.normals[land] = _normals_at(field, reseeded[rok])
        state.held[land] = 0
    return state


def discard_within_sphere(
    state: SamplerState, center: Array, radius: float
) -> tuple[SamplerState, int]:
    """Split off walkers inside the interaction sphere; keep the rest."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    center = np.asarray(center, dtype=np.float32).reshape(3)
    d = np.linalg.norm(state.positions - center, axis=1)
    keep = d > radius
    kept = SamplerState(
        positions=state.positions[keep].copy(),
        normals=state.normals[keep].copy(),
        held=state.held[keep].copy(),
        disk_radius=state.disk_radius,
        rng=state.rng,
    )
    return kept, int((~keep).sum())


# ---------------------------------------------------------------------------
# Coverage audit: per-triangle pdf estimate


@dataclass
class PdfEstimate:
    """Per-triangle mean pdf over all generated samples.

    pdf_i = c_i / (N * M * A_i) where c_i counts samples nearest to
    triangle i, N is the iteration count and M the chain count, so the
    values integrate to one over the surface.
    """

    triangle_indices: Array  # (T,) indices into the source mesh
    areas: Array             # (T,)
    counts: Array            # (T,)
    pdf: Array               # (T,)
    iterations: int
    chains: int

    def export_table(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write("# triangle area count pdf\n")
            for i, a, c, p in zip(self.triangle_indices, self.areas, self.counts, self.pdf):
                f.write(f"{i} {a:.9g} {int(c)} {p:.9g}\n")


def _nondegenerate(mesh: geometry.TriangleMesh) -> tuple[geometry.TriangleMesh, Array, Array]:
    areas = mesh.triangle_areas()
    keep = areas > 0
    if not np.any(keep):
        raise ValueError("mesh is fully degenerate: no triangle has area")
    filtered = geometry.TriangleMesh(
        vertices=mesh.vertices.copy(), triangles=mesh.triangles[keep].copy()
    )
    return filtered, np.nonzero(keep)[0], areas[keep]


def _pdf_from_positions(
    mesh: geometry.TriangleMesh, positions: Array, iterations: int, chains: int
) -> PdfEstimate:
    filtered, indices, areas = _nondegenerate(mesh)
    nearest, _ = geometry.nearest_triangle(filtered, positions)
    counts = np.bincount(nearest, minlength=len(areas)).astype(np.float64)
    pdf = counts / (iterations * chains * areas)
    return PdfEstimate(
        triangle_indices=indices,
        areas=areas,
        counts=counts,
        pdf=pdf,
        iterations=iterations,
        chains=chains,
    )


def estimate_pdf(
    mesh: geometry.TriangleMesh,
    field,
    chains: int = 1000,
    iterations: int = 2000,
    seed: int = 0,
) -> PdfEstimate:
    """Run the tangent-disk chain and histogram samples onto the mesh."""
    state = seed_samples(field, chains, seed)
    visits = np.empty((iterations, chains, 3), dtype=np.float32)
    for it in range(iterations):
        state = resample_step(field, state)
        visits[it] = state.positions
    return _pdf_from_positions(mesh, visits.reshape(-1, 3), iterations, chains)


def estimate_pdf_naive(
    mesh: geometry.TriangleMesh,
    field,
    count: int,
    seed: int = 0,
    chunk: int = 100_000,
) -> PdfEstimate:
    """Same estimate from independent seed-and-project draws."""
    rng = np.random.default_rng(seed)
    parts = []
    remaining = count
    while remaining > 0:
        take = min(chunk, remaining)
        parts.append(seed_samples(field, take, rng).positions)
        remaining -= take
    return _pdf_from_positions(mesh, np.concatenate(parts), count, 1)
