"""Loss assembly and the three optimization loops.

The loss is a weighted sum of four expectations: absolute field value and
normal misalignment (cosine distance) on surface samples, the eikonal
residual | |grad f| - 1 | on uniform box samples, and an exponential
penalty on small field magnitudes at the same box samples, which pushes
spurious zero crossings out of empty space.  Expectations are realized as
batch means.  Gradients are exact: each term's cotangent is chained
through the fused value-and-spatial-gradient reverse pass, with the
subgradient at the |.| kinks (and at vanishing gradients) taken as 0.

Loops: a short pre-training regression toward the radial distance |x|
(escapes the outer-shell local minimum), the main shape fit, and
per-stroke fine-tuning that mixes surviving model samples with brush
interaction samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import defaults, mlp
from .brush import Brush, InteractionFrame, sample_interaction
from .mlp import OptimizerState, ParamCotangent, SirenNetwork, adam_step, vjp_value
from .sampler import SamplerState, SurfaceBatch, resample_step

Array = np.ndarray


class TrainingDiverged(RuntimeError):
    """Raised when the loss turns non-finite; carries the last good network."""

    def __init__(self, message: str, last_good: SirenNetwork, history: list):
        super().__init__(message)
        self.last_good = last_good
        self.history = history


# ---------------------------------------------------------------------------
# Configuration and batches


@dataclass
class LossConfig:
    lambda1: float = 1.5e3   # surface value weight
    lambda2: float = 5.0     # surface normal weight
    lambda3: float = 2.5     # eikonal weight
    lambda4: float = 5.0     # empty-space weight
    alpha: float = 100.0     # empty-space sharpness
    box_lo: Array = field(default_factory=lambda: np.full(3, defaults.DOMAIN_MIN))
    box_hi: Array = field(default_factory=lambda: np.full(3, defaults.DOMAIN_MAX))

    def __post_init__(self) -> None:
        self.box_lo = np.asarray(self.box_lo, dtype=np.float64).reshape(3)
        self.box_hi = np.asarray(self.box_hi, dtype=np.float64).reshape(3)
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if min(self.lambda1, self.lambda2, self.lambda3, self.lambda4) < 0:
            raise ValueError("loss weights must be non-negative")
        if not np.all(self.box_hi > self.box_lo):
            raise ValueError("degenerate bounding box")


@dataclass
class TrainBatch:
    surface: SurfaceBatch
    freespace: Array  # (Nf, 3) float32

    def __post_init__(self) -> None:
        self.freespace = np.asarray(self.freespace, dtype=np.float32).reshape(-1, 3)
        if len(self.surface):
            lengths = np.linalg.norm(self.surface.normals, axis=1)
            if np.any(np.abs(lengths - 1.0) > 1e-3):
                raise ValueError("surface normals must be unit vectors")


@dataclass
class LossBreakdown:
    """Weighted loss components; total is their sum."""

    total: float
    surface_value: float
    surface_normal: float
    eikonal: float
    empty_space: float

    def as_dict(self) -> dict:
        return {
            "total": self.total,
            "surface_value": self.surface_value,
            "surface_normal": self.surface_normal,
            "eikonal": self.eikonal,
            "empty_space": self.empty_space,
        }


@dataclass
class EditJob:
    brush: Brush
    frame: InteractionFrame
    iterations: int = 200
    factor: int = 10
    model_batch: int = 5000
    free_batch: int = 5000
    use_model_samples: bool = True
    fallback_count: int = 32
    learning_rate: float = defaults.LEARNING_RATE

    def __post_init__(self) -> None:
        if self.factor < 1:
            raise ValueError("sample-count factor must be at least 1")
        if self.iterations < 0:
            raise ValueError("iteration budget must be non-negative")


# ---------------------------------------------------------------------------
# Loss


def _check_batch(batch: TrainBatch, config: LossConfig) -> None:
    if len(batch.surface) == 0:
        raise ValueError("empty surface batch")
    if len(batch.freespace) == 0:
        raise ValueError("empty freespace batch")
    eps = 1e-5
    if np.any(batch.freespace < config.box_lo - eps) or np.any(batch.freespace > config.box_hi + eps):
        raise ValueError("freespace points outside the bounding box")


def _surface_terms(f: Array, g: Array, normals: Array, config: LossConfig) -> tuple[float, float]:
    f64, g64 = f.astype(np.float64), g.astype(np.float64)
    gnorm = np.linalg.norm(g64, axis=1)
    safe = np.maximum(gnorm, 1e-300)
    cosine = np.where(gnorm > 0, np.einsum("ij,ij->i", g64, normals) / safe, 0.0)
    return (
        config.lambda1 * float(np.mean(np.abs(f64))),
        config.lambda2 * float(np.mean(1.0 - cosine)),
    )


def _freespace_terms(f: Array, g: Array, config: LossConfig) -> tuple[float, float]:
    f64, g64 = f.astype(np.float64), g.astype(np.float64)
    gnorm = np.linalg.norm(g64, axis=1)
    return (
        config.lambda3 * float(np.mean(np.abs(gnorm - 1.0))),
        config.lambda4 * float(np.mean(np.exp(-config.alpha * np.abs(f64)))),
    )


def _assemble(sv: float, sn: float, eik: float, es: float) -> LossBreakdown:
    return LossBreakdown(
        total=sv + sn + eik + es,
        surface_value=sv,
        surface_normal=sn,
        eikonal=eik,
        empty_space=es,
    )


def loss_terms(net: SirenNetwork, batch: TrainBatch, config: LossConfig) -> LossBreakdown:
    _check_batch(batch, config)
    f_s, g_s = net.value_and_gradient(batch.surface.positions)
    f_q, g_q = net.value_and_gradient(batch.freespace)
    sv, sn = _surface_terms(f_s, g_s, batch.surface.normals.astype(np.float64), config)
    eik, es = _freespace_terms(f_q, g_q, config)
    return _assemble(sv, sn, eik, es)


def loss_gradient(
    net: SirenNetwork, batch: TrainBatch, config: LossConfig
) -> tuple[LossBreakdown, ParamCotangent]:
    """Loss breakdown plus exact parameter gradient in one fused pass.

    Surface and freespace points share a single tangent-carrying forward
    pass and a single reverse sweep; only the cotangent assembly in the
    middle distinguishes the two batch parts.
    """
    _check_batch(batch, config)
    ns, nf = len(batch.surface), len(batch.freespace)
    normals = batch.surface.normals.astype(np.float64)

    stacked = np.concatenate([batch.surface.positions, batch.freespace], axis=0)
    tape = mlp.forward_tape(net, stacked)
    f_s, g_s = tape.values[:ns], tape.gradients[:ns]
    f_q, g_q = tape.values[ns:], tape.gradients[ns:]

    # Surface part: d/df of lambda1 E|f| and d/dgrad of lambda2 E(1 - cos).
    g64 = g_s.astype(np.float64)
    gnorm = np.linalg.norm(g64, axis=1)
    safe = np.maximum(gnorm, 1e-300)
    unit = g64 / safe[:, None]
    value_cot_s = (config.lambda1 / ns) * np.sign(f_s.astype(np.float64))
    cos_grad = (normals - np.einsum("ij,ij->i", unit, normals)[:, None] * unit) / safe[:, None]
    grad_cot_s = np.where(gnorm[:, None] > 0, -(config.lambda2 / ns) * cos_grad, 0.0)

    # Freespace part: eikonal subgradient and the exponential value term.
    q64 = g_q.astype(np.float64)
    qnorm = np.linalg.norm(q64, axis=1)
    qsafe = np.maximum(qnorm, 1e-300)
    grad_cot_q = np.where(
        qnorm[:, None] > 0,
        (config.lambda3 / nf) * np.sign(qnorm - 1.0)[:, None] * (q64 / qsafe[:, None]),
        0.0,
    )
    fq64 = f_q.astype(np.float64)
    value_cot_q = (
        -(config.lambda4 * config.alpha / nf) * np.sign(fq64) * np.exp(-config.alpha * np.abs(fq64))
    )

    sv, sn = _surface_terms(f_s, g_s, normals, config)
    eik, es = _freespace_terms(f_q, g_q, config)
    breakdown = _assemble(sv, sn, eik, es)
    if not np.isfinite(breakdown.total):
        raise TrainingDiverged("non-finite loss", net.clone(), [])

    value_cot = np.concatenate([value_cot_s, value_cot_q]).astype(np.float32)
    grad_cot = np.concatenate([grad_cot_s, grad_cot_q], axis=0).astype(np.float32)
    cot = mlp.tape_vjp(net, tape, value_cot, grad_cot)
    return breakdown, cot


# ---------------------------------------------------------------------------
# Pre-training


def pretrain(
    net: SirenNetwork,
    config: LossConfig,
    iterations: int = 100,
    seed: int | np.random.Generator = 0,
    batch_size: int = 5000,
    learning_rate: float = 1e-3,
    offset: float = defaults.PRETRAIN_OFFSET,
) -> SirenNetwork:
    """Regress f toward |x| - offset over fresh box draws.

    A freshly initialized sine network oscillates around zero, and the
    main loss has a local minimum that wraps the zero set around the box
    shell; a few mean-absolute-error steps toward a mostly-positive cone
    land the optimization in the right basin.  The offset carves a small
    negative core near the origin: starting all-positive instead leaves
    the fit to nucleate the interior sign through a pinched near-zero
    valley, which stalls for far longer than any practical budget.  The
    default learning rate is hotter than the main loop since the run is
    only this many iterations.
    """
    if iterations < 0:
        raise ValueError("iterations must be non-negative")
    defaults.tune_allocator()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    state = OptimizerState.for_network(net, learning_rate=learning_rate)
    for _ in range(iterations):
        x = rng.uniform(config.box_lo, config.box_hi, size=(batch_size, 3)).astype(np.float32)
        f = net.value(x)
        target = np.linalg.norm(x.astype(np.float64), axis=1) - offset
        cot = (np.sign(f.astype(np.float64) - target) / batch_size).astype(np.float32)
        adam_step(net, vjp_value(net, x, cot), state)
    return net


# ---------------------------------------------------------------------------
# Main fit


def train_initial(
    net: SirenNetwork,
    surface_source,
    config: LossConfig,
    iterations: int,
    surface_batch: int = 5000,
    free_batch: int = 5000,
    seed: int = 0,
    pretrain_iterations: int = 100,
    learning_rate: float = defaults.LEARNING_RATE,
    telemetry_every: int = 100,
    on_progress=None,
) -> tuple[SirenNetwork, list[tuple[int, LossBreakdown]]]:
    """Fit the network to a surface source: pre-train, then descend the loss.

    ``surface_source(count, rng)`` must yield (positions, normals) draws.
    Telemetry is recorded every ``telemetry_every`` iterations.  If the
    loss turns non-finite the loop aborts, raising with the last good
    snapshot attached.
    """
    defaults.tune_allocator()
    rng = np.random.default_rng(seed)
    pretrain(net, config, iterations=pretrain_iterations, seed=rng, batch_size=free_batch)
    state = OptimizerState.for_network(net, learning_rate=learning_rate)
    history: list[tuple[int, LossBreakdown]] = []
    last_good = net.clone()
    for it in range(iterations):
        pos, nrm = surface_source(surface_batch, rng)
        free = rng.uniform(config.box_lo, config.box_hi, size=(free_batch, 3)).astype(np.float32)
        batch = TrainBatch(surface=SurfaceBatch(pos, nrm), freespace=free)
        try:
            breakdown, grads = loss_gradient(net, batch, config)
            if it % 500 == 0:
                # Snapshot before the step: a finite loss certifies the
                # current parameters, the step after it is unvalidated.
                last_good = net.clone()
            adam_step(net, grads, state)
        except (TrainingDiverged, ValueError) as exc:
            raise TrainingDiverged(f"diverged at iteration {it}: {exc}", last_good, history) from exc
        if it % telemetry_every == 0 or it == iterations - 1:
            history.append((it, breakdown))
            if on_progress is not None:
                on_progress(it, breakdown)
    return net, history


# ---------------------------------------------------------------------------
# Edit fine-tuning


def finetune_edit(
    net: SirenNetwork,
    job: EditJob,
    sampler_state: SamplerState,
    config: LossConfig,
    seed: int | np.random.Generator = 0,
    on_iteration=None,
) -> SirenNetwork:
    """Adapt the network to one brush stroke.

    A frozen copy of the incoming network stands in for the pre-edit
    surface: the sample chain walks on it and interaction samples are
    projected onto it.  Each iteration mixes the chain samples that
    survive the discard sphere with brush-displaced interaction samples
    (discarded count times the balance factor, with a floor when the
    brush misses every walker), and takes one descent step on the live
    network over that union plus fresh freespace draws.
    """
    defaults.tune_allocator()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    frozen = net.clone()
    state = OptimizerState.for_network(net, learning_rate=job.learning_rate)
    center = job.frame.point.astype(np.float32)

    for it in range(job.iterations):
        sampler_state = resample_step(frozen, sampler_state)
        n_total = len(sampler_state)
        if n_total > job.model_batch:
            pick = rng.choice(n_total, size=job.model_batch, replace=False)
            model_pos = sampler_state.positions[pick]
            model_nrm = sampler_state.normals[pick]
        else:
            model_pos = sampler_state.positions
            model_nrm = sampler_state.normals
        dist = np.linalg.norm(model_pos - center, axis=1)
        keep = dist > job.brush.radius
        discarded = int((~keep).sum())
        n_interaction = discarded * job.factor if discarded else job.factor * job.fallback_count
        interaction = sample_interaction(frozen, job.frame, job.brush, n_interaction, rng)

        if job.use_model_samples:
            if not np.any(keep):
                raise ValueError("surface lost: no model samples survive the discard sphere")
            surface = SurfaceBatch(
                positions=np.concatenate([model_pos[keep], interaction.positions]),
                normals=np.concatenate([model_nrm[keep], interaction.normals]),
            )
        else:
            surface = interaction
        free = rng.uniform(config.box_lo, config.box_hi, size=(job.free_batch, 3)).astype(np.float32)
        breakdown, grads = loss_gradient(net, TrainBatch(surface=surface, freespace=free), config)
        adam_step(net, grads, state)
        if on_iteration is not None:
            on_iteration(it, net, breakdown)
    return net
