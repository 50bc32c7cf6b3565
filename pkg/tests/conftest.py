"""Shared fixtures: desk-scale fits are expensive, so trained networks are
cached as checkpoints under tests/_artifacts and reused across runs.

Delete the directory to force retraining.
"""

from pathlib import Path

import numpy as np
import pytest

from sdfsculpt import geometry, mlp, training

ARTIFACTS = Path(__file__).parent / "_artifacts"

DESK_ITERATIONS = 20000
DESK_BATCH = 5000


def surface_source(shape: str):
    if shape == "sphere":
        def draw(count, rng):
            p, n = geometry.sample_sphere_surface(0.6, count, rng)
            return p.astype(np.float32), n.astype(np.float32)
    elif shape == "torus":
        def draw(count, rng):
            p, n = geometry.sample_torus_surface(0.45, 0.25, count, rng)
            return p.astype(np.float32), n.astype(np.float32)
    else:
        raise ValueError(shape)
    return draw


def desk_fit(shape: str, seed: int, weight_norm: bool = True) -> mlp.SirenNetwork:
    """Train (or load) a desk-scale fit of the analytic shape."""
    tag = "wn" if weight_norm else "nown"
    path = ARTIFACTS / f"{shape}_s{seed}_{tag}.json"
    if path.exists():
        return mlp.load_checkpoint(path)
    ARTIFACTS.mkdir(exist_ok=True)
    net = mlp.init_siren([3, 128, 128, 1], seed=seed, weight_norm=weight_norm)
    net, _ = training.train_initial(
        net,
        surface_source(shape),
        training.LossConfig(),
        iterations=DESK_ITERATIONS,
        surface_batch=DESK_BATCH,
        free_batch=DESK_BATCH,
        seed=seed,
    )
    mlp.save_checkpoint(net, path)
    return net


@pytest.fixture(scope="session")
def trained_sphere() -> mlp.SirenNetwork:
    return desk_fit("sphere", seed=0)


@pytest.fixture(scope="session")
def trained_torus() -> mlp.SirenNetwork:
    return desk_fit("torus", seed=0)
