"""Engine-wide defaults and the global sign convention.

Every module reads these values from here; nothing re-declares them.

Sign convention: fields are POSITIVE OUTSIDE the shape and negative
inside.  Surface normals therefore equal the normalized field gradient,
sphere tracing marches by the raw field value, and the pre-training
target ``|x|`` needs no sign flip.
"""

import numpy as np

OUTSIDE_POSITIVE = True

# Axis-aligned domain box; shapes are normalized to live inside it.
DOMAIN_MIN = -1.0
DOMAIN_MAX = 1.0

# Level-set projection (Newton iterations).
PROJECTION_TOL = 1e-5
PROJECTION_MAX_ITER = 10
GRADIENT_FLOOR = 1e-8  # |grad| below this counts as a singular step

# Tangent-disk Markov chain.
DISK_RADIUS = 0.04
HELD_RESEED_STEPS = 5

# Sphere tracing.
HIT_EPS = 1e-3
MAX_STEPS = 128
MAX_DIST = 4.0
STEP_SCALE = 0.9

# SIREN frequency scale.
OMEGA0 = 30.0

# Adam defaults.
LEARNING_RATE = 1e-4
BETA1 = 0.9
BETA2 = 0.999
ADAM_EPS = 1e-8

# Pre-training target is |x| - PRETRAIN_OFFSET: positive over ~98% of the
# box (which avoids the outer-shell local minimum) yet negative in a small
# core near the origin, so the fitted surface starts with an inside.
PRETRAIN_OFFSET = 0.3


def domain_box() -> tuple[np.ndarray, np.ndarray]:
    lo = np.full(3, DOMAIN_MIN)
    hi = np.full(3, DOMAIN_MAX)
    return lo, hi


_ALLOCATOR_TUNED = False


def tune_allocator() -> bool:
    """Keep large temporaries on the heap instead of per-call mmaps.

    A training iteration churns through tens of megabytes of activation
    and tangent buffers.  With glibc defaults each buffer above the mmap
    threshold is returned to the kernel on free, so every iteration pays
    the page faults again; raising the mmap and trim thresholds lets the
    allocator recycle them.  Safe no-op on other allocators.
    """
    global _ALLOCATOR_TUNED
    if _ALLOCATOR_TUNED:
        return True
    try:
        import ctypes

        libc = ctypes.CDLL("libc.so.6")
        m_mmap_threshold, m_trim_threshold = -3, -1
        ok = bool(libc.mallopt(m_mmap_threshold, 1 << 30)) and bool(
            libc.mallopt(m_trim_threshold, 1 << 30)
        )
    except OSError:
        return False
    _ALLOCATOR_TUNED = ok
    return ok
