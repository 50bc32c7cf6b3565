"""Sinusoidal MLP with weight-normalized layers and exact derivatives.

The network maps 3D points to scalars.  Values, spatial gradients, and
parameter gradients (including the mixed second-order term needed to
differentiate losses that contain the spatial gradient) are computed with
hand-rolled forward/reverse passes over a structure-of-arrays layout, so
a batch of thousands of points turns into a handful of BLAS calls.

All parameters and batch arithmetic are float32.  Networks are immutable
for every read operation; only ``adam_step`` writes to parameter arrays.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import defaults

Array = np.ndarray

CHECKPOINT_VERSION = 1


class GradientError(ValueError):
    """Non-finite gradients fed to the optimizer (training divergence)."""


# ---------------------------------------------------------------------------
# Parameter containers


@dataclass
class LinearLayer:
    """One affine layer, optionally reparametrized as length x direction.

    With weight normalization, row i of the effective weight matrix is
    ``length[i] * direction[i] / |direction[i]|``.  Without it, ``length``
    is None and ``direction`` holds the weight matrix directly.
    """

    direction: Array          # (out, in) float32
    bias: Array               # (out,) float32
    length: Array | None = None  # (out,) float32, None when weight norm is off

    @property
    def out_features(self) -> int:
        return self.direction.shape[0]

    @property
    def in_features(self) -> int:
        return self.direction.shape[1]

    def clone(self) -> "LinearLayer":
        return LinearLayer(
            direction=self.direction.copy(),
            bias=self.bias.copy(),
            length=None if self.length is None else self.length.copy(),
        )


@dataclass
class SirenNetwork:
    """Sine MLP: all layers but the last apply sin(omega0 * (Wx + b))."""

    layers: list[LinearLayer]
    omega0: float
    layout: list[int]
    weight_norm: bool = True

    def clone(self) -> "SirenNetwork":
        return SirenNetwork(
            layers=[l.clone() for l in self.layers],
            omega0=self.omega0,
            layout=list(self.layout),
            weight_norm=self.weight_norm,
        )

    # Convenience field interface shared with analytic SDFs.
    def value(self, points: Array) -> Array:
        return forward(self, points)

    def value_and_gradient(self, points: Array) -> tuple[Array, Array]:
        return spatial_gradient(self, points)


@dataclass
class LayerCotangent:
    direction: Array
    bias: Array
    length: Array | None = None


@dataclass
class ParamCotangent:
    """Gradient of some scalar with respect to the parameter collection."""

    layers: list[LayerCotangent]

    def add(self, other: "ParamCotangent") -> "ParamCotangent":
        out = []
        for a, b in zip(self.layers, other.layers):
            out.append(
                LayerCotangent(
                    direction=a.direction + b.direction,
                    bias=a.bias + b.bias,
                    length=None if a.length is None else a.length + b.length,
                )
            )
        return ParamCotangent(out)

    def scaled(self, factor: float) -> "ParamCotangent":
        return ParamCotangent(
            [
                LayerCotangent(
                    direction=l.direction * factor,
                    bias=l.bias * factor,
                    length=None if l.length is None else l.length * factor,
                )
                for l in self.layers
            ]
        )

    def arrays(self) -> list[Array]:
        out: list[Array] = []
        for l in self.layers:
            out.append(l.direction)
            if l.length is not None:
                out.append(l.length)
            out.append(l.bias)
        return out


def _network_arrays(net: SirenNetwork) -> list[Array]:
    out: list[Array] = []
    for l in net.layers:
        out.append(l.direction)
        if l.length is not None:
            out.append(l.length)
        out.append(l.bias)
    return out


# ---------------------------------------------------------------------------
# Construction


def init_siren(
    layout: list[int],
    omega0: float = defaults.OMEGA0,
    seed: int = 0,
    weight_norm: bool = True,
) -> SirenNetwork:
    """Build a sine MLP with the standard frequency-aware initialization.

    The first layer draws weights uniformly in +-1/fan_in, later layers in
    +-sqrt(6/fan_in)/omega0.  Weight-norm lengths start at the row norms of
    the drawn weights, so the initial function is identical with or without
    the reparametrization.
    """
    if len(layout) < 2 or layout[0] != 3 or layout[-1] != 1:
        raise ValueError(f"layout must run from 3 inputs to 1 output, got {layout}")
    if any(w <= 0 for w in layout):
        raise ValueError(f"layer widths must be positive, got {layout}")
    if omega0 <= 0:
        raise ValueError("omega0 must be positive")

    rng = np.random.default_rng(seed)
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(layout[:-1], layout[1:])):
        if i == 0:
            bound = 1.0 / fan_in
        else:
            bound = math.sqrt(6.0 / fan_in) / omega0
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in)).astype(np.float32)
        b_bound = 1.0 / math.sqrt(fan_in)
        b = rng.uniform(-b_bound, b_bound, size=fan_out).astype(np.float32)
        if weight_norm:
            g = np.linalg.norm(w.astype(np.float64), axis=1).astype(np.float32)
            layers.append(LinearLayer(direction=w, bias=b, length=g))
        else:
            layers.append(LinearLayer(direction=w, bias=b, length=None))
    return SirenNetwork(layers=layers, omega0=float(omega0), layout=list(layout), weight_norm=weight_norm)


def effective_weights(layer: LinearLayer) -> Array:
    """Materialize the effective weight matrix of a layer."""
    if layer.length is None:
        return layer.direction
    norms = np.linalg.norm(layer.direction, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("zero direction row: weight-norm reparametrization undefined")
    return (layer.length / norms)[:, None] * layer.direction


def _weight_norm_backward(layer: LinearLayer, dW: Array) -> LayerCotangent:
    """Chain a gradient w.r.t. the effective weights back to (direction, length)."""
    if layer.length is None:
        return LayerCotangent(direction=dW, bias=np.zeros_like(layer.bias))
    v = layer.direction
    norms = np.linalg.norm(v, axis=1)
    u = v / norms[:, None]
    dg = np.einsum("oi,oi->o", dW, u)
    dv = (layer.length / norms)[:, None] * (dW - dg[:, None] * u)
    return LayerCotangent(direction=dv.astype(np.float32), bias=np.zeros_like(layer.bias), length=dg.astype(np.float32))


# ---------------------------------------------------------------------------
# Evaluation


def _as_points(points: Array) -> Array:
    pts = np.asarray(points, dtype=np.float32)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected an (N, 3) point batch, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("non-finite input points")
    return pts


def forward(net: SirenNetwork, points: Array) -> Array:
    """Evaluate the network at a batch of points; returns (N,) values."""
    a = _as_points(points)
    omega = np.float32(net.omega0)
    for layer in net.layers[:-1]:
        w = effective_weights(layer)
        a = np.sin(omega * (a @ w.T + layer.bias))
    last = net.layers[-1]
    y = a @ effective_weights(last).T + last.bias
    return y[:, 0]


def spatial_gradient(net: SirenNetwork, points: Array) -> tuple[Array, Array]:
    """Values and exact input-space gradients, (N,) and (N, 3)."""
    a = _as_points(points)
    n = a.shape[0]
    omega = np.float32(net.omega0)
    ja = np.broadcast_to(np.eye(3, dtype=np.float32), (n, 3, 3))
    for layer in net.layers[:-1]:
        w = effective_weights(layer)
        z = a @ w.T + layer.bias
        jz = (ja.reshape(3 * n, -1) @ w.T).reshape(n, 3, -1)
        c = omega * np.cos(omega * z)
        a = np.sin(omega * z)
        ja = c[:, None, :] * jz
    last = net.layers[-1]
    w = effective_weights(last)
    y = a @ w.T + last.bias
    grad = (ja.reshape(3 * n, -1) @ w.T).reshape(n, 3)
    return y[:, 0], grad


def vjp_value(net: SirenNetwork, points: Array, cotangents: Array) -> ParamCotangent:
    """Gradient of sum_i c_i * f(x_i) with respect to the parameters."""
    x = _as_points(points)
    c = np.asarray(cotangents, dtype=np.float32)
    if c.shape != (x.shape[0],):
        raise ValueError(f"cotangent shape {c.shape} does not match {x.shape[0]} points")
    omega = np.float32(net.omega0)

    acts = [x]
    zs = []
    weights = [effective_weights(l) for l in net.layers]
    a = x
    for layer, w in zip(net.layers[:-1], weights[:-1]):
        z = a @ w.T + layer.bias
        zs.append(z)
        a = np.sin(omega * z)
        acts.append(a)

    grads: list[LayerCotangent | None] = [None] * len(net.layers)
    delta = c[:, None]
    for i in range(len(net.layers) - 1, -1, -1):
        layer, w = net.layers[i], weights[i]
        if i < len(net.layers) - 1:
            delta = delta * (omega * np.cos(omega * zs[i]))
        dw = delta.T @ acts[i]
        db = delta.sum(axis=0)
        g = _weight_norm_backward(layer, dw)
        g.bias = db
        grads[i] = g
        if i > 0:
            delta = delta @ w
    return ParamCotangent(grads)  # type: ignore[arg-type]


def vjp_spatial_gradient(net: SirenNetwork, points: Array, cotangents: Array) -> ParamCotangent:
    """Gradient of sum_i u_i . grad_x f(x_i) with respect to the parameters."""
    x = _as_points(points)
    u = np.asarray(cotangents, dtype=np.float32)
    if u.shape != x.shape:
        raise ValueError(f"cotangent shape {u.shape} does not match points {x.shape}")
    _, _, cot = mixed_vjp(net, x, None, u)
    return cot


@dataclass
class ForwardTape:
    """Saved intermediates of one tangent-augmented forward pass.

    Lets a caller inspect values and spatial gradients, derive cotangents
    from them, and run the reverse sweep without re-evaluating the net.
    """

    weights: list[Array]
    acts: list[Array]        # inputs to each layer
    tangents: list[Array]    # (N, 3, w) input tangents to each layer
    zs: list[Array]          # pre-activations of sine layers
    jzs: list[Array]         # their tangents
    values: Array            # (N,)
    gradients: Array         # (N, 3)


def forward_tape(net: SirenNetwork, points: Array) -> ForwardTape:
    """Forward pass carrying input tangents, keeping every intermediate."""
    x = _as_points(points)
    n = x.shape[0]
    omega = np.float32(net.omega0)
    weights = [effective_weights(l) for l in net.layers]

    acts = [x]
    tangents = [np.broadcast_to(np.eye(3, dtype=np.float32), (n, 3, 3))]
    zs: list[Array] = []
    jzs: list[Array] = []
    a, ja = acts[0], tangents[0]
    for layer, w in zip(net.layers[:-1], weights[:-1]):
        z = a @ w.T + layer.bias
        if len(zs) == 0:
            # Input tangents are the identity, so the first tangent is
            # just the weight matrix broadcast over the batch.
            jz = np.broadcast_to(w.T, (n, 3, w.shape[0]))
        else:
            jz = (ja.reshape(3 * n, -1) @ w.T).reshape(n, 3, -1)
        zs.append(z)
        jzs.append(jz)
        a = np.sin(omega * z)
        c = omega * np.cos(omega * z)
        if len(zs) == 1:
            ja = np.einsum("nj,kj->nkj", c, w.T)
        else:
            ja = c[:, None, :] * jz
        acts.append(a)
        tangents.append(ja)

    last, w_last = net.layers[-1], weights[-1]
    y = (acts[-1] @ w_last.T + last.bias)[:, 0]
    grad = (ja.reshape(3 * n, -1) @ w_last.T).reshape(n, 3) if zs else np.broadcast_to(
        w_last, (n, 3)
    ).copy()
    return ForwardTape(
        weights=weights, acts=acts, tangents=tangents, zs=zs, jzs=jzs, values=y, gradients=grad
    )


def tape_vjp(
    net: SirenNetwork,
    tape: ForwardTape,
    value_cotangents: Array | None,
    gradient_cotangents: Array | None,
) -> ParamCotangent:
    """Reverse sweep over a saved tape.

    Returns the parameter gradient of sum_i c_i f(x_i) + u_i . grad f(x_i);
    either cotangent may be omitted.
    """
    n = len(tape.values)
    omega = np.float32(net.omega0)
    if value_cotangents is None:
        delta = np.zeros((n, 1), dtype=np.float32)
    else:
        delta = np.asarray(value_cotangents, dtype=np.float32).reshape(n, 1)
    if gradient_cotangents is None:
        jdelta = np.zeros((n, 3, 1), dtype=np.float32)
    else:
        jdelta = np.asarray(gradient_cotangents, dtype=np.float32).reshape(n, 3, 1).copy()

    grads: list[LayerCotangent | None] = [None] * len(net.layers)
    for i in range(len(net.layers) - 1, -1, -1):
        layer, w = net.layers[i], tape.weights[i]
        if i < len(net.layers) - 1:
            # Through the sine: the value path picks up omega*cos, and the
            # tangent cotangent feeds back into z via the second derivative.
            c = omega * np.cos(omega * tape.zs[i])
            delta = delta * c - (omega * omega) * tape.acts[i + 1] * np.einsum(
                "nkj,nkj->nj", jdelta, tape.jzs[i]
            )
            jdelta = c[:, None, :] * jdelta
        wo, wi = w.shape
        if i == 0:
            # Input tangents are the identity: the tangent contribution to
            # the first weight matrix is a plain sum over the batch.
            dw = delta.T @ tape.acts[0] + jdelta.sum(axis=0).T
        else:
            dw = delta.T @ tape.acts[i] + jdelta.reshape(3 * n, wo).T @ tape.tangents[i].reshape(3 * n, wi)
        g = _weight_norm_backward(layer, dw)
        g.bias = delta.sum(axis=0)
        grads[i] = g
        if i > 0:
            delta = delta @ w
            jdelta = (jdelta.reshape(3 * n, wo) @ w).reshape(n, 3, wi)
    return ParamCotangent(grads)  # type: ignore[arg-type]


def mixed_vjp(
    net: SirenNetwork,
    points: Array,
    value_cotangents: Array | None,
    gradient_cotangents: Array | None,
) -> tuple[Array, Array, ParamCotangent]:
    """Values, spatial gradients, and the fused parameter gradient."""
    tape = forward_tape(net, points)
    cot = tape_vjp(net, tape, value_cotangents, gradient_cotangents)
    return tape.values, tape.gradients, cot


# ---------------------------------------------------------------------------
# Optimizer


@dataclass
class OptimizerState:
    """Adaptive-moment accumulators, shape-congruent with the parameters."""

    m: list[Array]
    v: list[Array]
    step: int = 0
    learning_rate: float = defaults.LEARNING_RATE
    beta1: float = defaults.BETA1
    beta2: float = defaults.BETA2
    eps: float = defaults.ADAM_EPS

    @classmethod
    def for_network(cls, net: SirenNetwork, learning_rate: float = defaults.LEARNING_RATE) -> "OptimizerState":
        arrays = _network_arrays(net)
        return cls(
            m=[np.zeros_like(a) for a in arrays],
            v=[np.zeros_like(a) for a in arrays],
            learning_rate=learning_rate,
        )


def adam_step(
    net: SirenNetwork, grads: ParamCotangent, state: OptimizerState
) -> tuple[SirenNetwork, OptimizerState]:
    """One adaptive-moment update, applied to the parameters in place."""
    params = _network_arrays(net)
    gs = grads.arrays()
    if len(params) != len(gs):
        raise ValueError("gradient structure does not match the network")
    for p, g in zip(params, gs):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        if not np.all(np.isfinite(g)):
            raise GradientError("non-finite gradient")
    state.step += 1
    b1, b2 = np.float32(state.beta1), np.float32(state.beta2)
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    scale = np.float32(state.learning_rate / bc1)
    for p, g, m, v in zip(params, gs, state.m, state.v):
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * np.square(g)
        p -= scale * m / (np.sqrt(v / bc2) + np.float32(state.eps))
    return net, state


# ---------------------------------------------------------------------------
# Checkpoints


def _encode_array(a: Array) -> dict:
    data = np.ascontiguousarray(a, dtype="<f4")
    return {"shape": list(a.shape), "data": base64.b64encode(data.tobytes()).decode("ascii")}


def _decode_array(doc: dict) -> Array:
    raw = base64.b64decode(doc["data"])
    return np.frombuffer(raw, dtype="<f4").reshape(doc["shape"]).copy()


def to_checkpoint_document(net: SirenNetwork) -> dict:
    layers = []
    for l in net.layers:
        layers.append(
            {
                "direction": _encode_array(l.direction),
                "length": None if l.length is None else _encode_array(l.length),
                "bias": _encode_array(l.bias),
            }
        )
    return {
        "format_version": CHECKPOINT_VERSION,
        "kind": "siren-sdf",
        "layout": list(net.layout),
        "omega0": net.omega0,
        "weight_norm": net.weight_norm,
        "layers": layers,
    }


def from_checkpoint_document(doc: dict) -> SirenNetwork:
    try:
        if doc["format_version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {doc['format_version']}")
        layers = [
            LinearLayer(
                direction=_decode_array(l["direction"]),
                bias=_decode_array(l["bias"]),
                length=None if l["length"] is None else _decode_array(l["length"]),
            )
            for l in doc["layers"]
        ]
        net = SirenNetwork(
            layers=layers,
            omega0=float(doc["omega0"]),
            layout=[int(w) for w in doc["layout"]],
            weight_norm=bool(doc["weight_norm"]),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ValueError(f"malformed checkpoint document: {exc}") from exc
    expected = net.layout
    widths = [3] + [l.out_features for l in net.layers]
    if widths != expected:
        raise ValueError(f"layer shapes {widths} disagree with layout {expected}")
    return net


def save_checkpoint(net: SirenNetwork, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(to_checkpoint_document(net), f)


def load_checkpoint(path) -> SirenNetwork:
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except FileNotFoundError:
        raise
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read checkpoint {path}: {exc}") from exc
    return from_checkpoint_document(doc)
