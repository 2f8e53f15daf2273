"""Scalar-in/scalar-out tanh network with exact input derivatives and
exact parameter gradients.

The forward pass propagates the triple (h, h', h'') through every layer,
so one evaluation yields psi(x), psi'(x) and psi''(x).  Parameter
gradients of any weighted combination of the three outputs come from a
hand-rolled reverse sweep over the same tape (a vector-Jacobian product),
which keeps training independent of any autodiff framework and makes runs
bit-reproducible.

Reproducibility: initialization draws from numpy's Philox counter-based
generator seeded through ``SeedSequence((seed, stream_tag))``, so the same
seed gives the same parameters on any platform.  Parameter vectors
flatten in the documented order A0 row-major, b0, A1, b1, ...
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .precision import DOUBLE, PRECISIONS, compute_dtype, round_storage, storage_dtype

# Stream tag separating weight-initialization draws from sampling draws
# that may share the same user-facing seed.
INIT_STREAM = 0x0EF1


class NonFiniteError(FloatingPointError):
    """A network evaluation produced NaN or inf."""


@dataclass(frozen=True)
class Architecture:
    """Fixed feedforward shape: 1 input, ``hidden`` tanh layers, 1 output."""

    hidden: tuple[int, ...] = (10, 10)

    def __post_init__(self):
        if any(w < 1 for w in self.hidden):
            raise ValueError("all hidden widths must be >= 1")

    @property
    def widths(self) -> tuple[int, ...]:
        return (1, *self.hidden, 1)

    @property
    def n_layers(self) -> int:
        """Number of affine maps (hidden layers + output)."""
        return len(self.hidden) + 1

    @property
    def param_count(self) -> int:
        w = self.widths
        return sum(w[i + 1] * w[i] + w[i + 1] for i in range(len(w) - 1))


@dataclass
class NetworkParams:
    """Per-layer weight matrices and offsets in a given working precision."""

    arch: Architecture
    weights: list[np.ndarray]
    offsets: list[np.ndarray]
    precision: str = DOUBLE

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.arch, [w.copy() for w in self.weights],
                             [b.copy() for b in self.offsets], self.precision)

    def to_vector(self) -> np.ndarray:
        """Flatten to float64 in the documented order (A0 rows, b0, A1, ...)."""
        parts = []
        for w, b in zip(self.weights, self.offsets):
            parts.append(np.asarray(w, dtype=np.float64).ravel())
            parts.append(np.asarray(b, dtype=np.float64).ravel())
        return np.concatenate(parts)


@dataclass
class EvalTriple:
    value: float
    dvalue: float
    ddvalue: float


def init_params(arch: Architecture, seed: int, precision: str = DOUBLE) -> NetworkParams:
    """Glorot-uniform weights, zero offsets, rounded to the storage width."""
    if precision not in PRECISIONS:
        raise ValueError(f"unknown precision tag {precision!r}")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, INIT_STREAM))))
    dt = storage_dtype(precision)
    widths = arch.widths
    weights, offsets = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        a = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        weights.append(a.astype(dt))
        offsets.append(np.zeros(fan_out, dtype=dt))
    return NetworkParams(arch, weights, offsets, precision)


def params_from_vector(arch: Architecture, vec: np.ndarray,
                       precision: str = DOUBLE) -> NetworkParams:
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (arch.param_count,):
        raise ValueError(f"expected vector of length {arch.param_count}, got {vec.shape}")
    dt = storage_dtype(precision)
    widths = arch.widths
    weights, offsets, pos = [], [], 0
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        n = fan_out * fan_in
        weights.append(vec[pos:pos + n].reshape(fan_out, fan_in).astype(dt))
        pos += n
        offsets.append(vec[pos:pos + fan_out].astype(dt))
        pos += fan_out
    return NetworkParams(arch, weights, offsets, precision)


def save_params(params: NetworkParams, path) -> None:
    np.savetxt(path, params.to_vector())


def load_params(arch: Architecture, path, precision: str = DOUBLE) -> NetworkParams:
    return params_from_vector(arch, np.loadtxt(path), precision)


# -- forward propagation of (h, h', h'') ------------------------------------

def forward_tape(params: NetworkParams, x: np.ndarray):
    """Propagate the derivative triple through the net, keeping a tape.

    Arithmetic runs in the compute dtype of the parameter precision;
    after every layer the state is rounded to the storage width (a no-op
    except under the emulated half precision).
    """
    prec = params.precision
    cdt = compute_dtype(prec)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        h = round_storage(x, prec).reshape(-1, 1)
        dh = np.ones_like(h)
        ddh = np.zeros_like(h)
        tape = []
        last = len(params.weights) - 1
        for i, (a_mat, b_vec) in enumerate(zip(params.weights, params.offsets)):
            w = a_mat.astype(cdt)
            tape.append(("affine", h, dh, ddh, w))
            h = h @ w.T + b_vec.astype(cdt)
            dh = dh @ w.T
            ddh = ddh @ w.T
            h, dh, ddh = (round_storage(v, prec) for v in (h, dh, ddh))
            if i != last:
                t = np.tanh(h)
                s = 1.0 - t * t
                dt_ = s * dh
                ddt = s * ddh - 2.0 * t * s * dh * dh
                tape.append(("tanh", t, s, dh, ddh))
                h, dh, ddh = (round_storage(v, prec) for v in (t, dt_, ddt))
    return h[:, 0], dh[:, 0], ddh[:, 0], tape


def forward_batch(params: NetworkParams, x):
    """(psi, psi', psi'') as arrays over a batch of points."""
    v, dv, ddv, _ = forward_tape(params, x)
    return v, dv, ddv


def forward_triple(params: NetworkParams, x: float) -> EvalTriple:
    """(psi, psi', psi'') at one point; raises NonFiniteError on NaN/inf."""
    v, dv, ddv = forward_batch(params, [x])
    out = EvalTriple(float(v[0]), float(dv[0]), float(ddv[0]))
    if not (np.isfinite(out.value) and np.isfinite(out.dvalue) and np.isfinite(out.ddvalue)):
        raise NonFiniteError(f"network evaluation at x={x} is not finite")
    return out


# -- reverse accumulation ----------------------------------------------------

def vjp_from_tape(params: NetworkParams, tape, w_value, w_dvalue, w_ddvalue) -> np.ndarray:
    """Gradient of sum_k [w0_k psi(x_k) + w1_k psi'(x_k) + w2_k psi''(x_k)]
    with respect to the flat parameter vector, reusing a forward tape.

    This is one reverse sweep; cotangents for the (value, dvalue, ddvalue)
    channels propagate jointly.  Accumulation happens in the compute
    dtype, the result is returned as float64.
    """
    cdt = compute_dtype(params.precision)
    n = len(np.asarray(w_value).reshape(-1))
    gh = np.asarray(w_value, dtype=cdt).reshape(n, 1)
    gdh = np.asarray(w_dvalue, dtype=cdt).reshape(n, 1)
    gddh = np.asarray(w_ddvalue, dtype=cdt).reshape(n, 1)

    grads_w = [None] * len(params.weights)
    grads_b = [None] * len(params.offsets)
    layer = len(params.weights) - 1
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        for entry in reversed(tape):
            if entry[0] == "affine":
                _, h, dh, ddh, w = entry
                grads_w[layer] = gh.T @ h + gdh.T @ dh + gddh.T @ ddh
                grads_b[layer] = gh.sum(axis=0)
                gh = gh @ w
                gdh = gdh @ w
                gddh = gddh @ w
                layer -= 1
            else:
                _, t, s, dh, ddh = entry
                ts = t * s
                ga = gh * s - 2.0 * gdh * ts * dh - gddh * (2.0 * ts * ddh
                                                            + 2.0 * dh * dh * s * (s - 2.0 * t * t))
                gda = gdh * s - 4.0 * gddh * ts * dh
                gdda = gddh * s
                gh, gdh, gddh = ga, gda, gdda

    parts = []
    for gw, gb in zip(grads_w, grads_b):
        parts.append(np.asarray(gw, dtype=np.float64).ravel())
        parts.append(np.asarray(gb, dtype=np.float64).ravel())
    return np.concatenate(parts)


def vjp_batch(params: NetworkParams, x, w_value, w_dvalue, w_ddvalue) -> np.ndarray:
    """Convenience wrapper: fresh forward tape + one reverse sweep."""
    _, _, _, tape = forward_tape(params, x)
    return vjp_from_tape(params, tape, w_value, w_dvalue, w_ddvalue)


def grad_params(params: NetworkParams, x: float):
    """Gradients of psi(x), psi'(x), psi''(x) w.r.t. every parameter entry.

    Returns three float64 vectors of length ``arch.param_count``.
    """
    g_v = vjp_batch(params, [x], [1.0], [0.0], [0.0])
    g_dv = vjp_batch(params, [x], [0.0], [1.0], [0.0])
    g_ddv = vjp_batch(params, [x], [0.0], [0.0], [1.0])
    for g in (g_v, g_dv, g_ddv):
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("parameter gradient is not finite")
    return g_v, g_dv, g_ddv
