"""Limited-memory BFGS over flat parameter vectors.

Two-loop recursion with a strong-Wolfe line search (bracketing plus cubic
interpolation in the zoom phase).  Everything runs in float64 and is
fully deterministic: same inputs, same iterate sequence.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

CONVERGED = "converged"
MAX_ITERS = "max_iters"
LINE_SEARCH_FAILURE = "line_search_failure"
DIVERGED = "diverged"

# Relative curvature threshold below which an (s, y) pair is discarded.
_CURVATURE_EPS = 1e-10


@dataclass
class LbfgsConfig:
    history_size: int = 50
    max_iterations: int = 50_000
    gradient_tolerance: float = 1e-8
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    max_line_search_steps: int = 40

    def __post_init__(self):
        if not 0 < self.wolfe_c1 < self.wolfe_c2 < 1:
            raise ValueError("need 0 < c1 < c2 < 1")
        if self.history_size < 1:
            raise ValueError("history_size must be >= 1")


@dataclass
class OptimResult:
    final_params: np.ndarray
    final_loss: float
    iterations: int
    status: str
    grad_norm: float = math.nan
    n_evaluations: int = 0


@dataclass
class _TraceEntry:
    x: np.ndarray
    loss: float
    grad: np.ndarray
    direction: np.ndarray
    step: float


def _two_loop(grad, history):
    """H_k * grad via the standard two-loop recursion."""
    q = grad.copy()
    alphas = []
    for s, y, rho in reversed(history):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    s, y, _ = history[-1]
    q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(history, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q


def _cubic_min(a, fa, da, b, fb, db):
    """Minimizer of the cubic through (a, fa, da), (b, fb, db); nan on failure."""
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0.0 or not np.isfinite(disc):
        return math.nan
    d2 = math.copysign(math.sqrt(disc), b - a)
    denom = db - da + 2.0 * d2
    if denom == 0.0 or not np.isfinite(denom):
        return math.nan
    return b - (b - a) * (db + d2 - d1) / denom


def minimize(loss_and_grad, x0, config: LbfgsConfig | None = None,
             trace: list | None = None) -> OptimResult:
    """Minimize ``loss_and_grad``: x -> (loss, grad) starting from x0.

    Terminates when the max-norm of the gradient drops below
    ``gradient_tolerance``, on the iteration budget, when no Wolfe step
    can be found, or with ``diverged`` once loss or gradient stops being
    finite (the run is reported, not raised).
    """
    cfg = config or LbfgsConfig()
    x = np.array(x0, dtype=np.float64)
    n_evals = 0

    def evaluate(pt):
        nonlocal n_evals
        n_evals += 1
        f, g = loss_and_grad(pt)
        f = float(f)
        g = np.asarray(g, dtype=np.float64)
        ok = np.isfinite(f) and bool(np.all(np.isfinite(g)))
        return f, g, ok

    f, g, ok = evaluate(x)
    if not ok:
        return OptimResult(x, f, 0, DIVERGED, math.inf, n_evals)

    history: deque = deque(maxlen=cfg.history_size)
    status = MAX_ITERS
    iterations = 0

    for _ in range(cfg.max_iterations):
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
        if gnorm <= cfg.gradient_tolerance:
            status = CONVERGED
            break

        if history:
            d = -_two_loop(g, history)
            if d @ g >= 0.0:  # not a descent direction; restart from steepest
                history.clear()
                d = -g
        else:
            d = -g

        a_init = 1.0 if iterations > 0 else min(1.0, 1.0 / max(1.0, float(np.sum(np.abs(g)))))
        step = _wolfe_search(evaluate, x, f, g, d, a_init, cfg)
        if step is None:
            status = LINE_SEARCH_FAILURE
            break
        alpha, f_new, g_new, diverged = step
        if diverged:
            status = DIVERGED
            f, g = f_new, g_new
            x = x + alpha * d
            iterations += 1
            break

        if trace is not None:
            trace.append(_TraceEntry(x.copy(), f, g.copy(), d.copy(), alpha))

        s = alpha * d
        y = g_new - g
        sy = float(s @ y)
        if sy > _CURVATURE_EPS * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            history.append((s, y, 1.0 / sy))
        x = x + s
        f, g = f_new, g_new
        iterations += 1

    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    if status == MAX_ITERS and gnorm <= cfg.gradient_tolerance:
        status = CONVERGED
    return OptimResult(x, f, iterations, status, gnorm, n_evals)


def _wolfe_search(evaluate, x, f0, g0, d, a_init, cfg: LbfgsConfig):
    """Strong-Wolfe step along d.

    Returns (alpha, f, g, diverged) or None when no acceptable step exists
    within the evaluation budget.  ``diverged`` is set when every probe of
    the loss came back non-finite, which the caller records as a diverged
    run rather than an error.
    """
    dphi0 = float(g0 @ d)
    if dphi0 >= 0.0:
        return None
    budget = cfg.max_line_search_steps
    c1, c2 = cfg.wolfe_c1, cfg.wolfe_c2
    evals = 0
    saw_finite = False

    def phi(a):
        nonlocal evals, saw_finite
        evals += 1
        fv, gv, ok = evaluate(x + a * d)
        if ok:
            saw_finite = True
            return fv, float(gv @ d), gv
        return math.inf, math.inf, gv

    a_prev, f_prev, d_prev = 0.0, f0, dphi0
    a = a_init
    a_max = 1e20
    bracket = None
    while evals < budget:
        fa, da, ga = phi(a)
        if fa > f0 + c1 * a * dphi0 or (evals > 1 and fa >= f_prev):
            bracket = (a_prev, f_prev, d_prev, a, fa, da)
            break
        if abs(da) <= -c2 * dphi0:
            return a, fa, ga, False
        if da >= 0.0:
            bracket = (a, fa, da, a_prev, f_prev, d_prev)
            break
        a_prev, f_prev, d_prev = a, fa, da
        a = min(2.0 * a, a_max)
        if a >= a_max:
            return None

    if bracket is None:
        # budget exhausted while still extending: report divergence if the
        # loss was never finite, otherwise give up on this direction
        if not saw_finite:
            fa, _, ga = math.inf, math.inf, g0
            return a, fa, ga, True
        return None

    lo, f_lo, d_lo, hi, f_hi, d_hi = bracket
    while evals < budget:
        a = _cubic_min(lo, f_lo, d_lo, hi, f_hi, d_hi)
        width = abs(hi - lo)
        inside = np.isfinite(a) and min(lo, hi) + 0.05 * width < a < max(lo, hi) - 0.05 * width
        if not inside:
            a = 0.5 * (lo + hi)
        fa, da, ga = phi(a)
        if fa > f0 + c1 * a * dphi0 or fa >= f_lo:
            hi, f_hi, d_hi = a, fa, da
        else:
            if abs(da) <= -c2 * dphi0:
                return a, fa, ga, False
            if da * (hi - lo) >= 0.0:
                hi, f_hi, d_hi = lo, f_lo, d_lo
            lo, f_lo, d_lo = a, fa, da
        if abs(hi - lo) <= 1e-16 * max(1.0, abs(lo)):
            break

    if not saw_finite:
        return 1.0, math.inf, g0, True
    return None
