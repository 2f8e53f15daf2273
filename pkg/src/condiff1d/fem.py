"""P1 Galerkin baseline on a uniform mesh of (0, 1).

The weak form (original equation divided by epsilon, Robin conditions
eliminated through the boundary term) is

    a(u, v) = int u'v' + (F/eps) int u'v + (kappa/alpha) [uv](0) + [uv](1)
    l(v)    = (f/eps) int v + (1/alpha) (g0 v(0) + g1 v(1)).

All element integrals have closed forms for constant coefficients, so the
assembly is exact; the tridiagonal system is solved by the Thomas
algorithm in double precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .problem import ProblemSpec


class ZeroPivot(ArithmeticError):
    """Elimination hit a vanishing pivot (ill-conditioned regime)."""


@dataclass
class FemSystem:
    spec: ProblemSpec
    n_nodes: int
    h: float
    lower: np.ndarray  # sub-diagonal, length N-1
    diag: np.ndarray   # length N
    upper: np.ndarray  # super-diagonal, length N-1
    rhs: np.ndarray
    coeffs: np.ndarray | None = field(default=None)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_nodes)


def assemble(spec: ProblemSpec, n_nodes: int) -> FemSystem:
    """Tridiagonal stiffness + convection + Robin boundary system."""
    if n_nodes < 3:
        raise ValueError("need at least 3 nodes")
    n = n_nodes
    h = 1.0 / (n - 1)
    ratio = spec.drift / spec.epsilon

    diag = np.full(n, 2.0 / h)
    diag[0] = diag[-1] = 1.0 / h
    lower = np.full(n - 1, -1.0 / h)
    upper = np.full(n - 1, -1.0 / h)

    # convection int phi_j' phi_i: skew stencil (-1/2, 0, 1/2), corner rows
    # (-1/2, 1/2) at the left and (-1/2, 1/2) ending on the diagonal at the right
    lower += ratio * (-0.5)
    upper += ratio * 0.5
    diag[0] += ratio * (-0.5)
    diag[-1] += ratio * 0.5

    # Robin boundary mass
    diag[0] += spec.kappa / spec.alpha
    diag[-1] += spec.kappa / spec.alpha

    rhs = np.full(n, (spec.source / spec.epsilon) * h)
    rhs[0] = (spec.source / spec.epsilon) * (h / 2.0) + spec.g0 / spec.alpha
    rhs[-1] = (spec.source / spec.epsilon) * (h / 2.0) + spec.g1 / spec.alpha

    return FemSystem(spec, n, h, lower, diag, upper, rhs)


def solve(system: FemSystem) -> np.ndarray:
    """Thomas elimination; stores and returns the nodal coefficients."""
    n = system.n_nodes
    c = np.empty(n)
    d = system.diag.astype(np.float64).copy()
    r = system.rhs.astype(np.float64).copy()
    up = system.upper
    lo = system.lower
    for i in range(1, n):
        piv = d[i - 1]
        if abs(piv) < 1e-14:
            raise ZeroPivot(f"pivot {piv:.3g} at row {i - 1}")
        m = lo[i - 1] / piv
        d[i] -= m * up[i - 1]
        r[i] -= m * r[i - 1]
    if abs(d[-1]) < 1e-14:
        raise ZeroPivot(f"pivot {d[-1]:.3g} at last row")
    c[-1] = r[-1] / d[-1]
    for i in range(n - 2, -1, -1):
        c[i] = (r[i] - up[i] * c[i + 1]) / d[i]
    system.coeffs = c
    return c


def eval_fem(system: FemSystem, x):
    """(u_N, u_N') at x: linear interpolation and its cellwise slope."""
    if system.coeffs is None:
        solve(system)
    c = system.coeffs
    x = np.asarray(x, dtype=np.float64)
    h = system.h
    cell = np.clip((x / h).astype(np.int64), 0, system.n_nodes - 2)
    t = x / h - cell
    u = (1.0 - t) * c[cell] + t * c[cell + 1]
    du = (c[cell + 1] - c[cell]) / h
    return u, du


def fem_predictor(spec: ProblemSpec, n_nodes: int):
    """Assemble + solve once, return a predict(x) -> (u, u') callable."""
    system = assemble(spec, n_nodes)
    solve(system)
    return lambda x: eval_fem(system, x)
