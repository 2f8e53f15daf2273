"""Problem instance and closed-form reference solution.

The equation on (0, 1) is

    -epsilon * u'' + drift * u' = source,

with Robin conditions  -alpha*u'(0) + kappa*u(0) = g0  and
alpha*u'(1) + kappa*u(1) = g1.  The constant drift derives from the linear
potential V(x) = -drift * x (gauge V(0) = 0), which is what the
change-of-variable formulations build on.

Everything in this module runs in double precision regardless of the
experiment's working precision: the reference solution must not inherit
the precision under study.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Exponent magnitude beyond which exp() is refused instead of returning inf.
# Chosen near the double-precision exp limit (exp overflows at ~709.8).
EXP_GUARD = 700.0


class SingularSystem(ValueError):
    """The Robin boundary system for the integration constants is singular."""


class ZeroDrift(ValueError):
    """Operation requires a nonzero constant drift."""


class DomainError(ValueError):
    """Evaluation point outside [0, domain_end]."""


class OverflowGuard(FloatingPointError):
    """An exponential factor would leave the double-precision range."""


@dataclass(frozen=True)
class ProblemSpec:
    """Scalar coefficients of one convection-diffusion instance.

    ``bulk_weight`` is the weight of the bulk residual term in the
    collocation losses; the boundary term gets ``1 - bulk_weight``.
    """

    epsilon: float
    drift: float = 1.0
    source: float = 1.0
    alpha: float = 1e-3
    kappa: float = 1.0
    g0: float = 0.0
    g1: float = 0.0
    bulk_weight: float = 0.5

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive (variational forms need alpha > 0)")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if not 0 < self.bulk_weight < 1:
            raise ValueError("bulk_weight must lie in (0, 1)")

    # -- linear potential, V(x) = -drift*x with V(0) = 0 ---------------------

    def potential(self, x):
        return -self.drift * np.asarray(x, dtype=np.float64)

    def potential_derivs(self, x):
        """(V, V', V'') at x; V' = -drift and V'' = 0 for constant drift."""
        x = np.asarray(x, dtype=np.float64)
        return (-self.drift * x,
                np.full_like(x, -self.drift),
                np.zeros_like(x))

    def zpde_coefficient(self) -> float:
        """V''/(2 eps) + (V')^2/(4 eps^2), constant for the linear potential."""
        return self.drift**2 / (4.0 * self.epsilon**2)

    def coercivity_report(self) -> "CoercivityReport":
        """Check the coercivity conditions of the symmetrized weak form.

        Bulk: F^2/(4 eps^2) > 0.  Boundary, at each endpoint:
        kappa/alpha + F n/(2 eps) >= 0 with n = -1 at x=0 and +1 at x=1,
        so for F > 0 the inflow endpoint binds: eps >= alpha F / (2 kappa).
        """
        bulk = self.zpde_coefficient()
        left = self.kappa / self.alpha - self.drift / (2.0 * self.epsilon)
        right = self.kappa / self.alpha + self.drift / (2.0 * self.epsilon)
        return CoercivityReport(bulk_coefficient=bulk, left_boundary=left,
                                right_boundary=right)


@dataclass(frozen=True)
class CoercivityReport:
    bulk_coefficient: float
    left_boundary: float
    right_boundary: float

    @property
    def bulk_ok(self) -> bool:
        return self.bulk_coefficient > 0

    @property
    def boundary_ok(self) -> bool:
        return self.left_boundary >= 0 and self.right_boundary >= 0

    @property
    def ok(self) -> bool:
        return self.bulk_ok and self.boundary_ok


@dataclass(frozen=True)
class AnalyticSolution:
    """u(x) = c1 + c2*exp(drift*x/eps) + (source/drift)*x."""

    c1: float
    c2: float
    spec: ProblemSpec = field(repr=False)

    def eval(self, x):
        """(u, u') at x, double precision; x may be a scalar or an array."""
        x = _check_domain(x)
        s = self.spec
        q = s.drift / s.epsilon
        t = _scaled_exp(self.c2, q * x)
        u = self.c1 + t + (s.source / s.drift) * x
        du = _scaled_exp(self.c2 * q, q * x) + s.source / s.drift
        return u, du

    def eval_second(self, x):
        """u'' at x (exact differentiation of the exponential profile)."""
        x = _check_domain(x)
        q = self.spec.drift / self.spec.epsilon
        return _scaled_exp(self.c2 * q * q, q * x)

    def exact_z(self, x):
        """(z, z') with z = u * exp(-F x/(2 eps)); test oracle for z-methods.

        This is the symmetrizing direction: z solves
        -z'' + (F^2/(4 eps^2)) z = (f/eps) exp(-F x/(2 eps)) exactly.
        Refuses (OverflowGuard) when the exponent magnitude exceeds the
        double exp limit instead of silently producing inf/0.
        """
        x = _check_domain(x)
        s = self.spec
        half_rate = s.drift / (2.0 * s.epsilon)
        expo = -half_rate * x
        if np.any(np.abs(expo) > EXP_GUARD):
            raise OverflowGuard(
                f"exp exponent {float(np.max(np.abs(expo))):.3g} exceeds guard {EXP_GUARD}")
        factor = np.exp(expo)
        u, du = self.eval(x)
        z = u * factor
        dz = factor * (du - half_rate * u)
        return z, dz

    def max_abs(self, n: int = 2001) -> float:
        """max |u| on a dense uniform grid, used by oscillation checks."""
        x = np.linspace(0.0, 1.0, n)
        return float(np.max(np.abs(self.eval(x)[0])))


def _check_domain(x):
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise DomainError("evaluation point outside [0, 1]")
    return x


def _scaled_exp(coeff, exponent):
    """coeff * exp(exponent), evaluated in log space to dodge intermediate
    overflow when coeff is tiny and the exponent large (drift/eps up to
    several hundred)."""
    exponent = np.asarray(exponent, dtype=np.float64)
    if coeff == 0.0:
        return np.zeros_like(exponent)
    mag = math.log(abs(coeff)) + exponent
    if np.any(mag > EXP_GUARD):
        raise OverflowGuard("analytic profile exceeds the double exp range")
    return math.copysign(1.0, coeff) * np.exp(mag)


def solve_analytic(spec: ProblemSpec) -> AnalyticSolution:
    """Integration constants from the 2x2 Robin boundary system.

    The system is

        [kappa, kappa - alpha*F/e      ] [c1]   [g0 + alpha*f/F          ]
        [kappa, (kappa + alpha*F/e)*E  ] [c2] = [g1 - (f/F)*(kappa+alpha)]

    with E = exp(F/e).  For large F/e the second row is rescaled by 1/E
    before solving so no intermediate overflows.
    """
    s = spec
    if s.drift == 0.0:
        raise ZeroDrift("analytic profile requires a nonzero drift")
    q = s.drift / s.epsilon

    row1 = np.array([s.kappa, s.kappa - s.alpha * q], dtype=np.float64)
    rhs1 = s.g0 + s.alpha * s.source / s.drift
    rhs2 = s.g1 - (s.source / s.drift) * (s.kappa + s.alpha)
    if q > 50.0:
        # divided by exp(q): second row becomes [kappa*exp(-q), kappa + alpha*q]
        scale = math.exp(-q) if q < EXP_GUARD else 0.0
        row2 = np.array([s.kappa * scale, s.kappa + s.alpha * q], dtype=np.float64)
        rhs2 = rhs2 * scale
    else:
        e_q = math.exp(q)
        row2 = np.array([s.kappa, (s.kappa + s.alpha * q) * e_q], dtype=np.float64)

    mat = np.vstack([row1, row2])
    det = mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0]
    norm = np.linalg.norm(row1) * np.linalg.norm(row2)
    if norm == 0.0 or abs(det) < 1e-14 * norm:
        raise SingularSystem(
            f"boundary system is singular (|det|={abs(det):.3g}, scale={norm:.3g})")
    c1, c2 = np.linalg.solve(mat, np.array([rhs1, rhs2], dtype=np.float64))
    return AnalyticSolution(c1=float(c1), c2=float(c2), spec=spec)
