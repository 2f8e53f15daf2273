"""Quadrature and sampling rules discretizing the bulk/boundary integrals.

Three schemes: midpoint ``uniform``, iid ``random``, and the two-part
``exponential`` importance sampler whose second point set follows the
density exp(-V/(2 eps))/Z.  Bulk weights are domain_end/K rather than 1/K
so the same rules work on the rescaled domain (0, 1/eps); on (0, 1) this
reduces to the usual 1/K.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import EXP_GUARD, OverflowGuard, ProblemSpec, ZeroDrift

UNIFORM = "uniform"
RANDOM = "random"
EXPONENTIAL = "exponential"

SCHEME_FROM_SHORT = {"u": UNIFORM, "r": RANDOM, "e": EXPONENTIAL}
SHORT_FROM_SCHEME = {v: k for k, v in SCHEME_FROM_SHORT.items()}

# Philox stream tags decorrelating the two draws of the exponential scheme
# (and both from weight initialization, which uses its own tag).
BULK_STREAM = 0x5A01
BULK2_STREAM = 0x5A02


@dataclass
class QuadratureRule:
    bulk_x: np.ndarray
    bulk_w: np.ndarray
    boundary_x: np.ndarray
    boundary_w: np.ndarray
    domain_end: float
    scheme: str
    # exponential scheme only: source-term points, weights Z/K2, and Z itself
    bulk_x2: np.ndarray | None = None
    bulk_w2: np.ndarray | None = None
    z_norm: float | None = None


def _boundary(domain_end: float):
    return (np.array([0.0, domain_end]), np.array([1.0, 1.0]))


def uniform_rule(k: int, domain_end: float = 1.0) -> QuadratureRule:
    """Midpoints of a K-cell uniform grid, each weighted by the cell width."""
    if k < 1:
        raise ValueError("need at least one bulk point")
    h = domain_end / k
    x = (np.arange(k, dtype=np.float64) + 0.5) * h
    by, bw = _boundary(domain_end)
    return QuadratureRule(x, np.full(k, h), by, bw, domain_end, UNIFORM)


def random_rule(k: int, domain_end: float, seed: int) -> QuadratureRule:
    """K iid uniform points on (0, domain_end), weights domain_end/K."""
    if k < 1:
        raise ValueError("need at least one bulk point")
    rng = _rng(seed, BULK_STREAM)
    x = rng.uniform(0.0, domain_end, size=k)
    by, bw = _boundary(domain_end)
    return QuadratureRule(x, np.full(k, domain_end / k), by, bw, domain_end, RANDOM)


def exponential_rule(k1: int, k2: int, spec: ProblemSpec, seed: int) -> QuadratureRule:
    """Two-part rule on (0, 1): K1 uniform draws for the quadratic energy
    terms, K2 draws matching the source term's exponential factor.

    The source density of the symmetrized energy is proportional to
    exp(-F x/(2 eps)), a truncated exponential with rate a = F/(2 eps):
    the inverse CDF is -log1p(U * expm1(-a)) / a and the normalizer is
    Z = -expm1(-a)/a, both stable near a -> 0 and exact for large a.
    """
    if k1 < 1 or k2 < 1:
        raise ValueError("need at least one point in each part")
    if spec.drift == 0.0:
        raise ZeroDrift("exponential sampling needs a nonzero drift")
    a = spec.drift / (2.0 * spec.epsilon)
    if abs(a) > EXP_GUARD:
        raise OverflowGuard(
            f"exp(F/(2 eps)) exponent {a:.3g} exceeds the double range")
    z_norm = float(-np.expm1(-a) / a)
    rng1 = _rng(seed, BULK_STREAM)
    rng2 = _rng(seed, BULK2_STREAM)
    x1 = rng1.uniform(0.0, 1.0, size=k1)
    u = rng2.uniform(0.0, 1.0, size=k2)
    x2 = -np.log1p(u * np.expm1(-a)) / a
    by, bw = _boundary(1.0)
    return QuadratureRule(x1, np.full(k1, 1.0 / k1), by, bw, 1.0, EXPONENTIAL,
                          bulk_x2=x2, bulk_w2=np.full(k2, z_norm / k2),
                          z_norm=z_norm)


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, stream))))
