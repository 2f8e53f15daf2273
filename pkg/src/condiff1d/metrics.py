"""Discrete l2 / h1 error functionals against the analytic reference.

The test grid holds ten times more points than were used for training and
is the midpoint-uniform grid, so metrics are deterministic.  Accumulation
always happens in double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .problem import AnalyticSolution

TEST_POINT_FACTOR = 10


@dataclass(frozen=True)
class ErrorReport:
    e_l2: float
    e_h1: float
    overflow_flag: bool
    n_test_points: int


def test_grid(k_train: int) -> np.ndarray:
    """Midpoints of a uniform grid on (0, 1) with 10*k_train cells."""
    if k_train < 1:
        raise ValueError("k_train must be >= 1")
    n = TEST_POINT_FACTOR * k_train
    return (np.arange(n, dtype=np.float64) + 0.5) / n


def compute_errors(predict, sol: AnalyticSolution, k_train: int) -> ErrorReport:
    """RMS errors of values (l2) and first derivatives (h1 semi-norm).

    ``predict`` maps an array of points to (u, u').  Any non-finite
    prediction sets the overflow flag and reports infinite errors.
    """
    x = test_grid(k_train)
    u_exact, du_exact = sol.eval(x)
    u_pred, du_pred = predict(x)
    u_pred = np.asarray(u_pred, dtype=np.float64)
    du_pred = np.asarray(du_pred, dtype=np.float64)
    if not (np.all(np.isfinite(u_pred)) and np.all(np.isfinite(du_pred))):
        return ErrorReport(math.inf, math.inf, True, len(x))
    e_l2 = math.sqrt(float(np.mean((u_exact - u_pred) ** 2)))
    e_h1 = math.sqrt(float(np.mean((du_exact - du_pred) ** 2)))
    return ErrorReport(e_l2, e_h1, False, len(x))
