"""Floating-point precision tags and the rounding discipline they imply.

Three working precisions are supported: ``half``, ``single`` and ``double``.
Half precision is emulated: values are *stored* as float16 but every
arithmetic stage accumulates in float32 and rounds the result back to
float16.  Single and double map directly onto float32/float64.
"""

from __future__ import annotations

import numpy as np

HALF = "half"
SINGLE = "single"
DOUBLE = "double"
PRECISIONS = (HALF, SINGLE, DOUBLE)

_STORAGE = {HALF: np.float16, SINGLE: np.float32, DOUBLE: np.float64}
_COMPUTE = {HALF: np.float32, SINGLE: np.float32, DOUBLE: np.float64}

# CLI / CSV spellings
TAG_FROM_SHORT = {"f16": HALF, "f32": SINGLE, "f64": DOUBLE}
SHORT_FROM_TAG = {v: k for k, v in TAG_FROM_SHORT.items()}


def storage_dtype(precision: str) -> np.dtype:
    return np.dtype(_STORAGE[precision])


def compute_dtype(precision: str) -> np.dtype:
    return np.dtype(_COMPUTE[precision])


def round_storage(arr, precision: str) -> np.ndarray:
    """Round to the storage width, then widen back to the compute width.

    For ``single``/``double`` this is the identity (up to dtype); for
    ``half`` it quantizes to float16 and returns float32 values so the
    next stage accumulates in single precision.
    """
    a = np.asarray(arr).astype(_STORAGE[precision])
    return a.astype(_COMPUTE[precision])


def guarded_exp(exponent, precision: str):
    """exp(exponent) computed in double, rounded to the working precision.

    Returns ``(values, overflow, underflow)``.  ``overflow`` is set when a
    result exceeds the storage dtype's range (the rounded value is inf),
    ``underflow`` when a nonzero result drops below the storage dtype's
    smallest normal number (gradual underflow: the stored value keeps a
    handful of significant bits at best, or none when it flushes to 0).
    """
    e = np.asarray(exponent, dtype=np.float64)
    with np.errstate(over="ignore", under="ignore"):
        v = np.exp(e)
        stored = v.astype(_STORAGE[precision])
    tiny = np.finfo(_STORAGE[precision]).tiny
    overflow = bool(np.any(np.isinf(stored) & np.isfinite(e)))
    underflow = bool(np.any((np.abs(stored) < tiny) & (v != 0.0)))
    return stored.astype(_COMPUTE[precision]), overflow, underflow
