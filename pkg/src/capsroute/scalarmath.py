"""Scalar building blocks for agreement routing.

The agreement measure ``psi`` and its derivative, the stable row
potential ``log_sum_exp`` with its gradient ``softmax``, the conjugate
``neg_entropy`` on the probability simplex, and the ``squash``
nonlinearity. Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "psi",
    "psi_prime",
    "log_sum_exp",
    "softmax",
    "neg_entropy",
    "squash",
    "SIMPLEX_ENTRY_TOL",
    "SIMPLEX_SUM_TOL",
]

# Simplex membership: entries may dip this far below zero (clipped to 0),
# and the coordinate sum may deviate this far from 1.
SIMPLEX_ENTRY_TOL = 1e-12
SIMPLEX_SUM_TOL = 1e-9


def _as_vector(x, op: str) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{op}: expected a 1-D vector, got shape {v.shape}")
    if v.size == 0:
        raise ValueError(f"{op}: empty vector")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{op}: non-finite entry in input")
    return v


def psi(z: float) -> float:
    """Agreement of a nonnegative norm: ``z - arctan(z)``.

    Nonnegative and strictly increasing on its domain. Restricted to
    ``z >= 0`` because it is only ever applied to vector norms.
    """
    z = float(z)
    if not math.isfinite(z):
        raise ValueError(f"psi: non-finite input {z!r}")
    if z < 0.0:
        raise ValueError(f"psi: negative input {z!r} (domain is z >= 0)")
    return z - math.atan(z)


def psi_prime(z: float) -> float:
    """Derivative of :func:`psi`: ``z**2 / (1 + z**2)``, in ``[0, 1)``."""
    z = float(z)
    if not math.isfinite(z):
        raise ValueError(f"psi_prime: non-finite input {z!r}")
    if z < 0.0:
        raise ValueError(f"psi_prime: negative input {z!r} (domain is z >= 0)")
    z2 = z * z
    return z2 / (1.0 + z2)


def log_sum_exp(x) -> float:
    """``log(sum(exp(x_j)))`` of a vector, shifted by the max for stability."""
    v = _as_vector(x, "log_sum_exp")
    m = float(np.max(v))
    return m + math.log(float(np.sum(np.exp(v - m))))


def softmax(x) -> np.ndarray:
    """Probability vector ``exp(x) / sum(exp(x))``.

    Equals the gradient of :func:`log_sum_exp` at ``x``; computed with
    max-shifting so large inputs do not overflow.
    """
    v = _as_vector(x, "softmax")
    e = np.exp(v - np.max(v))
    return e / np.sum(e)


def neg_entropy(y) -> float:
    """``sum(y_i * log(y_i))`` for ``y`` on the probability simplex.

    Entries in ``[-SIMPLEX_ENTRY_TOL, 0)`` are treated as exact zeros,
    with the usual ``0 * log(0) = 0`` convention. For any ``y`` off the
    simplex the conjugate is unbounded and ``math.inf`` is returned.
    """
    v = _as_vector(y, "neg_entropy")
    if np.any(v < -SIMPLEX_ENTRY_TOL):
        return math.inf
    if abs(float(np.sum(v)) - 1.0) > SIMPLEX_SUM_TOL:
        return math.inf
    total = 0.0
    for yi in v:
        if yi > 0.0:
            total += yi * math.log(yi)
    return total


def squash(s) -> np.ndarray:
    """Length-limiting nonlinearity ``(|s|^2 / (1 + |s|^2)) * s / |s|``.

    The zero vector maps to itself (the removable singularity at the
    origin), and the result norm is always strictly below 1.
    """
    v = _as_vector(s, "squash")
    n2 = float(np.dot(v, v))
    if n2 == 0.0:
        return np.zeros_like(v)
    return (n2 / (1.0 + n2)) * (v / math.sqrt(n2))
