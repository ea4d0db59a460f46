"""Matrix-level energies, their gradients, and verification diagnostics.

The routing objective assigns a coupling matrix the negated total
agreement ``-sum_j psi(|U_j c_j|)``; the logit potential sums the
row-wise log-sum-exp. Their gradients reproduce the routing updates,
and the gap operations (Fenchel, Lyapunov, finite-difference, chord)
turn the convergence and conjugacy claims into machine-checkable
numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .scalarmath import log_sum_exp, neg_entropy, psi, softmax, squash
from .types import CouplingMatrix, LogitMatrix, PredictionSet

__all__ = [
    "GapReport",
    "big_psi",
    "grad_big_psi",
    "big_phi",
    "grad_big_phi",
    "big_phi_star",
    "fenchel_gap",
    "lyapunov_gap",
    "fd_gradient",
    "chord_convexity_probe",
    "FENCHEL_TOL",
    "LYAPUNOV_TOL",
    "CHORD_TOL",
    "FD_STEP",
]

FENCHEL_TOL = 1e-10
LYAPUNOV_TOL = 1e-9
CHORD_TOL = 1e-12
# Central differences at 64-bit: balances truncation against round-off.
FD_STEP = 1e-5


@dataclass(frozen=True)
class GapReport:
    """Outcome of a numerical check.

    Gap-style reports (descent slack, Fenchel slack, chord slack) pass
    when ``value >= -tolerance``: the quantity is nonnegative in exact
    arithmetic and may only dip below zero by round-off. Divergence-style
    reports invert the comparison and pass when ``value <= tolerance``.
    """

    value: float
    tolerance: float
    passed: bool
    context: str = ""

    @classmethod
    def from_gap(cls, value: float, tolerance: float, context: str = "") -> "GapReport":
        value = float(value)
        return cls(value=value, tolerance=float(tolerance),
                   passed=value >= -float(tolerance), context=context)

    @classmethod
    def from_divergence(cls, value: float, tolerance: float, context: str = "") -> "GapReport":
        value = float(value)
        return cls(value=value, tolerance=float(tolerance),
                   passed=value <= float(tolerance), context=context)


def _coupling_values(c) -> np.ndarray:
    if isinstance(c, CouplingMatrix):
        return c.values
    arr = np.asarray(c, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D coupling argument, got shape {arr.shape}")
    return arr


def _logit_values(b) -> np.ndarray:
    if isinstance(b, LogitMatrix):
        return b.values
    arr = np.asarray(b, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D logit argument, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("logit argument has a non-finite entry")
    return arr


def _check_shape(preds: PredictionSet, c: np.ndarray, op: str):
    if c.shape != (preds.num_input, preds.num_output):
        raise ValueError(
            f"{op}: coupling shape {c.shape} does not match instance "
            f"({preds.num_input}, {preds.num_output})"
        )


def big_psi(preds: PredictionSet, coupling) -> float:
    """Routing energy of a coupling matrix: negated total agreement.

    ``-sum_j psi(|U_j c_j|)`` where ``c_j`` is column ``j``. Always <= 0;
    concave in the coupling argument, which may be any real matrix of the
    right shape (not just a row-stochastic one).
    """
    c = _coupling_values(coupling)
    _check_shape(preds, c, "big_psi")
    return -math.fsum(
        psi(float(np.linalg.norm(u @ c[:, j]))) for j, u in enumerate(preds.predictions)
    )


def grad_big_psi(preds: PredictionSet, coupling) -> np.ndarray:
    """Gradient of :func:`big_psi`; column ``j`` is ``-U_j^T squash(U_j c_j)``.

    The sign is fixed so the logit update ``B - grad`` accumulates the
    agreement ``U_j^T v_j`` exactly as the scalar procedure does.
    """
    c = _coupling_values(coupling)
    _check_shape(preds, c, "grad_big_psi")
    cols = [-(u.T @ squash(u @ c[:, j])) for j, u in enumerate(preds.predictions)]
    return np.column_stack(cols)


def big_phi(logits) -> float:
    """Logit potential: sum of log-sum-exp over rows."""
    b = _logit_values(logits)
    return math.fsum(log_sum_exp(row) for row in b)


def grad_big_phi(logits) -> CouplingMatrix:
    """Gradient of :func:`big_phi`: the row-wise softmax, as a coupling."""
    b = _logit_values(logits)
    return CouplingMatrix(np.vstack([softmax(row) for row in b]))


def big_phi_star(coupling) -> float:
    """Conjugate of the logit potential: summed row negative entropies.

    Finite on row-stochastic input; a row off the probability simplex is
    rejected because the conjugate is unbounded there.
    """
    c = _coupling_values(coupling)
    total = 0.0
    for i, row in enumerate(c):
        h = neg_entropy(row)
        if math.isinf(h):
            raise ValueError(f"row {i} is off the probability simplex")
        total += h
    return total


def fenchel_gap(x, y, tolerance: float = FENCHEL_TOL) -> GapReport:
    """Fenchel-Young slack ``lse(x) + negentropy(y) - x.y``; >= 0 always.

    Zero (to round-off) exactly when ``y = softmax(x)``.
    """
    xv = np.asarray(x, dtype=np.float64)
    yv = np.asarray(y, dtype=np.float64)
    if xv.shape != yv.shape or xv.ndim != 1:
        raise ValueError(f"fenchel_gap: mismatched shapes {xv.shape} and {yv.shape}")
    h = neg_entropy(yv)
    if math.isinf(h):
        raise ValueError("fenchel_gap: y is off the probability simplex")
    value = log_sum_exp(xv) + h - float(xv @ yv)
    return GapReport.from_gap(value, tolerance, context="fenchel")


def lyapunov_gap(preds: PredictionSet, c_prev, c_next,
                 tolerance: float = LYAPUNOV_TOL) -> GapReport:
    """Descent slack between consecutive routing iterates.

    ``energy(prev) - energy(next) - |prev - next|_F^2``, nonnegative for
    iterates produced by the routing update.
    """
    prev = _coupling_values(c_prev)
    nxt = _coupling_values(c_next)
    _check_shape(preds, prev, "lyapunov_gap")
    _check_shape(preds, nxt, "lyapunov_gap")
    delta2 = float(np.sum((prev - nxt) ** 2))
    value = big_psi(preds, prev) - big_psi(preds, nxt) - delta2
    return GapReport.from_gap(value, tolerance, context="lyapunov")


def fd_gradient(f: Callable[[np.ndarray], float], at, step: float = FD_STEP) -> np.ndarray:
    """Central-difference gradient of a scalar function of an array."""
    x = np.array(at, dtype=np.float64, copy=True)
    step = float(step)
    if not (math.isfinite(step) and step > 0.0):
        raise ValueError(f"fd_gradient: step must be positive, got {step!r}")
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + step
        hi = float(f(x))
        x[idx] = orig - step
        lo = float(f(x))
        x[idx] = orig
        if not (math.isfinite(hi) and math.isfinite(lo)):
            raise ValueError(f"fd_gradient: non-finite function value near index {idx}")
        grad[idx] = (hi - lo) / (2.0 * step)
    return grad


def chord_convexity_probe(f: Callable[[np.ndarray], float], shape, samples: int,
                          seed: int, low: float = -5.0, high: float = 5.0,
                          tolerance: float = CHORD_TOL,
                          thetas=(0.25, 0.5, 0.75)) -> GapReport:
    """Sampled convexity check: minimum chord slack over random pairs.

    Draws ``samples`` seeded point pairs from the box ``[low, high]`` and
    evaluates ``(1-t) f(x) + t f(y) - f((1-t) x + t y)`` at each blend
    weight. For a convex ``f`` every slack is nonnegative up to round-off;
    a concave ``f`` fails decisively.
    """
    if samples < 1:
        raise ValueError(f"chord_convexity_probe: samples must be >= 1, got {samples}")
    rng = np.random.default_rng(seed)
    if isinstance(shape, int):
        shape = (shape,)
    worst = math.inf
    for _ in range(samples):
        x = rng.uniform(low, high, size=shape)
        y = rng.uniform(low, high, size=shape)
        fx = float(f(x))
        fy = float(f(y))
        if not (math.isfinite(fx) and math.isfinite(fy)):
            raise ValueError("chord_convexity_probe: non-finite function value")
        for t in thetas:
            mid = float(f((1.0 - t) * x + t * y))
            if not math.isfinite(mid):
                raise ValueError("chord_convexity_probe: non-finite function value")
            worst = min(worst, (1.0 - t) * fx + t * fy - mid)
    return GapReport.from_gap(worst, tolerance, context=f"chord probe seed={seed}")
