"""The two routing procedures and the generic descent step behind them.

``route_scalar`` runs the classic per-capsule procedure with literal
scalar loops; ``route_matrix`` runs the equivalent matrix form driven by
the energy gradients. The two must agree entrywise to round-off, which
``compare_trajectories`` makes checkable. ``nonlinear_gd_step`` exposes
the underlying mirror-style update ``u <- u - eta * grad_E(x)``,
``x <- grad_f(u)`` that both procedures instantiate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .energy import GapReport, grad_big_phi, grad_big_psi
from .scalarmath import psi, squash
from .types import (
    CouplingMatrix,
    LogitMatrix,
    OutputSet,
    PredictionSet,
    RoutingConfig,
    RoutingTrajectory,
    TrajectoryRecord,
    validate_prediction_set,
)

__all__ = [
    "RoutingState",
    "initial_state",
    "routing_step",
    "route_scalar",
    "route_matrix",
    "nonlinear_gd_step",
    "compare_trajectories",
    "EQUIVALENCE_TOL",
]

EQUIVALENCE_TOL = 1e-12


@dataclass(frozen=True)
class RoutingState:
    """One matrix-form loop state: logits, couplings, outputs, counter.

    The couplings must be the logit gradient image of the logits; the
    outputs are expected to come from the couplings and the instance the
    state is stepped with.
    """

    logits: LogitMatrix
    couplings: CouplingMatrix
    outputs: OutputSet
    iteration: int = 0

    def __post_init__(self):
        if int(self.iteration) < 0:
            raise ValueError(f"iteration must be >= 0, got {self.iteration}")
        object.__setattr__(self, "iteration", int(self.iteration))
        if self.logits.shape != self.couplings.shape:
            raise ValueError(
                f"logits shape {self.logits.shape} != couplings shape {self.couplings.shape}"
            )
        expect = grad_big_phi(self.logits).values
        drift = float(np.max(np.abs(expect - self.couplings.values)))
        if drift > EQUIVALENCE_TOL:
            raise ValueError(
                f"couplings deviate from softmax of logits by {drift!r}"
            )


def _outputs_from(preds: PredictionSet, coupling: CouplingMatrix) -> OutputSet:
    c = coupling.values
    net = tuple(u @ c[:, j] for j, u in enumerate(preds.predictions))
    return OutputSet(net_inputs=net, outputs=tuple(squash(s) for s in net))


def initial_state(preds) -> RoutingState:
    """Iteration-0 state: zero logits, uniform couplings, their outputs."""
    inst = validate_prediction_set(preds)
    logits = LogitMatrix(np.zeros((inst.num_input, inst.num_output)))
    coupling = grad_big_phi(logits)
    return RoutingState(logits=logits, couplings=coupling,
                        outputs=_outputs_from(inst, coupling), iteration=0)


def routing_step(preds, state: RoutingState) -> RoutingState:
    """One matrix-form update: descend the logits, re-derive the couplings."""
    inst = validate_prediction_set(preds)
    if state.logits.shape != (inst.num_input, inst.num_output):
        raise ValueError(
            f"state shape {state.logits.shape} does not match instance "
            f"({inst.num_input}, {inst.num_output})"
        )
    new_logits = LogitMatrix(state.logits.values - grad_big_psi(inst, state.couplings))
    new_coupling = grad_big_phi(new_logits)
    return RoutingState(
        logits=new_logits,
        couplings=new_coupling,
        outputs=_outputs_from(inst, new_coupling),
        iteration=state.iteration + 1,
    )


def nonlinear_gd_step(mirror_grad: Callable, energy_grad: Callable, u, eta: float):
    """Generic mirror-style descent step.

    Computes ``x = mirror_grad(u)``, moves ``u_next = u - eta *
    energy_grad(x)``, and returns ``(u_next, mirror_grad(u_next))``.
    With the identity mirror map and a quadratic energy this is plain
    gradient descent; with the row-softmax mirror map and the routing
    energy gradient at ``eta = 1`` it is exactly :func:`routing_step`.
    """
    u_arr = np.asarray(u.values if isinstance(u, LogitMatrix) else u, dtype=np.float64)
    eta = float(eta)
    if not math.isfinite(eta) or eta < 0.0:
        raise ValueError(f"eta must be finite and >= 0, got {eta!r}")
    x = mirror_grad(u_arr)
    g = energy_grad(x)
    g_arr = np.asarray(g.values if isinstance(g, CouplingMatrix) else g, dtype=np.float64)
    if g_arr.shape != u_arr.shape:
        raise ValueError(
            f"energy gradient shape {g_arr.shape} does not match state shape {u_arr.shape}"
        )
    if not np.all(np.isfinite(g_arr)):
        raise ValueError("non-finite energy gradient")
    u_next = u_arr - eta * g_arr
    return u_next, mirror_grad(u_next)


def route_matrix(preds, config: RoutingConfig | None = None) -> RoutingTrajectory:
    """Matrix-form routing driven by the energy gradients.

    Records iterations 0..K, where record 0 is the uniform-coupling
    state; each record carries the total energy and, from iteration 1
    on, the descent slack against the previous record. No trailing logit
    update happens after the last recorded outputs.
    """
    cfg = config if config is not None else RoutingConfig()
    inst = validate_prediction_set(preds)
    b = np.zeros((inst.num_input, inst.num_output))
    records = []
    prev_vals = None
    prev_total = None
    r = 0
    while True:
        coupling = grad_big_phi(b)
        cvals = coupling.values
        net = tuple(u @ cvals[:, j] for j, u in enumerate(inst.predictions))
        outs = OutputSet(net_inputs=net, outputs=tuple(squash(s) for s in net))
        per = tuple(psi(float(np.linalg.norm(s))) for s in net)
        total = -math.fsum(per)
        if prev_vals is None:
            gap = None
            delta = None
        else:
            delta2 = float(np.sum((prev_vals - cvals) ** 2))
            gap = prev_total - total - delta2
            delta = math.sqrt(delta2)
        records.append(TrajectoryRecord(
            iteration=r,
            logits=LogitMatrix(b) if cfg.record_full_state else None,
            couplings=coupling if cfg.record_full_state else None,
            outputs=outs,
            total_energy=total,
            per_capsule_energy=per,
            lyapunov_gap=gap,
        ))
        if r == cfg.iterations:
            break
        if cfg.stop_tolerance is not None and delta is not None and delta < cfg.stop_tolerance:
            break
        b = b - grad_big_psi(inst, coupling)
        prev_vals = cvals
        prev_total = total
        r += 1
    return RoutingTrajectory(tuple(records))


def route_scalar(preds, config: RoutingConfig | None = None) -> RoutingTrajectory:
    """Scalar-form routing: the per-capsule procedure with literal loops.

    Same trajectory contract as :func:`route_matrix`; kept free of the
    energy-module code path so the two forms cross-check each other.
    """
    cfg = config if config is not None else RoutingConfig()
    inst = validate_prediction_set(preds)
    m, n = inst.num_input, inst.num_output
    # votes[j][i] is input capsule i's prediction vector for output capsule j
    votes = [[[float(x) for x in mat[:, i]] for i in range(m)] for mat in inst.predictions]
    b = [[0.0] * n for _ in range(m)]
    records = []
    prev_c = None
    prev_total = None
    r = 0
    while True:
        # coupling: softmax of each logit row (max-shifted, same in exact arithmetic)
        c = []
        for i in range(m):
            mx = max(b[i])
            exps = [math.exp(x - mx) for x in b[i]]
            tot = sum(exps)
            c.append([e / tot for e in exps])
        # net input: coupling-weighted sum of votes per output capsule
        s = []
        for j in range(n):
            sj = [0.0] * inst.dims[j]
            for i in range(m):
                cij = c[i][j]
                vote = votes[j][i]
                for k in range(inst.dims[j]):
                    sj[k] += cij * vote[k]
            s.append(sj)
        norms = [math.sqrt(sum(x * x for x in sj)) for sj in s]
        # squash, with the zero vector passing through unchanged
        v = []
        for j in range(n):
            if norms[j] == 0.0:
                v.append([0.0] * inst.dims[j])
            else:
                fac = norms[j] * norms[j] / (1.0 + norms[j] * norms[j])
                v.append([fac * x / norms[j] for x in s[j]])
        per = tuple(psi(z) for z in norms)
        total = -math.fsum(per)
        if prev_c is None:
            gap = None
            delta = None
        else:
            delta2 = 0.0
            for i in range(m):
                for j in range(n):
                    diff = prev_c[i][j] - c[i][j]
                    delta2 += diff * diff
            gap = prev_total - total - delta2
            delta = math.sqrt(delta2)
        records.append(TrajectoryRecord(
            iteration=r,
            logits=LogitMatrix(np.array(b, dtype=np.float64)) if cfg.record_full_state else None,
            couplings=CouplingMatrix(np.array(c, dtype=np.float64)) if cfg.record_full_state else None,
            outputs=OutputSet(
                net_inputs=tuple(np.array(sj, dtype=np.float64) for sj in s),
                outputs=tuple(np.array(vj, dtype=np.float64) for vj in v),
            ),
            total_energy=total,
            per_capsule_energy=per,
            lyapunov_gap=gap,
        ))
        if r == cfg.iterations:
            break
        if cfg.stop_tolerance is not None and delta is not None and delta < cfg.stop_tolerance:
            break
        # agreement update: b_ij += vote . output
        for j in range(n):
            for i in range(m):
                vote = votes[j][i]
                vj = v[j]
                acc = 0.0
                for k in range(inst.dims[j]):
                    acc += vote[k] * vj[k]
                b[i][j] += acc
        prev_c = c
        prev_total = total
        r += 1
    return RoutingTrajectory(tuple(records))


def compare_trajectories(a: RoutingTrajectory, b: RoutingTrajectory,
                         tolerance: float = EQUIVALENCE_TOL) -> GapReport:
    """Maximum entrywise deviation between two trajectories.

    Compares logits, couplings, and outputs at every recorded iteration;
    passes when the worst deviation is at most ``tolerance``. Length or
    shape mismatches are reported as failures, not raised.
    """
    if len(a) != len(b):
        return GapReport.from_divergence(
            math.inf, tolerance, context=f"length mismatch: {len(a)} vs {len(b)}")
    worst = 0.0
    for ra, rb in zip(a, b):
        if ra.logits is None or rb.logits is None or ra.couplings is None or rb.couplings is None:
            return GapReport.from_divergence(
                math.inf, tolerance,
                context=f"iteration {ra.iteration}: missing recorded state")
        if ra.logits.shape != rb.logits.shape:
            return GapReport.from_divergence(
                math.inf, tolerance,
                context=f"iteration {ra.iteration}: shape mismatch "
                        f"{ra.logits.shape} vs {rb.logits.shape}")
        worst = max(worst, float(np.max(np.abs(ra.logits.values - rb.logits.values))))
        worst = max(worst, float(np.max(np.abs(ra.couplings.values - rb.couplings.values))))
        va, vb = ra.outputs.outputs, rb.outputs.outputs
        if len(va) != len(vb) or any(x.shape != y.shape for x, y in zip(va, vb)):
            return GapReport.from_divergence(
                math.inf, tolerance,
                context=f"iteration {ra.iteration}: output shapes differ")
        for x, y in zip(va, vb):
            worst = max(worst, float(np.max(np.abs(x - y))))
    return GapReport.from_divergence(worst, tolerance, context="max |delta| over B, C, v")
