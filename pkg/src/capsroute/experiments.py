"""Seeded instance generators and the two reference experiments.

The numerical experiment tracks the objective trajectory: total
agreement climbs while individual capsules polarize, some collapsing to
zero. The distribution experiment routes 2-D prediction clouds and
watches the suppressed cluster pull its output to the origin while the
others settle near unit length. ``polarization_metrics`` quantifies the
coupling drift toward one-hot rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .routing import route_matrix
from .types import (
    CouplingMatrix,
    LogitMatrix,
    OutputSet,
    PredictionSet,
    RoutingConfig,
    RoutingTrajectory,
    validate_prediction_set,
)

__all__ = [
    "InstanceInfo",
    "ExperimentReport",
    "gen_random_instance",
    "gen_ring_instance",
    "run_numerical_experiment",
    "run_distribution_experiment",
    "polarization_metrics",
    "mean_row_entropy",
    "COLLAPSE_THRESHOLD",
]

# Final per-capsule agreement below this flags the capsule as collapsed
# ("filtered out" by polarization); well under the ~0.215 agreement of a
# unit-norm net input.
COLLAPSE_THRESHOLD = 0.01


@dataclass(frozen=True)
class InstanceInfo:
    """Provenance of a routing instance: generator kind, seed, sizes."""

    kind: str
    seed: int | None
    num_input: int
    num_output: int
    dims: tuple[int, ...]

    @classmethod
    def for_instance(cls, preds: PredictionSet, kind: str = "unspecified",
                     seed: int | None = None) -> "InstanceInfo":
        return cls(kind=kind, seed=seed, num_input=preds.num_input,
                   num_output=preds.num_output, dims=preds.dims)


@dataclass(frozen=True)
class ExperimentReport:
    """Routing run plus the named scalar series derived from it."""

    instance: InstanceInfo
    trajectory: RoutingTrajectory
    series: dict[str, tuple[float, ...]]
    final_outputs: OutputSet
    collapsed_capsules: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        n = len(self.trajectory)
        for name, values in self.series.items():
            if len(values) != n:
                raise ValueError(
                    f"series {name!r} has {len(values)} points for {n} iterations"
                )
        agreement = self.series.get("total_agreement")
        if agreement is not None:
            for rec, a in zip(self.trajectory, agreement):
                if abs(a + rec.total_energy) > 1e-12:
                    raise ValueError(
                        f"iteration {rec.iteration}: total agreement {a!r} is not "
                        "the negated total energy"
                    )


def gen_random_instance(num_input: int, num_output: int, dim: int,
                        scale: float, seed: int) -> PredictionSet:
    """Uniform random predictions on [-scale, scale], reproducible by seed."""
    m, n, d = int(num_input), int(num_output), int(dim)
    if m < 1 or n < 1 or d < 1:
        raise ValueError(f"sizes must be >= 1, got ({m}, {n}, {d})")
    scale = float(scale)
    if not math.isfinite(scale) or scale < 0.0:
        raise ValueError(f"scale must be finite and >= 0, got {scale!r}")
    rng = np.random.default_rng(seed)
    mats = [rng.uniform(-scale, scale, size=(d, m)) for _ in range(n)]
    return PredictionSet.from_matrices(mats)


def gen_ring_instance(num_input: int, cluster_radii, noise: float,
                      seed: int) -> PredictionSet:
    """2-D clustered predictions: one cluster per output capsule.

    Capsule ``j`` (0-based) is centered at angle ``2*pi*j/N`` and radius
    ``cluster_radii[j]``, so a leading radius of 0 puts the first
    capsule's cluster at the origin with the rest around the circle.
    Cluster points are the center plus isotropic Gaussian noise.
    """
    m = int(num_input)
    radii = tuple(float(rad) for rad in cluster_radii)
    n = len(radii)
    if m < 1:
        raise ValueError(f"num_input must be >= 1, got {m}")
    if n < 2:
        raise ValueError(f"need at least 2 cluster radii, got {n}")
    if any(not math.isfinite(rad) or rad < 0.0 for rad in radii):
        raise ValueError("cluster radii must be finite and >= 0")
    noise = float(noise)
    if not math.isfinite(noise) or noise < 0.0:
        raise ValueError(f"noise must be finite and >= 0, got {noise!r}")
    rng = np.random.default_rng(seed)
    mats = []
    for j, rad in enumerate(radii):
        angle = 2.0 * math.pi * j / n
        center = np.array([rad * math.cos(angle), rad * math.sin(angle)])
        mats.append(center[:, None] + noise * rng.standard_normal((2, m)))
    return PredictionSet.from_matrices(mats)


def _row_entropy(b_row: np.ndarray, c_row: np.ndarray) -> float:
    # H(softmax(b)) = lse(b) - b . softmax(b); exact log(N) at b = 0 and
    # well-behaved at one-hot couplings where log(c) would blow up.
    m = float(np.max(b_row))
    lse = m + math.log(float(np.sum(np.exp(b_row - m))))
    return lse - float(b_row @ c_row)


def mean_row_entropy(logits: LogitMatrix, coupling: CouplingMatrix) -> float:
    """Mean coupling-row entropy in nats, computed from the logits."""
    b, c = logits.values, coupling.values
    vals = [_row_entropy(b[i], c[i]) for i in range(b.shape[0])]
    # centered mean: exact when every row has the same entropy (uniform start)
    base = vals[0]
    return base + math.fsum(x - base for x in vals) / len(vals)


def _require_full_state(traj: RoutingTrajectory, op: str):
    for rec in traj:
        if rec.logits is None or rec.couplings is None:
            raise ValueError(f"{op} needs a trajectory recorded with full state")


def polarization_metrics(traj: RoutingTrajectory) -> dict[str, tuple[float, ...]]:
    """Per-iteration polarization series of a recorded trajectory.

    Returns the mean coupling-row entropy (nats) and the mean of each
    row's largest coupling; entropy falling and max coupling rising is
    the signature of link strengths polarizing.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    _require_full_state(traj, "polarization_metrics")
    entropy = tuple(mean_row_entropy(rec.logits, rec.couplings) for rec in traj)
    max_coupling = tuple(
        float(np.mean(np.max(rec.couplings.values, axis=1))) for rec in traj
    )
    return {"mean_row_entropy": entropy, "mean_max_coupling": max_coupling}


def _build_report(inst: PredictionSet, iterations: int,
                  info: InstanceInfo | None) -> ExperimentReport:
    cfg = RoutingConfig(iterations=iterations, record_full_state=True)
    traj = route_matrix(inst, cfg)
    n = inst.num_output
    series: dict[str, tuple[float, ...]] = {
        "total_agreement": tuple(-rec.total_energy for rec in traj),
    }
    for j in range(n):
        series[f"agreement_capsule_{j}"] = tuple(
            rec.per_capsule_energy[j] for rec in traj
        )
    for j in range(n):
        series[f"output_norm_capsule_{j}"] = tuple(
            float(np.linalg.norm(rec.outputs.outputs[j])) for rec in traj
        )
    series["mean_row_entropy"] = polarization_metrics(traj)["mean_row_entropy"]
    collapsed = tuple(
        j for j in range(n) if traj.final.per_capsule_energy[j] < COLLAPSE_THRESHOLD
    )
    return ExperimentReport(
        instance=info if info is not None else InstanceInfo.for_instance(inst),
        trajectory=traj,
        series=series,
        final_outputs=traj.final_outputs,
        collapsed_capsules=collapsed,
    )


def run_numerical_experiment(preds, iterations: int = 20,
                             info: InstanceInfo | None = None) -> ExperimentReport:
    """Objective-trajectory experiment: agreement series over iterations.

    The total-agreement series is nondecreasing (it is the negated,
    monotonically descending energy); capsules whose final agreement
    falls below :data:`COLLAPSE_THRESHOLD` are flagged as collapsed.
    """
    inst = validate_prediction_set(preds)
    return _build_report(inst, iterations, info)


def run_distribution_experiment(preds, iterations: int = 20,
                                info: InstanceInfo | None = None) -> ExperimentReport:
    """Prediction-distribution experiment on a 2-D instance.

    Rejects instances with any non-2-D capsule; per-iteration output
    positions live in the trajectory records and the prediction clouds
    in the instance itself, which is what the scatter rendering needs.
    """
    inst = validate_prediction_set(preds)
    for j, d in enumerate(inst.dims):
        if d != 2:
            raise ValueError(
                f"distribution experiment needs 2-D capsules; capsule {j} has dim {d}"
            )
    return _build_report(inst, iterations, info)
