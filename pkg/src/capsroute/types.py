"""Domain data model for routing instances.

Validity invariants live here so downstream operations can assume
well-formed inputs. All types are immutable after construction: arrays
are copied to float64 and marked read-only, so values can be shared
freely between threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PredictionSet",
    "CouplingMatrix",
    "LogitMatrix",
    "OutputSet",
    "TrajectoryRecord",
    "RoutingTrajectory",
    "RoutingConfig",
    "validate_prediction_set",
    "uniform_coupling",
    "ROW_SUM_TOL",
    "ENERGY_SUM_TOL",
]

# Coupling rows must sum to 1 within this tolerance; smaller drift is
# renormalized away, larger drift is rejected as a bug.
ROW_SUM_TOL = 1e-12
# Recorded total energy must match the negated per-capsule sum this tightly.
ENERGY_SUM_TOL = 1e-12


def _frozen(a, *, dtype=np.float64) -> np.ndarray:
    out = np.array(a, dtype=dtype, order="C", copy=True)
    out.setflags(write=False)
    return out


def _all_finite(a: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(a)))


@dataclass(frozen=True)
class PredictionSet:
    """Fixed input of routing: one prediction matrix per output capsule.

    ``predictions[j]`` has shape ``(dims[j], num_input)``; column ``i``
    is input capsule ``i``'s vote for output capsule ``j``. Output
    dimensions may differ between capsules, hence the list-of-matrices
    representation.
    """

    num_input: int
    num_output: int
    dims: tuple[int, ...]
    predictions: tuple[np.ndarray, ...]

    def __post_init__(self):
        m = int(self.num_input)
        n = int(self.num_output)
        if m < 1:
            raise ValueError(f"num_input must be >= 1, got {m}")
        if n < 1:
            raise ValueError(f"num_output must be >= 1, got {n}")
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != n:
            raise ValueError(
                f"dims has {len(dims)} entries, expected num_output={n}"
            )
        for j, d in enumerate(dims):
            if d < 1:
                raise ValueError(f"capsule {j}: output dimension must be >= 1, got {d}")
        preds = tuple(self.predictions)
        if len(preds) != n:
            raise ValueError(
                f"predictions has {len(preds)} matrices, expected num_output={n}"
            )
        frozen = []
        for j, raw in enumerate(preds):
            mat = _frozen(raw)
            if mat.ndim != 2 or mat.shape != (dims[j], m):
                got = mat.shape if mat.ndim == 2 else f"ndim={mat.ndim}"
                raise ValueError(
                    f"capsule {j}: prediction matrix must have shape "
                    f"({dims[j]}, {m}), got {got}"
                )
            if not _all_finite(mat):
                raise ValueError(f"capsule {j}: non-finite entry in predictions")
            frozen.append(mat)
        object.__setattr__(self, "num_input", m)
        object.__setattr__(self, "num_output", n)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "predictions", tuple(frozen))

    @classmethod
    def from_matrices(cls, matrices) -> "PredictionSet":
        """Build from a sequence of per-capsule matrices, inferring sizes."""
        mats = [np.asarray(a, dtype=np.float64) for a in matrices]
        if not mats:
            raise ValueError("predictions list is empty")
        for j, a in enumerate(mats):
            if a.ndim != 2:
                raise ValueError(f"capsule {j}: prediction matrix must be 2-D")
        m = mats[0].shape[1]
        return cls(
            num_input=m,
            num_output=len(mats),
            dims=tuple(a.shape[0] for a in mats),
            predictions=tuple(mats),
        )

    @classmethod
    def from_stack(cls, stack) -> "PredictionSet":
        """Uniform-dimension convenience constructor from an (N, D, M) array."""
        arr = np.asarray(stack, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"expected an (N, D, M) array, got shape {arr.shape}")
        return cls.from_matrices(list(arr))

    def to_json_dict(self) -> dict:
        return {
            "num_input": self.num_input,
            "num_output": self.num_output,
            "dims": list(self.dims),
            "predictions": [p.tolist() for p in self.predictions],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, text: str) -> "PredictionSet":
        return validate_prediction_set(json.loads(text))


def validate_prediction_set(raw) -> PredictionSet:
    """Validate a candidate prediction set and return the checked value.

    Accepts an existing :class:`PredictionSet`, a mapping in the
    instance-JSON form (keys ``num_input``, ``num_output``, ``dims``,
    ``predictions``), or a plain sequence of per-capsule matrices.
    Raises ``ValueError`` naming the offending capsule.
    """
    if isinstance(raw, PredictionSet):
        return raw
    if isinstance(raw, dict):
        missing = [k for k in ("num_input", "num_output", "dims", "predictions") if k not in raw]
        if missing:
            raise ValueError(f"instance JSON missing keys: {', '.join(missing)}")
        return PredictionSet(
            num_input=raw["num_input"],
            num_output=raw["num_output"],
            dims=tuple(raw["dims"]),
            predictions=tuple(np.asarray(p, dtype=np.float64) for p in raw["predictions"]),
        )
    return PredictionSet.from_matrices(raw)


@dataclass(frozen=True)
class CouplingMatrix:
    """Row-stochastic coupling coefficients, shape (num_input, num_output).

    Construction renormalizes rows whose sum drifts from 1 by at most
    ``ROW_SUM_TOL`` and rejects anything worse, so silent drift cannot
    accumulate without masking real bugs.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, order="C", copy=True)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"coupling matrix must be 2-D and non-empty, got shape {v.shape}")
        if not _all_finite(v):
            raise ValueError("coupling matrix has a non-finite entry")
        neg = np.argwhere(v < 0.0)
        if neg.size:
            i, j = neg[0]
            raise ValueError(f"coupling matrix entry ({i}, {j}) is negative: {v[i, j]!r}")
        sums = v.sum(axis=1)
        bad = np.argwhere(np.abs(sums - 1.0) > ROW_SUM_TOL)
        if bad.size:
            i = int(bad[0][0])
            raise ValueError(
                f"coupling matrix row {i} sums to {sums[i]!r}, "
                f"more than {ROW_SUM_TOL} away from 1"
            )
        v /= sums[:, None]
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def num_input(self) -> int:
        return self.values.shape[0]

    @property
    def num_output(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class LogitMatrix:
    """Routing logits, shape (num_input, num_output); any finite values."""

    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"logit matrix must be 2-D and non-empty, got shape {v.shape}")
        if not _all_finite(v):
            raise ValueError("logit matrix has a non-finite entry")
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def _check_squash_pair(j: int, s: np.ndarray, v: np.ndarray):
    ns = float(np.linalg.norm(s))
    nv = float(np.linalg.norm(v))
    if nv >= 1.0:
        raise ValueError(f"capsule {j}: output norm {nv!r} is not < 1")
    expected = ns * ns / (1.0 + ns * ns)
    if abs(nv - expected) > 1e-12:
        raise ValueError(
            f"capsule {j}: output norm {nv!r} does not match "
            f"|s|^2/(1+|s|^2) = {expected!r}"
        )
    # Parallelism: |s| v == |v| s up to rounding (both zero passes trivially).
    resid = float(np.max(np.abs(ns * v - nv * s))) if s.size else 0.0
    if resid > 1e-12 * (1.0 + ns):
        raise ValueError(f"capsule {j}: output is not parallel to its net input")


@dataclass(frozen=True)
class OutputSet:
    """Per-capsule net inputs ``s_j`` and squashed outputs ``v_j``."""

    net_inputs: tuple[np.ndarray, ...]
    outputs: tuple[np.ndarray, ...]

    def __post_init__(self):
        s_list = tuple(_frozen(s) for s in self.net_inputs)
        v_list = tuple(_frozen(v) for v in self.outputs)
        if len(s_list) != len(v_list):
            raise ValueError(
                f"{len(s_list)} net inputs but {len(v_list)} outputs"
            )
        if not s_list:
            raise ValueError("output set is empty")
        for j, (s, v) in enumerate(zip(s_list, v_list)):
            if s.ndim != 1 or v.ndim != 1 or s.shape != v.shape:
                raise ValueError(
                    f"capsule {j}: net input shape {s.shape} and output shape "
                    f"{v.shape} must be equal 1-D vectors"
                )
            if not (_all_finite(s) and _all_finite(v)):
                raise ValueError(f"capsule {j}: non-finite entry in outputs")
            _check_squash_pair(j, s, v)
        object.__setattr__(self, "net_inputs", s_list)
        object.__setattr__(self, "outputs", v_list)

    @property
    def num_output(self) -> int:
        return len(self.outputs)

    def output_norms(self) -> tuple[float, ...]:
        return tuple(float(np.linalg.norm(v)) for v in self.outputs)


@dataclass(frozen=True)
class RoutingConfig:
    """Routing run parameters.

    ``iterations`` counts logit updates; a run records ``iterations + 1``
    states including the uniform-coupling state at index 0. Early
    stopping on the coupling change is an extension and stays off unless
    ``stop_tolerance`` is set. ``record_full_state=False`` drops the
    per-iteration logit and coupling matrices from the trajectory,
    keeping only outputs and energies.
    """

    iterations: int = 3
    stop_tolerance: float | None = None
    record_full_state: bool = True

    def __post_init__(self):
        k = int(self.iterations)
        if k < 0:
            raise ValueError(f"iterations must be >= 0, got {k}")
        object.__setattr__(self, "iterations", k)
        if self.stop_tolerance is not None:
            eps = float(self.stop_tolerance)
            if not math.isfinite(eps) or eps < 0.0:
                raise ValueError(f"stop_tolerance must be finite and >= 0, got {eps!r}")
            object.__setattr__(self, "stop_tolerance", eps)


@dataclass(frozen=True)
class TrajectoryRecord:
    """One routing iteration: state, outputs, and energy bookkeeping.

    ``lyapunov_gap`` is the descent slack versus the previous iteration
    and is ``None`` exactly at iteration 0. ``logits``/``couplings`` are
    ``None`` when the run was configured without full state recording.
    """

    iteration: int
    logits: LogitMatrix | None
    couplings: CouplingMatrix | None
    outputs: OutputSet
    total_energy: float
    per_capsule_energy: tuple[float, ...]
    lyapunov_gap: float | None

    def __post_init__(self):
        per = tuple(float(x) for x in self.per_capsule_energy)
        object.__setattr__(self, "per_capsule_energy", per)
        object.__setattr__(self, "total_energy", float(self.total_energy))
        if abs(self.total_energy + math.fsum(per)) > ENERGY_SUM_TOL:
            raise ValueError(
                f"iteration {self.iteration}: total energy {self.total_energy!r} "
                "does not equal the negated per-capsule sum"
            )


@dataclass(frozen=True)
class RoutingTrajectory:
    """Ordered per-iteration records of a routing run."""

    records: tuple[TrajectoryRecord, ...] = field(default_factory=tuple)

    def __post_init__(self):
        recs = tuple(self.records)
        if not recs:
            raise ValueError("trajectory has no records")
        for idx, rec in enumerate(recs):
            if rec.iteration != idx:
                raise ValueError(
                    f"record {idx} has iteration index {rec.iteration}; "
                    "indices must be consecutive from 0"
                )
        if recs[0].lyapunov_gap is not None:
            raise ValueError("iteration 0 must not carry a Lyapunov gap")
        for rec in recs[1:]:
            if rec.lyapunov_gap is None:
                raise ValueError(f"iteration {rec.iteration} is missing its Lyapunov gap")
        object.__setattr__(self, "records", recs)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, idx) -> TrajectoryRecord:
        return self.records[idx]

    @property
    def final(self) -> TrajectoryRecord:
        return self.records[-1]

    @property
    def final_outputs(self) -> OutputSet:
        return self.records[-1].outputs


def uniform_coupling(num_input: int, num_output: int) -> CouplingMatrix:
    """Coupling with every entry 1/N: the softmax of all-zero logits."""
    m, n = int(num_input), int(num_output)
    if m < 1 or n < 1:
        raise ValueError(f"sizes must be >= 1, got ({m}, {n})")
    return CouplingMatrix(np.full((m, n), 1.0 / n))
