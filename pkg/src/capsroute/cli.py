"""Command-line front end.

Four subcommands: ``gen`` writes instance JSON, ``route`` runs routing
and exports a trajectory CSV, ``experiment`` reproduces the objective
and distribution experiments, ``check`` runs the batch invariant suite.
Exit codes: 0 success, 1 invariant violation, 2 input or usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from enum import IntEnum
from pathlib import Path

import numpy as np

from .energy import LYAPUNOV_TOL
from .experiments import (
    InstanceInfo,
    gen_random_instance,
    gen_ring_instance,
    mean_row_entropy,
    run_distribution_experiment,
    run_numerical_experiment,
)
from .routing import compare_trajectories, route_matrix, route_scalar
from .suite import run_check_suite, summary_csv
from .svg import line_plot_svg, scatter_plot_svg
from .types import RoutingConfig, RoutingTrajectory, validate_prediction_set

__all__ = ["ExitStatus", "main", "entrypoint"]

SEED_ENV_VAR = "CAPSROUTE_SEED"


class ExitStatus(IntEnum):
    OK = 0
    VIOLATION = 1
    USAGE = 2


def _default_seed(explicit: int | None) -> int:
    if explicit is not None:
        return explicit
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ValueError(f"{SEED_ENV_VAR} is not an integer: {env!r}") from None
    return 0


def _add_gen_args(parser: argparse.ArgumentParser):
    parser.add_argument("--kind", choices=("random", "ring"),
                        help="instance generator")
    parser.add_argument("--m", type=int, help="number of input capsules")
    parser.add_argument("--n", type=int, help="number of output capsules (random)")
    parser.add_argument("--dim", type=int, help="output capsule dimension (random)")
    parser.add_argument("--scale", type=float, default=1.0,
                        help="half-width of the uniform entry range (random)")
    parser.add_argument("--radii", default="0,1,1,1",
                        help="comma-separated cluster radii (ring)")
    parser.add_argument("--noise", type=float, default=0.1,
                        help="cluster noise std deviation (ring)")
    parser.add_argument("--seed", type=int, default=None,
                        help=f"RNG seed (default: ${SEED_ENV_VAR} or 0)")


def _generate(args):
    seed = _default_seed(args.seed)
    if args.kind == "random":
        if args.m is None or args.n is None or args.dim is None:
            raise ValueError("--kind random requires --m, --n and --dim")
        preds = gen_random_instance(args.m, args.n, args.dim, args.scale, seed)
    else:
        if args.m is None:
            raise ValueError("--kind ring requires --m")
        radii = tuple(float(tok) for tok in str(args.radii).split(","))
        preds = gen_ring_instance(args.m, radii, args.noise, seed)
    return preds, InstanceInfo.for_instance(preds, kind=args.kind, seed=seed)


def _load_instance(path: str):
    data = json.loads(Path(path).read_text())
    preds = validate_prediction_set(data)
    return preds, InstanceInfo.for_instance(preds, kind="file", seed=None)


def _resolve_instance(args):
    if getattr(args, "input", None):
        return _load_instance(args.input)
    if args.kind:
        return _generate(args)
    raise ValueError("provide --input PATH or generator arguments (--kind ...)")


def _trajectory_csv(traj: RoutingTrajectory) -> str:
    lines = ["iteration,capsule,psi_sj,norm_vj,row_entropy_mean,total_agreement,lyapunov_gap"]
    for rec in traj:
        entropy = mean_row_entropy(rec.logits, rec.couplings)
        total = -rec.total_energy
        gap = "" if rec.lyapunov_gap is None else f"{rec.lyapunov_gap:.17g}"
        for j, agreement in enumerate(rec.per_capsule_energy):
            norm_v = float(np.linalg.norm(rec.outputs.outputs[j]))
            lines.append(
                f"{rec.iteration},{j},{agreement:.17g},{norm_v:.17g},"
                f"{entropy:.17g},{total:.17g},{gap}"
            )
    return "\n".join(lines) + "\n"


def _agreement_series(traj: RoutingTrajectory) -> dict:
    series = {"total_agreement": [-rec.total_energy for rec in traj]}
    n = len(traj[0].per_capsule_energy)
    for j in range(n):
        series[f"agreement_capsule_{j}"] = [rec.per_capsule_energy[j] for rec in traj]
    return series


def cmd_gen(args) -> int:
    if not args.kind:
        raise ValueError("gen requires --kind")
    preds, _ = _generate(args)
    out = Path(args.out)
    text = preds.to_json()
    out.write_text(text)
    digest = hashlib.sha256(text.encode()).hexdigest()
    print(f"{out} sha256={digest}")
    return ExitStatus.OK


def cmd_route(args) -> int:
    preds, _ = _load_instance(args.input)
    cfg = RoutingConfig(iterations=args.iterations,
                        stop_tolerance=args.stop_tolerance)
    status = ExitStatus.OK
    if args.form == "scalar":
        traj = route_scalar(preds, cfg)
    else:
        traj = route_matrix(preds, cfg)
    if args.form == "both":
        other = route_scalar(preds, cfg)
        report = compare_trajectories(traj, other)
        if not report.passed:
            print(f"violation: scalar and matrix forms diverge by {report.value:.17g} "
                  f"({report.context})", file=sys.stderr)
            status = ExitStatus.VIOLATION
    for rec in traj.records[1:]:
        if rec.lyapunov_gap < -LYAPUNOV_TOL:
            print(f"violation: descent gap {rec.lyapunov_gap:.17g} at iteration "
                  f"{rec.iteration}", file=sys.stderr)
            status = ExitStatus.VIOLATION
    Path(args.out_csv).write_text(_trajectory_csv(traj))
    print(f"wrote {args.out_csv}")
    if args.couplings_json:
        payload = {"couplings": [rec.couplings.values.tolist() for rec in traj]}
        Path(args.couplings_json).write_text(json.dumps(payload))
        print(f"wrote {args.couplings_json}")
    if args.svg:
        Path(args.svg).write_text(line_plot_svg(_agreement_series(traj),
                                                title="agreement per iteration"))
        print(f"wrote {args.svg}")
    return status


def cmd_experiment(args) -> int:
    preds, info = _resolve_instance(args)
    if args.name == "numerical":
        report = run_numerical_experiment(preds, args.iterations, info)
    else:
        report = run_distribution_experiment(preds, args.iterations, info)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    payload = {
        "provenance": {
            "kind": info.kind,
            "seed": info.seed,
            "num_input": info.num_input,
            "num_output": info.num_output,
            "dims": list(info.dims),
        },
        "config": {"experiment": args.name, "iterations": args.iterations},
        "series": {name: list(vals) for name, vals in report.series.items()},
        "flags": {"collapsed_capsules": list(report.collapsed_capsules)},
        "gaps": {"lyapunov": [rec.lyapunov_gap for rec in report.trajectory]},
    }
    (out_dir / "report.json").write_text(json.dumps(payload, indent=2))

    names = list(report.series)
    lines = ["iteration," + ",".join(names)]
    for r in range(len(report.trajectory)):
        row = ",".join(f"{report.series[name][r]:.17g}" for name in names)
        lines.append(f"{r},{row}")
    (out_dir / "series.csv").write_text("\n".join(lines) + "\n")

    if args.name == "numerical":
        plot_series = {k: v for k, v in report.series.items()
                       if k == "total_agreement" or k.startswith("agreement_capsule_")}
        svg = line_plot_svg(plot_series, title="agreement per iteration")
    else:
        clouds = [(f"capsule_{j}", preds.predictions[j].T.tolist())
                  for j in range(preds.num_output)]
        marks = [(f"v_{j}", report.final_outputs.outputs[j].tolist())
                 for j in range(preds.num_output)]
        svg = scatter_plot_svg(clouds, marks, title="predictions and final outputs")
    (out_dir / "plot.svg").write_text(svg)

    print(f"wrote {out_dir}/report.json {out_dir}/series.csv {out_dir}/plot.svg")
    return ExitStatus.OK


def cmd_check(args) -> int:
    results = run_check_suite(
        args.seeds,
        max_m=args.max_m, max_n=args.max_n, max_dim=args.max_dim,
        iterations=args.iterations, scale=args.scale,
        tolerance=args.tolerance, probe_samples=args.probe_samples,
    )
    csv_text = summary_csv(results)
    sys.stdout.write(csv_text)
    if args.out_csv:
        Path(args.out_csv).write_text(csv_text)
    failed = [res for res in results if not res.passed]
    for res in failed:
        print(f"violation: {res.name} seed={res.worst_seed} worst={res.worst:.17g} "
              f"tolerance={res.tolerance:.17g}", file=sys.stderr)
    return ExitStatus.VIOLATION if failed else ExitStatus.OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capsroute",
        description="Dynamic routing between capsules: routing runs, energy "
                    "diagnostics, experiments, and invariant checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate an instance JSON file")
    _add_gen_args(p_gen)
    p_gen.add_argument("-o", "--out", required=True, help="output path")
    p_gen.set_defaults(func=cmd_gen)

    p_route = sub.add_parser("route", help="run routing on an instance file")
    p_route.add_argument("input", help="instance JSON path")
    p_route.add_argument("--iterations", type=int, default=3)
    p_route.add_argument("--form", choices=("scalar", "matrix", "both"),
                         default="both",
                         help="which procedure to run; 'both' cross-checks them")
    p_route.add_argument("--stop-tolerance", type=float, default=None,
                         help="optional early stop on the coupling change")
    p_route.add_argument("--out-csv", required=True, help="trajectory CSV path")
    p_route.add_argument("--couplings-json", default=None,
                         help="optional per-iteration couplings JSON path")
    p_route.add_argument("--svg", default=None, help="optional agreement plot path")
    p_route.set_defaults(func=cmd_route)

    p_exp = sub.add_parser("experiment", help="run a reference experiment")
    p_exp.add_argument("name", choices=("numerical", "distribution"))
    p_exp.add_argument("--input", default=None, help="instance JSON path")
    _add_gen_args(p_exp)
    p_exp.add_argument("--iterations", type=int, default=20)
    p_exp.add_argument("--out-dir", required=True)
    p_exp.set_defaults(func=cmd_experiment)

    p_check = sub.add_parser("check", help="run the batch invariant suite")
    p_check.add_argument("--seeds", type=int, default=100)
    p_check.add_argument("--tolerance", type=float, default=LYAPUNOV_TOL,
                         help="descent-gap tolerance")
    p_check.add_argument("--max-m", type=int, default=16)
    p_check.add_argument("--max-n", type=int, default=16)
    p_check.add_argument("--max-dim", type=int, default=8)
    p_check.add_argument("--iterations", type=int, default=20)
    p_check.add_argument("--scale", type=float, default=1.0)
    p_check.add_argument("--probe-samples", type=int, default=20)
    p_check.add_argument("--out-csv", default=None,
                         help="also write the summary CSV here")
    p_check.set_defaults(func=cmd_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else ExitStatus.OK
    try:
        return int(args.func(args))
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ExitStatus.USAGE


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
